"""Time stepping, monodromy matrices, limit-cycle shooting and Poincaré sections."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import CycleNotFound, IntegrationError, OrbitNotClosedError
from .model import MomentState, Variant, _check_state, jacobian_analytic, rhs_flat, state_dim
from .network import NetworkConfig

RTOL = 1e-8
ATOL = 1e-10
NEUTRAL_BAND = 1e-3
TRIVIAL_TOL = 1e-4


def state_labels(variant, M: int) -> list[str]:
    """Column names ``nu_1..nu_M, corr_11, corr_12, ..`` for the flat state."""
    labels = [f"nu_{i + 1}" for i in range(M)]
    if Variant.parse(variant).has_corr:
        labels += [f"corr_{i + 1}{j + 1}" for i in range(M) for j in range(i, M)]
    return labels


@dataclass
class Trajectory:
    """Sampled solution. ``y[k]`` is the flat state at ``t[k]``."""

    t: np.ndarray
    y: np.ndarray
    variant: Variant
    M: int
    dense: object = None
    events: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.size

    @property
    def nu(self) -> np.ndarray:
        return self.y[:, : self.M]

    @property
    def corr(self) -> np.ndarray:
        return self.y[:, self.M :]

    @property
    def final(self) -> MomentState:
        return MomentState.from_flat(self.y[-1], self.M)

    def state(self, k: int) -> MomentState:
        return MomentState.from_flat(self.y[k], self.M)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", *state_labels(self.variant, self.M)])
            for tk, yk in zip(self.t, self.y):
                wr.writerow([repr(float(tk)), *(repr(float(v)) for v in yk)])


def _as_flat(variant: Variant, state, net: NetworkConfig) -> np.ndarray:
    y = state.flat() if isinstance(state, MomentState) else np.asarray(state, dtype=float).copy()
    if variant.has_corr and y.size == net.M:
        y = np.concatenate([y, np.zeros(state_dim(variant, net.M) - net.M)])
    _check_state(variant, y, net)
    return y


def integrate(
    variant,
    state0,
    net: NetworkConfig,
    t_end: float,
    *,
    t0: float = 0.0,
    t_eval=None,
    n_out: int | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
    max_step: float = np.inf,
    dense: bool = False,
) -> Trajectory:
    """Integrate the selected system from ``t0`` to ``t_end`` with a 5(4) Runge-Kutta pair.

    Output is on ``t_eval`` if given, else ``n_out`` equispaced points, else
    the accepted steps. ``t_end < t0`` integrates backwards.
    """
    variant = Variant.parse(variant)
    y0 = _as_flat(variant, state0, net)
    if t_end == t0:
        raise ValueError("t_end must differ from t0")
    if t_eval is None and n_out is not None:
        t_eval = np.linspace(t0, t_end, n_out)

    def f(t, y):
        return rhs_flat(variant, y, net)

    with np.errstate(over="ignore", invalid="ignore"):
        sol = solve_ivp(
            f, (t0, t_end), y0, method="RK45", t_eval=t_eval, rtol=rtol, atol=atol, max_step=max_step, dense_output=dense
        )
    if not sol.success or not np.all(np.isfinite(sol.y)):
        ok = np.all(np.isfinite(sol.y), axis=0)
        k = int(np.flatnonzero(ok)[-1]) if ok.any() else None
        last_t = float(sol.t[k]) if k is not None else t0
        last = sol.y[:, k] if k is not None else y0
        raise IntegrationError(f"integration failed near t={last_t:g}: {sol.message}", last_t, last)
    return Trajectory(sol.t, sol.y.T.copy(), variant, net.M, dense=sol.sol if dense else None)


# ------------------------------------------------------------------ monodromy
def flow_with_monodromy(variant, y0, net: NetworkConfig, T: float, rtol: float = RTOL, atol: float = ATOL):
    """Integrate the state and its variational equation ``Phi' = J(y) Phi`` in one pass.

    Returns ``(y(T), Phi(T))``.
    """
    variant = Variant.parse(variant)
    y0 = np.asarray(y0, dtype=float)
    n = y0.size

    def f(t, z):
        y = z[:n]
        P = z[n:].reshape(n, n)
        return np.concatenate([rhs_flat(variant, y, net), (jacobian_analytic(variant, y, net) @ P).ravel()])

    z0 = np.concatenate([y0, np.eye(n).ravel()])
    with np.errstate(over="ignore", invalid="ignore"):
        sol = solve_ivp(f, (0.0, T), z0, method="RK45", rtol=rtol, atol=atol)
    if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
        raise IntegrationError(f"variational integration failed: {sol.message}", sol.t[-1], sol.y[:n, -1])
    z = sol.y[:, -1]
    return z[:n], z[n:].reshape(n, n)


def resolvent(variant, y0, net: NetworkConfig, T: float, closure_tol: float = 1e-6, rtol=RTOL, atol=ATOL):
    """Monodromy matrix ``Phi(T)`` along the periodic orbit through ``y0``.

    Raises :class:`OrbitNotClosedError` if ``|y(T) - y0|_inf > closure_tol``.
    """
    yT, Phi = flow_with_monodromy(variant, y0, net, T, rtol, atol)
    mismatch = float(np.max(np.abs(yT - np.asarray(y0))))
    if mismatch > closure_tol:
        raise OrbitNotClosedError(f"orbit does not close: mismatch {mismatch:.3g}", mismatch)
    return Phi


def classify_multipliers(mu: np.ndarray, band: float = NEUTRAL_BAND) -> str:
    """``stable``/``neutral``/``unstable`` after removing the multiplier closest to 1."""
    mu = np.asarray(mu)
    k = int(np.argmin(np.abs(mu - 1.0)))
    rest = np.abs(np.delete(mu, k))
    if rest.size == 0 or np.all(rest < 1.0 - band):
        return "stable"
    if np.any(rest > 1.0 + band):
        return "unstable"
    return "neutral"


@dataclass
class LimitCycle:
    variant: Variant
    anchor: np.ndarray
    period: float
    multipliers: np.ndarray
    stability: str
    M: int
    iterations: int = 0
    residual: float = 0.0

    @property
    def trivial_error(self) -> float:
        return float(np.min(np.abs(self.multipliers - 1.0)))

    def trajectory(self, net: NetworkConfig, n_out: int = 400) -> Trajectory:
        return integrate(self.variant, self.anchor, net, self.period, n_out=n_out)

    def amplitude(self, net: NetworkConfig, n_out: int = 400) -> np.ndarray:
        tr = self.trajectory(net, n_out)
        return tr.y.max(axis=0) - tr.y.min(axis=0)


def floquet(variant, y0, net: NetworkConfig, T: float, closure_tol: float = 1e-6) -> LimitCycle:
    """Multipliers of a known periodic orbit (no Newton correction)."""
    variant = Variant.parse(variant)
    Phi = resolvent(variant, y0, net, T, closure_tol)
    mu = np.linalg.eigvals(Phi)
    return LimitCycle(variant, np.asarray(y0, float), float(T), mu, classify_multipliers(mu), net.M)


def find_cycle(
    variant,
    guess,
    period: float,
    net: NetworkConfig,
    *,
    max_iter: int = 25,
    tol: float = 1e-8,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> LimitCycle:
    """Single-shooting Newton for ``x(T) = x(0)``.

    The phase is pinned to the hyperplane through the guess orthogonal to the
    vector field there. Raises :class:`CycleNotFound` on divergence, on a
    collapse onto an equilibrium or after ``max_iter`` iterations.
    """
    variant = Variant.parse(variant)
    x = _as_flat(variant, guess, net)
    n = x.size
    xg = x.copy()
    fg = rhs_flat(variant, xg, net)
    scale = np.linalg.norm(fg)
    if scale < 1e-8:
        raise CycleNotFound("guess is (near) an equilibrium")
    fg = fg / scale
    T = float(period)
    res = np.inf
    for it in range(1, max_iter + 1):
        try:
            xT, Phi = flow_with_monodromy(variant, x, net, T, rtol, atol)
        except IntegrationError as exc:
            raise CycleNotFound(f"integration failed during shooting: {exc}") from exc
        r = xT - x
        res = float(np.max(np.abs(r)))
        if res < tol and it > 1:
            break
        G = np.zeros((n + 1, n + 1))
        G[:n, :n] = Phi - np.eye(n)
        G[:n, n] = rhs_flat(variant, xT, net)
        G[n, :n] = fg
        rhs_vec = -np.concatenate([r, [fg @ (x - xg)]])
        d = np.linalg.lstsq(G, rhs_vec, rcond=None)[0]
        # limit the step to keep the iteration inside the basin
        lim = max(0.1, 0.5 * np.max(np.abs(x)))
        scale_step = min(1.0, lim / max(np.max(np.abs(d[:n])), 1e-300), 0.5 * T / max(abs(d[n]), 1e-300))
        x = x + scale_step * d[:n]
        T = T + scale_step * d[n]
        if not np.all(np.isfinite(x)) or T <= 0:
            raise CycleNotFound("shooting Newton diverged")
    else:
        raise CycleNotFound(f"no convergence after {max_iter} iterations (residual {res:.3g})")
    if np.linalg.norm(rhs_flat(variant, x, net)) < 1e-6:
        raise CycleNotFound("shooting converged to an equilibrium")
    mu = np.linalg.eigvals(Phi)
    cyc = LimitCycle(variant, x, T, mu, classify_multipliers(mu), net.M, it, res)
    return cyc


# ------------------------------------------------------------------ sections
def poincare_map(traj: Trajectory, coord: int, value: float, direction: int = 1) -> np.ndarray:
    """States where ``y[coord]`` crosses ``value`` (``direction`` +1 upward, -1 downward, 0 both).

    Crossings are located by linear interpolation between samples, refined by
    root finding on the dense interpolant when the trajectory carries one.
    """
    z = traj.y[:, coord] - value
    out = []
    for k in range(len(z) - 1):
        a, b = z[k], z[k + 1]
        if a == b or not (a <= 0 < b or a >= 0 > b) or (a == 0 and k > 0):
            continue
        up = b > a
        if direction > 0 and not up or direction < 0 and up:
            continue
        t0, t1 = traj.t[k], traj.t[k + 1]
        if traj.dense is not None:
            tc = brentq(lambda s: traj.dense(s)[coord] - value, t0, t1, xtol=1e-14)
            out.append(traj.dense(tc))
        else:
            lam = a / (a - b)
            out.append(traj.y[k] + lam * (traj.y[k + 1] - traj.y[k]))
    return np.array(out).reshape(-1, traj.y.shape[1])


def crossing_times(traj: Trajectory, coord: int, value: float, direction: int = 1) -> np.ndarray:
    z = traj.y[:, coord] - value
    s = np.sign(z)
    if direction >= 0:
        idx = np.flatnonzero((s[:-1] < 0) & (s[1:] >= 0))
    else:
        idx = np.flatnonzero((s[:-1] > 0) & (s[1:] <= 0))
    lam = z[idx] / (z[idx] - z[idx + 1])
    return traj.t[idx] + lam * (traj.t[idx + 1] - traj.t[idx])


def cycle_from_transient(
    variant,
    state0,
    net: NetworkConfig,
    t_transient: float = 200.0,
    t_window: float = 200.0,
    coord: int = 0,
    **kw,
) -> LimitCycle:
    """Run a transient, estimate the period from upward section crossings, then shoot."""
    variant = Variant.parse(variant)
    tr = integrate(variant, state0, net, t_transient, n_out=2)
    x = tr.y[-1]
    win = integrate(variant, x, net, t_window, n_out=max(2000, int(50 * t_window)))
    c = win.y[:, coord]
    if np.ptp(c) < 1e-7:
        raise CycleNotFound("transient settled on an equilibrium")
    level = 0.5 * (c.max() + c.min())
    tc = crossing_times(win, coord, level, +1)
    if tc.size < 3:
        raise CycleNotFound("fewer than three section crossings in the window")
    T = float(np.median(np.diff(tc[-4:])))
    k = int(np.searchsorted(win.t, tc[-2]))
    return find_cycle(variant, win.y[k], T, net, **kw)
