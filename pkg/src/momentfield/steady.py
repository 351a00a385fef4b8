"""Equilibria, their spectra and stability, and the one-population Hopf normal form."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, NotHopfCandidate
from .model import Variant, admissible, corr_size, jacobian, jacobian_analytic, rhs_flat, state_dim
from .network import NetworkConfig

NEWTON_TOL = 1e-10
DEDUP_TOL = 1e-6
STABILITY_BAND = 1e-8


def classify(eigenvalues, band: float = STABILITY_BAND) -> str:
    """Stability class from the sign pattern of the real parts.

    Returns one of ``stable-node``, ``stable-focus``, ``saddle``, ``unstable``
    or ``center-candidate`` (some real part within ``band`` of zero, none
    positive).
    """
    ev = np.asarray(eigenvalues, dtype=complex)
    re = ev.real
    if np.any(re > band):
        return "saddle" if np.any(re < -band) else "unstable"
    if np.any(re >= -band):
        return "center-candidate"
    return "stable-focus" if np.any(np.abs(ev.imag) > band) else "stable-node"


def is_stable(cls: str) -> bool:
    return cls.startswith("stable")


@dataclass
class FixedPoint:
    variant: Variant
    y: np.ndarray
    eigenvalues: np.ndarray
    cls: str
    admissible: bool
    M: int
    residual: float = 0.0

    @property
    def nu(self) -> np.ndarray:
        return self.y[: self.M]

    @property
    def corr(self) -> np.ndarray:
        return self.y[self.M :]

    @property
    def stable(self) -> bool:
        return is_stable(self.cls)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "state": {"nu": self.nu.tolist(), "corr": self.corr.tolist()},
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "class": self.cls,
            "admissible": bool(self.admissible),
        }


def fixed_points_to_json(fps, path=None) -> str:
    text = json.dumps([fp.to_dict() for fp in fps], indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def newton(variant, x0, net: NetworkConfig, max_iter: int = 50, tol: float = NEWTON_TOL):
    """Damped Newton with Armijo backtracking on ``|F|^2``.

    Returns ``(x, converged, iterations)``.
    """
    variant = Variant.parse(variant)
    x = np.asarray(x0, dtype=float).copy()
    with np.errstate(all="ignore"):
        F = rhs_flat(variant, x, net)
        for it in range(max_iter + 1):
            r = np.max(np.abs(F))
            if not np.isfinite(r):
                return x, False, it
            if r < tol:
                return x, True, it
            if it == max_iter:
                break
            J = jacobian_analytic(variant, x, net)
            try:
                d = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                d = np.linalg.lstsq(J, -F, rcond=None)[0]
            phi0 = F @ F
            lam = 1.0
            while lam > 1e-10:
                xn = x + lam * d
                Fn = rhs_flat(variant, xn, net)
                if np.all(np.isfinite(Fn)) and Fn @ Fn <= (1.0 - 1e-4 * lam) * phi0:
                    break
                lam *= 0.5
            else:
                return x, False, it
            x, F = xn, Fn
    return x, False, max_iter


def _seeds(variant: Variant, net: NetworkConfig, grid: int, corr_levels) -> list[np.ndarray]:
    M = net.M
    axis = np.linspace(-0.5, 1.5, grid)
    nus = [np.array(p) for p in itertools.product(axis, repeat=M)]
    if not variant.has_corr:
        return nus
    K = corr_size(M)
    diag = np.array([i == j for i in range(M) for j in range(i, M)], dtype=float)
    corrs = [np.zeros(K)]
    for c in corr_levels:
        corrs.append(c * diag)
        corrs.append(c * np.ones(K))
    return [np.concatenate([nu, c]) for nu in nus for c in corrs]


def spectrum(variant, y, net: NetworkConfig) -> np.ndarray:
    """Eigenvalues of the finite-difference Jacobian at ``y``."""
    return np.linalg.eigvals(jacobian(variant, y, net, method="fd"))


def make_fixed_point(variant, y, net: NetworkConfig) -> FixedPoint:
    variant = Variant.parse(variant)
    y = np.asarray(y, dtype=float)
    ev = spectrum(variant, y, net)
    res = float(np.max(np.abs(rhs_flat(variant, y, net))))
    return FixedPoint(variant, y, ev, classify(ev), admissible(variant, y, net), net.M, res)


def find_fixed_points(
    variant,
    net: NetworkConfig,
    *,
    grid: int | None = None,
    corr_levels=(0.05, -0.05, 0.5),
    extra_seeds=(),
    workers: int = 1,
) -> list[FixedPoint]:
    """All equilibria reachable by multi-start Newton, deduplicated and sorted.

    Seeds cover ``nu in [-0.5, 1.5]^M`` on a ``grid``-point lattice per axis,
    crossed with a few correlation boxes. For moment systems the Wilson-Cowan
    equilibria (with zero correlations) are added as seeds.
    """
    variant = Variant.parse(variant)
    M = net.M
    if grid is None:
        grid = {1: 21, 2: 9}.get(M, 5)
    seeds = _seeds(variant, net, grid, corr_levels)
    if variant.has_corr:
        K = corr_size(M)
        for fp in find_fixed_points(Variant.WILSON_COWAN, net, grid=grid):
            seeds.append(np.concatenate([fp.nu, np.zeros(K)]))
    seeds.extend(np.asarray(s, dtype=float) for s in extra_seeds)

    def solve(s):
        x, ok, _ = newton(variant, s, net)
        return x if ok else None

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            roots = list(ex.map(solve, seeds))
    else:
        roots = [solve(s) for s in seeds]
    found: list[np.ndarray] = []
    for x in roots:
        if x is None or np.any(np.abs(x) > 1e6):
            continue
        if all(np.max(np.abs(x - y)) > DEDUP_TOL for y in found):
            found.append(x)
    found.sort(key=lambda v: tuple(np.round(v, 9)))
    out = []
    for x in found:
        try:
            out.append(make_fixed_point(variant, x, net))
        except EvaluationError:
            continue
    return out


# ------------------------------------------------------------------ Hopf
@dataclass
class HopfReport:
    omega0: float
    omega0_numeric: float
    transversality: float
    l1: float
    l1_closed_form: float
    criticality: str
    p: np.ndarray
    q: np.ndarray

    @property
    def omega_rel_error(self) -> float:
        return abs(self.omega0_numeric - self.omega0) / self.omega0


def _richardson(g, h):
    """Second-order Richardson extrapolation of a central difference ``g(h)``."""
    return (4.0 * g(0.5 * h) - g(h)) / 3.0


def multilinear_forms(F, x0: np.ndarray, h2: float = 1e-3, h3: float = 5e-3):
    """Finite-difference second and third derivatives of ``F`` at ``x0``.

    Returns complex-multilinear callables ``B(u, v)`` and ``C(u, v, w)``
    obtained by polarisation of directional derivatives.
    """

    def d2(d):
        return _richardson(lambda h: (F(x0 + h * d) - 2.0 * F(x0) + F(x0 - h * d)) / (h * h), h2)

    def d3(d):
        return _richardson(
            lambda h: (F(x0 + 2 * h * d) - 2 * F(x0 + h * d) + 2 * F(x0 - h * d) - F(x0 - 2 * h * d)) / (2 * h**3), h3
        )

    def B_real(u, v):
        return 0.25 * (d2(u + v) - d2(u - v))

    def C_real(u, v, w):
        return (d3(u + v + w) - d3(u + v) - d3(u + w) - d3(v + w) + d3(u) + d3(v) + d3(w)) / 6.0

    def expand(form, args):
        parts = [(np.real(a), np.imag(a)) for a in args]
        out = 0j
        for choice in itertools.product((0, 1), repeat=len(args)):
            vecs = [parts[k][c] for k, c in enumerate(choice)]
            if any(not np.any(v) for v in vecs):
                continue
            out = out + (1j ** sum(choice)) * form(*vecs)
        return np.asarray(out, dtype=complex) * np.ones(len(x0))

    return (lambda u, v: expand(B_real, (u, v))), (lambda u, v, w: expand(C_real, (u, v, w)))


def first_lyapunov(J0: np.ndarray, B, C, p: np.ndarray, q: np.ndarray, omega: float) -> float:
    """``l1 = Re(<p,C(q,q,qb)> - 2<p,B(q,J0^-1 B(q,qb))> + <p,B(qb,(2iw - J0)^-1 B(q,q))>) / 2w``."""
    n = J0.shape[0]
    qb = np.conj(q)
    a = np.vdot(p, C(q, q, qb))
    b = np.vdot(p, B(q, np.linalg.solve(J0, B(q, qb))))
    c = np.vdot(p, B(qb, np.linalg.solve(2j * omega * np.eye(n) - J0, B(q, q))))
    return float(np.real(a - 2.0 * b + c) / (2.0 * omega))


def l1_closed_form(d1: float, d2: float, d3: float, w: float, N: float) -> float:
    """Closed-form one-population expression for ``l1``, kept as a cross-check."""
    om = np.sqrt(-d1 * d2 * w**3 / N)
    return w * w * N / (2 * om * d1 * d1) * (d3 * d1 * (1 + 1 / om) + d2 * d2 * (2 / om - 14.0 / 3.0))


def hopf_genericity(net: NetworkConfig, tol: float = 1e-9) -> HopfReport:
    """Hopf data of the one-population BCC system at ``(nu, c) = (0, 0)``.

    Preconditions: ``f(I) = 0``, ``f''(I) < 0`` and ``alpha = w f'(I)``.
    ``q`` solves ``J0 q = i w0 q`` with second component 1 and ``p`` solves
    ``J0^T p = -i w0 p`` scaled so that ``<p, q> = 1``.
    """
    if net.M != 1:
        raise NotHopfCandidate("the Hopf construction is for one population")
    w = float(net.w[0, 0])
    I = float(net.inputs[0])
    alpha = float(net.alpha[0])
    n = net.n
    if n <= 0:
        raise NotHopfCandidate("needs a finite population (n > 0)")
    f0, d1, d2, d3 = net.act_derivs(np.array([I]), 3)[:, 0]
    if abs(f0) > tol:
        raise NotHopfCandidate(f"f(I) = {f0:.3g} != 0")
    if abs(alpha - w * d1) > tol * max(1.0, abs(alpha)):
        raise NotHopfCandidate(f"alpha = {alpha} differs from w f'(I) = {w * d1}")
    det = -d1 * d2 * w**3 * n
    if not det > 0:
        raise NotHopfCandidate("determinant at the candidate is not positive (need f''(I) < 0)")
    omega0 = float(np.sqrt(det))
    y0 = np.zeros(2)
    J0 = jacobian(Variant.BCC, y0, net, method="fd")
    ev = np.linalg.eigvals(J0)
    omega_num = float(np.max(ev.imag))

    def re_part(a):
        ev = np.linalg.eigvals(jacobian_analytic(Variant.BCC, y0, net.with_param("alpha", a)))
        return float(ev.real[np.argmax(ev.imag)])

    ha = 1e-5 * max(1.0, alpha)
    trans = (re_part(alpha + ha) - re_part(alpha - ha)) / (2 * ha)

    vals, vecs = np.linalg.eig(J0)
    q = vecs[:, np.argmax(vals.imag)]
    q = q / q[1]
    vals_t, vecs_t = np.linalg.eig(J0.T)
    p = vecs_t[:, np.argmin(vals_t.imag)]
    p = p / np.conj(np.vdot(p, q))

    B, C = multilinear_forms(lambda y: rhs_flat(Variant.BCC, y, net), y0)
    l1 = first_lyapunov(J0, B, C, p, q, omega_num)
    l1c = l1_closed_form(d1, d2, d3, w, 1.0 / n)
    if abs(l1) < 1e-10:
        crit = "degenerate"
    else:
        crit = "supercritical" if l1 < 0 else "subcritical"
    return HopfReport(omega0, omega_num, trans, l1, float(l1c), crit, p, q)


def one_population_jacobian(variant, nu: float, corr: float, net: NetworkConfig) -> np.ndarray:
    """Closed-form 2x2 Jacobian of the one-population moment systems."""
    variant = Variant.parse(variant)
    w = float(net.w[0, 0])
    a = float(net.alpha[0])
    s = w * nu + float(net.inputs[0])
    f, d1, d2, d3 = net.act_derivs(np.array([s]), 3)[:, 0]
    n = float(net.inv_sizes[0])
    J = np.array(
        [
            [-a + w * d1 + 0.5 * d3 * w**3 * corr, 0.5 * d2 * w * w],
            [2 * d2 * w * corr * w, 2 * (-a + w * d1)],
        ]
    )
    if variant is Variant.BCC:
        J[1, 0] += 2 * n * w * (d2 * w * nu + d1)
    elif variant is Variant.BRESSLOFF:
        J[1, 0] += n * (a + d1 * w)
    elif variant is Variant.RODRIGUEZ_TUCKWELL:
        sig = n ** (2 * net.noise_exponent)
        J[1, 0] += sig * (a + d1 * w + 0.5 * d3 * w**3 * corr)
        J[1, 1] += sig * 0.5 * d2 * w * w
    elif variant is not Variant.INFINITE:
        raise ValueError("one-population moment Jacobian needs a moment variant")
    return J


def state_size(variant, M):
    return state_dim(variant, M)
