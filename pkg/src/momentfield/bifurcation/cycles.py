"""Continuation of periodic orbits in one parameter with Floquet-multiplier tracking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import CycleNotFound, IntegrationError
from ..integrate import ATOL, RTOL, LimitCycle, classify_multipliers
from ..model import Variant, jacobian_analytic, rhs_flat
from ..network import NetworkConfig
from .continuation import continuation, newton_corrector, tangent
from .equilibria import BifurcationPoint, ParamFamily, _track, label_points

RESONANCE_TOL = 0.05
HOMOCLINIC_FACTOR = 50.0


class CycleProblem:
    """Shooting system ``phi_T(x; p) - x = 0`` plus a phase condition.

    The unknowns are ``u = (x, T, p / scale)``. The phase condition pins
    ``x`` to the hyperplane through the reference point orthogonal to the
    vector field there; the reference is moved along with the branch.
    """

    def __init__(self, variant, net: NetworkConfig, param: str, scale: float = 1.0, rtol=RTOL, atol=ATOL):
        self.variant = Variant.parse(variant)
        self.family = ParamFamily(net, param)
        self.param = param
        self.scale = scale
        self.rtol, self.atol = rtol, atol
        self._cache_key = None
        self._cache = None
        self.ref = None
        self.fref = None

    def set_reference(self, u):
        n = u.size - 2
        x = u[:n]
        self.ref = x.copy()
        f = rhs_flat(self.variant, x, self.family(u[-1] / self.scale))
        self.fref = f / np.linalg.norm(f)

    def flow(self, u):
        """``(x(T), Phi(T), dx(T)/dp)`` by one augmented integration, cached on ``u``."""
        key = u.tobytes()
        if key == self._cache_key:
            return self._cache
        n = u.size - 2
        x0, T, p = u[:n], u[n], u[-1] / self.scale
        if T <= 0:
            raise ValueError("non-positive period")
        net = self.family(p)
        hp = 1e-6 * max(1.0, abs(p))
        net_p, net_m = self.family(p + hp), self.family(p - hp)
        v = self.variant

        def f(t, z):
            y = z[:n]
            P = z[n : n + n * n].reshape(n, n)
            s = z[n + n * n :]
            J = jacobian_analytic(v, y, net)
            dfdp = (rhs_flat(v, y, net_p) - rhs_flat(v, y, net_m)) / (2 * hp)
            return np.concatenate([rhs_flat(v, y, net), (J @ P).ravel(), J @ s + dfdp])

        z0 = np.concatenate([x0, np.eye(n).ravel(), np.zeros(n)])
        with np.errstate(over="ignore", invalid="ignore"):
            sol = solve_ivp(f, (0.0, T), z0, method="RK45", rtol=self.rtol, atol=self.atol)
        if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
            raise IntegrationError(sol.message, sol.t[-1], sol.y[:n, -1])
        z = sol.y[:, -1]
        out = (z[:n], z[n : n + n * n].reshape(n, n), z[n + n * n :] / self.scale)
        self._cache_key, self._cache = key, out
        return out

    def G(self, u):
        n = u.size - 2
        try:
            xT, _, _ = self.flow(u)
        except IntegrationError:
            return np.full(n + 1, np.nan)
        return np.concatenate([xT - u[:n], [self.fref @ (u[:n] - self.ref)]])

    def jac(self, u):
        n = u.size - 2
        xT, Phi, dp = self.flow(u)
        net = self.family(u[-1] / self.scale)
        A = np.zeros((n + 1, n + 2))
        A[:n, :n] = Phi - np.eye(n)
        A[:n, n] = rhs_flat(self.variant, xT, net)
        A[:n, n + 1] = dp
        A[n, :n] = self.fref
        return A

    def multipliers(self, u):
        return np.linalg.eigvals(self.flow(u)[1])


@dataclass
class CycleBranch:
    param: str
    values: np.ndarray
    anchors: np.ndarray
    periods: np.ndarray
    multipliers: np.ndarray
    stability: list
    stop_reason: str
    points: list = field(default_factory=list)

    def to_rows(self):
        head = [self.param, "T", *(f"x{i + 1}" for i in range(self.anchors.shape[1])), "max_abs_mu", "stability"]
        rows = [
            [float(p), float(T), *map(float, x), float(np.sort(np.abs(mu))[-2]) if mu.size > 1 else 0.0, s]
            for p, T, x, mu, s in zip(self.values, self.periods, self.anchors, self.multipliers, self.stability)
        ]
        return head, rows


def _nontrivial(mu):
    k = int(np.argmin(np.abs(mu - 1.0)))
    return np.delete(mu, k)


def _ns_test(mu):
    """``|mu| - 1`` of the complex pair farthest from the real axis, or ``None``."""
    rest = _nontrivial(mu)
    cplx = rest[rest.imag > 1e-6]
    if cplx.size == 0:
        return None
    z = cplx[np.argmax(np.abs(cplx))]
    return abs(z) - 1.0


def _pd_test(mu):
    rest = _nontrivial(mu)
    real = rest[np.abs(rest.imag) < 1e-8].real
    neg = real[real < 0]
    if neg.size == 0:
        return None
    return float(neg.min()) + 1.0


def sweep_cycles(
    variant,
    net: NetworkConfig,
    param: str,
    seed: LimitCycle,
    lo: float,
    hi: float,
    *,
    direction: float = 1.0,
    scale: float = 1.0,
    h0: float = 1e-2,
    h_max: float = 0.05,
    max_steps: int = 400,
    refine_tol: float = 1e-6,
    both_directions: bool = False,
) -> CycleBranch:
    """Continue ``seed`` in ``param`` over ``[lo, hi]``.

    Detects folds of cycles (the branch turns back in the parameter),
    Neimark-Sacker points (a complex multiplier pair crosses the unit circle)
    and period doublings (a real multiplier crosses -1). Each detection is
    refined by bisection along the branch. A branch whose period exceeds
    ``50 / min(alpha)`` is stopped and flagged as a homoclinic candidate.
    ``scale`` multiplies the parameter inside the arclength metric, useful
    for small parameters such as ``n``.
    """
    variant = Variant.parse(variant)
    if seed.variant is not variant:
        raise ValueError("seed cycle belongs to a different system")
    p0 = net.get_param(param)
    prob = CycleProblem(variant, net, param, scale)
    u0 = np.concatenate([seed.anchor, [seed.period, p0 * scale]])
    prob.set_reference(u0)
    n = seed.anchor.size
    t_max = HOMOCLINIC_FACTOR / float(np.min(net.alpha))

    def in_box(u):
        return 0 < u[n] < t_max and np.all(np.abs(u[: net.M]) < 3)

    def on_point(u):
        prob.set_reference(u)
        return prob.multipliers(u)

    runs = []
    for sgn in ((-direction, direction) if both_directions else (direction,)):
        prob.set_reference(u0)
        r = continuation(
            prob.G, u0, jac=prob.jac, direction=sgn, bounds=(lo * scale, hi * scale), in_box=in_box, h0=h0,
            h_max=h_max, max_steps=max_steps, tol=1e-9, on_point=on_point, h_min=1e-6,
        )
        runs.append(r)
    if len(runs) == 2:
        a, b = runs
        pts = np.concatenate([a.points[::-1], b.points[1:]])
        tans = np.concatenate([-a.tangents[::-1], b.tangents[1:]])
        mus = a.extra[::-1] + b.extra[1:]
        reason = f"{a.stop_reason}/{b.stop_reason}"
        ends = [(a, a.points[-1]), (b, b.points[-1])]
    else:
        (a,) = runs
        pts, tans, mus, reason = a.points, a.tangents, list(a.extra), a.stop_reason
        ends = [(a, a.points[-1])]
    mus = [np.asarray(m) for m in mus]
    for k in range(1, len(mus)):
        mus[k] = _track(mus[k - 1], mus[k])
    stab = [classify_multipliers(m) for m in mus]
    branch = CycleBranch(param, pts[:, -1] / scale, pts[:, :n].copy(), pts[:, n].copy(), np.array(mus), stab, reason)

    def make(kind, u, info):
        net_p = prob.family(u[-1] / scale)
        res = float(np.max(np.abs(prob.G(u)[:n])))
        inf = {"period": float(u[n]), "multipliers": prob.multipliers(u)}
        inf.update(info)
        return BifurcationPoint(kind, {param: float(u[-1] / scale)}, u[:n].copy(), res, variant, inf)

    for k in range(len(pts) - 1):
        ua, ub = pts[k], pts[k + 1]
        if tans[k][-1] * tans[k + 1][-1] < 0:
            ta = tans[k]
            u = _bisect_cycle(prob, ua, ub, lambda u, ta=ta: tangent(prob.jac(u), ta)[-1], refine_tol * scale)
            branch.points.append(make("fold-of-cycles", u, {}))
        for kind, test in (("neimark-sacker", _ns_test), ("period-doubling", _pd_test)):
            ta_, tb_ = test(mus[k]), test(mus[k + 1])
            if ta_ is None or tb_ is None or ta_ * tb_ >= 0:
                continue

            def tf(u, test=test, ta_=ta_):
                v = test(prob.multipliers(u))
                return ta_ if v is None else v

            u = _bisect_cycle(prob, ua, ub, tf, refine_tol * scale)
            info = {}
            if kind == "neimark-sacker":
                mu = _nontrivial(prob.multipliers(u))
                z = mu[np.argmax(np.where(mu.imag > 1e-6, np.abs(mu), -1))]
                theta = abs(np.angle(z))
                # strong resonances 1:1 .. 1:4 sit at theta = 0, pi, 2pi/3, pi/2
                dist = min(abs(theta - r) for r in (0.0, np.pi, 2 * np.pi / 3, np.pi / 2))
                info = {"angle": float(theta), "low_confidence": bool(dist < RESONANCE_TOL)}
            branch.points.append(make(kind, u, info))
    for r, u in ends:
        if r.stop_reason == "left-box" and u[n] > 0.8 * t_max:
            branch.points.append(make("homoclinic-candidate", u, {}))
    label_points(branch.points)
    return branch


def _bisect_cycle(prob: CycleProblem, ua, ub, test, tol, max_iter=40):
    chord = ub - ua
    e = chord / np.linalg.norm(chord)
    sa = np.sign(test(ua))
    lo, hi, plo, phi = 0.0, 1.0, ua, ub
    for _ in range(max_iter):
        if abs(phi[-1] - plo[-1]) < tol:
            break
        mid = 0.5 * (lo + hi)
        prob.set_reference(plo)
        u, _ = newton_corrector(prob.G, prob.jac, ua + mid * chord, e, tol=1e-9)
        if u is None:
            break
        if np.sign(test(u)) == sa:
            lo, plo = mid, u
        else:
            hi, phi = mid, u
    return plo if abs(test(plo)) <= abs(test(phi)) else phi


def cycle_at(variant, net: NetworkConfig, seed_state, period_guess=None, **kw) -> LimitCycle:
    """Locate a cycle from a state (transient first if no period is given)."""
    from ..integrate import cycle_from_transient, find_cycle

    if period_guess is None:
        return cycle_from_transient(variant, seed_state, net, **kw)
    try:
        return find_cycle(variant, seed_state, period_guess, net)
    except CycleNotFound:
        return cycle_from_transient(variant, seed_state, net, **kw)
