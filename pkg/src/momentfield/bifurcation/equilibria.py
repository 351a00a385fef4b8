"""Equilibrium branches in one parameter with saddle-node and Hopf detection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import Variant, admissible, jacobian_analytic, rhs_flat
from ..network import NetworkConfig
from ..steady import find_fixed_points
from .continuation import continuation, fd_jacobian, newton_corrector, tangent

HOPF_MIN_OMEGA = 1e-4
PARAM_TOL = 1e-6
SN_CERT = 1e-5
HOPF_CERT = 1e-6


class ParamFamily:
    """``net`` with one named scalar parameter replaced, memoised on the value."""

    def __init__(self, net: NetworkConfig, name: str):
        self.net = net
        self.name = name
        self._cache: dict[float, NetworkConfig] = {}

    def __call__(self, value: float) -> NetworkConfig:
        value = float(value)
        got = self._cache.get(value)
        if got is None:
            if len(self._cache) > 64:
                self._cache.clear()
            got = self._cache[value] = self.net.with_param(self.name, value)
        return got


class EquilibriumProblem:
    """``G(x, p) = rhs(x; p)`` and its Jacobian for continuation."""

    def __init__(self, variant, net: NetworkConfig, param: str):
        self.variant = Variant.parse(variant)
        self.family = ParamFamily(net, param)
        self.param = param

    def G(self, u):
        return rhs_flat(self.variant, u[:-1], self.family(u[-1]))

    def Jx(self, u):
        return jacobian_analytic(self.variant, u[:-1], self.family(u[-1]))

    def jac(self, u):
        p = u[-1]
        hp = np.sqrt(np.finfo(float).eps) * max(1.0, abs(p))
        x = u[:-1]
        dp = (rhs_flat(self.variant, x, self.family(p + hp)) - rhs_flat(self.variant, x, self.family(p - hp))) / (2 * hp)
        return np.column_stack([self.Jx(u), dp])

    def eig(self, u):
        return np.linalg.eigvals(self.Jx(u))


@dataclass
class BifurcationPoint:
    kind: str
    params: dict
    state: np.ndarray
    residual: float
    variant: Variant
    info: dict = field(default_factory=dict)
    label: str = ""

    def to_dict(self) -> dict:
        info = {}
        for k, v in self.info.items():
            if isinstance(v, np.ndarray):
                v = [[float(z.real), float(z.imag)] for z in v] if np.iscomplexobj(v) else v.tolist()
            elif isinstance(v, (np.floating, np.integer, np.bool_)):
                v = v.item()
            info[k] = v
        return {
            "kind": self.kind,
            "label": self.label,
            "params": {k: float(v) for k, v in self.params.items()},
            "state": np.asarray(self.state).tolist(),
            "residual": float(self.residual),
            "variant": self.variant.value,
            "info": info,
        }


@dataclass
class Branch:
    """Arclength-ordered equilibria along a parameter."""

    param: str
    values: np.ndarray
    states: np.ndarray
    eigenvalues: np.ndarray
    admissible: np.ndarray
    stop_reason: str
    tangents: np.ndarray | None = None

    @property
    def stable(self) -> np.ndarray:
        return np.all(self.eigenvalues.real < -1e-8, axis=1)

    def contains(self, u: np.ndarray, tol: float = 5e-3) -> bool:
        pts = np.column_stack([self.states, self.values])
        if len(pts) == 1:
            return np.linalg.norm(pts[0] - u) < tol
        a, b = pts[:-1], pts[1:]
        d = b - a
        lam = np.clip(np.einsum("ij,ij->i", u - a, d) / np.maximum(np.einsum("ij,ij->i", d, d), 1e-300), 0, 1)
        dist = np.linalg.norm(a + lam[:, None] * d - u, axis=1)
        return bool(dist.min() < tol)


@dataclass
class SweepResult:
    param: str
    branches: list
    points: list

    def of_kind(self, kind: str) -> list:
        return [p for p in self.points if p.kind == kind]


def _track(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """Reorder ``cur`` to follow ``prev`` by greedy nearest matching."""
    cur = list(cur)
    out = np.empty(len(prev), dtype=complex)
    order = np.argsort([-abs(z) for z in prev])
    for k in order:
        d = [abs(prev[k] - z) for z in cur]
        j = int(np.argmin(d))
        out[k] = cur.pop(j)
    return out


def _bisect(prob: EquilibriumProblem, ua, ub, test, tol=PARAM_TOL, max_iter=60):
    """Bisect along the chord ``ua -> ub`` on the sign of ``test(u)``.

    Each trial point is corrected onto the branch within the hyperplane
    orthogonal to the chord.
    """
    chord = ub - ua
    nrm = np.linalg.norm(chord)
    e = chord / nrm
    sa = np.sign(test(ua))
    lo, hi = 0.0, 1.0
    plo, phi = ua, ub
    for _ in range(max_iter):
        if abs(phi[-1] - plo[-1]) < tol and (hi - lo) * nrm < 1e-4:
            break
        mid = 0.5 * (lo + hi)
        pred = ua + mid * chord
        u, _ = newton_corrector(prob.G, prob.jac, pred, e, tol=1e-11)
        if u is None:
            break
        if np.sign(test(u)) == sa:
            lo, plo = mid, u
        else:
            hi, phi = mid, u
    return plo if abs(test(plo)) <= abs(test(phi)) else phi


def polish_fold(variant, net: NetworkConfig, params: list[str], x: np.ndarray, values, v0=None, tol=1e-11):
    """Newton on the bordered fold system ``F = 0, J v = 0, |v|^2 = 1``.

    ``params`` lists the free parameters: one for a point on a curve in one
    parameter (then the system is square), extra parameters must be fixed by
    the caller. Returns ``(x, values, v)`` or ``None``.
    """
    variant = Variant.parse(variant)
    n = x.size
    name = params[0]
    fam = ParamFamily(net, name)
    if v0 is None:
        J = jacobian_analytic(variant, x, fam(values[0]))
        w, V = np.linalg.eig(J)
        v0 = np.real(V[:, np.argmin(np.abs(w))])
    v0 = v0 / np.linalg.norm(v0)

    def H(z):
        xx, p, v = z[:n], z[n], z[n + 1 :]
        nn = fam(p)
        return np.concatenate([rhs_flat(variant, xx, nn), jacobian_analytic(variant, xx, nn) @ v, [v @ v - 1.0]])

    z = np.concatenate([x, [values[0]], v0])
    for _ in range(30):
        Hz = H(z)
        if np.max(np.abs(Hz)) < tol:
            return z[:n], [z[n]], z[n + 1 :]
        try:
            dz = np.linalg.solve(fd_jacobian(H, z), -Hz)
        except np.linalg.LinAlgError:
            return None
        z = z + dz
        if not np.all(np.isfinite(z)):
            return None
    return (z[:n], [z[n]], z[n + 1 :]) if np.max(np.abs(H(z))) < 1e-9 else None


def polish_hopf(variant, net: NetworkConfig, name: str, x, value, omega0, v0, tol=1e-11):
    """Newton on ``F = 0, J vr + w vi = 0, J vi - w vr = 0, |v|^2 = 1, c.vi = 0``."""
    variant = Variant.parse(variant)
    n = x.size
    fam = ParamFamily(net, name)
    v0 = v0 / np.linalg.norm(v0)
    # rotate so that the phase normalisation c.vi = 0 holds with c = Re v0
    c = np.real(v0)
    vr0, vi0 = np.real(v0), np.imag(v0)

    def H(z):
        xx, p, vr, vi, om = z[:n], z[n], z[n + 1 : 2 * n + 1], z[2 * n + 1 : 3 * n + 1], z[-1]
        nn = fam(p)
        J = jacobian_analytic(variant, xx, nn)
        return np.concatenate(
            [rhs_flat(variant, xx, nn), J @ vr + om * vi, J @ vi - om * vr, [vr @ vr + vi @ vi - 1.0, c @ vi]]
        )

    z = np.concatenate([x, [value], vr0, vi0 - (c @ vi0) / max(c @ c, 1e-300) * c, [omega0]])
    for _ in range(30):
        Hz = H(z)
        if np.max(np.abs(Hz)) < tol:
            break
        try:
            dz = np.linalg.solve(fd_jacobian(H, z), -Hz)
        except np.linalg.LinAlgError:
            return None
        z = z + dz
        if not np.all(np.isfinite(z)):
            return None
    if np.max(np.abs(H(z))) > 1e-9:
        return None
    return z[:n], z[n], abs(z[-1])


def _make_point(kind, prob, u, info=None) -> BifurcationPoint:
    x, p = u[:-1], u[-1]
    net = prob.family(p)
    res = float(np.max(np.abs(rhs_flat(prob.variant, x, net))))
    ev = prob.eig(u)
    inf = {"eigenvalues": ev, "admissible": admissible(prob.variant, x, net)}
    inf.update(info or {})
    return BifurcationPoint(kind, {prob.param: float(p)}, x.copy(), res, prob.variant, inf)


def _detect(prob: EquilibriumProblem, res, eigs) -> list[BifurcationPoint]:
    pts, tans = res.points, res.tangents
    out = []
    for k in range(len(pts) - 1):
        ua, ub = pts[k], pts[k + 1]
        # saddle-node: the branch turns back in the parameter
        if tans[k][-1] * tans[k + 1][-1] < 0:
            ta = tans[k]

            def tp(u, ta=ta):
                return tangent(prob.jac(u), ta)[-1]

            u = _bisect(prob, ua, ub, tp)
            pol = polish_fold(prob.variant, prob.family.net, [prob.param], u[:-1], [u[-1]])
            if pol is not None:
                u = np.concatenate([pol[0], pol[1]])
            bp = _make_point("saddle-node", prob, u)
            bp.info["certified"] = bool(np.min(np.abs(bp.info["eigenvalues"])) < SN_CERT)
            out.append(bp)
        # Hopf: a tracked complex eigenvalue crosses the imaginary axis
        ea, eb = eigs[k], _track(eigs[k], eigs[k + 1])
        for j in range(len(ea)):
            za, zb = ea[j], eb[j]
            if za.imag <= HOPF_MIN_OMEGA or zb.imag <= HOPF_MIN_OMEGA or za.real * zb.real >= 0:
                continue

            def re_part(u, za=za, zb=zb, ua=ua, ub=ub):
                s = np.clip(np.dot(u - ua, ub - ua) / np.dot(ub - ua, ub - ua), 0, 1)
                target = za + s * (zb - za)
                ev = prob.eig(u)
                return ev[np.argmin(np.abs(ev - target))].real

            u = _bisect(prob, ua, ub, re_part)
            ev, V = np.linalg.eig(prob.Jx(u))
            i = int(np.argmin(np.abs(ev - (1j * abs(za.imag)))))
            pol = polish_hopf(prob.variant, prob.family.net, prob.param, u[:-1], u[-1], abs(ev[i].imag), V[:, i])
            if pol is not None:
                u = np.concatenate([pol[0], [pol[1]]])
            bp = _make_point("hopf", prob, u)
            evs = bp.info["eigenvalues"]
            cand = evs[np.abs(evs.imag) > HOPF_MIN_OMEGA]
            om = float(np.abs(cand[np.argmin(np.abs(cand.real))].imag)) if cand.size else 0.0
            bp.info["omega"] = om
            bp.info["certified"] = bool(cand.size and np.min(np.abs(cand.real)) < HOPF_CERT and om > HOPF_MIN_OMEGA)
            out.append(bp)
    return out


def _dedupe(points, tol=1e-5):
    out = []
    for p in points:
        if not any(
            q.kind == p.kind
            and all(abs(q.params[k] - p.params[k]) < tol for k in p.params)
            and np.max(np.abs(q.state - p.state)) < 100 * tol
            for q in out
        ):
            out.append(p)
    return out


def label_points(points, prefixes=None) -> None:
    """Label detections ``LP1.., H1..`` in increasing order of the first parameter."""
    prefixes = prefixes or {"saddle-node": "LP", "hopf": "H", "fold-of-cycles": "LPC", "neimark-sacker": "NS",
                            "period-doubling": "PD", "cusp": "CP", "bogdanov-takens-candidate": "BT",
                            "homoclinic-candidate": "HC"}
    by_kind: dict[str, list] = {}
    for p in points:
        by_kind.setdefault(p.kind, []).append(p)
    for kind, pts in by_kind.items():
        pts.sort(key=lambda q: tuple(q.params.values()))
        for i, q in enumerate(pts, 1):
            q.label = f"{prefixes.get(kind, kind)}{i}"


def continue_branch(prob: EquilibriumProblem, x0, p0, lo, hi, *, h_max=0.05, max_steps=4000, box=(-0.5, 1.5)):
    """Continue an equilibrium in both parameter directions; returns ``(Branch, detections)``."""
    u0 = np.concatenate([np.asarray(x0, float), [p0]])
    M = prob.family.net.M

    def in_box(u):
        return np.all(u[:M] >= box[0] - 1.0) and np.all(u[:M] <= box[1] + 1.0) and np.all(np.abs(u[M:-1]) < 10)

    halves = []
    for sgn in (-1.0, 1.0):
        r = continuation(prob.G, u0, jac=prob.jac, direction=sgn, bounds=(lo, hi), h_max=h_max, in_box=in_box,
                         max_steps=max_steps)
        halves.append(r)
        if r.stop_reason == "closed":
            break
    if len(halves) == 1:
        pts, tans = halves[0].points, halves[0].tangents
        reason = "closed"
    else:
        a, b = halves
        pts = np.concatenate([a.points[::-1], b.points[1:]])
        tans = np.concatenate([-a.tangents[::-1], b.tangents[1:]])
        reason = f"{a.stop_reason}/{b.stop_reason}"

    class _R:
        pass

    r = _R()
    r.points, r.tangents = pts, tans
    eigs = np.array([prob.eig(u) for u in pts], dtype=complex)
    for k in range(1, len(eigs)):
        eigs[k] = _track(eigs[k - 1], eigs[k])
    adm = np.array([admissible(prob.variant, u[:-1], prob.family(u[-1])) for u in pts])
    br = Branch(prob.param, pts[:, -1].copy(), pts[:, :-1].copy(), eigs, adm, reason, tans)
    return br, _detect(prob, r, eigs)


def sweep_equilibria(
    variant,
    net: NetworkConfig,
    param: str,
    lo: float,
    hi: float,
    *,
    seeds_at=None,
    h_max: float = 0.05,
    max_steps: int = 4000,
    workers: int = 1,
) -> SweepResult:
    """All equilibrium branches over ``param in [lo, hi]`` with detected bifurcations.

    Equilibria found by multi-start Newton at each value in ``seeds_at``
    (default: ``lo``, the midpoint and ``hi``) seed the continuation. Seeds on
    an already traced branch are skipped.
    """
    variant = Variant.parse(variant)
    prob = EquilibriumProblem(variant, net, param)
    if seeds_at is None:
        seeds_at = (lo, 0.5 * (lo + hi), hi)
    branches, points = [], []
    for p0 in seeds_at:
        for fp in find_fixed_points(variant, prob.family(p0), workers=workers):
            u = np.concatenate([fp.y, [p0]])
            if any(b.contains(u) for b in branches):
                continue
            br, det = continue_branch(prob, fp.y, p0, lo, hi, h_max=h_max, max_steps=max_steps)
            branches.append(br)
            points.extend(det)
    points = _dedupe(points)
    label_points(points)
    return SweepResult(param, branches, points)
