"""Two-parameter continuation of fold and Hopf curves, with cusp and Bogdanov-Takens flags."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import Variant, admissible, jacobian_analytic, rhs_flat
from ..network import NetworkConfig
from .continuation import continuation, fd_jacobian
from .equilibria import BifurcationPoint, polish_fold, polish_hopf

N_MIN = 1e-5
N_MAX = 0.05
BT_OMEGA = 1e-3


class _TwoParam:
    def __init__(self, variant, net: NetworkConfig, p1: str, p2: str):
        self.variant = Variant.parse(variant)
        self.net = net
        self.p1, self.p2 = p1, p2
        self._key = None
        self._val = None

    def net_at(self, a, b):
        key = (float(a), float(b))
        if key != self._key:
            self._key = key
            self._val = self.net.with_param(self.p1, a).with_param(self.p2, b)
        return self._val


@dataclass
class Codim2Curve:
    kind: str  # "fold" or "hopf"
    params: tuple[str, str]
    values: np.ndarray  # (K, 2)
    states: np.ndarray  # (K, n)
    extra: np.ndarray  # (K,) omega for Hopf curves, normal-form coefficient for fold curves
    admissible: np.ndarray
    stop_reasons: tuple
    points: list = field(default_factory=list)

    def to_rows(self):
        head = [*self.params, *(f"x{i + 1}" for i in range(self.states.shape[1])), "extra", "admissible"]
        rows = [
            [*map(float, v), *map(float, s), float(e), int(a)]
            for v, s, e, a in zip(self.values, self.states, self.extra, self.admissible)
        ]
        return head, rows


def fold_normal_coefficient(variant, x, net: NetworkConfig, q=None) -> float:
    """``a = 1/2 <p, B(q, q)>`` with ``J q = 0``, ``J^T p = 0``, ``|q| = 1``, ``<p, q> = 1``.

    Pass the continued null vector as ``q`` so that the sign is consistent
    along a fold curve.
    """
    J = jacobian_analytic(variant, x, net)
    if q is None:
        w, V = np.linalg.eig(J)
        q = np.real(V[:, np.argmin(np.abs(w))])
    q = q / np.linalg.norm(q)
    wt, Vt = np.linalg.eig(J.T)
    p = np.real(Vt[:, np.argmin(np.abs(wt))])
    p /= p @ q
    h = 1e-4

    def d2(h):
        return (rhs_flat(variant, x + h * q, net) - 2 * rhs_flat(variant, x, net) + rhs_flat(variant, x - h * q, net)) / h**2

    Bqq = (4 * d2(0.5 * h) - d2(h)) / 3
    return 0.5 * float(p @ Bqq)


def continue_fold(
    variant,
    net: NetworkConfig,
    point: BifurcationPoint,
    p2: str = "n",
    *,
    p1_bounds=(-20.0, 20.0),
    p2_bounds=(N_MIN, N_MAX),
    h_max: float = 0.05,
    max_steps: int = 3000,
) -> Codim2Curve:
    """Continue a saddle-node in ``(p1, p2)`` through the bordered system ``F = 0, J v = 0, |v| = 1``."""
    variant = Variant.parse(variant)
    (p1,) = point.params.keys()
    a0 = point.params[p1]
    b0 = net.get_param(p2)
    tp = _TwoParam(variant, net, p1, p2)
    n = point.state.size
    pol = polish_fold(variant, net.with_param(p2, b0), [p1], point.state, [a0])
    if pol is None:
        raise RuntimeError("fold point could not be polished")
    x0, (a0,), v0 = pol

    def G(u):
        x, v, a, b = u[:n], u[n : 2 * n], u[-2], u[-1]
        nn = tp.net_at(a, b)
        return np.concatenate([rhs_flat(variant, x, nn), jacobian_analytic(variant, x, nn) @ v, [v @ v - 1.0]])

    u0 = np.concatenate([x0, v0, [a0, b0]])
    M = net.M

    def in_box(u):
        return p1_bounds[0] <= u[-2] <= p1_bounds[1] and np.all(np.abs(u[:M]) < 3) and np.all(np.abs(u[M:n]) < 20)

    return _trace("fold", variant, tp, G, u0, n, p2_bounds, in_box, h_max, max_steps,
                  lambda u: fold_normal_coefficient(variant, u[:n], tp.net_at(u[-2], u[-1]), u[n : 2 * n]))


def continue_hopf(
    variant,
    net: NetworkConfig,
    point: BifurcationPoint,
    p2: str = "n",
    *,
    p1_bounds=(-20.0, 20.0),
    p2_bounds=(N_MIN, N_MAX),
    h_max: float = 0.05,
    max_steps: int = 3000,
) -> Codim2Curve:
    """Continue a Hopf point in ``(p1, p2)``.

    Defining system: ``F = 0``, ``J vr + w vi = 0``, ``J vi - w vr = 0``,
    ``|vr|^2 + |vi|^2 = 1`` and a phase condition ``c . vi = 0``.
    """
    variant = Variant.parse(variant)
    (p1,) = point.params.keys()
    a0 = point.params[p1]
    b0 = net.get_param(p2)
    tp = _TwoParam(variant, net, p1, p2)
    n = point.state.size
    J = jacobian_analytic(variant, point.state, tp.net_at(a0, b0))
    ev, V = np.linalg.eig(J)
    cand = np.flatnonzero(ev.imag > 1e-6)
    i = cand[np.argmin(np.abs(ev[cand].real))]
    v0 = V[:, i] / np.linalg.norm(V[:, i])
    pol = polish_hopf(variant, net.with_param(p2, b0), p1, point.state, a0, ev[i].imag, v0)
    if pol is None:
        raise RuntimeError("Hopf point could not be polished")
    x0, a0, om0 = pol
    J = jacobian_analytic(variant, x0, tp.net_at(a0, b0))
    ev, V = np.linalg.eig(J)
    i = int(np.argmin(np.abs(ev - 1j * om0)))
    v = V[:, i] / np.linalg.norm(V[:, i])
    # rotate the eigenvector so that Re v . Im v = 0 and |Re v| >= |Im v|
    phi = 0.5 * np.arctan2(-2 * np.real(v) @ np.imag(v), np.real(v) @ np.real(v) - np.imag(v) @ np.imag(v))
    v = v * np.exp(1j * phi)
    c = np.real(v).copy()

    def G(u):
        x, vr, vi, om, a, b = u[:n], u[n : 2 * n], u[2 * n : 3 * n], u[3 * n], u[-2], u[-1]
        nn = tp.net_at(a, b)
        Jx = jacobian_analytic(variant, x, nn)
        return np.concatenate(
            [rhs_flat(variant, x, nn), Jx @ vr + om * vi, Jx @ vi - om * vr, [vr @ vr + vi @ vi - 1.0, c @ vi]]
        )

    u0 = np.concatenate([x0, np.real(v), np.imag(v), [om0, a0, b0]])
    M = net.M

    def in_box(u):
        return (
            p1_bounds[0] <= u[-2] <= p1_bounds[1]
            and np.all(np.abs(u[:M]) < 3)
            and np.all(np.abs(u[M:n]) < 20)
            and u[3 * n] > BT_OMEGA
        )

    return _trace("hopf", variant, tp, G, u0, n, p2_bounds, in_box, h_max, max_steps, lambda u: u[3 * n])


def _trace(kind, variant, tp, G, u0, n, p2_bounds, in_box, h_max, max_steps, extra_fn) -> Codim2Curve:
    jac = lambda u: fd_jacobian(G, u)  # noqa: E731
    halves = []
    for sgn in (-1.0, 1.0):
        r = continuation(G, u0, jac=jac, direction=sgn, bounds=p2_bounds, in_box=in_box, h_max=h_max,
                         max_steps=max_steps, tol=1e-10)
        halves.append(r)
    a, b = halves
    pts = np.concatenate([a.points[::-1], b.points[1:]])
    tans = np.concatenate([-a.tangents[::-1], b.tangents[1:]])
    vals = pts[:, -2:]
    states = pts[:, :n]
    extra = np.array([extra_fn(u) for u in pts])
    adm = np.array([admissible(variant, u[:n], tp.net_at(u[-2], u[-1])) for u in pts])
    curve = Codim2Curve(kind, (tp.p1, tp.p2), vals, states, extra, adm, (a.stop_reason, b.stop_reason))
    if kind == "fold":
        for k in range(len(pts) - 1):
            tk, tk1 = tans[k][-2:], tans[k + 1][-2:]
            reversed_ = (tk @ tk1) < 0
            sign_change = extra[k] * extra[k + 1] < 0
            if sign_change:
                lam = extra[k] / (extra[k] - extra[k + 1])
                u = pts[k] + lam * (pts[k + 1] - pts[k])
                curve.points.append(_codim2_point("cusp", variant, tp, u, n, {"certified": bool(reversed_)}))
    else:
        for r, u in ((a, a.points[-1]), (b, b.points[-1])):
            if r.stop_reason == "left-box" and u[3 * n] < 10 * BT_OMEGA:
                curve.points.append(_codim2_point("bogdanov-takens-candidate", variant, tp, u, n, {"omega": float(u[3 * n])}))
    for r, u in ((a, a.points[-1]), (b, b.points[-1])):
        if r.stop_reason == "bounds" and abs(u[-1] - p2_bounds[0]) < 1e-12 and tp.p2 == "n":
            curve.points.append(_codim2_point("singular-limit", variant, tp, u, n, {}))
    return curve


def _codim2_point(kind, variant, tp, u, n, info) -> BifurcationPoint:
    nn = tp.net_at(u[-2], u[-1])
    x = u[:n]
    res = float(np.max(np.abs(rhs_flat(variant, x, nn))))
    inf = {"admissible": admissible(variant, x, nn)}
    inf.update(info)
    return BifurcationPoint(kind, {tp.p1: float(u[-2]), tp.p2: float(u[-1])}, x.copy(), res, variant, inf)


def continue_codim2(variant, net: NetworkConfig, point: BifurcationPoint, p2: str = "n", **kw) -> Codim2Curve:
    """Dispatch on the detection kind (saddle-node or Hopf)."""
    if point.kind == "saddle-node":
        return continue_fold(variant, net, point, p2, **kw)
    if point.kind == "hopf":
        return continue_hopf(variant, net, point, p2, **kw)
    raise ValueError(f"cannot continue a {point.kind} point in two parameters")
