"""Pseudo-arclength continuation of ``G(u) = 0`` with ``G: R^(m+1) -> R^m``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

H0 = 1e-2
GROW_ITERS = 3
SHRINK_ITERS = 8


def fd_jacobian(G: Callable, u: np.ndarray, G0: np.ndarray | None = None) -> np.ndarray:
    """Central-difference Jacobian with steps ``sqrt(eps) * max(1, |u_k|)``."""
    n = u.size
    hs = np.sqrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(u))
    cols = []
    for k in range(n):
        up = u.copy()
        um = u.copy()
        up[k] += hs[k]
        um[k] -= hs[k]
        cols.append((G(up) - G(um)) / (up[k] - um[k]))
    return np.stack(cols, axis=1)


def tangent(DG: np.ndarray, prev: np.ndarray | None = None) -> np.ndarray:
    """Unit null vector of the ``m x (m+1)`` matrix ``DG``, oriented along ``prev``."""
    m = DG.shape[0]
    if prev is not None:
        A = np.vstack([DG, prev])
        b = np.zeros(m + 1)
        b[-1] = 1.0
        try:
            t = np.linalg.solve(A, b)
            if np.all(np.isfinite(t)):
                return t / np.linalg.norm(t)
        except np.linalg.LinAlgError:
            pass
    t = np.linalg.svd(DG)[2][-1]
    if prev is not None and t @ prev < 0:
        t = -t
    return t


def newton_corrector(G, jac, u_pred, t, *, tol=1e-10, max_iter=10, anchor=None):
    """Newton on ``[G(u); t.(u - anchor)] = 0``; ``anchor`` defaults to ``u_pred``.

    Returns ``(u, iterations)`` or ``(None, iterations)`` on failure.
    """
    anchor = u_pred if anchor is None else anchor
    u = u_pred.copy()
    try:
        for it in range(1, max_iter + 1):
            Gu = G(u)
            if not np.all(np.isfinite(Gu)):
                return None, it
            res = np.concatenate([Gu, [t @ (u - anchor)]])
            A = np.vstack([jac(u), t])
            du = np.linalg.solve(A, -res)
            u = u + du
            if np.max(np.abs(G(u))) < tol:
                return u, it
    except (np.linalg.LinAlgError, ValueError):
        # singular systems and parameters outside the model's domain (e.g. n < 0)
        return None, it
    return None, max_iter


@dataclass
class ContinuationResult:
    points: np.ndarray  # (K, m+1)
    tangents: np.ndarray
    iterations: np.ndarray
    stop_reason: str
    extra: list = field(default_factory=list)


def continuation(
    G: Callable[[np.ndarray], np.ndarray],
    u0: np.ndarray,
    *,
    jac: Callable | None = None,
    direction: np.ndarray | float = 1.0,
    param_index: int = -1,
    h0: float = H0,
    h_min: float = 1e-7,
    h_max: float = 0.1,
    max_steps: int = 2000,
    bounds: tuple[float, float] | None = None,
    in_box: Callable[[np.ndarray], bool] | None = None,
    tol: float = 1e-10,
    on_point: Callable[[np.ndarray], object] | None = None,
    closed_tol: float | None = None,
) -> ContinuationResult:
    """Trace the solution curve through ``u0``.

    ``direction`` is either a full vector or a scalar sign applied to the
    ``param_index`` component of the initial tangent. The step is doubled when
    the corrector needs at most 3 iterations and halved when it needs 8 or
    more. Tracing stops when the parameter leaves ``bounds`` (the last point is
    placed on the bound), when ``in_box`` fails, when the step underflows, or
    when the curve closes on itself.
    """
    jac = jac or (lambda u: fd_jacobian(G, u))
    u = np.asarray(u0, dtype=float).copy()
    m1 = u.size
    p = param_index % m1
    if np.ndim(direction) == 0:
        t = tangent(jac(u))
        if t[p] * float(direction) < 0 or (t[p] == 0 and float(direction) < 0):
            t = -t
    else:
        t = tangent(jac(u), np.asarray(direction, dtype=float))
    pts, tans, its = [u.copy()], [t.copy()], [0]
    extras = [on_point(u) if on_point else None]
    h = h0
    reason = "max-steps"
    closed_tol = closed_tol if closed_tol is not None else 0.5 * h_min ** 0.5
    for _ in range(max_steps):
        u_new = None
        while h >= h_min:
            u_new, it = newton_corrector(G, jac, u + h * t, t, tol=tol)
            if u_new is not None and np.linalg.norm(u_new - u) < 3 * h:
                break
            u_new = None
            h *= 0.5
        if u_new is None:
            reason = "step-underflow"
            break
        if bounds is not None and not bounds[0] <= u_new[p] <= bounds[1]:
            edge = bounds[0] if u_new[p] < bounds[0] else bounds[1]
            u_edge = _land_on(G, jac, u, u_new, p, edge, tol)
            if u_edge is not None:
                pts.append(u_edge)
                tans.append(tangent(jac(u_edge), t))
                its.append(it)
                extras.append(on_point(u_edge) if on_point else None)
            reason = "bounds"
            break
        if in_box is not None and not in_box(u_new):
            reason = "left-box"
            break
        t = tangent(jac(u_new), t)
        u = u_new
        pts.append(u.copy())
        tans.append(t.copy())
        its.append(it)
        extras.append(on_point(u) if on_point else None)
        if len(pts) > 10 and np.linalg.norm(u - pts[0]) < max(closed_tol, h) and t @ tans[0] > 0:
            reason = "closed"
            break
        if it <= GROW_ITERS:
            h = min(2 * h, h_max)
        elif it >= SHRINK_ITERS:
            h = max(0.5 * h, h_min)
    return ContinuationResult(np.array(pts), np.array(tans), np.array(its), reason, extras)


def _land_on(G, jac, u_in, u_out, p, value, tol):
    """Corrected point with ``u[p] == value`` between ``u_in`` and ``u_out``."""
    lam = (value - u_in[p]) / (u_out[p] - u_in[p])
    guess = u_in + lam * (u_out - u_in)
    e = np.zeros(u_in.size)
    e[p] = 1.0
    anchor = guess.copy()
    anchor[p] = value
    u, _ = newton_corrector(G, jac, guess, e, tol=tol, anchor=anchor)
    return u
