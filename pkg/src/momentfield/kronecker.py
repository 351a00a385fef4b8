"""Column-major vectorisation, Kronecker products and sums, and resolvent squares.

``vect`` stacks columns, so ``vect([[a, b], [c, d]]) == [a, c, b, d]``. With
this convention ``vect(A X B) == kron(B.T, A) @ vect(X)`` and the Lyapunov
operator ``X -> A X + X A^T`` is represented by ``kron_sum(A, A)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, IntegrationError

MAX_DENSE_M = 8


def vect(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvect(v: np.ndarray, M: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if M is None:
        M = int(round(np.sqrt(v.size)))
    if M * M != v.size:
        raise ConfigError(f"vector of length {v.size} is not a square matrix")
    return v.reshape(M, M, order="F")


def kron_product(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Block matrix ``[a_ij B]``."""
    return np.kron(np.atleast_2d(A), np.atleast_2d(B))


def _square(A: np.ndarray, name: str) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError(f"{name} must be square, got shape {A.shape}")
    return A


def kron_sum(A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """``A (+) B = A (x) I + I (x) B``; ``B`` defaults to ``A``."""
    A = _square(A, "A")
    B = A if B is None else _square(B, "B")
    if A.shape != B.shape:
        raise ConfigError(f"Kronecker sum needs equal sizes, got {A.shape} and {B.shape}")
    M = A.shape[0]
    if M > MAX_DENSE_M:
        raise ConfigError(f"dense Kronecker sums are limited to M <= {MAX_DENSE_M}")
    eye = np.eye(M)
    return np.kron(A, eye) + np.kron(eye, B)


def kron_sum_apply(A: np.ndarray, v: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """Matrix-free ``(A (+) B) v``, i.e. ``vect(B X + X A^T)`` with ``X = unvect(v)``."""
    A = _square(A, "A")
    B = A if B is None else _square(B, "B")
    X = unvect(v, A.shape[0])
    return vect(B @ X + X @ A.T)


def vect_conjugation(A: np.ndarray, X: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``vect(A X B)`` evaluated as ``(B^T (x) A) vect(X)``."""
    A, X, B = (np.atleast_2d(np.asarray(m)) for m in (A, X, B))
    if A.shape[1] != X.shape[0] or X.shape[1] != B.shape[0]:
        raise ConfigError(f"incompatible shapes {A.shape}, {X.shape}, {B.shape}")
    return kron_product(B.T, A) @ vect(X)


def match_multisets(a, b, tol: float) -> tuple[bool, float]:
    """Greedy nearest-neighbour matching of two complex multisets.

    Returns ``(ok, worst)`` where ``worst`` is the largest distance used by
    the matching and ``ok`` is ``worst <= tol``.
    """
    a = list(np.asarray(a, dtype=complex).ravel())
    b = list(np.asarray(b, dtype=complex).ravel())
    if len(a) != len(b):
        return False, np.inf
    worst = 0.0
    # match the most isolated points first so clusters do not steal partners
    a.sort(key=lambda z: -min((abs(z - y) for y in b), default=0.0))
    for z in a:
        d = [abs(z - y) for y in b]
        k = int(np.argmin(d))
        worst = max(worst, d[k])
        b.pop(k)
    return worst <= tol, worst


def square_resolvent(Phi: np.ndarray) -> np.ndarray:
    """``Phi (x) Phi`` for one resolvent or a time series of shape ``(T, M, M)``."""
    Phi = np.asarray(Phi)
    if Phi.ndim == 2:
        return np.kron(Phi, Phi)
    return np.stack([np.kron(P, P) for P in Phi])


def _resolvent(rhs_mat: Callable[[float, np.ndarray], np.ndarray], dim: int, times, rtol, atol):
    times = np.asarray(times, dtype=float)

    def f(t, y):
        return (rhs_mat(t, y.reshape(dim, dim))).ravel()

    sol = solve_ivp(f, (times[0], times[-1]), np.eye(dim).ravel(), t_eval=times, rtol=rtol, atol=atol, method="RK45")
    if not sol.success:
        raise IntegrationError(sol.message, last_t=sol.t[-1] if sol.t.size else times[0])
    return sol.y.T.reshape(-1, dim, dim)


def integrate_resolvent(A_of_t: Callable[[float], np.ndarray], times, rtol=1e-10, atol=1e-12) -> np.ndarray:
    """Principal matrix solution ``Phi(t)`` of ``x' = A(t) x`` at ``times``."""
    M = _square(A_of_t(times[0]), "A(t)").shape[0]
    return _resolvent(lambda t, P: A_of_t(t) @ P, M, times, rtol, atol)


def integrate_kron_resolvent(A_of_t: Callable[[float], np.ndarray], times, rtol=1e-10, atol=1e-12) -> np.ndarray:
    """Principal matrix solution ``Psi(t)`` of ``y' = (A(t) (+) A(t)) y`` at ``times``."""
    M = _square(A_of_t(times[0]), "A(t)").shape[0]
    return _resolvent(lambda t, P: kron_sum(A_of_t(t)) @ P, M * M, times, rtol, atol)
