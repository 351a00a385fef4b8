"""Right-hand sides of the Wilson-Cowan system and of the four moment systems.

All moment systems share the state ``(nu, C)`` where ``C`` is a symmetric
``M x M`` block stored as its upper triangle (row-major). The flat state
vector is ``[nu_1..nu_M, C_11, C_12, .., C_1M, C_22, .., C_MM]``.

Mean equation (all moment variants)::

    nu_i' = -alpha_i nu_i + f_i(s_i) + 1/2 f_i''(s_i) sum_kl w_ik w_il C_kl

Correlation equation::

    C' = A C + C A^T + S(nu, C),    A = -diag(alpha) + diag(f'(s)) w

with the variant-specific source ``S``:

=================  =========================================================
InfiniteSize       ``0``
BressloffRescaled  ``delta_ij (alpha_i nu_i + f_i) / N_i``
BCC                ``f_i' w_ij nu_j / N_j + f_j' w_ji nu_i / N_i``
RodriguezTuckwell  ``delta_ij N_i^(-2g) (alpha_i nu_i + f_i + 1/2 f_i'' q_i)``
=================  =========================================================

where ``q_i = (w C w^T)_ii`` and ``g`` is ``net.noise_exponent``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, EvaluationError
from .network import NetworkConfig


class Variant(str, enum.Enum):
    WILSON_COWAN = "wc"
    INFINITE = "infinite"
    BCC = "bcc"
    BRESSLOFF = "bressloff"
    RODRIGUEZ_TUCKWELL = "rt"

    @classmethod
    def parse(cls, v) -> "Variant":
        if isinstance(v, Variant):
            return v
        aliases = {
            "wilsoncowan": "wc",
            "wilson-cowan": "wc",
            "infinitesize": "infinite",
            "infinite-size": "infinite",
            "bressloffrescaled": "bressloff",
            "rodrigueztuckwell": "rt",
        }
        key = str(v).lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ConfigError(f"unknown model variant {v!r}") from None

    @property
    def has_corr(self) -> bool:
        return self is not Variant.WILSON_COWAN


def corr_size(M: int) -> int:
    return M * (M + 1) // 2


def state_dim(variant, M: int) -> int:
    return M + (corr_size(M) if Variant.parse(variant).has_corr else 0)


@lru_cache(maxsize=None)
def _triu(M: int):
    return np.triu_indices(M)


@lru_cache(maxsize=None)
def _projections(M: int):
    """Selection ``P`` (full -> packed rows) and expansion ``E`` (packed -> full)."""
    iu, ju = _triu(M)
    K = corr_size(M)
    P = np.zeros((M + K, M + M * M))
    E = np.zeros((M + M * M, M + K))
    P[:M, :M] = np.eye(M)
    E[:M, :M] = np.eye(M)
    for p, (k, l) in enumerate(zip(iu, ju)):
        P[M + p, M + k * M + l] = 1.0
        E[M + k * M + l, M + p] = 1.0
        E[M + l * M + k, M + p] = 1.0
    return P, E


def pack(C: np.ndarray) -> np.ndarray:
    return np.asarray(C)[_triu(C.shape[0])]


def unpack(c: np.ndarray, M: int) -> np.ndarray:
    C = np.zeros((M, M))
    iu, ju = _triu(M)
    C[iu, ju] = c
    C[ju, iu] = c
    return C


@dataclass(frozen=True)
class MomentState:
    """Mean active fractions ``nu`` plus the packed symmetric block ``corr``."""

    nu: np.ndarray
    corr: np.ndarray

    @property
    def M(self) -> int:
        return len(self.nu)

    def corr_matrix(self) -> np.ndarray:
        if len(self.corr) == 0:
            return np.zeros((self.M, self.M))
        return unpack(self.corr, self.M)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.nu, self.corr])

    @classmethod
    def from_flat(cls, y, M: int) -> "MomentState":
        y = np.asarray(y, dtype=float)
        return cls(y[:M].copy(), y[M:].copy())

    @classmethod
    def from_matrix(cls, nu, C=None) -> "MomentState":
        nu = np.asarray(nu, dtype=float)
        if C is None:
            return cls(nu, np.zeros(0))
        C = np.asarray(C, dtype=float)
        if not np.allclose(C, C.T, rtol=0, atol=0):
            raise EvaluationError("correlation block must be exactly symmetric")
        return cls(nu, pack(C))

    @classmethod
    def zeros(cls, variant, M: int) -> "MomentState":
        return cls(np.zeros(M), np.zeros(corr_size(M) if Variant.parse(variant).has_corr else 0))


def total_current(nu, net: NetworkConfig) -> np.ndarray:
    """``s_i = sum_j w_ij nu_j + I_i``."""
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (net.M,):
        raise ConfigError(f"nu has shape {nu.shape}, network has M={net.M}")
    return net.w @ nu + net.inputs


# ------------------------------------------------------------------ sources
def _source_bressloff(nu, f, f1, f2, q, C, net):
    return np.diag(net.inv_sizes * (net.alpha * nu + f))


def _source_bcc(nu, f, f1, f2, q, C, net):
    # (f_i' w_ij nu_j / N_j) + transpose
    X = (f1[:, None] * net.w) * (nu * net.inv_sizes)[None, :]
    return X + X.T


def _source_rt(nu, f, f1, f2, q, C, net):
    sigma2 = net.inv_sizes ** (2.0 * net.noise_exponent)
    return np.diag(sigma2 * (net.alpha * nu + f + 0.5 * f2 * q))


_SOURCES = {
    Variant.BRESSLOFF: _source_bressloff,
    Variant.BCC: _source_bcc,
    Variant.RODRIGUEZ_TUCKWELL: _source_rt,
}


def rhs_flat(variant: Variant, y: np.ndarray, net: NetworkConfig) -> np.ndarray:
    """Vector field on the flat state. No input validation (hot path)."""
    M = net.M
    nu = y[:M]
    s = net.w @ nu + net.inputs
    if variant is Variant.WILSON_COWAN:
        f = net.act_derivs(s, 0)[0]
        return -net.alpha * nu + f
    f, f1, f2 = net.act_derivs(s, 2)
    C = unpack(y[M:], M)
    wC = net.w @ C
    q = np.einsum("ij,ij->i", wC, net.w)
    dnu = -net.alpha * nu + f + 0.5 * f2 * q
    A = f1[:, None] * net.w
    A[np.diag_indices(M)] -= net.alpha
    AC = A @ C
    dC = AC + AC.T
    src = _SOURCES.get(variant)
    if src is not None:
        dC = dC + src(nu, f, f1, f2, q, C, net)
    return np.concatenate([dnu, dC[_triu(M)]])


def _check_state(variant: Variant, y: np.ndarray, net: NetworkConfig):
    if y.shape != (state_dim(variant, net.M),):
        raise ConfigError(f"state of size {y.size} does not match {variant.value} with M={net.M}")
    if not np.all(np.isfinite(y)):
        raise EvaluationError("state contains NaN or inf")


def rhs(variant, state: MomentState, net: NetworkConfig) -> MomentState:
    """Time derivative of ``state`` under the selected system."""
    variant = Variant.parse(variant)
    y = state.flat()
    _check_state(variant, y, net)
    dy = rhs_flat(variant, y, net)
    if not np.all(np.isfinite(dy)):
        raise EvaluationError("right-hand side produced NaN")
    return MomentState.from_flat(dy, net.M)


def wc_jacobian(nu, net: NetworkConfig) -> np.ndarray:
    """``A(nu) = -diag(alpha) + diag(f'(s)) w`` (Wilson-Cowan Jacobian)."""
    s = total_current(nu, net)
    f1 = net.act_derivs(s, 1)[1]
    A = f1[:, None] * net.w
    A[np.diag_indices(net.M)] -= net.alpha
    return A


def jacobian_analytic(variant, y: np.ndarray, net: NetworkConfig) -> np.ndarray:
    """Exact Jacobian of :func:`rhs_flat` in packed coordinates."""
    variant = Variant.parse(variant)
    M = net.M
    w, alpha = net.w, net.alpha
    nu = y[:M]
    s = w @ nu + net.inputs
    if variant is Variant.WILSON_COWAN:
        f1 = net.act_derivs(s, 1)[1]
        A = f1[:, None] * w
        A[np.diag_indices(M)] -= alpha
        return A
    f, f1, f2, f3 = net.act_derivs(s, 3)
    C = unpack(y[M:], M)
    wC = w @ C
    q = np.einsum("ij,ij->i", wC, w)
    A = f1[:, None] * w
    A[np.diag_indices(M)] -= alpha
    eye = np.eye(M)

    Jnn = A + (0.5 * f3 * q)[:, None] * w
    JnC = 0.5 * f2[:, None, None] * w[:, :, None] * w[:, None, :]
    # d(AC + CA^T)_ij / d nu_m
    T = f2[:, None] * wC  # T[i, j] = f2_i (wC)_ij
    JCn = np.einsum("ij,im->ijm", T, w) + np.einsum("ji,jm->ijm", T, w)
    JCC = np.einsum("ik,jl->ijkl", A, eye) + np.einsum("jl,ik->ijkl", A, eye)

    inv = net.inv_sizes
    if variant is Variant.BRESSLOFF:
        d = inv[:, None] * (alpha[:, None] * eye + f1[:, None] * w)  # [i, m]
        JCn = JCn + eye[:, :, None] * d[:, None, :]
    elif variant is Variant.BCC:
        # inv_j w_ij (f2_i w_im nu_j + f1_i delta_jm) + (i <-> j)
        G = np.einsum("j,ij,i,im->ijm", inv * nu, w, f2, w) + np.einsum("j,ij,i,jm->ijm", inv, w, f1, eye)
        JCn = JCn + G + G.transpose(1, 0, 2)
    elif variant is Variant.RODRIGUEZ_TUCKWELL:
        sig = inv ** (2.0 * net.noise_exponent)
        d = sig[:, None] * (alpha[:, None] * eye + f1[:, None] * w + (0.5 * f3 * q)[:, None] * w)
        JCn = JCn + eye[:, :, None] * d[:, None, :]
        JCC = JCC + eye[:, :, None, None] * sig[:, None, None, None] * JnC[:, None, :, :]

    full = np.zeros((M + M * M, M + M * M))
    full[:M, :M] = Jnn
    full[:M, M:] = JnC.reshape(M, M * M)
    full[M:, :M] = JCn.reshape(M * M, M)
    full[M:, M:] = JCC.reshape(M * M, M * M)
    P, E = _projections(M)
    return P @ full @ E


def jacobian_fd(variant, y: np.ndarray, net: NetworkConfig) -> np.ndarray:
    """Central-difference Jacobian with steps ``sqrt(eps) * max(1, |y_k|)``."""
    variant = Variant.parse(variant)
    y = np.asarray(y, dtype=float)
    n = y.size
    J = np.empty((n, n))
    hs = np.sqrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(y))
    for k in range(n):
        yp = y.copy()
        ym = y.copy()
        yp[k] += hs[k]
        ym[k] -= hs[k]
        J[:, k] = (rhs_flat(variant, yp, net) - rhs_flat(variant, ym, net)) / (yp[k] - ym[k])
    return J


def jacobian(variant, state, net: NetworkConfig, method: str = "fd") -> np.ndarray:
    """Jacobian of the flattened right-hand side at ``state``.

    ``method='fd'`` uses central differences; ``'analytic'`` the closed form.
    """
    variant = Variant.parse(variant)
    y = state.flat() if isinstance(state, MomentState) else np.asarray(state, dtype=float)
    _check_state(variant, y, net)
    J = jacobian_fd(variant, y, net) if method == "fd" else jacobian_analytic(variant, y, net)
    if not np.all(np.isfinite(J)):
        raise EvaluationError("Jacobian contains NaN")
    return J


def admissible(variant, y: np.ndarray, net: NetworkConfig, tol: float = 1e-8) -> bool:
    """Rates in ``[0, 1]`` and a positive semidefinite covariance block.

    For the BCC variant the covariance is ``c + diag(nu / N)``.
    """
    variant = Variant.parse(variant)
    M = net.M
    nu = y[:M]
    if np.any(nu < -tol) or np.any(nu > 1 + tol):
        return False
    if not variant.has_corr:
        return True
    C = unpack(y[M:], M)
    if variant is Variant.BCC:
        C = C + np.diag(nu * net.inv_sizes)
    return bool(np.linalg.eigvalsh(C).min() >= -tol)
