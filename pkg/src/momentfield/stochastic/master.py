"""Exact integration of the master equation for small networks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from ..errors import ConfigError, SizeRefusal
from ..network import NetworkConfig
from .gillespie import transition_rates

MAX_STATES = 100_000
DENSE_STATES = 2_000


def state_space_size(net: NetworkConfig) -> int:
    return int(np.prod(net.int_sizes() + 1))


def generator(net: NetworkConfig) -> sp.csr_matrix:
    """Transition-rate matrix ``Q`` acting on column probability vectors, ``dP/dt = Q P``.

    States are the count vectors ``n`` in C order over ``prod(N_i + 1)``.
    """
    shape = tuple(int(s) + 1 for s in net.int_sizes())
    S = int(np.prod(shape))
    rows, cols, vals = [], [], []
    for k in range(S):
        n = np.array(np.unravel_index(k, shape))
        down, up = transition_rates(n, net)
        out = 0.0
        for i in range(net.M):
            for rate, step in ((down[i], -1), (up[i], 1)):
                if rate <= 0:
                    continue
                m = n.copy()
                m[i] += step
                rows.append(int(np.ravel_multi_index(m, shape)))
                cols.append(k)
                vals.append(rate)
                out += rate
        rows.append(k)
        cols.append(k)
        vals.append(-out)
    return sp.csr_matrix((vals, (rows, cols)), shape=(S, S))


@dataclass
class MasterSolution:
    times: np.ndarray
    P: np.ndarray  # (T, S)
    shape: tuple
    sizes: np.ndarray

    def _counts(self):
        return np.stack(np.unravel_index(np.arange(self.P.shape[1]), self.shape), axis=1).astype(float)

    @property
    def mean(self) -> np.ndarray:
        """``<n_i> / N_i`` per time."""
        return self.P @ self._counts() / self.sizes

    @property
    def second(self) -> np.ndarray:
        """``<n_i n_j> / (N_i N_j)`` per time."""
        x = self._counts() / self.sizes
        return np.einsum("ts,si,sj->tij", self.P, x, x)

    def marginal(self, i: int) -> np.ndarray:
        P = self.P.reshape(len(self.times), *self.shape)
        axes = tuple(a + 1 for a in range(len(self.shape)) if a != i)
        return P.sum(axis=axes)


def point_mass(net: NetworkConfig, counts) -> np.ndarray:
    shape = tuple(int(s) + 1 for s in net.int_sizes())
    p = np.zeros(int(np.prod(shape)))
    p[np.ravel_multi_index(tuple(int(c) for c in counts), shape)] = 1.0
    return p


def master_evolve(net: NetworkConfig, p0, times, *, max_states: int = MAX_STATES) -> MasterSolution:
    """Propagate the distribution ``p0`` (or an initial count vector) to ``times``.

    Small state spaces use the dense matrix exponential; larger ones use
    :func:`scipy.sparse.linalg.expm_multiply`. Both are exact up to
    round-off. Raises :class:`SizeRefusal` beyond ``max_states`` states.
    """
    S = state_space_size(net)
    if S > max_states:
        raise SizeRefusal(f"state space has {S} states (limit {max_states})", S)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ConfigError("times must be non-negative and sorted")
    p0 = np.asarray(p0, dtype=float)
    if p0.shape == (net.M,):
        p0 = point_mass(net, p0)
    if p0.shape != (S,) or np.any(p0 < 0) or abs(p0.sum() - 1) > 1e-12:
        raise ConfigError("p0 must be a probability vector over the state space or a count vector")
    Q = generator(net)
    if S <= DENSE_STATES:
        Qd = Q.toarray()
        P = np.stack([scipy.linalg.expm(Qd * t) @ p0 for t in times])
    else:
        P = np.stack([expm_multiply(Q * t, p0) if t > 0 else p0 for t in times])
    P = np.clip(P, 0.0, None)
    shape = tuple(int(s) + 1 for s in net.int_sizes())
    return MasterSolution(times, P, shape, net.int_sizes().astype(float))
