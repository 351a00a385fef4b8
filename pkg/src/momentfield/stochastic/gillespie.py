"""Exact (Doob-Gillespie) simulation of the population Markov chain.

Each population ``i`` has ``n_i`` active neurons out of ``N_i``. Transitions
are single steps ``n_i -> n_i - 1`` with rate ``alpha_i n_i`` and
``n_i -> n_i + 1`` with an up-rate built from the current
``s_i = sum_j w_ij n_j / N_j + I_i``:

=============  ===================================
``scaled``     ``N_i f_i(s_i)`` (default)
``literal``    ``f_i(s_i)``
``quiescent``  ``(N_i - n_i) f_i(s_i) / N_i``
=============  ===================================

Up-rates are clamped to zero at ``n_i = N_i``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from ..errors import ConfigError, ModelError
from ..network import MARKOV_RATES, NetworkConfig
from .rng import path_generator

RATE_CODES = {name: k for k, name in enumerate(MARKOV_RATES)}
BLOCK = 1 << 15
FIRST_BLOCK = 1 << 10
EVENT_BUF = 1 << 14

DONE, NEED_RNG, ABSORBED, NEG_RATE, NEED_FLUSH = 0, 1, 2, 3, 4
EVENT_DTYPE = np.dtype([("t", "<f8"), ("population", "<u2"), ("sign", "i1")])


@dataclass
class MarkovState:
    n: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=np.int64)


@numba.njit(cache=True, nogil=True)
def _act(code, off, x):
    if code == 0:
        if x >= 0:
            return 1.0 / (1.0 + np.exp(-x))
        e = np.exp(x)
        return e / (1.0 + e)
    return np.tanh(x) - off


@numba.njit(cache=True, nogil=True)
def _rates(n, alpha, w, inputs, sizes, codes, offs, mode, rates):
    M = n.size
    Q = 0.0
    for i in range(M):
        s = inputs[i]
        for j in range(M):
            s += w[i, j] * n[j] / sizes[j]
        f = _act(codes[i], offs[i], s)
        if f < 0.0:
            return -1.0
        if mode == 0:
            up = sizes[i] * f
        elif mode == 1:
            up = f
        else:
            up = (sizes[i] - n[i]) * f / sizes[i]
        if n[i] >= sizes[i]:
            up = 0.0
        down = alpha[i] * n[i]
        rates[2 * i] = down
        rates[2 * i + 1] = up
        Q += down + up
    return Q


@numba.njit(cache=True, nogil=True)
def _ssa_kernel(n, t, t_end, grid, gidx, out, u, upos, alpha, w, inputs, sizes, codes, offs, mode,
                ev_t, ev_pop, ev_sign, evpos, log_events):
    M = n.size
    G = grid.size
    rates = np.empty(2 * M)
    while True:
        Q = _rates(n, alpha, w, inputs, sizes, codes, offs, mode, rates)
        if Q < 0.0:
            return NEG_RATE, t, gidx, upos, evpos
        if Q == 0.0:
            while gidx < G and grid[gidx] <= t_end:
                for i in range(M):
                    out[gidx, i] = n[i]
                gidx += 1
            return ABSORBED, t_end, gidx, upos, evpos
        if upos + 2 > u.size:
            return NEED_RNG, t, gidx, upos, evpos
        tau = -np.log(1.0 - u[upos]) / Q
        r = u[upos + 1] * Q
        upos += 2
        tn = t + tau
        # the state n holds on [t, tn): grid points before the jump see it
        while gidx < G and grid[gidx] < tn and grid[gidx] <= t_end:
            for i in range(M):
                out[gidx, i] = n[i]
            gidx += 1
        if tn > t_end:
            return DONE, t_end, gidx, upos, evpos
        acc = 0.0
        k = 2 * M - 1
        for c in range(2 * M):
            acc += rates[c]
            if r < acc:
                k = c
                break
        # guard against round-off selecting a zero-rate channel
        while rates[k] == 0.0:
            k -= 1
        pop = k // 2
        sign = 1 if k % 2 == 1 else -1
        n[pop] += sign
        t = tn
        if log_events:
            ev_t[evpos] = t
            ev_pop[evpos] = pop
            ev_sign[evpos] = sign
            evpos += 1
            if evpos == ev_t.size:
                return NEED_FLUSH, t, gidx, upos, evpos


def _kernel_args(net: NetworkConfig):
    sizes = net.int_sizes().astype(float)
    codes, offs = zip(*(a.kernel_params() for a in net.activations))
    return (
        np.ascontiguousarray(net.alpha, dtype=float),
        np.ascontiguousarray(net.w, dtype=float),
        np.ascontiguousarray(net.inputs, dtype=float),
        sizes,
        np.array(codes, dtype=np.int64),
        np.array(offs, dtype=float),
        RATE_CODES[net.markov_rate],
    )


def transition_rates(state: MarkovState, net: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    """Down rates ``q_i = alpha_i n_i`` and up rates per ``net.markov_rate``."""
    n = np.asarray(state.n if isinstance(state, MarkovState) else state, dtype=np.int64)
    sizes = net.int_sizes()
    if n.shape != (net.M,) or np.any(n < 0) or np.any(n > sizes):
        raise ConfigError(f"counts {n} outside [0, N]")
    s = net.w @ (n / sizes) + net.inputs
    f = net.act_derivs(s, 0)[0]
    if np.any(f < 0):
        raise ModelError(f"negative activation value {f.min():.3g}: the up-rate would be negative")
    if net.markov_rate == "scaled":
        up = sizes * f
    elif net.markov_rate == "literal":
        up = f.copy()
    else:
        up = (sizes - n) * f / sizes
    up = np.where(n >= sizes, 0.0, up)
    return net.alpha * n, up


def gillespie_step(state: MarkovState, net: NetworkConfig, rng: np.random.Generator):
    """One exact SSA event. Returns ``(new_state, absorbed)``."""
    q, f = transition_rates(state, net)
    rates = np.empty(2 * net.M)
    rates[0::2], rates[1::2] = q, f
    Q = rates.sum()
    if Q <= 0:
        return MarkovState(state.n.copy(), state.t), True
    tau = rng.exponential(1.0 / Q)
    k = int(np.searchsorted(np.cumsum(rates), rng.random() * Q, side="right"))
    k = min(k, 2 * net.M - 1)
    n = state.n.copy()
    n[k // 2] += 1 if k % 2 else -1
    return MarkovState(n, state.t + tau), False


def simulate_path(
    net: NetworkConfig,
    init,
    t_end: float,
    grid: np.ndarray,
    seed: int,
    path: int = 0,
    event_log=None,
    args=None,
    stream: int = 0,
) -> tuple[np.ndarray, int]:
    """One SSA path sampled (left-constant) on ``grid``.

    Returns ``(counts[G, M], status)``. ``event_log`` is a binary file handle
    receiving ``(t: f8, population: u2, sign: i1)`` records. ``stream``
    selects an independent sub-stream of the path's generator.
    """
    args = args or _kernel_args(net)
    n = np.array(init, dtype=np.int64)
    grid = np.asarray(grid, dtype=float)
    out = np.empty((grid.size, net.M), dtype=np.int64)
    rng = path_generator(seed, path, stream)
    block = FIRST_BLOCK
    u = rng.random(block)
    upos = 0
    gidx = 0
    t = 0.0
    log = event_log is not None
    ev_t = np.empty(EVENT_BUF if log else 1)
    ev_pop = np.empty(ev_t.size, dtype=np.uint16)
    ev_sign = np.empty(ev_t.size, dtype=np.int8)
    evpos = 0
    while True:
        status, t, gidx, upos, evpos = _ssa_kernel(
            n, t, t_end, grid, gidx, out, u, upos, *args, ev_t, ev_pop, ev_sign, evpos, log
        )
        if log and (status == NEED_FLUSH or status != NEED_RNG):
            _flush(event_log, ev_t[:evpos], ev_pop[:evpos], ev_sign[:evpos])
            evpos = 0
        if status == NEED_RNG:
            block = min(2 * block, BLOCK)
            u = np.concatenate([u[upos:], rng.random(block)])
            upos = 0
        elif status == NEG_RATE:
            raise ModelError("the activation produced a negative up-rate")
        elif status != NEED_FLUSH:
            return out[:gidx] if gidx < grid.size else out, status


def _flush(fh, t, pop, sign):
    rec = np.empty(t.size, dtype=EVENT_DTYPE)
    rec["t"], rec["population"], rec["sign"] = t, pop, sign
    fh.write(rec.tobytes())


def read_event_log(path) -> np.ndarray:
    return np.fromfile(Path(path), dtype=EVENT_DTYPE)


@dataclass
class EnsembleStats:
    """Ensemble moments of ``n / N`` on a time grid.

    ``mean[g, i] = <n_i> / N_i`` and ``second[g, i, j] = <n_i n_j> / (N_i N_j)``.
    """

    times: np.ndarray
    mean: np.ndarray
    second: np.ndarray
    paths: int
    seed: int
    sizes: np.ndarray
    counts: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_fractions(cls, times, x: np.ndarray, seed: int, sizes, keep=False, meta=None) -> "EnsembleStats":
        """``x`` has shape ``(paths, G, M)`` and holds per-path ``n / N`` (or ``X``)."""
        P = x.shape[0]
        mean = x.mean(axis=0)
        second = np.einsum("pgi,pgj->gij", x, x) / P
        return cls(np.asarray(times), mean, second, P, seed, np.asarray(sizes, float), x if keep else None, meta or {})

    @property
    def cov(self) -> np.ndarray:
        """``C_hat - nu_hat nu_hat^T`` per time."""
        return self.second - np.einsum("gi,gj->gij", self.mean, self.mean)

    def se_mean(self) -> np.ndarray:
        if self.paths < 2:
            raise ValueError("standard errors need at least two paths")
        var = np.clip(np.diagonal(self.cov, axis1=1, axis2=2), 0, None) * self.paths / (self.paths - 1)
        return np.sqrt(var / self.paths)

    def to_csv(self, path) -> None:
        M = self.mean.shape[1]
        cols = ["t", *(f"nu_{i + 1}" for i in range(M))]
        cols += [f"C_{i + 1}{j + 1}" for i in range(M) for j in range(i, M)]
        iu = np.triu_indices(M)
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for g, t in enumerate(self.times):
                vals = [t, *self.mean[g], *self.second[g][iu]]
                fh.write(",".join(f"{v:.17g}" for v in vals) + "\n")


def run_ensemble(
    net: NetworkConfig,
    init,
    t_end: float,
    paths: int,
    seed: int,
    *,
    dt: float | None = None,
    grid=None,
    workers: int = 1,
    keep_paths: bool = False,
    event_log=None,
) -> EnsembleStats:
    """Simulate ``paths`` independent SSA paths and collect moments on a uniform grid.

    ``init`` holds initial counts (integers). Path ``k`` uses the stream
    ``(seed, k)`` so the result does not depend on ``workers``. Event logging
    requires ``workers == 1``; records of successive paths are concatenated.
    """
    if paths < 1:
        raise ConfigError("paths must be >= 1")
    if grid is None:
        dt = dt if dt is not None else t_end / 200
        grid = np.arange(0.0, t_end + 0.5 * dt, dt)
        grid = grid[grid <= t_end]
    grid = np.asarray(grid, dtype=float)
    sizes = net.int_sizes()
    init = np.asarray(init, dtype=np.int64)
    if init.shape != (net.M,) or np.any(init < 0) or np.any(init > sizes):
        raise ConfigError(f"initial counts {init} outside [0, N]")
    args = _kernel_args(net)
    x = np.empty((paths, grid.size, net.M))
    absorbed = 0

    def one(k):
        out, status = simulate_path(net, init, t_end, grid, seed, k, event_log, args)
        return out, status

    if event_log is not None and workers > 1:
        raise ConfigError("event logging needs workers == 1")
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(one, range(paths)))
    else:
        results = (one(k) for k in range(paths))
    for k, (out, status) in enumerate(results):
        x[k] = out / sizes
        absorbed += status == ABSORBED
    return EnsembleStats.from_fractions(grid, x, seed, sizes, keep_paths, {"absorbed_paths": int(absorbed)})


def counts_from_fractions(nu, net: NetworkConfig) -> np.ndarray:
    """Nearest integer counts for initial fractions ``nu``."""
    return np.clip(np.rint(np.asarray(nu) * net.int_sizes()), 0, net.int_sizes()).astype(np.int64)
