"""Quasi-static up/down parameter sweeps with an ODE or a Markov-chain runner."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..integrate import integrate
from ..model import Variant
from ..network import NetworkConfig
from ..stochastic.gillespie import _kernel_args, counts_from_fractions, simulate_path

SETTLE_FRACTION = 0.5


@dataclass
class HysteresisResult:
    """Settled means along the upward (``up``) and downward (``down``) sweeps.

    Both arrays are indexed like ``values`` (ascending). ``corr_up`` and
    ``corr_down`` hold the largest ``|C_ij - nu_i nu_j|`` over the settling
    window for the Markov runner (zero for ODE runs).
    """

    param: str
    values: np.ndarray
    up: np.ndarray
    down: np.ndarray
    osc_up: np.ndarray
    osc_down: np.ndarray
    corr_up: np.ndarray
    corr_down: np.ndarray
    runner: str
    meta: dict = field(default_factory=dict)

    def bistable_mask(self, threshold: float = 0.1, pop: int | None = None) -> np.ndarray:
        d = np.abs(self.up - self.down)
        d = d.max(axis=1) if pop is None else d[:, pop]
        return d > threshold

    def window(self, threshold: float = 0.1, pop: int | None = None):
        """``(lo, hi)`` of the parameter values where the two sweeps disagree, or ``None``."""
        m = self.bistable_mask(threshold, pop)
        if not m.any():
            return None
        idx = np.flatnonzero(m)
        return float(self.values[idx[0]]), float(self.values[idx[-1]])

    def jumps(self, pop: int = 0):
        """Parameter values after the largest single-step change on each sweep."""
        du = np.abs(np.diff(self.up[:, pop]))
        dd = np.abs(np.diff(self.down[:, pop]))
        return float(self.values[int(np.argmax(du)) + 1]), float(self.values[int(np.argmax(dd))])

    def to_rows(self):
        M = self.up.shape[1]
        head = [self.param, *(f"up_{i + 1}" for i in range(M)), *(f"down_{i + 1}" for i in range(M)), "corr_up", "corr_down"]
        rows = [
            [float(v), *map(float, u), *map(float, d), float(cu), float(cd)]
            for v, u, d, cu, cd in zip(self.values, self.up, self.down, self.corr_up, self.corr_down)
        ]
        return head, rows


def _ode_leg(variant, net, param, values, y0, dwell, osc_tol):
    y = y0
    M = net.M
    settled, osc = [], []
    for v in values:
        tr = integrate(variant, y, net.with_param(param, v), dwell, n_out=200)
        tail = tr.nu[tr.t >= (1 - SETTLE_FRACTION) * dwell]
        settled.append(tail.mean(axis=0))
        osc.append(bool(np.max(np.ptp(tail, axis=0)) > osc_tol))
        y = tr.final
    return np.array(settled).reshape(len(values), M), np.array(osc), np.zeros(len(values)), y


def _markov_leg(net, param, values, n0s, dwell, paths, seed, leg, workers, osc_tol):
    G = 50
    grid = np.linspace(0.0, dwell, G + 1)
    tail = grid >= (1 - SETTLE_FRACTION) * dwell
    K = len(values)
    sizes = net.int_sizes()

    def one_path(k):
        n = n0s[k].copy()
        rec = np.empty((K, int(tail.sum()), net.M))
        for j, v in enumerate(values):
            nv = net.with_param(param, v)
            out, _ = simulate_path(nv, n, dwell, grid, seed, k, args=_kernel_args(nv), stream=leg * K + j)
            rec[j] = out[tail] / sizes
            n = out[-1].astype(np.int64)
        return rec, n

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            res = list(ex.map(one_path, range(paths)))
    else:
        res = [one_path(k) for k in range(paths)]
    x = np.stack([r[0] for r in res])  # (paths, K, Gt, M)
    ends = np.stack([r[1] for r in res])
    mean_t = x.mean(axis=0)  # ensemble mean per time
    settled = mean_t.mean(axis=1)
    osc = np.max(np.ptp(mean_t, axis=1), axis=1) > osc_tol
    cov = np.einsum("pkgi,pkgj->kgij", x, x) / paths - np.einsum("kgi,kgj->kgij", mean_t, mean_t)
    corr = np.abs(cov).max(axis=(1, 2, 3))
    return settled, osc, corr, ends


def hysteresis_sweep(
    net: NetworkConfig,
    param: str,
    values,
    *,
    runner: str = "ode",
    variant="wc",
    dwell: float = 50.0,
    init=None,
    paths: int = 20,
    seed: int = 0,
    workers: int = 1,
    osc_tol: float = 0.05,
) -> HysteresisResult:
    """Sweep ``param`` up through ``values`` and back down, carrying the state.

    ``runner="ode"`` integrates ``variant``; ``runner="gillespie"`` simulates
    ``paths`` Markov paths whose counts are carried from one parameter value
    to the next. At each value the ensemble mean is averaged over the last
    half of the dwell time. A sweep leg starts from ``init`` (fractions; the
    lowest state ``0`` by default for the upward leg) and the downward leg
    starts where the upward leg ended.
    """
    values = np.sort(np.asarray(values, dtype=float))
    if values.size < 2:
        raise ConfigError("a hysteresis sweep needs at least two parameter values")
    M = net.M
    nu0 = np.zeros(M) if init is None else np.asarray(init, dtype=float)
    if runner == "ode":
        v = Variant.parse(variant)
        y0 = nu0  # integrate pads a mean-only state with zero correlations
        up, osc_u, cu, y_end = _ode_leg(v, net, param, values, y0, dwell, osc_tol)
        down_r, osc_d_r, cd, _ = _ode_leg(v, net, param, values[::-1], y_end, dwell, osc_tol)
    elif runner == "gillespie":
        n0 = np.tile(counts_from_fractions(nu0, net), (paths, 1))
        up, osc_u, cu, ends = _markov_leg(net, param, values, n0, dwell, paths, seed, 0, workers, osc_tol)
        down_r, osc_d_r, cd, _ = _markov_leg(net, param, values[::-1], ends, dwell, paths, seed, 1, workers, osc_tol)
    else:
        raise ConfigError(f"unknown runner {runner!r}")
    return HysteresisResult(
        param, values, up, down_r[::-1], np.asarray(osc_u), np.asarray(osc_d_r)[::-1], np.asarray(cu),
        np.asarray(cd)[::-1], runner, {"dwell": dwell, "paths": paths if runner == "gillespie" else 0, "seed": seed},
    )

