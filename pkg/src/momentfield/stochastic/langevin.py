"""Euler-Maruyama simulation of the diffusion approximation.

``dX_i = (-alpha_i X_i + f_i(s_i)) dt + N_i^(-gamma) sqrt(alpha_i X_i + f_i(s_i)) dW_i``

with ``s = w X + I`` and ``gamma = net.noise_exponent`` (``inf`` switches the
noise off).
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..network import NetworkConfig
from .gillespie import EnsembleStats
from .rng import path_generator

CHUNK = 512
PERSIST_STEPS = 10


def noise_prefactor(net: NetworkConfig) -> np.ndarray:
    g = net.noise_exponent
    if np.isinf(g):
        return np.zeros(net.M)
    return net.sizes ** (-g)


def langevin_run(
    net: NetworkConfig,
    init,
    t_end: float,
    dt: float,
    paths: int,
    seed: int,
    *,
    dt_out: float | None = None,
    keep_paths: bool = False,
    persist: int = PERSIST_STEPS,
) -> EnsembleStats:
    """Simulate ``paths`` Euler-Maruyama paths from ``init`` (fractions).

    The radicand is clamped at zero. A path whose radicand stays negative for
    ``persist`` consecutive steps in some population is listed in
    ``meta["flagged_paths"]``. Path ``k`` draws its increments from the stream
    ``(seed, k)``.
    """
    if paths < 1 or dt <= 0 or t_end <= 0:
        raise ConfigError("need paths >= 1, dt > 0 and t_end > 0")
    X0 = np.asarray(init, dtype=float)
    if X0.shape != (net.M,):
        raise ConfigError(f"init must have {net.M} entries")
    drift_scale = float(np.max(net.alpha) + np.max(np.abs(net.w)) + 1.0)
    if drift_scale * dt > 0.1:
        raise ConfigError(f"dt={dt} too large for the drift scale {drift_scale:.3g}")
    steps = int(round(t_end / dt))
    dt_out = dt_out if dt_out is not None else t_end / 200
    every = max(1, int(round(dt_out / dt)))
    rec_steps = np.arange(0, steps + 1, every)
    out = np.empty((paths, rec_steps.size, net.M))
    sig = noise_prefactor(net)
    sq = np.sqrt(dt)
    gens = [path_generator(seed, k) for k in range(paths)]
    X = np.tile(X0, (paths, 1))
    neg_run = np.zeros((paths, net.M), dtype=np.int64)
    flagged = np.zeros(paths, dtype=bool)
    out[:, 0] = X
    r = 1
    step = 0
    while step < steps:
        K = min(CHUNK, steps - step)
        dW = np.stack([g.standard_normal((K, net.M)) for g in gens], axis=1) * sq
        for k in range(K):
            s = X @ net.w.T + net.inputs
            f = net.act_derivs(s.T, 0)[0].T
            a = net.alpha * X
            rad = a + f
            neg = rad < 0
            neg_run = np.where(neg, neg_run + 1, 0)
            flagged |= np.any(neg_run >= persist, axis=1)
            X = X + (f - a) * dt + sig * np.sqrt(np.clip(rad, 0.0, None)) * dW[k]
            step += 1
            if r < rec_steps.size and step == rec_steps[r]:
                out[:, r] = X
                r += 1
    times = rec_steps * dt
    meta = {"flagged_paths": np.flatnonzero(flagged).tolist(), "dt": dt}
    return EnsembleStats.from_fractions(times, out, seed, net.sizes, keep_paths, meta)
