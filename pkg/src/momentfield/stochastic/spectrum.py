"""Ensemble-averaged Welch power spectra and peak detection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks, welch

N_SEGMENTS = 8
PEAK_DB = 6.0


@dataclass
class PowerSpectrum:
    """``power[i, k]`` is the path-averaged density of population ``i`` at ``freqs[k]``."""

    freqs: np.ndarray
    power: np.ndarray
    paths: int
    nperseg: int
    fallback: bool = False

    def db(self) -> np.ndarray:
        return 10 * np.log10(np.maximum(self.power, np.finfo(float).tiny))

    def peaks(self, pop: int = 0, band=None, prominence: float = PEAK_DB) -> list[tuple[float, float]]:
        """Finite-frequency peaks ``(freq, prominence_dB)`` of population ``pop``.

        A peak must stand ``prominence`` dB above the surrounding floor. The
        zero-frequency bin is dropped first so that the removed mean does not
        act as a floor.
        """
        pos = self.freqs > 0
        d = self.db()[pop][pos]
        freqs = self.freqs[pos]
        idx, props = find_peaks(d, prominence=prominence)
        res = []
        for k, pr in zip(idx, props["prominences"]):
            f = freqs[k]
            if band is not None and not band[0] <= f <= band[1]:
                continue
            res.append((float(f), float(pr)))
        return res

    def has_peak(self, pop: int = 0, band=None, prominence: float = PEAK_DB) -> bool:
        return bool(self.peaks(pop, band, prominence))

    def to_csv(self, path) -> None:
        M = self.power.shape[0]
        with open(path, "w") as fh:
            fh.write(",".join(["freq", *(f"S_{i + 1}" for i in range(M))]) + "\n")
            for k, f in enumerate(self.freqs):
                fh.write(",".join(f"{v:.17g}" for v in (f, *self.power[:, k])) + "\n")


def power_spectrum(x, dt: float, *, n_segments: int = N_SEGMENTS, band=None) -> PowerSpectrum:
    """Welch spectrum per path (Hann window, 50% overlap, mean removed), averaged over paths.

    ``x`` has shape ``(paths, G, M)`` or ``(G, M)`` or ``(G,)``, sampled
    every ``dt``. Frequencies are in cycles per unit time. ``n_segments``
    half-overlapping segments span the record; if that leaves segments
    shorter than 8 samples a single periodogram is used and ``fallback`` is set.
    ``band`` restricts the returned frequencies.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :, None]
    elif x.ndim == 2:
        x = x[None]
    P, G, M = x.shape
    nperseg = int(2 * G // (n_segments + 1))
    fallback = nperseg < 8 or n_segments < 2
    if fallback:
        nperseg = G
    f, S = welch(
        x, fs=1.0 / dt, window="hann", nperseg=nperseg, noverlap=0 if fallback else nperseg // 2,
        detrend="constant", axis=1,
    )
    S = S.mean(axis=0).T  # (M, F)
    if band is not None:
        keep = (f >= band[0]) & (f <= band[1])
        f, S = f[keep], S[:, keep]
    return PowerSpectrum(f, S, P, nperseg, fallback)
