"""Magnitude spectra and band-energy fractions of power traces.

Normalization: for a trace of ``n`` samples the mean is removed, a periodic
Hann window ``w`` is applied and the result ``y`` is zero-padded to
``nfft = 2**ceil(log2(n))``. With ``Y = rfft(y, nfft)`` and ``S = sum(w)``::

    magnitude[0]       = |Y[0]| / S
    magnitude[k]       = 2 |Y[k]| / S            0 < k < nfft/2
    magnitude[nfft/2]  = sqrt(2) |Y[nfft/2]| / S

so a sinusoid of amplitude ``A`` sitting exactly on a bin reads ``A`` at
its peak bin (the Hann coherent gain is folded into ``S``), and the non-DC
energies obey

    sum(magnitude[1:]**2) == 2 * (nfft * sum(y**2) - sum(y)**2) / S**2

exactly (Parseval over the padded, windowed signal).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .trace import PowerTrace

MIN_SAMPLES = 16
_TIE_RTOL = 1e-9


class NoACContent(ValueError):
    """The spectrum has no energy outside the DC bin."""


def hann(n: int) -> np.ndarray:
    """Periodic Hann window of length ``n``."""
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)


def next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


@dataclass(frozen=True, eq=False)
class Spectrum:
    freqs_hz: np.ndarray
    magnitudes: np.ndarray
    window: str
    n_samples: int
    dt: float
    nfft: int
    offset_w: float

    @property
    def bin_width_hz(self) -> float:
        return 1.0 / (self.nfft * self.dt)

    @property
    def nyquist_hz(self) -> float:
        return 0.5 / self.dt

    @property
    def energies(self) -> np.ndarray:
        return self.magnitudes ** 2

    @property
    def ac_energy(self) -> float:
        return float(np.sum(self.energies[1:]))

    def has_ac_content(self) -> bool:
        scale = max(abs(self.offset_w), np.finfo(float).tiny)
        return np.sqrt(self.ac_energy) > 1e-9 * scale


def window_signal(samples: np.ndarray) -> tuple[np.ndarray, float]:
    """Mean-removed, Hann-windowed copy of ``samples`` and the window sum."""
    x = np.asarray(samples, dtype=float)
    w = hann(x.size)
    return (x - np.mean(x)) * w, float(np.sum(w))


def magnitudes_from_dft(Y: np.ndarray, nfft: int, wsum: float) -> np.ndarray:
    """Scale one-sided DFT coefficients to the documented magnitude convention."""
    mag = np.abs(Y) * (2.0 / wsum)
    mag[0] *= 0.5
    mag[nfft // 2] *= np.sqrt(0.5)
    return mag


def analyze_samples(samples: np.ndarray, dt: float) -> Spectrum:
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    y, wsum = window_signal(samples)
    nfft = next_pow2(n)
    Y = np.fft.rfft(y, nfft)
    mags = magnitudes_from_dft(Y, nfft, wsum)
    freqs = np.arange(nfft // 2 + 1) / (nfft * dt)
    return Spectrum(freqs, mags, "hann", n, float(dt), nfft, float(np.mean(samples)))


def analyze(trace: PowerTrace) -> Spectrum:
    """One-sided magnitude spectrum of a trace (see module docstring)."""
    return analyze_samples(trace.samples, trace.dt)


def _band_mask(spectrum: Spectrum, f_lo: float, f_hi: float) -> np.ndarray:
    nyq = spectrum.nyquist_hz
    if not 0 < f_lo < f_hi or f_hi > nyq * (1 + 1e-12):
        raise ValueError(f"need 0 < f_lo < f_hi <= Nyquist ({nyq:g} Hz), got [{f_lo}, {f_hi}]")
    f = spectrum.freqs_hz
    mask = (f >= f_lo) & (f <= f_hi)
    mask[0] = False
    return mask


def band_energy(spectrum: Spectrum, f_lo: float, f_hi: float) -> float:
    """Absolute (non-normalized) energy in ``[f_lo, f_hi]``."""
    return float(np.sum(spectrum.energies[_band_mask(spectrum, f_lo, f_hi)]))


def band_energy_fraction(spectrum: Spectrum, f_lo: float, f_hi: float, metric: str = "energy") -> float:
    """Share of non-DC spectral content falling in ``[f_lo, f_hi]``.

    ``metric`` selects what is compared:

    * ``"energy"`` - squared magnitudes summed over the band.
    * ``"amplitude"`` - plain magnitudes summed over the band.
    * ``"peak"`` - energy of the single strongest in-band bin.

    Each is divided by the corresponding total over all non-DC bins.

    Raises:
        NoACContent: the trace is constant to within rounding.
    """
    mask = _band_mask(spectrum, f_lo, f_hi)
    if not spectrum.has_ac_content():
        raise NoACContent("no AC content in spectrum")
    if metric == "energy":
        e = spectrum.energies
        return float(np.sum(e[mask]) / np.sum(e[1:]))
    if metric == "amplitude":
        m = spectrum.magnitudes
        return float(np.sum(m[mask]) / np.sum(m[1:]))
    if metric == "peak":
        e = spectrum.energies
        return float(np.max(e[mask], initial=0.0) / np.sum(e[1:]))
    raise ValueError(f"unknown metric {metric!r}")


def dominant_frequency(spectrum: Spectrum, f_min_hz: float = 0.0) -> float:
    """Frequency of the strongest non-DC bin at or above ``f_min_hz``.

    Bins within a relative 1e-9 of the maximum count as tied; the lowest
    frequency among them wins.
    """
    f = spectrum.freqs_hz
    idx = np.flatnonzero(f >= f_min_hz)
    idx = idx[idx > 0]
    if idx.size == 0:
        raise ValueError(f"no spectral bins at or above {f_min_hz} Hz")
    if not spectrum.has_ac_content():
        raise NoACContent("no AC content in spectrum")
    mags = spectrum.magnitudes[idx]
    peak = np.max(mags)
    first = int(np.flatnonzero(mags >= peak * (1 - _TIE_RTOL))[0])
    return float(f[idx[first]])


def save_spectrum_csv(spectrum: Spectrum, path: str | Path) -> None:
    lines = ["freq_hz,magnitude"]
    lines.extend(f"{fr:.9g},{m:.9g}" for fr, m in zip(spectrum.freqs_hz.tolist(), spectrum.magnitudes.tolist()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
