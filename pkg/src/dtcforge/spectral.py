"""Fourier analysis of stroboscopic series and dynamical-phase classification."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class SpectralError(ValueError):
    pass


class Phase(str, enum.Enum):
    DTC = "DTC"
    LIMIT_CYCLE = "LIMIT_CYCLE"
    THERMAL = "THERMAL"
    PERIOD_1 = "PERIOD_1"


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    mags: np.ndarray
    Omega0: float

    @property
    def M(self) -> int:
        return self.mags.size

    @property
    def half_bin(self) -> int:
        return self.M // 2

    @classmethod
    def from_mags(cls, mags, T: float) -> "Spectrum":
        mags = np.asarray(mags, dtype=float)
        if mags.ndim != 1 or mags.size % 2 or mags.size < 2:
            raise SpectralError(f"spectrum length must be even, got {mags.size}")
        if np.any(mags < 0):
            raise SpectralError("magnitudes must be non-negative")
        omega0 = 2 * math.pi / T
        return cls(np.arange(mags.size) * omega0 / mags.size, mags, omega0)


def stroboscopic_fft(series, T: float) -> Spectrum:
    """Normalized DFT magnitudes ``|sum_n s[n] exp(-2 pi i k n / M)| / M``.

    Bin ``k`` sits at angular frequency ``k * Omega0 / M``; the alternating series
    ``(-1)^n`` maps to a unit peak at bin ``M/2`` (= Omega0 / 2).
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise SpectralError("series must be one-dimensional")
    M = x.size
    if M < 8 or M % 2:
        raise SpectralError(f"need an even number of samples >= 8, got {M}")
    if not np.all(np.isfinite(x)):
        raise SpectralError("series contains non-finite values")
    return Spectrum.from_mags(np.abs(np.fft.fft(x)) / M, T)


def naive_dft(series) -> np.ndarray:
    """O(M^2) reference DFT with the same 1/M normalization (complex output)."""
    x = np.asarray(series, dtype=float)
    M = x.size
    n = np.arange(M)
    out = np.empty(M, dtype=complex)
    for k in range(M):
        out[k] = np.sum(x * np.exp(-2j * np.pi * k * n / M)) / M
    return out


def fcma(spectrum: Spectrum, exclude_dc: bool = True) -> float | None:
    """Frequency of the largest magnitude (lowest frequency wins ties); None if all zero."""
    start = 1 if exclude_dc else 0
    mags = spectrum.mags[start:]
    if mags.size == 0 or not np.any(mags > 0):
        return None
    return float(spectrum.freqs[start + int(np.argmax(mags))])


@dataclass(frozen=True)
class PeakTest:
    passed: bool
    fcma: float | None
    peak_mag: float
    threshold: float


def dtc_peak_test(spectrum: Spectrum, threshold: float = 0.05, exclude_dc: bool = True) -> PeakTest:
    """Largest (non-DC) line sits exactly at Omega0/2 and reaches ``threshold``."""
    f = fcma(spectrum, exclude_dc)
    peak = float(spectrum.mags[spectrum.half_bin])
    at_half = f is not None and math.isclose(f, spectrum.Omega0 / 2, rel_tol=1e-12)
    return PeakTest(bool(at_half and peak >= threshold), f, peak, threshold)


@dataclass(frozen=True)
class Tolerances:
    tol_fix: float = 1e-3
    tol_flip: float = 1e-2
    conc_min: float = 0.4


@dataclass(frozen=True)
class PhaseLabel:
    label: Phase
    peak_freq: float | None
    peak_mag: float
    residual: float

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "peak_freq": self.peak_freq,
            "peak_mag": self.peak_mag,
            "residual": self.residual,
        }


def _line_concentration(power: np.ndarray) -> tuple[int, float]:
    # a line is the peak bin plus its two neighbours
    total = power.sum()
    if total <= 0:
        return 0, 0.0
    k = int(np.argmax(power))
    line = power[max(k - 1, 0) : k + 2].sum()
    return k, float(line / total)


def classify_dicke(strobe, T: float = 2 * math.pi, tolerances: Tolerances = Tolerances()) -> PhaseLabel:
    """Label a post-burn-in stroboscopic series as DTC, PERIOD_1, LIMIT_CYCLE or THERMAL.

    Fixed-point and period-2 tests act on the samples directly. Otherwise the series is
    a limit cycle when one line of its one-sided stroboscopic spectrum, away from DC and
    from the Omega0/2 carrier, carries at least ``conc_min`` of the power outside those
    two bins. Stroboscopic sampling folds the drive sidebands of an incommensurate
    frequency onto a single line, and a period-2 response with a slowly oscillating
    envelope shows up as a sideband of the carrier.
    """
    s = np.asarray(strobe, dtype=float)
    if s.ndim != 1 or s.size < 8:
        raise SpectralError(f"need at least 8 stroboscopic samples, got {s.size}")
    if not np.all(np.isfinite(s)):
        raise SpectralError("series contains non-finite values")
    tol = tolerances
    d1 = np.abs(np.diff(s))
    d2 = np.abs(s[2:] - s[:-2])

    spec = stroboscopic_fft(s[: s.size - s.size % 2], T)
    half = spec.half_bin
    # one-sided power over bins 1..M/2-1, mirror bins folded in; carrier and DC left out
    power = 2 * spec.mags[1:half] ** 2
    k, conc = _line_concentration(power)
    f = fcma(spec)
    peak_mag = float(spec.mags[1:].max())

    if d1.max() < tol.tol_fix:
        label = Phase.PERIOD_1
    elif d2.max() < tol.tol_fix and d1.min() > tol.tol_flip:
        label = Phase.DTC
    elif conc >= tol.conc_min:
        label = Phase.LIMIT_CYCLE
    else:
        label = Phase.THERMAL
    return PhaseLabel(label, f, peak_mag, 1.0 - conc)
