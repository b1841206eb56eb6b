"""CRAB truncated-Fourier pulses, gated pulses and the on/off reference pulse.

A Fourier pulse is

    value(t) = A0 + 1/(2 N_c) * sum_n (A_n cos(nu_n t) + B_n sin(nu_n t)),
    nu_n = 2 pi n / T.

Coefficient vectors used by the optimizer are flat: ``[A0, A_1..A_Nc, B_1..B_Nc]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class PulseError(ValueError):
    """Invalid pulse input (non-finite values, bad shapes, bad gate)."""


def _check_finite(*values) -> None:
    for v in values:
        if not np.all(np.isfinite(v)):
            raise PulseError(f"non-finite pulse input: {v!r}")


@dataclass(frozen=True)
class FourierPulse:
    A0: float
    A: tuple[float, ...]
    B: tuple[float, ...]
    T: float
    chi: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(float(a) for a in self.A))
        object.__setattr__(self, "B", tuple(float(b) for b in self.B))
        object.__setattr__(self, "A0", float(self.A0))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "chi", float(self.chi))
        if len(self.A) != len(self.B) or len(self.A) < 1:
            raise PulseError(f"need len(A) == len(B) >= 1, got {len(self.A)}, {len(self.B)}")
        _check_finite(self.A0, self.A, self.B, self.T)
        if self.T <= 0:
            raise PulseError(f"period must be positive, got {self.T}")
        if self.chi < 0:
            raise PulseError(f"chi must be non-negative, got {self.chi}")
        bad = [c for c in self.A + self.B if abs(c) > self.chi]
        if bad:
            raise PulseError(f"harmonic coefficients exceed chi={self.chi}: {bad}")

    @property
    def n_modes(self) -> int:
        return len(self.A)

    @property
    def omega0(self) -> float:
        return 2 * math.pi / self.T

    @classmethod
    def constant(cls, A0: float, n_modes: int, T: float, chi: float = math.inf) -> "FourierPulse":
        return cls(A0, (0.0,) * n_modes, (0.0,) * n_modes, T, chi)

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[float], T: float, chi: float = math.inf) -> "FourierPulse":
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 1 or c.size < 3 or c.size % 2 == 0:
            raise PulseError(f"coefficient vector must have length 1 + 2*N_c, got {c.size}")
        nc = (c.size - 1) // 2
        return cls(c[0], tuple(c[1 : nc + 1]), tuple(c[nc + 1 :]), T, chi)

    def coeffs(self) -> np.ndarray:
        return np.array((self.A0,) + self.A + self.B)

    def __call__(self, t):
        return evaluate(self, t)


@dataclass(frozen=True)
class GatedPulse:
    """Fourier pulse switched on for ``0 <= t mod T < gate_fraction * T``, zero otherwise."""

    inner: FourierPulse
    gate_fraction: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "gate_fraction", float(self.gate_fraction))
        if not 0 < self.gate_fraction <= 1:
            raise PulseError(f"gate_fraction must lie in (0, 1], got {self.gate_fraction}")

    @property
    def T(self) -> float:
        return self.inner.T

    @property
    def gate_end(self) -> float:
        return self.gate_fraction * self.inner.T

    def __call__(self, t):
        return evaluate_gated(self, t)


@dataclass(frozen=True)
class OnOffPulse:
    """Square wave: ``lambda0`` in the first half period, 0 in the second."""

    lambda0: float
    T: float

    @property
    def gate_end(self) -> float:
        return self.T / 2

    def __call__(self, t):
        return on_off_pulse(self.lambda0, self.T, t)


def _reduce(t, T):
    t = np.asarray(t, dtype=float)
    _check_finite(t)
    return np.mod(t, T)


def _harmonics(pulse: FourierPulse, tau):
    n = np.arange(1, pulse.n_modes + 1)
    arg = np.multiply.outer(tau, 2 * math.pi * n / pulse.T)
    return (np.cos(arg) @ np.array(pulse.A) + np.sin(arg) @ np.array(pulse.B)) / (2 * pulse.n_modes)


def evaluate(pulse: FourierPulse, t):
    """Pulse value at time(s) ``t``; time is reduced modulo T first."""
    tau = _reduce(t, pulse.T)
    out = pulse.A0 + _harmonics(pulse, tau)
    return float(out) if np.ndim(out) == 0 else out


def evaluate_gated(pulse: GatedPulse, t):
    tau = _reduce(t, pulse.T)
    inner = pulse.inner.A0 + _harmonics(pulse.inner, tau)
    out = np.where(tau < pulse.gate_end, inner, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def on_off_pulse(lambda0: float, T: float, t):
    if T <= 0:
        raise PulseError(f"period must be positive, got {T}")
    _check_finite(lambda0)
    tau = _reduce(t, T)
    out = np.where(tau < T / 2, float(lambda0), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _antiderivative(pulse: FourierPulse, t: float) -> float:
    # t is absolute time: A0*t grows, harmonics stay bounded
    total = pulse.A0 * t
    scale = 1.0 / (2 * pulse.n_modes)
    for n, (a, b) in enumerate(zip(pulse.A, pulse.B), start=1):
        nu = 2 * math.pi * n / pulse.T
        total += scale * (a * math.sin(nu * t) - b * math.cos(nu * t)) / nu
    return total


def _integrate_fourier(pulse: FourierPulse, t0: float, t1: float) -> float:
    # split off whole periods, on which the harmonics integrate to zero
    T = pulse.T
    k = math.floor(t0 / T)
    t0r, t1r = t0 - k * T, t1 - k * T
    return _antiderivative(pulse, t1r) - _antiderivative(pulse, t0r)


def integrate(pulse, t0: float, t1: float) -> float:
    """Closed-form integral of a Fourier, gated or on/off pulse over ``[t0, t1]``."""
    _check_finite(t0, t1)
    if t1 < t0:
        raise PulseError(f"need t0 <= t1, got [{t0}, {t1}]")
    if isinstance(pulse, FourierPulse):
        return _integrate_fourier(pulse, t0, t1)
    if isinstance(pulse, OnOffPulse):
        inner = FourierPulse.constant(pulse.lambda0, 1, pulse.T)
        return integrate(GatedPulse(inner, 0.5), t0, t1)
    if not isinstance(pulse, GatedPulse):
        raise PulseError(f"cannot integrate {type(pulse).__name__}")
    T, g = pulse.T, pulse.gate_end
    total = 0.0
    k = math.floor(t0 / T)
    while k * T < t1:
        a, b = max(t0, k * T), min(t1, k * T + g)
        if b > a:
            total += _integrate_fourier(pulse.inner, a, b)
        k += 1
    return total


def on_window_mean(pulse) -> float:
    """Average pulse value over the window in which it is switched on."""
    if isinstance(pulse, FourierPulse):
        return pulse.A0
    if isinstance(pulse, OnOffPulse):
        return pulse.lambda0
    if isinstance(pulse, GatedPulse):
        return integrate(pulse, 0.0, pulse.gate_end) / pulse.gate_end
    raise PulseError(f"no on-window defined for {type(pulse).__name__}")


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise PulseError("bounds must be two 1-D arrays of equal length")
        if np.any(lo > hi):
            raise PulseError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __len__(self):
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def as_pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.lower.tolist(), self.upper.tolist()))


def crab_bounds(n_modes: int, chi: float, a0_bound: float | None = None) -> Bounds:
    """Box ``|A0| <= a0_bound`` (defaults to chi), ``|A_n|, |B_n| <= chi``."""
    a0 = chi if a0_bound is None else a0_bound
    half = np.array([a0] + [chi] * (2 * n_modes), dtype=float)
    return Bounds(-half, half)


def project_into_bounds(coeffs, bounds) -> np.ndarray:
    """Componentwise clamp of ``coeffs`` into ``bounds`` (a Bounds or list of (lo, hi))."""
    if not isinstance(bounds, Bounds):
        pairs = np.asarray(bounds, dtype=float).reshape(-1, 2)
        bounds = Bounds(pairs[:, 0], pairs[:, 1])
    x = np.asarray(coeffs, dtype=float)
    if x.shape != bounds.lower.shape:
        raise PulseError(f"length mismatch: {x.size} coefficients, {len(bounds)} bounds")
    return np.minimum(np.maximum(x, bounds.lower), bounds.upper)


def pulse_to_dict(pulse) -> dict:
    if isinstance(pulse, GatedPulse):
        d = pulse_to_dict(pulse.inner)
        d["gate_fraction"] = pulse.gate_fraction
        return d
    if isinstance(pulse, FourierPulse):
        return {
            "A0": pulse.A0,
            "A": list(pulse.A),
            "B": list(pulse.B),
            "T": pulse.T,
            "chi": pulse.chi if math.isfinite(pulse.chi) else None,
            "gate_fraction": None,
        }
    raise PulseError(f"cannot serialize {type(pulse).__name__}")


def pulse_from_dict(d: dict):
    known = {"A0", "A", "B", "T", "chi", "gate_fraction"}
    unknown = set(d) - known
    if unknown:
        raise PulseError(f"unknown pulse keys: {sorted(unknown)}")
    missing = {"A0", "A", "B", "T"} - set(d)
    if missing:
        raise PulseError(f"missing pulse keys: {sorted(missing)}")
    chi = d.get("chi")
    inner = FourierPulse(d["A0"], d["A"], d["B"], d["T"], math.inf if chi is None else chi)
    gate = d.get("gate_fraction")
    return inner if gate is None else GatedPulse(inner, gate)
