"""Exact stroboscopic evolution of the disordered, kicked Ising chain.

Basis index bit ``i`` holds spin ``i + 1`` (sites are numbered 1..L); bit value 0 is
spin up (z = +1). One Floquet period applies a uniform x-rotation ``exp(-i phi sigma_x)``
on every site followed by the diagonal Ising evolution ``exp(-i H2 (T - T1))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .pulse import GatedPulse, integrate

JZ_MEAN = 0.2 * math.pi


@dataclass(frozen=True)
class ChainParams:
    L: int = 8
    g: float = math.pi / 2
    T: float = 2.0
    T1: float = 1.0

    def __post_init__(self):
        if self.L < 2:
            raise ValueError(f"chain length L must be >= 2, got {self.L}")
        if self.L > 20:
            raise ValueError(f"chain length L={self.L} exceeds the exact-evolution limit of 20")
        if not 0 < self.T1 < self.T:
            raise ValueError(f"need 0 < T1 < T, got T1={self.T1}, T={self.T}")

    @property
    def dim(self) -> int:
        return 1 << self.L


@dataclass(frozen=True)
class DisorderRealization:
    Jz: tuple[float, ...]
    Bz: tuple[float, ...]
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "Jz", tuple(float(v) for v in self.Jz))
        object.__setattr__(self, "Bz", tuple(float(v) for v in self.Bz))
        if len(self.Jz) != len(self.Bz) - 1:
            raise ValueError(f"need len(Jz) == len(Bz) - 1, got {len(self.Jz)}, {len(self.Bz)}")

    @property
    def L(self) -> int:
        return len(self.Bz)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "Jz": list(self.Jz), "Bz": list(self.Bz)}

    @classmethod
    def from_dict(cls, d: dict) -> "DisorderRealization":
        unknown = set(d) - {"seed", "Jz", "Bz"}
        if unknown:
            raise ValueError(f"unknown disorder keys: {sorted(unknown)}")
        return cls(d["Jz"], d["Bz"], d.get("seed"))


def sample_disorder(seed: int, params: ChainParams, jz_mean: float = JZ_MEAN) -> DisorderRealization:
    """Jz ~ U[0.8, 1.2] * jz_mean on the L-1 bonds, Bz ~ U[0, 2 pi] on the L sites."""
    rng = np.random.default_rng(seed)
    jz = rng.uniform(0.8 * jz_mean, 1.2 * jz_mean, params.L - 1)
    bz = rng.uniform(0.0, 2 * math.pi, params.L)
    return DisorderRealization(tuple(jz), tuple(bz), int(seed))


def x_rotation_angle(theta_pulse: GatedPulse | None, params: ChainParams) -> float:
    """phi = integral over [0, T1] of (g - theta_t) dt."""
    phi = params.g * params.T1
    if theta_pulse is None:
        return phi
    if isinstance(theta_pulse, GatedPulse) and theta_pulse.gate_end > params.T1 * (1 + 1e-12):
        raise ValueError("theta gate extends beyond the transverse-field segment")
    return phi - integrate(theta_pulse, 0.0, params.T1)


def spin_values(L: int) -> np.ndarray:
    """(2^L, L) array of z_i = +-1 for every basis state."""
    idx = np.arange(1 << L)
    return 1 - 2 * ((idx[:, None] >> np.arange(L)[None, :]) & 1)


def ising_energies(disorder: DisorderRealization) -> np.ndarray:
    z = spin_values(disorder.L).astype(float)
    return (z[:, :-1] * z[:, 1:]) @ np.array(disorder.Jz) + z @ np.array(disorder.Bz)


@numba.njit(cache=True)
def _rotate_all(psi, L, c, s):
    D = psi.shape[0]
    for i in range(L):
        m = 1 << i
        for b in range(D):
            if b & m == 0:
                a0 = psi[b]
                a1 = psi[b | m]
                psi[b] = c * a0 + s * a1
                psi[b | m] = s * a0 + c * a1


def apply_u1(state, phi: float) -> np.ndarray:
    """exp(-i phi sigma_x) on every site; returns a new array."""
    psi = np.array(state, dtype=np.complex128)
    L = int(round(math.log2(psi.size)))
    _rotate_all(psi, L, math.cos(phi), -1j * math.sin(phi))
    return psi


def apply_u2(state, disorder: DisorderRealization, duration: float) -> np.ndarray:
    return np.asarray(state, dtype=np.complex128) * np.exp(-1j * ising_energies(disorder) * duration)


def evolve_period(state, phi: float, disorder: DisorderRealization, params: ChainParams) -> np.ndarray:
    return apply_u2(apply_u1(state, phi), disorder, params.T - params.T1)


def basis_state(L: int, spins: Sequence[int]) -> np.ndarray:
    """Product state from z values (+1 up, -1 down) listed for sites 1..L."""
    idx = sum(1 << i for i, z in enumerate(spins) if z < 0)
    psi = np.zeros(1 << L, dtype=np.complex128)
    psi[idx] = 1.0
    return psi


def sigma_z_expectation(state, site: int) -> float:
    psi = np.asarray(state)
    z = spin_values(int(round(math.log2(psi.size))))[:, site - 1]
    return float(np.sum(z * np.abs(psi) ** 2))


@numba.njit(cache=True)
def _autocorr(starts, phase, zsite, L, c, s, n_periods):
    D = phase.shape[0]
    ns = zsite.shape[1]
    out = np.zeros((n_periods + 1, ns))
    psi = np.empty(D, dtype=np.complex128)
    for z in starts:
        psi[:] = 0.0
        psi[z] = 1.0
        for k in range(ns):
            out[0, k] += zsite[z, k] * zsite[z, k]
        for n in range(1, n_periods + 1):
            _rotate_all(psi, L, c, s)
            for b in range(D):
                psi[b] *= phase[b]
            for k in range(ns):
                acc = 0.0
                for b in range(D):
                    acc += zsite[b, k] * (psi[b].real ** 2 + psi[b].imag ** 2)
                out[n, k] += zsite[z, k] * acc
    return out


def initial_states(L: int, n_random: int | None = None, seed: int = 0) -> np.ndarray:
    """All 2^L product-state indices, or a seeded random subset of ``n_random`` of them."""
    if n_random is None:
        return np.arange(1 << L)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(1 << L, size=n_random, replace=False))


def autocorrelation(
    sites: Sequence[int],
    disorder: DisorderRealization,
    phi: float,
    params: ChainParams,
    n_periods: int,
    starts: np.ndarray | None = None,
) -> np.ndarray:
    """R_i(nT) for n = 0..n_periods; shape (n_periods + 1, len(sites)).

    Averages z_i <psi_z(nT)| sigma_z^i |psi_z(nT)> over the product states ``starts``
    (default: all 2^L), accumulated in fixed index order.
    """
    if disorder.L != params.L:
        raise ValueError(f"disorder has L={disorder.L}, params have L={params.L}")
    bad = [i for i in sites if not 1 <= i <= params.L]
    if bad or not sites:
        raise ValueError(f"sites must be a non-empty subset of 1..{params.L}, got {list(sites)}")
    if starts is None:
        starts = initial_states(params.L)
    starts = np.asarray(starts, dtype=np.int64)
    phase = np.exp(-1j * ising_energies(disorder) * (params.T - params.T1))
    zsite = spin_values(params.L)[:, [i - 1 for i in sites]].astype(float)
    out = _autocorr(starts, phase, np.ascontiguousarray(zsite), params.L,
                    math.cos(phi), -1j * math.sin(phi), int(n_periods))
    return out / starts.size


def site_averaged_autocorrelation(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[1] == 0:
        raise ValueError("need per-site series of shape (n_times, n_sites >= 1)")
    return R.mean(axis=1)


def averaged_autocorrelation(
    sites: Sequence[int],
    disorders: Sequence[DisorderRealization],
    phi: float,
    params: ChainParams,
    n_periods: int,
    starts: np.ndarray | None = None,
) -> np.ndarray:
    """Site- and disorder-averaged R-bar(nT)."""
    total = np.zeros(n_periods + 1)
    for d in disorders:
        total += site_averaged_autocorrelation(autocorrelation(sites, d, phi, params, n_periods, starts))
    return total / len(disorders)
