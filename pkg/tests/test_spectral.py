import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dtcforge.spectral import (
    Phase,
    SpectralError,
    Spectrum,
    Tolerances,
    classify_dicke,
    dtc_peak_test,
    fcma,
    naive_dft,
    stroboscopic_fft,
)

T = 2.0
OMEGA0 = math.pi


def delta(M, k, mag):
    m = np.zeros(M)
    m[k] = mag
    return Spectrum.from_mags(m, T)


def test_alternating_series_is_unit_peak():
    spec = stroboscopic_fft((-1.0) ** np.arange(64), T)
    assert spec.mags[32] == pytest.approx(1.0, abs=1e-15)
    assert np.max(np.delete(spec.mags, 32)) < 1e-14
    assert spec.freqs[32] == pytest.approx(OMEGA0 / 2)


def test_bin_frequencies():
    spec = stroboscopic_fft(np.zeros(16), T)
    assert np.allclose(spec.freqs, np.arange(16) * OMEGA0 / 16)


@pytest.mark.parametrize("M", [8, 16, 64, 256])
def test_matches_naive_dft(M):
    rng = np.random.default_rng(M)
    for _ in range(25):
        x = rng.normal(size=M)
        assert np.max(np.abs(stroboscopic_fft(x, T).mags - np.abs(naive_dft(x)))) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([8, 16, 64, 256]), st.integers(0, 2**31))
def test_parseval(M, seed):
    x = np.random.default_rng(seed).normal(size=M)
    mags = stroboscopic_fft(x, T).mags
    assert np.sum(mags**2) == pytest.approx(np.sum(x**2) / M, rel=1e-9)


@given(st.floats(0, 100), st.integers(0, 1000))
def test_linearity(a, seed):
    x = np.random.default_rng(seed).normal(size=32)
    assert np.allclose(stroboscopic_fft(a * x, T).mags, a * stroboscopic_fft(x, T).mags, rtol=1e-12, atol=1e-14)


def test_input_validation():
    with pytest.raises(SpectralError):
        stroboscopic_fft(np.ones(7), T)
    with pytest.raises(SpectralError):
        stroboscopic_fft(np.ones(6), T)
    with pytest.raises(SpectralError):
        stroboscopic_fft([1, 2, math.nan, 4, 5, 6, 7, 8], T)


def test_fcma_examples():
    assert fcma(delta(16, 8, 1.0)) == pytest.approx(OMEGA0 / 2)
    m = np.zeros(16)
    m[3] = m[5] = 0.7
    assert fcma(Spectrum.from_mags(m, T)) == pytest.approx(3 * OMEGA0 / 16)
    assert fcma(Spectrum.from_mags(np.zeros(16), T)) is None


def test_fcma_with_dc_offset():
    s = (-1.0) ** np.arange(32) + 0.1
    spec = stroboscopic_fft(s, T)
    # both bins computed by hand: DC carries the offset, Omega0/2 the alternation
    assert spec.mags[0] == pytest.approx(0.1, abs=1e-14)
    assert spec.mags[16] == pytest.approx(1.0, abs=1e-14)
    assert fcma(spec) == pytest.approx(OMEGA0 / 2)
    big_offset = stroboscopic_fft((-1.0) ** np.arange(32) + 3.0, T)
    assert fcma(big_offset) == pytest.approx(OMEGA0 / 2)
    assert fcma(big_offset, exclude_dc=False) == 0.0


def test_peak_test_examples():
    assert dtc_peak_test(delta(64, 32, 1.0)).passed
    res = dtc_peak_test(delta(64, 32, 0.04))
    assert not res.passed and res.peak_mag == 0.04
    assert not dtc_peak_test(delta(66, 22, 0.5)).passed  # Omega0/3 bin


def test_classifier_period_two():
    lab = classify_dicke(0.4 * (-1.0) ** np.arange(128), T)
    assert lab.label is Phase.DTC
    assert lab.peak_freq == pytest.approx(OMEGA0 / 2)


def test_classifier_fixed_point():
    assert classify_dicke(np.full(128, 0.4), T).label is Phase.PERIOD_1


def test_classifier_incommensurate_line():
    # dense signal sin(0.37 Omega0 t), observed only at t = nT
    t = np.arange(128) * T
    lab = classify_dicke(np.sin(0.37 * OMEGA0 * t), T)
    assert lab.label is Phase.LIMIT_CYCLE
    assert lab.residual < 0.6


def test_classifier_modulated_period_two_is_limit_cycle():
    n = np.arange(128)
    s = (0.3 + 0.05 * np.cos(2 * math.pi * 0.11 * n)) * (-1.0) ** n
    assert classify_dicke(s, T).label is Phase.LIMIT_CYCLE


def test_classifier_noise_is_thermal():
    s = np.random.default_rng(0).normal(size=256)
    lab = classify_dicke(s, T)
    assert lab.label is Phase.THERMAL
    assert lab.residual > 0.6


def test_classifier_rejects_short_series():
    with pytest.raises(SpectralError):
        classify_dicke(np.ones(7), T)


def test_classifier_tolerances_are_honoured():
    s = 0.4 * (-1.0) ** np.arange(64) + 1e-4 * np.arange(64)  # slow drift: |s[n] - s[n+2]| = 2e-4
    strict = classify_dicke(s, T, Tolerances(tol_fix=1e-6))
    loose = classify_dicke(s, T, Tolerances(tol_fix=1e-1))
    assert loose.label is Phase.DTC and strict.label is not Phase.DTC


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["noise", "alt", "const", "sine"]))
def test_classifier_is_pure_and_consistent(seed, kind):
    rng = np.random.default_rng(seed)
    n = np.arange(64)
    s = {
        "noise": rng.normal(size=64),
        "alt": rng.uniform(0.05, 1) * (-1.0) ** n + rng.normal(scale=1e-5, size=64),
        "const": np.full(64, rng.uniform(-1, 1)),
        "sine": np.sin(rng.uniform(0.05, 0.45) * 2 * math.pi * n),
    }[kind]
    a, b = classify_dicke(s, T), classify_dicke(s.copy(), T)
    assert a == b
    tol = Tolerances()
    d1, d2 = np.abs(np.diff(s)), np.abs(s[2:] - s[:-2])
    if a.label is Phase.PERIOD_1:
        assert d1.max() < tol.tol_fix
    elif a.label is Phase.DTC:
        assert d2.max() < tol.tol_fix and d1.min() > tol.tol_flip
    elif a.label is Phase.LIMIT_CYCLE:
        assert 1 - a.residual >= tol.conc_min
    else:
        assert 1 - a.residual < tol.conc_min


def test_phase_label_json_record():
    d = classify_dicke(0.4 * (-1.0) ** np.arange(16), T).to_dict()
    assert set(d) == {"label", "peak_freq", "peak_mag", "residual"} and d["label"] == "DTC"
