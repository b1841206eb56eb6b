import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from dtcforge.pulse import (
    Bounds,
    FourierPulse,
    GatedPulse,
    OnOffPulse,
    PulseError,
    crab_bounds,
    evaluate,
    evaluate_gated,
    integrate,
    on_off_pulse,
    on_window_mean,
    project_into_bounds,
    pulse_from_dict,
    pulse_to_dict,
)

coef = st.floats(-10, 10, allow_nan=False)


@st.composite
def fourier_pulses(draw, max_modes=6):
    n = draw(st.integers(1, max_modes))
    A = draw(st.lists(coef, min_size=n, max_size=n))
    B = draw(st.lists(coef, min_size=n, max_size=n))
    return FourierPulse(draw(coef), A, B, draw(st.floats(0.5, 10)))


def test_constant_pulse():
    p = FourierPulse.constant(0.65, 4, 2.0)
    assert evaluate(p, 0.3) == 0.65
    assert np.all(evaluate(p, np.linspace(0, 10, 17)) == 0.65)


def test_cosines_at_zero():
    p = FourierPulse(1.0, [4, 0], [7, 7], 1.0)
    assert evaluate(p, 0.0) == pytest.approx(2.0, abs=1e-15)


@given(fourier_pulses(), st.floats(-50, 50))
def test_periodicity(p, t):
    a, b = evaluate(p, t + p.T), evaluate(p, t)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(b)) + 1e-11


def test_vectorized_matches_scalar():
    p = FourierPulse(0.3, [1, -2, 0.5], [0.1, 0, 3], 2 * math.pi)
    ts = np.linspace(-3, 30, 41)
    assert np.allclose(evaluate(p, ts), [evaluate(p, t) for t in ts], rtol=0, atol=1e-14)


def test_non_finite_rejected():
    p = FourierPulse.constant(1.0, 1, 1.0)
    with pytest.raises(PulseError):
        evaluate(p, math.nan)
    with pytest.raises(PulseError):
        FourierPulse(math.inf, [0], [0], 1.0)


def test_shape_and_chi_validation():
    with pytest.raises(PulseError):
        FourierPulse(0, [1, 2], [1], 1.0)
    with pytest.raises(PulseError):
        FourierPulse(0, [11], [0], 1.0, chi=10)
    with pytest.raises(PulseError):
        FourierPulse(0, [1], [0], -1.0)


@pytest.mark.parametrize("t, expected", [(0.25, 2.0), (0.75, 0.0), (1.25, 2.0), (0.5, 0.0), (0.0, 2.0)])
def test_on_off(t, expected):
    assert on_off_pulse(2.0, 1.0, t) == expected
    assert OnOffPulse(2.0, 1.0)(t) == expected


@pytest.mark.parametrize("frac, expected", [(0.2, 0.45), (0.7, 0.0), (1.2, 0.45), (0.5, 0.0)])
def test_gated(frac, expected):
    g = GatedPulse(FourierPulse.constant(0.45, 3, 2.0), 0.5)
    assert evaluate_gated(g, frac * 2.0) == expected


def test_gate_fraction_validated():
    with pytest.raises(PulseError):
        GatedPulse(FourierPulse.constant(0.45, 3, 2.0), 0.0)
    with pytest.raises(PulseError):
        GatedPulse(FourierPulse.constant(0.45, 3, 2.0), 1.5)


def test_integrate_examples():
    assert integrate(FourierPulse.constant(0.45, 5, 3.0), 0, 2) == pytest.approx(0.9, abs=1e-15)
    harm = FourierPulse(0.0, [3, -1], [2, 5], 1.7)
    assert integrate(harm, 0, 1.7) == pytest.approx(0.0, abs=1e-14)
    one = FourierPulse(0.0, [2], [0], 2.0)
    assert integrate(one, 0, 1.0) == pytest.approx(0.0, abs=1e-15)
    # quadrature oracle for the same half-period integral
    assert quad(lambda t: evaluate(one, t), 0, 1.0)[0] == pytest.approx(0.0, abs=1e-12)


def test_integrate_rejects_reversed_interval():
    with pytest.raises(PulseError):
        integrate(FourierPulse.constant(1, 1, 1), 1.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(fourier_pulses(max_modes=4), st.floats(-5, 5), st.floats(0, 4))
def test_integral_matches_quadrature(p, t0, span):
    exact = integrate(p, t0, t0 + span)
    num = quad(lambda t: evaluate(p, t), t0, t0 + span, limit=500, epsabs=1e-13, epsrel=1e-13)[0]
    assert exact == pytest.approx(num, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(fourier_pulses(max_modes=4), st.floats(0.1, 1.0), st.floats(-3, 3), st.floats(0, 6))
def test_gated_integral_matches_quadrature(p, frac, t0, span):
    g = GatedPulse(p, frac)
    exact = integrate(g, t0, t0 + span)
    ks = range(math.floor(t0 / p.T) - 1, math.ceil((t0 + span) / p.T) + 1)
    edges = sorted({t0, t0 + span} | {k * p.T + d for k in ks for d in (0, frac * p.T)
                                      if t0 < k * p.T + d < t0 + span})
    num = sum(quad(lambda t: evaluate_gated(g, t), a, b, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
              for a, b in zip(edges[:-1], edges[1:]))
    assert exact == pytest.approx(num, abs=1e-10)


@given(fourier_pulses())
def test_mean_over_period_is_A0(p):
    assert abs(integrate(p, 0, p.T) / p.T - p.A0) < 1e-10


def test_on_window_mean():
    assert on_window_mean(FourierPulse(0.7, [1], [2], 3.0)) == 0.7
    assert on_window_mean(OnOffPulse(1.3, 2.0)) == 1.3
    g = GatedPulse(FourierPulse.constant(0.45, 2, 2.0), 0.5)
    assert on_window_mean(g) == pytest.approx(0.45, abs=1e-15)


def test_projection_examples():
    b = Bounds([-10, -10], [10, 10])
    assert project_into_bounds([12, -3], b).tolist() == [10, -3]
    assert project_into_bounds([1.5, -3], [(-10, 10), (-10, 10)]).tolist() == [1.5, -3]
    with pytest.raises(PulseError):
        project_into_bounds([1, 2, 3], b)


@given(st.lists(st.floats(-100, 100), min_size=5, max_size=5))
def test_projection_properties(v):
    b = crab_bounds(2, 1.0, a0_bound=3.0)
    p = project_into_bounds(v, b)
    assert np.array_equal(project_into_bounds(p, b), p)
    assert np.all(np.abs(p) <= np.abs(v))
    assert b.contains(p)


def test_crab_bounds_separate_a0():
    b = crab_bounds(6, 5e-4, a0_bound=1.0)
    assert b.upper[0] == 1.0 and np.all(b.upper[1:] == 5e-4) and len(b) == 13


def test_coefficient_roundtrip():
    p = FourierPulse(0.1, [1, 2, 3], [4, 5, 6], 2.0)
    q = FourierPulse.from_coeffs(p.coeffs(), 2.0)
    assert p == q


def test_json_roundtrip():
    p = FourierPulse(0.1, [1, 2], [3, 4], 2.0, chi=10)
    assert pulse_from_dict(pulse_to_dict(p)) == p
    g = GatedPulse(p, 0.5)
    d = pulse_to_dict(g)
    assert set(d) == {"A0", "A", "B", "T", "chi", "gate_fraction"}
    assert pulse_from_dict(d) == g
    with pytest.raises(PulseError):
        pulse_from_dict({**d, "extra": 1})
