"""Objectives and drivers that tie pulses, models, costs and the optimizer together."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import chain as ch
from . import dicke as dk
from .config import ExperimentConfig
from .cost import CostBreakdown, cost_chain, cost_dicke
from .optimizer import OptimizationProblem, OptimizationReport, minimize
from .pulse import FourierPulse, GatedPulse, crab_bounds
from .spectral import PhaseLabel, Spectrum, Tolerances, classify_dicke, stroboscopic_fft


def tolerances(cfg: ExperimentConfig) -> Tolerances:
    t = cfg.tolerances
    return Tolerances(t.tol_fix, t.tol_flip, t.conc_min)


# ---------------------------------------------------------------- Dicke


def dicke_params(cfg: ExperimentConfig, epsilon: float | None = None) -> dk.DickeParams:
    d = cfg.dicke
    return dk.DickeParams(d.epsilon if epsilon is None else epsilon, d.kappa, d.omega_T)


def dicke_period(cfg: ExperimentConfig) -> float:
    return cfg.pulse.period or 2 * math.pi / cfg.dicke.omega_T


def dicke_guess(cfg: ExperimentConfig) -> FourierPulse:
    A, B = cfg.pulse.harmonics()
    return FourierPulse(cfg.pulse.A0, A, B, dicke_period(cfg), cfg.pulse.chi)


def dicke_bounds(cfg: ExperimentConfig):
    return crab_bounds(cfg.pulse.n_modes, cfg.pulse.chi, cfg.pulse.a0_bound)


def dicke_initial_state(cfg: ExperimentConfig, params: dk.DickeParams | None = None) -> dk.DickeState:
    """The run's single starting point: a broken steady state at ``initial_lambda``.

    When ``initial_lambda`` is unset the coupling is the on-window mean of the configured
    guess pulse, so the objective, both classifications and any sweep share one state.
    """
    params = params or dicke_params(cfg)
    d = cfg.dicke
    return dk.driven_initial_state(params, dicke_guess(cfg), d.initial_branch, d.initial_lambda)


def run_dicke(cfg: ExperimentConfig, pulse, n_periods: int, epsilon: float | None = None) -> dk.Trajectory:
    params = dicke_params(cfg, epsilon)
    T = dicke_period(cfg)
    y0 = dicke_initial_state(cfg, params)
    return dk.evolve(y0, params, pulse, n_periods * T, T / cfg.dicke.steps_per_period)


def dicke_objective(cfg: ExperimentConfig):
    d = cfg.dicke
    T = dicke_period(cfg)
    params = dicke_params(cfg)
    y0 = dicke_initial_state(cfg, params)
    n_periods = d.burn_in + d.window + 3
    dt = T / d.steps_per_period
    max_sub = d.objective_max_steps_per_period // d.steps_per_period

    def objective(coeffs) -> CostBreakdown:
        pulse = FourierPulse.from_coeffs(coeffs, T)
        try:
            traj = dk.evolve(y0, params, pulse, n_periods * T, dt, max_substeps=max_sub)
        except dk.DivergenceError:
            return CostBreakdown(math.inf, {})
        return cost_dicke(dk.stroboscopic(traj, T, "jx"), d.burn_in, d.eps_div, d.window)

    return objective


def classify_dicke_pulse(cfg: ExperimentConfig, pulse, epsilon: float | None = None):
    """Classify stroboscopic jx over ``report_periods`` after ``classify_burn_in`` transient periods."""
    d = cfg.dicke
    T = dicke_period(cfg)
    traj = run_dicke(cfg, pulse, d.classify_burn_in + d.report_periods, epsilon)
    strobe = dk.stroboscopic(traj, T, "jx")
    label = classify_dicke(strobe[d.classify_burn_in : d.classify_burn_in + d.report_periods], T, tolerances(cfg))
    return traj, strobe, label


@dataclass
class DickeResult:
    guess: FourierPulse
    optimized: FourierPulse
    report: OptimizationReport
    guess_cost: CostBreakdown
    best_cost: CostBreakdown
    guess_traj: dk.Trajectory
    optimized_traj: dk.Trajectory
    guess_label: PhaseLabel
    optimized_label: PhaseLabel


def optimize_dicke(cfg: ExperimentConfig) -> DickeResult:
    guess = dicke_guess(cfg)
    o = cfg.optimizer
    problem = OptimizationProblem(
        dicke_objective(cfg), dicke_bounds(cfg), guess.coeffs(), o.budget, o.tol, o.seed, o.n_starts, o.workers
    )
    report = minimize(problem)
    best = FourierPulse.from_coeffs(report.best_coeffs, guess.T, cfg.pulse.chi)
    g_traj, _, g_label = classify_dicke_pulse(cfg, guess)
    o_traj, _, o_label = classify_dicke_pulse(cfg, best)
    best_rec = min(report.trace, key=lambda r: r.cost.total)
    return DickeResult(guess, best, report, report.trace[0].cost, best_rec.cost,
                       g_traj, o_traj, g_label, o_label)


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    label: str
    peak_freq: float | None
    peak_mag: float


def dicke_sweep(cfg: ExperimentConfig, pulse, epsilons) -> list[SweepRow]:
    """Classify the fixed pulse at each detuning; rows sorted by epsilon."""
    rows = []
    for eps in sorted(float(e) for e in epsilons):
        try:
            _, _, lab = classify_dicke_pulse(cfg, pulse, eps)
            rows.append(SweepRow(eps, lab.label.value, lab.peak_freq, lab.peak_mag))
        except dk.DivergenceError:
            rows.append(SweepRow(eps, "DIVERGED", None, math.nan))
    return rows


# ---------------------------------------------------------------- chain


def chain_params(cfg: ExperimentConfig) -> ch.ChainParams:
    c = cfg.chain
    return ch.ChainParams(c.L, c.g, c.T, c.T1)


def chain_disorders(cfg: ExperimentConfig) -> list[ch.DisorderRealization]:
    c = cfg.chain
    params = chain_params(cfg)
    return [ch.sample_disorder(c.disorder_seed + k, params) for k in range(c.n_disorder)]


def chain_guess(cfg: ExperimentConfig) -> GatedPulse:
    A, B = cfg.pulse.harmonics()
    inner = FourierPulse(cfg.pulse.A0, A, B, cfg.chain.T, cfg.pulse.chi)
    return GatedPulse(inner, cfg.pulse.gate_fraction or cfg.chain.T1 / cfg.chain.T)


def chain_bounds(cfg: ExperimentConfig):
    return crab_bounds(cfg.pulse.n_modes, cfg.pulse.chi, cfg.pulse.a0_bound)


def chain_starts(cfg: ExperimentConfig):
    c = cfg.chain
    if c.n_random_states is None:
        return None
    return ch.initial_states(c.L, c.n_random_states, c.state_seed)


def chain_series(cfg: ExperimentConfig, pulse: GatedPulse, sites, disorders=None) -> np.ndarray:
    """Site- and disorder-averaged R-bar(nT), n = 0..n_periods."""
    params = chain_params(cfg)
    disorders = disorders or chain_disorders(cfg)
    phi = ch.x_rotation_angle(pulse, params)
    return ch.averaged_autocorrelation(sites, disorders, phi, params, cfg.chain.n_periods, chain_starts(cfg))


def chain_spectrum(cfg: ExperimentConfig, series) -> Spectrum:
    # n_periods strobes n = 0..n_periods-1 enter the transform
    return stroboscopic_fft(np.asarray(series)[: cfg.chain.n_periods], cfg.chain.T)


def chain_objective(cfg: ExperimentConfig, disorders):
    c = cfg.chain
    gate = cfg.pulse.gate_fraction or c.T1 / c.T

    def objective(coeffs) -> CostBreakdown:
        pulse = GatedPulse(FourierPulse.from_coeffs(coeffs, c.T), gate)
        spec = chain_spectrum(cfg, chain_series(cfg, pulse, c.sites, disorders))
        return cost_chain(spec, c.threshold, c.penalty, c.exclude_dc)

    return objective


@dataclass
class ChainResult:
    disorders: list
    guess: GatedPulse
    optimized: GatedPulse
    report: OptimizationReport
    series: dict  # (which pulse, "sites" | "all") -> R-bar series
    spectra: dict  # same keys -> Spectrum


def chain_bundle(cfg: ExperimentConfig, pulse: GatedPulse, disorders, tag: str, series: dict, spectra: dict):
    all_sites = list(range(1, cfg.chain.L + 1))
    for which, sites in (("sites", cfg.chain.sites), ("all", all_sites)):
        s = chain_series(cfg, pulse, sites, disorders)
        series[(tag, which)] = s
        spectra[(tag, which)] = chain_spectrum(cfg, s)


def optimize_chain(cfg: ExperimentConfig) -> ChainResult:
    disorders = chain_disorders(cfg)
    guess = chain_guess(cfg)
    o = cfg.optimizer
    problem = OptimizationProblem(
        chain_objective(cfg, disorders), chain_bounds(cfg), guess.inner.coeffs(),
        o.budget, o.tol, o.seed, o.n_starts, o.workers,
    )
    report = minimize(problem)
    best = GatedPulse(FourierPulse.from_coeffs(report.best_coeffs, cfg.chain.T, cfg.pulse.chi), guess.gate_fraction)
    series, spectra = {}, {}
    chain_bundle(cfg, guess, disorders, "guess", series, spectra)
    chain_bundle(cfg, best, disorders, "optimized", series, spectra)
    return ChainResult(disorders, guess, best, report, series, spectra)
