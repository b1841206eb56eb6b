"""Experiment runners that turn configs into on-disk artifact bundles.

Every run writes into one output directory. Files are written atomically (temporary
file in the same directory, then ``os.replace``) and ``manifest.json`` is written last,
listing each emitted file with its SHA-256 digest.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import chain as ch
from . import dicke as dk
from . import experiments as ex
from .config import ConfigError, ExperimentConfig
from .pulse import FourierPulse, GatedPulse, PulseError, pulse_from_dict, pulse_to_dict
from .spectral import Spectrum, classify_dicke, dtc_peak_test

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class ArtifactIOError(OSError):
    pass


def _num(v) -> str:
    # shortest round-trip repr keeps CSV payloads byte-stable
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _num(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


class ArtifactWriter:
    """Collects atomically written files and finishes with a manifest."""

    def __init__(self, out_dir):
        self.root = Path(out_dir)
        self.files: list[str] = []
        self.started = time.perf_counter()
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            fd, probe = tempfile.mkstemp(dir=self.root, prefix=".probe-")
            os.close(fd)
            os.unlink(probe)
        except OSError as exc:
            raise ArtifactIOError(f"output directory {self.root} is not writable: {exc}") from exc

    def write(self, name: str, text: str) -> Path:
        target = self.root / name
        try:
            fd, tmp = tempfile.mkstemp(dir=self.root, prefix=f".{name}.", suffix=".tmp")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, target)
        except OSError as exc:
            raise ArtifactIOError(f"cannot write {target}: {exc}") from exc
        if name not in self.files:
            self.files.append(name)
        log.debug("wrote %s", target)
        return target

    def json(self, name: str, obj) -> Path:
        return self.write(name, json_text(obj))

    def csv(self, name: str, header, rows) -> Path:
        return self.write(name, csv_text(header, rows))

    def finish(self, cfg: ExperimentConfig | None, extra: dict | None = None) -> dict:
        entries = []
        for name in self.files:
            digest = hashlib.sha256((self.root / name).read_bytes()).hexdigest()
            entries.append({"name": name, "sha256": digest})
        manifest = {
            "version": __version__,
            "config": None if cfg is None else cfg.to_dict(),
            "files": entries,
            "wall_clock_seconds": round(time.perf_counter() - self.started, 3),
        }
        if extra:
            manifest.update(extra)
        self.write(MANIFEST, json_text(manifest))
        self.files.remove(MANIFEST)
        return manifest


# ------------------------------------------------------------------ formats


def trajectory_rows(traj: dk.Trajectory, stride: int = 1):
    for i in range(0, traj.times.size, stride):
        yield (traj.times[i], *traj.states[i], traj.pulse_values[i])


TRAJECTORY_HEADER = ("t", "jx", "jy", "jz", "x", "p", "lambda")


def write_trajectory(w: ArtifactWriter, name: str, traj: dk.Trajectory, T: float | None = None):
    """Dense rows, or stroboscopic rows (t = nT) when ``T`` is given."""
    stride = 1 if T is None else round(T / traj.dt)
    w.csv(name, TRAJECTORY_HEADER, trajectory_rows(traj, stride))


def write_spectrum(w: ArtifactWriter, name: str, spec: Spectrum):
    w.csv(name, ("omega", "magnitude"), zip(spec.freqs, spec.mags))


def write_autocorrelation(w: ArtifactWriter, name: str, R: np.ndarray, sites, T: float):
    header = ["n", "t"] + [f"R_{i}" for i in sites] + ["R_bar"]
    rbar = R.mean(axis=1)
    rows = ((n, n * T, *R[n], rbar[n]) for n in range(R.shape[0]))
    w.csv(name, header, rows)


def read_trajectory(path) -> tuple[np.ndarray, np.ndarray]:
    """(times, jx) from a trajectory CSV; raises ConfigError on a malformed file."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ArtifactIOError(f"cannot read trajectory {path}: {exc}") from exc
    if not rows or tuple(rows[0]) != TRAJECTORY_HEADER:
        raise ConfigError(f"{path}: expected header {','.join(TRAJECTORY_HEADER)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[0] == 0:
        raise ConfigError(f"{path}: no samples")
    return data[:, 0], data[:, 1]


def load_pulse(path):
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise ConfigError(f"pulse artifact {path} does not exist") from None
    except OSError as exc:
        raise ArtifactIOError(f"cannot read pulse {path}: {exc}") from exc
    try:
        return pulse_from_dict(json.loads(text))
    except (json.JSONDecodeError, PulseError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: invalid pulse record ({exc})") from None


# ------------------------------------------------------------------ runners


def run_dicke_optimize(cfg: ExperimentConfig, out_dir) -> dict:
    w = ArtifactWriter(out_dir)
    res = ex.optimize_dicke(cfg)
    T = ex.dicke_period(cfg)
    w.json("guess_pulse.json", pulse_to_dict(res.guess))
    w.json("optimized_pulse.json", pulse_to_dict(res.optimized))
    write_trajectory(w, "guess_trajectory.csv", res.guess_traj, T)
    write_trajectory(w, "optimized_trajectory.csv", res.optimized_traj, T)
    w.json("costs.json", {"guess": res.guess_cost.to_dict(), "optimized": res.best_cost.to_dict(),
                          "n_evals": res.report.n_evals, "converged": res.report.converged,
                          "restarts_used": res.report.restarts_used})
    w.json("classification.json", {"guess": res.guess_label.to_dict(), "optimized": res.optimized_label.to_dict()})
    w.write("trace.jsonl", res.report.trace_jsonl())
    return w.finish(cfg)


def parse_epsilons(text: str) -> list[float]:
    """``start:stop:step`` (inclusive stop) or a comma-separated list; empty text gives []."""
    text = text.strip()
    if not text:
        return []
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError("need step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + k * step, 12) for k in range(n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad epsilon list {text!r}: {exc}", "epsilons") from None


def run_dicke_sweep(cfg: ExperimentConfig, pulse, epsilons, out_dir) -> list[ex.SweepRow]:
    if pulse is None:
        raise ConfigError("dicke-sweep needs an optimized pulse artifact", "pulse")
    if isinstance(pulse, (str, os.PathLike)):
        pulse = load_pulse(pulse)
    w = ArtifactWriter(out_dir)
    rows = ex.dicke_sweep(cfg, pulse, epsilons)
    w.json("pulse.json", pulse_to_dict(pulse))
    w.csv("sweep.csv", ("epsilon", "label", "peak_freq", "peak_mag"),
          ((r.epsilon, r.label, r.peak_freq, None if math.isnan(r.peak_mag) else r.peak_mag) for r in rows))
    w.finish(cfg, {"epsilons": sorted(float(e) for e in epsilons)})
    return rows


def _per_site(cfg: ExperimentConfig, pulse: GatedPulse, sites, disorders) -> np.ndarray:
    params = ex.chain_params(cfg)
    phi = ch.x_rotation_angle(pulse, params)
    R = sum(ch.autocorrelation(sites, d, phi, params, cfg.chain.n_periods, ex.chain_starts(cfg)) for d in disorders)
    return R / len(disorders)


def _disorder_record(disorders):
    return disorders[0].to_dict() if len(disorders) == 1 else [d.to_dict() for d in disorders]


def _chain_bundle(w: ArtifactWriter, cfg, pulse: GatedPulse, disorders, tag: str) -> dict:
    c = cfg.chain
    tests = {}
    for which, sites in (("sites", c.sites), ("all", list(range(1, c.L + 1)))):
        R = _per_site(cfg, pulse, sites, disorders)
        spec = ex.chain_spectrum(cfg, R.mean(axis=1))
        write_autocorrelation(w, f"{tag}autocorrelation_{which}.csv", R, sites, c.T)
        write_spectrum(w, f"{tag}spectrum_{which}.csv", spec)
        pt = dtc_peak_test(spec, c.threshold, c.exclude_dc)
        tests[which] = {"passed": pt.passed, "fcma": pt.fcma, "peak_mag": pt.peak_mag, "threshold": pt.threshold}
    return tests


def run_chain_optimize(cfg: ExperimentConfig, out_dir) -> dict:
    w = ArtifactWriter(out_dir)
    res = ex.optimize_chain(cfg)
    w.json("disorder.json", _disorder_record(res.disorders))
    w.json("guess_pulse.json", pulse_to_dict(res.guess))
    w.json("optimized_pulse.json", pulse_to_dict(res.optimized))
    tests = {
        "guess": _chain_bundle(w, cfg, res.guess, res.disorders, "guess_"),
        "optimized": _chain_bundle(w, cfg, res.optimized, res.disorders, "optimized_"),
    }
    w.json("peak_tests.json", tests)
    best = min(res.report.trace, key=lambda r: r.cost.total)
    w.json("costs.json", {"guess": res.report.trace[0].cost.to_dict(), "optimized": best.cost.to_dict(),
                          "n_evals": res.report.n_evals, "converged": res.report.converged,
                          "restarts_used": res.report.restarts_used})
    w.write("trace.jsonl", res.report.trace_jsonl())
    return w.finish(cfg)


def constant_theta(cfg: ExperimentConfig, theta0: float) -> GatedPulse:
    c = cfg.chain
    inner = FourierPulse.constant(theta0, cfg.pulse.n_modes, c.T)
    return GatedPulse(inner, cfg.pulse.gate_fraction or c.T1 / c.T)


def run_chain_spectrum(cfg: ExperimentConfig, pulse, out_dir) -> dict:
    if isinstance(pulse, (str, os.PathLike)):
        pulse = load_pulse(pulse)
    if not isinstance(pulse, GatedPulse):
        raise ConfigError("chain-spectrum needs a gated theta pulse", "pulse")
    w = ArtifactWriter(out_dir)
    disorders = ex.chain_disorders(cfg)
    w.json("disorder.json", _disorder_record(disorders))
    w.json("pulse.json", pulse_to_dict(pulse))
    tests = _chain_bundle(w, cfg, pulse, disorders, "")
    w.json("peak_test.json", tests)
    w.finish(cfg)
    return tests


def run_classify(cfg: ExperimentConfig, trajectory, out_dir, T: float | None = None, burn_in: int = 0) -> dict:
    """Classify a trajectory CSV (dense or stroboscopic rows) after dropping ``burn_in`` periods."""
    times, jx = read_trajectory(trajectory)
    T = T or ex.dicke_period(cfg)
    if times.size > 1:
        dt = times[1] - times[0]
        stride = round(T / dt)
        if stride < 1 or abs(stride * dt - T) > 1e-6 * T:
            raise ConfigError(f"{trajectory}: sample spacing {dt} does not divide the period {T}")
        jx = jx[::stride]
    w = ArtifactWriter(out_dir)
    label = classify_dicke(jx[burn_in:], T, ex.tolerances(cfg)).to_dict()
    w.json("classification.json", label)
    w.finish(cfg, {"trajectory": str(trajectory), "burn_in": burn_in})
    return label
