"""Experiment configuration: strict YAML <-> nested dataclasses."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union, get_args, get_origin, get_type_hints

import yaml

KINDS = ("dicke-optimize", "dicke-sweep", "chain-optimize", "chain-spectrum", "classify")


class ConfigError(ValueError):
    """Malformed or out-of-range configuration; carries the offending key path and line."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key = key
        self.line = line


@dataclass
class PulseSettings:
    n_modes: int = 10
    chi: float = 10.0
    a0_bound: Optional[float] = None
    A0: float = 0.8
    A: Optional[list[float]] = None
    B: Optional[list[float]] = None
    period: Optional[float] = None
    gate_fraction: Optional[float] = None

    def check(self):
        _require(self.n_modes >= 1, "n_modes must be >= 1", "pulse.n_modes")
        _require(self.chi >= 0, "chi must be >= 0", "pulse.chi")
        _require(self.a0_bound is None or self.a0_bound >= 0, "a0_bound must be >= 0", "pulse.a0_bound")
        _require(self.period is None or self.period > 0, "period must be > 0", "pulse.period")
        for name in ("A", "B"):
            v = getattr(self, name)
            _require(v is None or len(v) == self.n_modes, f"{name} must have n_modes entries", f"pulse.{name}")
            _require(v is None or all(abs(c) <= self.chi for c in v), f"|{name}_n| must be <= chi", f"pulse.{name}")
        bound = self.chi if self.a0_bound is None else self.a0_bound
        _require(abs(self.A0) <= bound, "|A0| exceeds its bound", "pulse.A0")
        _require(
            self.gate_fraction is None or 0 < self.gate_fraction <= 1,
            "gate_fraction must lie in (0, 1]",
            "pulse.gate_fraction",
        )

    def harmonics(self) -> tuple[list[float], list[float]]:
        zeros = [0.0] * self.n_modes
        return list(self.A or zeros), list(self.B or zeros)


@dataclass
class OptimizerSettings:
    budget: int = 2000
    tol: float = 1e-8
    n_starts: int = 3
    seed: int = 0
    workers: int = 1

    def check(self):
        _require(self.budget >= 1, "budget must be >= 1", "optimizer.budget")
        _require(self.tol >= 0, "tol must be >= 0", "optimizer.tol")
        _require(self.n_starts >= 1, "n_starts must be >= 1", "optimizer.n_starts")
        _require(self.workers >= 1, "workers must be >= 1", "optimizer.workers")


@dataclass
class ToleranceSettings:
    tol_fix: float = 1e-3
    tol_flip: float = 1e-2
    conc_min: float = 0.4

    def check(self):
        _require(self.tol_fix > 0, "tol_fix must be > 0", "tolerances.tol_fix")
        _require(self.tol_flip > 0, "tol_flip must be > 0", "tolerances.tol_flip")
        _require(0 < self.conc_min <= 1, "conc_min must lie in (0, 1]", "tolerances.conc_min")


@dataclass
class DickeSettings:
    epsilon: float = 0.05
    kappa: float = 0.05
    omega_T: float = 1.0
    steps_per_period: int = 1000
    burn_in: int = 50
    classify_burn_in: int = 200
    report_periods: int = 128
    initial_branch: str = "+"
    initial_lambda: Optional[float] = None
    eps_div: float = 1e-12
    window: int = 1
    # optimizer candidates that need more RK4 stages per period than this get infinite cost
    objective_max_steps_per_period: int = 16000
    sweep_epsilons: list[float] = field(default_factory=lambda: [0.04, 0.05, 0.06, 0.1])

    def check(self):
        _require(abs(self.epsilon) < 1, "epsilon must satisfy |epsilon| < 1", "dicke.epsilon")
        _require(self.kappa >= 0, "kappa must be >= 0", "dicke.kappa")
        _require(self.omega_T > 0, "omega_T must be > 0", "dicke.omega_T")
        _require(self.steps_per_period >= 1, "steps_per_period must be >= 1", "dicke.steps_per_period")
        _require(self.burn_in >= 0, "burn_in must be >= 0", "dicke.burn_in")
        _require(self.classify_burn_in >= 0, "classify_burn_in must be >= 0", "dicke.classify_burn_in")
        _require(self.report_periods >= 8, "report_periods must be >= 8", "dicke.report_periods")
        _require(self.initial_branch in ("+", "-"), "initial_branch must be '+' or '-'", "dicke.initial_branch")
        _require(self.eps_div > 0, "eps_div must be > 0", "dicke.eps_div")
        _require(self.window >= 1, "window must be >= 1", "dicke.window")
        _require(self.objective_max_steps_per_period >= self.steps_per_period,
                 "objective_max_steps_per_period must be >= steps_per_period",
                 "dicke.objective_max_steps_per_period")
        _require(all(abs(e) < 1 for e in self.sweep_epsilons), "sweep epsilons need |eps| < 1", "dicke.sweep_epsilons")


@dataclass
class ChainSettings:
    L: int = 8
    g: float = math.pi / 2
    T: float = 2.0
    T1: float = 1.0
    disorder_seed: int = 1
    n_disorder: int = 1
    sites: list[int] = field(default_factory=lambda: [4, 5])
    n_periods: int = 128
    threshold: float = 0.05
    penalty: float = 1e4
    exclude_dc: bool = True
    n_random_states: Optional[int] = None
    state_seed: int = 0

    def check(self):
        _require(2 <= self.L <= 20, "L must satisfy 2 <= L <= 20", "chain.L")
        _require(0 < self.T1 < self.T, "need 0 < T1 < T", "chain.T1")
        _require(self.n_disorder >= 1, "n_disorder must be >= 1", "chain.n_disorder")
        _require(len(self.sites) > 0 and all(1 <= s <= self.L for s in self.sites),
                 "sites must be a non-empty subset of 1..L", "chain.sites")
        _require(self.n_periods >= 8, "n_periods must be >= 8", "chain.n_periods")
        _require(self.threshold > 0, "threshold must be > 0", "chain.threshold")
        _require(self.penalty > 0, "penalty must be > 0", "chain.penalty")
        _require(self.n_random_states is None or 1 <= self.n_random_states <= 2**self.L,
                 "n_random_states must lie in 1..2^L", "chain.n_random_states")


@dataclass
class ExperimentConfig:
    kind: str = "dicke-optimize"
    output_dir: str = "out"
    dicke: Optional[DickeSettings] = None
    chain: Optional[ChainSettings] = None
    pulse: PulseSettings = field(default_factory=PulseSettings)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    tolerances: ToleranceSettings = field(default_factory=ToleranceSettings)

    def check(self) -> "ExperimentConfig":
        _require(self.kind in KINDS, f"kind must be one of {KINDS}", "kind")
        if self.kind.startswith("dicke") or self.kind == "classify":
            if self.dicke is None:
                self.dicke = DickeSettings()
        if self.kind.startswith("chain") and self.chain is None:
            self.chain = ChainSettings()
        for part in (self.dicke, self.chain, self.pulse, self.optimizer, self.tolerances):
            if part is not None:
                part.check()
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def default_dicke_config(**overrides) -> ExperimentConfig:
    """Defaults for the Dicke optimization: eps = kappa = 0.05, chi = 10, N_c = 10."""
    cfg = ExperimentConfig(
        kind="dicke-optimize",
        dicke=DickeSettings(),
        pulse=PulseSettings(n_modes=10, chi=10.0, A0=1.07, A=[0.0, -0.2, 1.1] + [0.0] * 7, B=[0.0] * 10),
        optimizer=OptimizerSettings(budget=2000, seed=0),
    )
    return _override(cfg, overrides).check()


def default_chain_config(**overrides) -> ExperimentConfig:
    """Defaults for the chain optimization: L = 8, N_c = 6, |A0| <= 1, |A_n|, |B_n| <= 5e-4."""
    cfg = ExperimentConfig(
        kind="chain-optimize",
        chain=ChainSettings(),
        pulse=PulseSettings(n_modes=6, chi=5e-4, a0_bound=1.0, A0=0.65, gate_fraction=0.5),
        optimizer=OptimizerSettings(budget=500, seed=0),
    )
    return _override(cfg, overrides).check()


def _override(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    for dotted, value in overrides.items():
        set_value(cfg, dotted.replace("__", "."), value)
    return cfg


def set_value(cfg: ExperimentConfig, dotted: str, value: Any) -> None:
    """Set ``section.key`` (or top-level ``key``) with type coercion; flags override files."""
    *path, leaf = dotted.split(".")
    obj = cfg
    for name in path:
        if not dataclasses.is_dataclass(obj) or name not in {f.name for f in dataclasses.fields(obj)}:
            raise ConfigError("unknown key", dotted)
        sub = getattr(obj, name)
        if sub is None:
            sub = get_type_hints(type(obj))[name]
            sub = _strip_optional(sub)()
            setattr(obj, name, sub)
        obj = sub
    hints = get_type_hints(type(obj))
    if leaf not in hints:
        raise ConfigError("unknown key", dotted)
    setattr(obj, leaf, _coerce(value, hints[leaf], dotted, None))


def _require(cond: bool, message: str, key: str) -> None:
    if not cond:
        raise ConfigError(f"out of range: {message}", key)


def _strip_optional(tp):
    if get_origin(tp) is Union:
        args = [a for a in get_args(tp) if a is not type(None)]
        return args[0]
    return tp


def _coerce(value, tp, key: str, line: int | None):
    optional = get_origin(tp) is Union and type(None) in get_args(tp)
    base = _strip_optional(tp)
    if value is None:
        if optional:
            return None
        raise ConfigError("value must not be null", key, line)
    if base is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"expected a boolean, got {value!r}", key, line)
    if base is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", key, line)
        return int(value)
    if base is float:
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(f"expected a number, got {value!r}", key, line) from None
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"expected a finite number, got {value!r}", key, line)
        return float(value)
    if base is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key, line)
        return value
    if get_origin(base) is list:
        (item,) = get_args(base)
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected a list, got {value!r}", key, line)
        return [_coerce(v, item, f"{key}[{i}]", line) for i, v in enumerate(value)]
    raise ConfigError(f"unsupported field type {tp}", key, line)


def _build(cls, data, prefix: str, lines: dict):
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", prefix or None, lines.get(prefix))
    hints = get_type_hints(cls)
    kwargs = {}
    for k, v in data.items():
        key = f"{prefix}.{k}" if prefix else str(k)
        if k not in hints:
            raise ConfigError("unknown key", key, lines.get(key))
        tp = _strip_optional(hints[k])
        if dataclasses.is_dataclass(tp):
            kwargs[k] = None if v is None else _build(tp, v, key, lines)
        else:
            kwargs[k] = _coerce(v, hints[k], key, lines.get(key))
    return cls(**kwargs)


def _key_lines(node, prefix: str = "", out: dict | None = None) -> dict:
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for knode, vnode in node.value:
            key = f"{prefix}.{knode.value}" if prefix else str(knode.value)
            out[key] = knode.start_mark.line + 1
            _key_lines(vnode, key, out)
    return out


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
        lines = _key_lines(yaml.compose(text))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {exc}", None, mark.line + 1 if mark else None) from None
    if data is None:
        data = {}
    cfg = _build(ExperimentConfig, data, "", lines)
    try:
        return cfg.check()
    except ConfigError as exc:
        if exc.line is None and exc.key in lines:
            raise ConfigError(str(exc).rsplit(" (", 1)[0], exc.key, lines[exc.key]) from None
        raise


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
