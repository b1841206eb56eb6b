"""Bounded Nelder-Mead with projection, seeded multi-start and per-evaluation tracing."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import CostBreakdown
from .pulse import Bounds, project_into_bounds

log = logging.getLogger(__name__)

COLLAPSE_DIAMETER = 1e-10


class InvalidProblemError(ValueError):
    pass


@dataclass
class OptimizationProblem:
    objective: Callable[[np.ndarray], "float | CostBreakdown"]
    bounds: Bounds
    initial: np.ndarray
    budget: int = 2000
    tol: float = 1e-8
    seed: int = 0
    n_starts: int = 3
    workers: int = 1

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        if self.initial.shape != self.bounds.lower.shape:
            raise InvalidProblemError(
                f"initial point has {self.initial.size} entries, bounds have {len(self.bounds)}"
            )
        if self.budget < 1:
            raise InvalidProblemError(f"budget must be >= 1, got {self.budget}")
        if self.n_starts < 1:
            raise InvalidProblemError(f"n_starts must be >= 1, got {self.n_starts}")
        self.initial = project_into_bounds(self.initial, self.bounds)


@dataclass(frozen=True)
class TraceRecord:
    eval: int
    coeffs: np.ndarray
    cost: CostBreakdown
    start: int

    def to_json(self) -> str:
        c = self.cost.to_dict()
        return json.dumps(
            {"eval": self.eval, "start": self.start, "coeffs": self.coeffs.tolist(),
             "cost": c["total"], "terms": c["terms"]}
        )


@dataclass
class OptimizationReport:
    best_coeffs: np.ndarray
    best_cost: float
    trace: list[TraceRecord] = field(repr=False)
    n_evals: int
    converged: bool
    restarts_used: int

    @property
    def initial_cost(self) -> float:
        return self.trace[0].cost.total

    def running_best(self) -> np.ndarray:
        return np.minimum.accumulate([r.cost.total for r in self.trace])

    def trace_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.trace)


class _Budget(Exception):
    pass


class _Evaluator:
    def __init__(self, problem: OptimizationProblem):
        self.problem = problem
        self.trace: list[TraceRecord] = []
        self.start = 0
        self.pool = ThreadPoolExecutor(problem.workers) if problem.workers > 1 else None

    @property
    def remaining(self) -> int:
        return self.problem.budget - len(self.trace)

    def _call(self, x):
        try:
            res = self.problem.objective(x.copy())
        except (ArithmeticError, FloatingPointError) as exc:
            log.debug("objective failed at %s: %s", x, exc)
            res = math.inf
        if not isinstance(res, CostBreakdown):
            res = CostBreakdown(float(res), {})
        if not math.isfinite(res.total):
            res = CostBreakdown(math.inf, res.terms, res.diagnostics)
        return res

    def many(self, xs: list[np.ndarray]) -> list[float]:
        """Evaluate in order; a parallel pool only changes wall-clock, never results."""
        if self.remaining <= 0:
            raise _Budget
        xs = [project_into_bounds(x, self.problem.bounds) for x in xs]
        truncated = len(xs) > self.remaining
        xs = xs[: self.remaining]
        if self.pool is not None and len(xs) > 1:
            results = list(self.pool.map(self._call, xs))
        else:
            results = [self._call(x) for x in xs]
        for x, r in zip(xs, results):
            self.trace.append(TraceRecord(len(self.trace), x, r, self.start))
        if truncated:
            raise _Budget
        return [r.total for r in results]

    def one(self, x) -> float:
        return self.many([x])[0]

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _initial_simplex(x0: np.ndarray, bounds: Bounds) -> list[np.ndarray]:
    step = np.maximum(0.1 * bounds.width, 1e-6)
    pts = [x0.copy()]
    for i in range(x0.size):
        v = x0.copy()
        # step inward when the forward vertex would be clipped
        v[i] = x0[i] + step[i] if x0[i] + step[i] <= bounds.upper[i] else x0[i] - step[i]
        pts.append(project_into_bounds(v, bounds))
    return pts


def _nelder_mead(ev: _Evaluator, x0: np.ndarray, f0: float | None, tol: float) -> bool:
    """One Nelder-Mead run; returns True when it stopped on the cost-spread criterion."""
    b = ev.problem.bounds
    pts = _initial_simplex(x0, b)
    if f0 is None:
        fs = ev.many(pts)
    else:
        fs = [f0] + ev.many(pts[1:])
    sim = np.array(pts)
    f = np.array(fs, dtype=float)
    n = x0.size
    proj = lambda v: project_into_bounds(v, b)  # noqa: E731
    while True:
        order = np.argsort(f, kind="stable")
        sim, f = sim[order], f[order]
        if np.isfinite(f[-1]) and f[-1] - f[0] < tol:
            return True
        diam = np.max(np.linalg.norm(sim[1:] - sim[0], axis=1))
        if diam < COLLAPSE_DIAMETER:
            return False
        centroid = sim[:-1].mean(axis=0)
        xr = proj(centroid + (centroid - sim[-1]))
        fr = ev.one(xr)
        if fr < f[0]:
            xe = proj(centroid + 2.0 * (centroid - sim[-1]))
            fe = ev.one(xe)
            if fe < fr:
                sim[-1], f[-1] = xe, fe
            else:
                sim[-1], f[-1] = xr, fr
            continue
        if fr < f[-2]:
            sim[-1], f[-1] = xr, fr
            continue
        if fr < f[-1]:
            xc = proj(centroid + 0.5 * (xr - centroid))
            fc = ev.one(xc)
            if fc <= fr:
                sim[-1], f[-1] = xc, fc
                continue
        else:
            xc = proj(centroid + 0.5 * (sim[-1] - centroid))
            fc = ev.one(xc)
            if fc < f[-1]:
                sim[-1], f[-1] = xc, fc
                continue
        shrunk = [sim[0] + 0.5 * (sim[i] - sim[0]) for i in range(1, n + 1)]
        fs = ev.many(shrunk)
        sim[1:] = np.array([proj(v) for v in shrunk])
        f[1:] = fs


def minimize(problem: OptimizationProblem) -> OptimizationReport:
    """Multi-start projected Nelder-Mead; returns the best point ever evaluated.

    The first start runs from ``problem.initial``. Further starts draw uniform feasible
    points from a generator seeded with ``problem.seed`` and run while budget remains.
    """
    ev = _Evaluator(problem)
    rng = np.random.default_rng(problem.seed)
    converged = False
    starts = 0
    try:
        f0 = ev.one(problem.initial)
        if not math.isfinite(f0):
            raise InvalidProblemError("objective is not finite at the initial point")
        x0 = problem.initial
        while starts < problem.n_starts and ev.remaining > 0:
            ev.start = starts
            ok = _nelder_mead(ev, x0, f0 if starts == 0 else None, problem.tol)
            converged = converged or ok
            starts += 1
            x0 = rng.uniform(problem.bounds.lower, problem.bounds.upper)
            log.info("start %d finished after %d evaluations", starts, len(ev.trace))
    except _Budget:
        starts += 1
    finally:
        ev.close()
    costs = np.array([r.cost.total for r in ev.trace])
    best = int(np.argmin(costs))
    return OptimizationReport(
        best_coeffs=ev.trace[best].coeffs.copy(),
        best_cost=float(costs[best]),
        trace=ev.trace,
        n_evals=len(ev.trace),
        converged=converged,
        restarts_used=max(starts - 1, 0),
    )
