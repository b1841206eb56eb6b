"""Mean-field dynamics of the open (lossy-cavity) Dicke model.

State vector ordering is ``(jx, jy, jz, x, p)``: collective spin per particle and the
cavity quadratures x = <a + a^dag>/sqrt(2 N omega), p = i<a^dag - a>/sqrt(2 N omega).
With this scaling the equations of motion read

    jx' = -omega0 jy
    jy' =  omega0 jx - 2 lam sqrt(2 omega) x jz
    jz' =  2 lam sqrt(2 omega) x jy
    x'  =  omega p - kappa/2 x
    p'  = -omega x - kappa/2 p - 2 lam sqrt(2/omega) jx
"""
from __future__ import annotations

import math
from dataclasses import dataclass, astuple

import numba
import numpy as np

COMPONENTS = ("jx", "jy", "jz", "x", "p")


class DivergenceError(ArithmeticError):
    """Integration produced a non-finite state."""

    def __init__(self, time: float, reason: str = "non-finite state"):
        super().__init__(f"trajectory diverged at t = {time:.6g} ({reason})")
        self.time = time


@dataclass(frozen=True)
class DickeParams:
    epsilon: float = 0.05
    kappa: float = 0.05
    omega_T: float = 1.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.epsilon, self.kappa, self.omega_T)):
            raise ValueError("Dicke parameters must be finite")
        if self.omega <= 0 or self.omega0 <= 0:
            raise ValueError(
                f"need omega > 0 and omega0 > 0 (epsilon={self.epsilon}, omega_T={self.omega_T})"
            )
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")

    @property
    def omega(self) -> float:
        return self.omega_T * (1 - self.epsilon)

    @property
    def omega0(self) -> float:
        return self.omega_T * (1 + self.epsilon)


@dataclass(frozen=True)
class DickeState:
    jx: float
    jy: float
    jz: float
    x: float
    p: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, a) -> "DickeState":
        return cls(*(float(v) for v in a))

    def mirrored(self) -> "DickeState":
        """Image under the Z2 map (jx, jy, x, p) -> (-jx, -jy, -x, -p)."""
        return DickeState(-self.jx, -self.jy, self.jz, -self.x, -self.p)

    @property
    def spin_length_sq(self) -> float:
        return self.jx**2 + self.jy**2 + self.jz**2


# spin anti-aligned with the field: the stable branch the pitchfork grows out of
NORMAL_STATE = DickeState(0.0, 0.0, -0.5, 0.0, 0.0)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n, 5)
    pulse_values: np.ndarray
    dt: float

    def __post_init__(self):
        if not (len(self.times) == len(self.states) == len(self.pulse_values)):
            raise ValueError("trajectory arrays must have equal length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def component(self, name: str) -> np.ndarray:
        return self.states[:, COMPONENTS.index(name)]

    def state_at(self, i: int) -> DickeState:
        return DickeState.from_array(self.states[i])


def lambda_critical(params: DickeParams) -> float:
    """Pitchfork point of the mean-field flow above: sqrt(omega0 (omega^2 + kappa^2/4) / omega) / 2."""
    w, w0, k = params.omega, params.omega0, params.kappa
    return 0.5 * math.sqrt(w0 * (w * w + k * k / 4) / w)


def steady_states(params: DickeParams, lam: float):
    """Fixed points of the static-coupling flow.

    Returns ``(plus, minus)`` for ``lam > lambda_c`` and the normal state otherwise.
    """
    if lam < 0:
        raise ValueError(f"coupling must be >= 0, got {lam}")
    lc = lambda_critical(params)
    if lam <= lc:
        return NORMAL_STATE
    w, k = params.omega, params.kappa
    mu = lc * lc / (lam * lam)
    jx = 0.5 * math.sqrt(1 - mu * mu)
    x = -2 * lam * math.sqrt(2 * w) * jx / (w * w + k * k / 4)
    p = k / (2 * w) * x
    plus = DickeState(jx, 0.0, -mu / 2, x, p)
    return plus, plus.mirrored()


def broken_state(params: DickeParams, lam: float, branch: str = "+") -> DickeState:
    """One symmetry-broken fixed point; the normal state if ``lam <= lambda_c``."""
    res = steady_states(params, abs(lam))
    if isinstance(res, DickeState):
        return res
    if branch not in ("+", "-"):
        raise ValueError(f"branch must be '+' or '-', got {branch!r}")
    return res[0] if branch == "+" else res[1]


@numba.njit(cache=True)
def _rhs(y, w, w0, k, lam, out):
    c = 2.0 * lam * math.sqrt(2.0 * w)
    out[0] = -w0 * y[1]
    out[1] = w0 * y[0] - c * y[3] * y[2]
    out[2] = c * y[3] * y[1]
    out[3] = w * y[4] - 0.5 * k * y[3]
    out[4] = -w * y[3] - 0.5 * k * y[4] - 2.0 * lam * math.sqrt(2.0 / w) * y[0]


@numba.njit(cache=True)
def _rk4_step(y, w, w0, k, l0, lh, l1, h, k1, k2, k3, k4, tmp):
    _rhs(y, w, w0, k, l0, k1)
    for q in range(5):
        tmp[q] = y[q] + 0.5 * h * k1[q]
    _rhs(tmp, w, w0, k, lh, k2)
    for q in range(5):
        tmp[q] = y[q] + 0.5 * h * k2[q]
    _rhs(tmp, w, w0, k, lh, k3)
    for q in range(5):
        tmp[q] = y[q] + h * k3[q]
    _rhs(tmp, w, w0, k, l1, k4)
    for q in range(5):
        y[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])


@numba.njit(cache=True)
def _rk4(y0, w, w0, k, table, n_steps, dt, sub, tol):
    """RK4 over ``n_steps`` output steps of ``dt``, each split into ``sub`` substeps.

    ``table`` rows hold the control at t, t + h/2 and the left limit at t + h for the
    substep grid h = dt / sub; rows wrap periodically when the table covers one period.
    With ``tol > 0`` the table is on the halved grid instead: every output step is taken
    with both ``sub`` and ``2 sub`` substeps, the finer result is kept, and the call
    stops early when the two differ by more than ``tol`` (status -2).
    Returns (states, index, status): status 0 ok, -1 non-finite state, -2 tolerance.
    """
    m = table.shape[0]
    out = np.empty((n_steps + 1, 5))
    out[0] = y0
    y = y0.copy()
    ya = np.empty(5)
    k1 = np.empty(5)
    k2 = np.empty(5)
    k3 = np.empty(5)
    k4 = np.empty(5)
    tmp = np.empty(5)
    fine = 2 * sub if tol > 0 else sub
    h = dt / fine
    for i in range(n_steps):
        base = i * fine
        if tol > 0:
            ya[:] = y
            for s in range(sub):
                r0 = (base + 2 * s) % m
                r1 = (base + 2 * s + 1) % m
                _rk4_step(ya, w, w0, k, table[r0, 0], table[r1, 0], table[r1, 2], 2 * h, k1, k2, k3, k4, tmp)
        for s in range(fine):
            r = (base + s) % m
            _rk4_step(y, w, w0, k, table[r, 0], table[r, 1], table[r, 2], h, k1, k2, k3, k4, tmp)
        out[i + 1] = y
        for q in range(5):
            if not math.isfinite(y[q]):
                return out, i + 1, -1
        if tol > 0:
            err = 0.0
            for q in range(5):
                err = max(err, abs(ya[q] - y[q]))
            if err > tol:
                return out, i + 1, -2
    return out, n_steps, 0


def eom(state, params: DickeParams, lam: float) -> np.ndarray:
    """Time derivative of ``(jx, jy, jz, x, p)`` at fixed coupling ``lam``."""
    y = state.as_array() if isinstance(state, DickeState) else np.asarray(state, dtype=float)
    out = np.empty(5)
    _rhs(y, params.omega, params.omega0, params.kappa, float(lam), out)
    return out


def _steps(total: float, dt: float, what: str) -> int:
    n = round(total / dt)
    if n < 1 or abs(n * dt - total) > 1e-9 * max(total, 1.0):
        raise ValueError(f"{what}={total} is not an integer multiple of dt={dt}")
    return n


# for gated pulses the step end is sampled this fraction of a step early, so a step that
# ends on a switching edge integrates a single smooth piece
_LEFT = 1e-9

# step-doubling control: allowed per-output-step disagreement between n and 2n substeps,
# the coupling below which one coarse substep is tried first, and the refinement cap
STEP_TOL = 1e-12
LAMBDA_SAFE = 1.4
MAX_SUBSTEPS = 1024


def _sample(pulse, t: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(pulse(t), dtype=float)
        if vals.shape == t.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(pulse(v)) for v in t])


def _control_table(pulse, dt: float, n_steps: int) -> np.ndarray:
    """Per-step control samples; a single period's worth if the pulse exposes ``T``."""
    if not callable(pulse):
        return np.full((1, 3), float(pulse))
    rows = _steps(pulse.T, dt, "pulse period") if hasattr(pulse, "T") else n_steps
    t = np.arange(rows) * dt
    end = 1 - _LEFT if hasattr(pulse, "gate_end") else 1.0
    return np.column_stack([_sample(pulse, t), _sample(pulse, t + dt / 2), _sample(pulse, t + dt * end)])


def substeps_for(lam_max: float) -> int:
    """Starting substep count for a control peaking at ``lam_max``.

    The spin precession rate grows like lam^2 (the cavity displacement itself scales
    with lam); starting near the right resolution saves refinement restarts.
    """
    if not math.isfinite(lam_max):
        return 1
    ratio = min(lam_max / LAMBDA_SAFE, MAX_SUBSTEPS)
    return int(min(MAX_SUBSTEPS, max(1, math.ceil(ratio**3 - 1e-12))))


def evolve(
    initial,
    params: DickeParams,
    pulse,
    t_end: float,
    dt: float,
    substeps: int | None = None,
    tol: float = STEP_TOL,
    max_substeps: int = MAX_SUBSTEPS,
) -> Trajectory:
    """RK4 on the fixed output grid t = 0, dt, ..., t_end.

    ``pulse`` may be a number (static coupling), a periodic pulse object with a ``T``
    attribute (dt must divide T), or any callable of time.

    By default every output step is split into RK4 substeps under step-doubling control:
    the step is taken with n and 2n substeps, the finer result is kept, and the whole
    run restarts with n doubled whenever the two disagree by more than ``tol`` in any
    component. Passing ``substeps`` fixes n and switches the control off. A run that
    would need more than ``max_substeps`` raises DivergenceError without integrating
    further; the kernel stops at the first unresolved step, so optimizers can reject such
    candidates cheaply.
    """
    if dt <= 0 or t_end <= 0:
        raise ValueError(f"need dt > 0 and t_end > 0, got dt={dt}, t_end={t_end}")
    n_steps = _steps(t_end, dt, "t_end")
    y0 = initial.as_array() if isinstance(initial, DickeState) else np.asarray(initial, dtype=float)
    w, w0, kap = params.omega, params.omega0, params.kappa
    if substeps is not None:
        sub = int(substeps)
        if sub < 1:
            raise ValueError(f"substeps must be >= 1, got {sub}")
        table = _control_table(pulse, dt / sub, n_steps * sub)
        states, last, status = _rk4(y0, w, w0, kap, table, n_steps, dt, sub, 0.0)
    else:
        sub = substeps_for(float(np.max(np.abs(_control_table(pulse, dt, n_steps)))))
        sub = max(1, min(sub, max_substeps // 2))
        while True:
            table = _control_table(pulse, dt / (2 * sub), n_steps * 2 * sub)
            states, last, status = _rk4(y0, w, w0, kap, table, n_steps, dt, sub, tol)
            if status != -2:
                break
            if 4 * sub > max_substeps:
                raise DivergenceError(last * dt, "step refinement limit reached")
            sub *= 2
        sub *= 2
    times = np.arange(n_steps + 1) * dt
    if status == -1:
        raise DivergenceError(float(times[last]))
    if table.shape[0] == n_steps * sub and not hasattr(pulse, "T"):
        lam = np.append(table[::sub, 0], _sample(pulse, times[-1:]))
    else:
        lam = table[(np.arange(n_steps + 1) * sub) % table.shape[0], 0]
    return Trajectory(times, states, lam, dt)


def stroboscopic(traj: Trajectory, T: float, observable: str | int = "jx") -> np.ndarray:
    """Observable at t = 0, T, 2T, ... (as many as the trajectory covers)."""
    stride = round(T / traj.dt)
    if stride < 1 or abs(stride * traj.dt - T) > 1e-9 * T:
        raise ValueError(f"trajectory grid (dt={traj.dt}) does not contain multiples of T={T}")
    col = COMPONENTS.index(observable) if isinstance(observable, str) else int(observable)
    return traj.states[::stride, col].copy()


def spin_length_error(traj: Trajectory) -> float:
    j = traj.states[:, :3]
    return float(np.max(np.abs(np.sum(j * j, axis=1) - 0.25)))


def driven_initial_state(params: DickeParams, pulse, branch: str = "+", lam: float | None = None) -> DickeState:
    """Broken steady state at the pulse's on-window mean coupling (or at ``lam``)."""
    from .pulse import on_window_mean

    if lam is None:
        lam = on_window_mean(pulse)
    return broken_state(params, lam, branch)

