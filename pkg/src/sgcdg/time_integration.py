"""TVD Runge-Kutta time stepping and time-step rules."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cdg_operator import SolutionState

log = logging.getLogger(__name__)

Rhs = Callable[[SolutionState], SolutionState]

# constant in dt = c * h^(4/3), used for k = 3 accuracy runs
K3_DT_CONSTANT = 0.1


def _axpy(a: float, x: SolutionState, b: float, y: SolutionState, t: float) -> SolutionState:
    return SolutionState(t, a * x.u + b * y.u, a * x.v + b * y.v)


def _guard(state: SolutionState, stage: int) -> SolutionState:
    if not state.is_finite():
        raise FloatingPointError(f"non-finite state after RK stage {stage}")
    return state


def tvd_rk_step(state: SolutionState, dt: float, rhs: Rhs, order: int = 3) -> SolutionState:
    """One step of TVD-RK2 (Heun), TVD-RK3 (Shu-Osher) or classical RK4."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    t = state.t
    if order == 2:
        k1 = rhs(state)
        s1 = _guard(_axpy(1.0, state, dt, k1, t + dt), 1)
        k2 = rhs(s1)
        out = SolutionState(t + dt, 0.5 * (state.u + s1.u + dt * k2.u),
                            0.5 * (state.v + s1.v + dt * k2.v))
        return _guard(out, 2)
    if order == 3:
        k1 = rhs(state)
        s1 = _guard(_axpy(1.0, state, dt, k1, t + dt), 1)
        k2 = rhs(s1)
        s2 = _guard(SolutionState(t + 0.5 * dt, 0.75 * state.u + 0.25 * (s1.u + dt * k2.u),
                                  0.75 * state.v + 0.25 * (s1.v + dt * k2.v)), 2)
        k3 = rhs(s2)
        out = SolutionState(t + dt, state.u / 3 + 2.0 / 3 * (s2.u + dt * k3.u),
                            state.v / 3 + 2.0 / 3 * (s2.v + dt * k3.v))
        return _guard(out, 3)
    if order == 4:
        k1 = rhs(state)
        k2 = rhs(_guard(_axpy(1.0, state, 0.5 * dt, k1, t + 0.5 * dt), 1))
        k3 = rhs(_guard(_axpy(1.0, state, 0.5 * dt, k2, t + 0.5 * dt), 2))
        k4 = rhs(_guard(_axpy(1.0, state, dt, k3, t + dt), 3))
        out = SolutionState(t + dt, state.u + dt / 6 * (k1.u + 2 * k2.u + 2 * k3.u + k4.u),
                            state.v + dt / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v))
        return _guard(out, 4)
    raise ValueError(f"RK order must be 2, 3 or 4, got {order}")


def select_dt(speeds: Sequence[float], h: float, k: int | None = None, c: float = 0.1,
              rule: str = "cfl") -> float:
    """dt = c / sum_i (c_i / h); ``rule="h43"`` gives c * h^(4/3) instead.

    The h^(4/3) rule keeps the time error below the spatial error for k = 3;
    :func:`default_dt` picks it automatically.
    """
    speeds = np.asarray(speeds, dtype=float)
    if np.any(speeds < 0) or not np.all(np.isfinite(speeds)):
        raise ValueError("speeds must be finite and non-negative")
    if not h > 0:
        raise ValueError("h must be positive")
    if rule == "h43":
        return c * h ** (4.0 / 3.0)
    if rule != "cfl":
        raise ValueError(f"unknown dt rule {rule!r}")
    total = float(np.sum(speeds / h))
    if total == 0:
        raise ValueError("all wave speeds are zero")
    return c / total


def default_dt(speeds, h: float, k: int, c: float = 0.1) -> tuple[float, str]:
    """The accuracy-study rule: CFL form for k <= 2, c * h^(4/3) for k = 3."""
    if k >= 3:
        return select_dt(speeds, h, c=K3_DT_CONSTANT, rule="h43"), f"dt={K3_DT_CONSTANT:g}*h^(4/3)"
    return select_dt(speeds, h, c=c), f"dt={c:g}/sum(c_i/h)"


@dataclass
class RunResult:
    state: SolutionState
    steps: int
    dt: float


def integrate(state: SolutionState, T: float, dt: float, rhs: Rhs, order: int = 3,
              callback: Callable[[SolutionState, int], None] | None = None) -> RunResult:
    """Step from state.t to T; the last step is shortened to land on T exactly."""
    if T < state.t:
        raise ValueError("final time before initial time")
    n = 0
    while state.t < T:
        remaining = T - state.t
        # avoid a tiny trailing step from rounding
        h = remaining if remaining <= dt * (1 + 1e-12) else dt
        t_next = T if h == remaining else state.t + h
        state = tvd_rk_step(state, h, rhs, order)
        state.t = t_next
        n += 1
        if callback is not None:
            callback(state, n)
    return RunResult(state, n, dt)
