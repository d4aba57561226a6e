"""Switched-trajectory integration: fixed-step RK4 over piecewise-constant controls.

A fixed step keeps convergence studies free of adaptive-step noise; the
per-segment fields sigma(x) a are smooth, so classical RK4 has local order 5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spectral import AttainabilityCertificate, Kind
from .systems import validate_control


class IntegrationBlowup(RuntimeError):
    """State left the finite floats; carries the time of failure."""

    def __init__(self, time: float):
        super().__init__(f"trajectory became non-finite near t={time}")
        self.time = time


@dataclass
class SwitchSchedule:
    """Ordered (control, duration) segments; controls in the closed unit ball."""

    segments: list

    def __post_init__(self):
        cleaned = []
        for a, duration in self.segments:
            duration = float(duration)
            if not (duration > 0.0 and math.isfinite(duration)):
                raise ValueError(f"segment duration must be positive, got {duration}")
            cleaned.append((validate_control(a), duration))
        self.segments = cleaned

    @property
    def total_duration(self) -> float:
        return sum(d for _, d in self.segments)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray  # one row per grid time
    u_values: Optional[np.ndarray]
    schedule: SwitchSchedule
    steps_per_segment: int


def _rk4_step(rhs, x, h):
    k1 = rhs(x)
    k2 = rhs([xi + 0.5 * h * ki for xi, ki in zip(x, k1)])
    k3 = rhs([xi + 0.5 * h * ki for xi, ki in zip(x, k2)])
    k4 = rhs([xi + h * ki for xi, ki in zip(x, k3)])
    sixth = h / 6.0
    return [
        xi + sixth * (a + 2.0 * (b + c) + d)
        for xi, a, b, c, d in zip(x, k1, k2, k3, k4)
    ]


def integrate(
    system,
    schedule: SwitchSchedule,
    x0,
    steps_per_segment: int = 200,
    target=None,
) -> TrajectoryRecord:
    """Integrate the schedule and record the full time grid.

    u values are filled when a target function is supplied.
    """
    if steps_per_segment < 1:
        raise ValueError("steps_per_segment must be at least 1")
    x = [float(v) for v in x0]
    if len(x) != system.n:
        raise ValueError(f"x0 has dimension {len(x)}, expected {system.n}")
    times = [0.0]
    states = [list(x)]
    t_start = 0.0
    for a, duration in schedule.segments:
        rhs = system.field_fn(a)
        h = duration / steps_per_segment
        try:
            for k in range(steps_per_segment):
                x = _rk4_step(rhs, x, h)
                if not all(map(math.isfinite, x)):
                    raise IntegrationBlowup(t_start + (k + 1) * h)
                times.append(t_start + (k + 1) * h)
                states.append(list(x))
        except (ValueError, ZeroDivisionError, OverflowError):
            raise IntegrationBlowup(t_start + (k + 1) * h) from None
        t_start += duration
    states_arr = np.array(states)
    u_values = None
    if target is not None:
        fn = target.u_fn
        u_values = np.array([fn(*row) for row in states])
    return TrajectoryRecord(
        times=np.array(times),
        states=states_arr,
        u_values=u_values,
        schedule=schedule,
        steps_per_segment=steps_per_segment,
    )


def integrate_endpoint(system, schedule: SwitchSchedule, x0, steps_per_segment: int):
    """Endpoint only; skips recording (hot path for searches and studies)."""
    x = [float(v) for v in x0]
    t_start = 0.0
    for a, duration in schedule.segments:
        rhs = system.field_fn(a)
        h = duration / steps_per_segment
        try:
            for _ in range(steps_per_segment):
                x = _rk4_step(rhs, x, h)
        except (ValueError, ZeroDivisionError, OverflowError):
            raise IntegrationBlowup(t_start + duration) from None
        if not all(map(math.isfinite, x)):
            raise IntegrationBlowup(t_start + duration)
        t_start += duration
    return x


def one_switch_endpoint(system, a1, a2, x0, t: float, steps: int = 200) -> np.ndarray:
    """Follow sigma a1 for time t, then sigma a2 for time t."""
    schedule = SwitchSchedule([(a1, t), (a2, t)])
    return np.array(integrate_endpoint(system, schedule, x0, steps))


def averaged_endpoint(system, a1, a2, x0, t: float, steps: int = 200) -> np.ndarray:
    """Constant control (a1 + a2)/2 over [0, 2t] (feasible by convexity)."""
    a1 = validate_control(a1, system.m)
    a2 = validate_control(a2, system.m)
    mid = (a1 + a2) / 2.0
    if float(np.linalg.norm(mid)) == 0.0:
        return np.array([float(v) for v in x0])
    schedule = SwitchSchedule([(mid, 2.0 * t)])
    return np.array(integrate_endpoint(system, schedule, x0, steps))


def three_switch_bracket_endpoint(system, i: int, j: int, x0, t: float, steps: int = 200) -> np.ndarray:
    """Endpoint of the bracket-realizing sequence e_i, e_j, -e_i, -e_j (1-based)."""
    m = system.m
    if not (1 <= i <= m and 1 <= j <= m):
        raise IndexError(f"column indices ({i}, {j}) outside 1..{m}")
    ei = np.zeros(m)
    ej = np.zeros(m)
    ei[i - 1] = 1.0
    ej[j - 1] = 1.0
    schedule = SwitchSchedule([(ei, t), (ej, t), (-ei, t), (-ej, t)])
    return np.array(integrate_endpoint(system, schedule, x0, steps))


def certificate_schedule(cert: AttainabilityCertificate, t: float) -> SwitchSchedule:
    """Schedule realizing the certificate's decrease over total time 2t.

    For a second-order certificate the quadratic form pairs (a1, a2) so that
    the trajectory must apply sigma a2 on the first leg and sigma a1 on the
    second; swapping the legs changes the t^2 coefficient when S is not
    symmetric. First-order certificates use the single control throughout.
    """
    if cert.kind == Kind.SECOND_ORDER:
        return SwitchSchedule([(cert.a2, t), (cert.a1, t)])
    if cert.kind == Kind.FIRST_ORDER:
        return SwitchSchedule([(cert.a1, 2.0 * t)])
    raise ValueError("inconclusive certificate provides no crossing schedule")


def write_trajectory_csv(record: TrajectoryRecord, fh) -> None:
    """CSV rows t,x1..xn,u with 17 significant digits, LF line endings."""
    if record.u_values is None:
        raise ValueError("trajectory record has no u values; integrate with a target")
    n = record.states.shape[1]
    header = "t," + ",".join(f"x{i + 1}" for i in range(n)) + ",u"
    fh.write(header + "\n")
    for t, row, u in zip(record.times, record.states, record.u_values):
        cells = [f"{t:.17g}"] + [f"{v:.17g}" for v in row] + [f"{u:.17g}"]
        fh.write(",".join(cells) + "\n")
