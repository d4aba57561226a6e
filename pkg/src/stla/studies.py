"""Numerical verification studies for the trajectory expansion estimates.

Each study integrates trajectories over a dyadic ladder of switch times,
fits the residual order on a log-log scale, and discards points that sit at
the roundoff floor (100 eps times the data scale) so that exactly-satisfied
expansions pass vacuously instead of fitting noise.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analysis import lie_bracket, second_hamiltonian
from .derivatives import DerivativeOracle, grad_u, sigma_jacobian
from .spectral import AttainabilityCertificate, Kind, tol_petrov
from .systems import validate_control
from .trajectories import (
    IntegrationBlowup,
    SwitchSchedule,
    averaged_endpoint,
    certificate_schedule,
    integrate_endpoint,
    one_switch_endpoint,
    three_switch_bracket_endpoint,
)

_EPS = float(np.finfo(float).eps)
_FLOOR_FACTOR = 100.0


def default_t_values(t0: float = 0.1, levels: int = 9) -> list:
    """Dyadic ladder t0 * 2^-k, k = 0..levels-1 (decreasing)."""
    return [t0 * 2.0 ** -k for k in range(levels)]


@dataclass
class ConvergenceStudy:
    """Residuals over a decreasing time ladder with a fitted log-log slope.

    fitted_order is +inf when fewer than two residuals survive the roundoff
    floor, i.e. the estimate holds to machine precision at every t.
    values carries the raw per-t quantity for limit-style studies.
    """

    t_values: list
    residuals: list
    fitted_order: float
    fitted_constant: float
    floor: float
    points_used: int
    values: Optional[list] = None


def _fit_loglog(t_values, residuals, floor: float):
    xs = []
    ys = []
    for t, r in zip(t_values, residuals):
        if r >= floor:
            xs.append(math.log(t))
            ys.append(math.log(r))
    if len(xs) < 2:
        return math.inf, 0.0, len(xs)
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(slope), float(math.exp(intercept)), len(xs)


def _study(t_values, residuals, floor, values=None) -> ConvergenceStudy:
    order, constant, used = _fit_loglog(t_values, residuals, floor)
    return ConvergenceStudy(
        t_values=list(t_values),
        residuals=list(residuals),
        fitted_order=order,
        fitted_constant=constant,
        floor=floor,
        points_used=used,
        values=values,
    )


def _state_floor(x0) -> float:
    return _FLOOR_FACTOR * _EPS * max(1.0, float(np.max(np.abs(x0))))


def _expansion_pieces(system, oracle, a1, a2, x0):
    sig = system.sigma_at(x0)
    jac = sigma_jacobian(system, oracle, x0)
    f0 = sig @ a1
    g0 = sig @ a2
    df = np.tensordot(jac, a1, axes=([1], [0]))
    dg = np.tensordot(jac, a2, axes=([1], [0]))
    drift = (df + dg) @ (f0 + g0)
    bracket = dg @ f0 - df @ g0
    return f0, g0, drift, bracket


def prop1_residual(system, oracle: DerivativeOracle, a1, a2, x0, t: float, steps: int = 200) -> float:
    """Distance between the one-switch endpoint and its second-order expansion."""
    a1 = validate_control(a1, system.m)
    a2 = validate_control(a2, system.m)
    x0 = np.asarray(x0, dtype=float)
    f0, g0, drift, bracket = _expansion_pieces(system, oracle, a1, a2, x0)
    end = one_switch_endpoint(system, a1, a2, x0, t, steps)
    predicted = x0 + (f0 + g0) * t + (drift + bracket) * (t * t / 2.0)
    return float(np.linalg.norm(end - predicted))


def one_switch_expansion_study(system, oracle, a1, a2, x0, t_values=None, steps: int = 200) -> ConvergenceStudy:
    t_values = default_t_values() if t_values is None else list(t_values)
    residuals = [prop1_residual(system, oracle, a1, a2, x0, t, steps) for t in t_values]
    return _study(t_values, residuals, _state_floor(x0))


def prop2_residual(system, target, oracle: DerivativeOracle, a1, a2, x0, t: float, steps: int = 200) -> float:
    """Residual of the u-variation expansion along the one-switch trajectory.

    The t^2/2 coefficient is H_ff + H_gg + 2 H_gf, with the second field
    differentiated in the cross term.
    """
    a1 = validate_control(a1, system.m)
    a2 = validate_control(a2, system.m)
    x0 = np.asarray(x0, dtype=float)
    sig = system.sigma_at(x0)
    grad = grad_u(target, oracle, x0)
    h_ff = second_hamiltonian(system, target, oracle, a1, a1, x0)
    h_gg = second_hamiltonian(system, target, oracle, a2, a2, x0)
    h_gf = second_hamiltonian(system, target, oracle, a2, a1, x0)
    u0 = target.value_at(x0)
    end = one_switch_endpoint(system, a1, a2, x0, t, steps)
    predicted = grad @ (sig @ (a1 + a2)) * t + (h_ff + h_gg + 2.0 * h_gf) * (t * t / 2.0)
    return abs(target.value_at(end) - u0 - predicted)


def u_expansion_study(system, target, oracle, a1, a2, x0, t_values=None, steps: int = 200) -> ConvergenceStudy:
    t_values = default_t_values() if t_values is None else list(t_values)
    residuals = [prop2_residual(system, target, oracle, a1, a2, x0, t, steps) for t in t_values]
    floor = _FLOOR_FACTOR * _EPS * max(1.0, abs(target.value_at(x0)))
    return _study(t_values, residuals, floor)


def bch_gap_residual(system, oracle: DerivativeOracle, a1, a2, x0, t: float, steps: int = 200) -> float:
    """One switch minus the averaged system minus the bracket deflection."""
    a1 = validate_control(a1, system.m)
    a2 = validate_control(a2, system.m)
    x0 = np.asarray(x0, dtype=float)
    _, _, _, bracket = _expansion_pieces(system, oracle, a1, a2, x0)
    switched = one_switch_endpoint(system, a1, a2, x0, t, steps)
    averaged = averaged_endpoint(system, a1, a2, x0, t, steps)
    return float(np.linalg.norm(switched - averaged - bracket * (t * t / 2.0)))


def bch_gap_study(system, oracle, a1, a2, x0, t_values=None, steps: int = 200) -> ConvergenceStudy:
    t_values = default_t_values() if t_values is None else list(t_values)
    residuals = [bch_gap_residual(system, oracle, a1, a2, x0, t, steps) for t in t_values]
    return _study(t_values, residuals, _state_floor(x0))


def bracket_realization_residual(system, oracle: DerivativeOracle, i: int, j: int, x0, t: float, steps: int = 200) -> float:
    """Error of the three-switch sequence against x0 + bracket * t^2."""
    x0 = np.asarray(x0, dtype=float)
    end = three_switch_bracket_endpoint(system, i, j, x0, t, steps)
    bracket = lie_bracket(system, oracle, i, j, x0)
    return float(np.linalg.norm(end - x0 - bracket * (t * t)))


def bracket_realization_study(system, oracle, i: int, j: int, x0, t_values=None, steps: int = 200) -> ConvergenceStudy:
    t_values = default_t_values() if t_values is None else list(t_values)
    residuals = [bracket_realization_residual(system, oracle, i, j, x0, t, steps) for t in t_values]
    return _study(t_values, residuals, _state_floor(x0))


def prop3_decay_study(
    system,
    target,
    oracle: DerivativeOracle,
    cert: AttainabilityCertificate,
    x,
    t_values=None,
    steps: int = 200,
) -> ConvergenceStudy:
    """Track (u(x_2t) - u(xbar)) / t^2 against the certified lambda_min.

    Residuals are deviations from lambda_min; values holds the raw ratios.
    """
    if cert.kind != Kind.SECOND_ORDER:
        raise ValueError("decay study needs a second-order certificate")
    x = np.asarray(x, dtype=float)
    grad = grad_u(target, oracle, x)
    sig = system.sigma_at(x)
    tangency = float(np.linalg.norm(sig.T @ grad))
    if tangency > tol_petrov(grad, sig):
        raise ValueError(
            f"fields are not tangent at the analysis point (|sigma^T grad u| = {tangency})"
        )
    t_values = default_t_values() if t_values is None else list(t_values)
    u0 = target.value_at(x)
    ratios = []
    residuals = []
    for t in t_values:
        end = integrate_endpoint(system, certificate_schedule(cert, t), x, steps)
        ratio = (target.value_at(end) - u0) / (t * t)
        ratios.append(ratio)
        residuals.append(abs(ratio - cert.lambda_min))
    floor = _FLOOR_FACTOR * _EPS * max(1.0, abs(u0))
    return _study(t_values, residuals, floor, values=ratios)


@dataclass
class MinTimeProbe:
    """Empirical reach times from spheres of shrinking radius around xbar.

    hit_times[d][s] is the reach time of sample s at delta_values[d]; nan
    marks a censored sample (target not reached within the time cap).
    fitted_exponent is the log-log slope of the per-delta worst case; the
    composite constant estimate assumes the square-root regime T = 2
    sqrt(L delta / rho) and reports (C/2)^2 where C is the fitted prefactor.
    """

    delta_values: list
    hit_times: list
    max_times: list
    fitted_exponent: float
    fitted_constant: float
    composite_rate_estimate: float
    rng_seed: int
    censored: int
    censored_fraction: float
    flagged: bool


def _thread_count() -> int:
    raw = os.environ.get("STLA_THREADS")
    if raw is None or not raw.strip():
        return 1
    try:
        requested = int(raw)
    except ValueError:
        return 1
    if requested == 0:
        return os.cpu_count() or 1
    return max(1, requested)


def min_time_probe(
    system,
    target,
    oracle: DerivativeOracle,
    cert: AttainabilityCertificate,
    x,
    delta_values,
    samples_per_delta: int = 16,
    rng_seed: int = 0,
    steps: int = 100,
    time_cap: float = 1.0,
    time_tol: float = 1e-7,
) -> MinTimeProbe:
    """Bisect the smallest reach time for sphere samples at each delta.

    Starts are drawn once from a seeded generator (normalized Gaussians), so
    results are byte-identical regardless of STLA_THREADS parallelism.
    """
    if cert.kind == Kind.INCONCLUSIVE:
        raise ValueError("min-time probe needs a first- or second-order certificate")
    x = np.asarray(x, dtype=float)
    n = len(x)
    rng = np.random.default_rng(rng_seed)
    u0 = target.value_at(x)

    starts = []
    for delta in delta_values:
        row = []
        for _ in range(samples_per_delta):
            v = rng.standard_normal(n)
            nv = float(np.linalg.norm(v))
            if nv < 1e-12:
                v = np.zeros(n)
                v[0] = 1.0
                nv = 1.0
            row.append(x + (float(delta) / nv) * v if delta > 0.0 else x.copy())
        starts.append(row)

    second_order = cert.kind == Kind.SECOND_ORDER
    u_fn = target.u_fn
    param_cap = time_cap / 2.0 if second_order else time_cap

    def reach_u(start, t):
        if second_order:
            schedule = SwitchSchedule([(cert.a2, t), (cert.a1, t)])
        else:
            schedule = SwitchSchedule([(cert.a1, t)])
        try:
            return u_fn(*integrate_endpoint(system, schedule, start, steps))
        except IntegrationBlowup:
            return math.inf

    def hit_time(start) -> float:
        if u_fn(*start) - u0 <= 0.0:
            return 0.0
        if not reach_u(start, param_cap) - u0 <= 0.0:  # nan-safe censoring
            return math.nan
        lo, hi = 0.0, param_cap
        while hi - lo > time_tol:
            mid = (lo + hi) / 2.0
            if reach_u(start, mid) - u0 <= 0.0:
                hi = mid
            else:
                lo = mid
        return 2.0 * hi if second_order else hi

    flat = [s for row in starts for s in row]
    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            flat_times = list(pool.map(hit_time, flat))
    else:
        flat_times = [hit_time(s) for s in flat]

    hit_times = []
    max_times = []
    censored = 0
    for d in range(len(delta_values)):
        row = flat_times[d * samples_per_delta : (d + 1) * samples_per_delta]
        hit_times.append(row)
        finite = [v for v in row if not math.isnan(v)]
        censored += len(row) - len(finite)
        max_times.append(max(finite) if finite else math.nan)

    total = len(delta_values) * samples_per_delta
    fraction = censored / total if total else 0.0

    xs = []
    ys = []
    for delta, worst in zip(delta_values, max_times):
        if delta > 0.0 and not math.isnan(worst) and worst > 0.0:
            xs.append(math.log(float(delta)))
            ys.append(math.log(worst))
    if len(xs) >= 2:
        slope, intercept = np.polyfit(xs, ys, 1)
        exponent = float(slope)
        constant = float(math.exp(intercept))
    else:
        exponent = math.nan
        constant = math.nan
    composite = (constant / 2.0) ** 2 if not math.isnan(constant) else math.nan
    return MinTimeProbe(
        delta_values=list(delta_values),
        hit_times=hit_times,
        max_times=max_times,
        fitted_exponent=exponent,
        fitted_constant=constant,
        composite_rate_estimate=composite,
        rng_seed=rng_seed,
        censored=censored,
        censored_fraction=fraction,
        flagged=fraction > 0.10,
    )


def write_study_csv(study: ConvergenceStudy, fh) -> None:
    """CSV rows t,residual with the fit summary as footer comments."""
    fh.write("t,residual\n")
    for t, r in zip(study.t_values, study.residuals):
        fh.write(f"{t:.17g},{r:.17g}\n")
    fh.write(f"# fitted_order={study.fitted_order!r}\n")
    fh.write(f"# fitted_constant={study.fitted_constant!r}\n")


def write_probe_csv(probe: MinTimeProbe, fh) -> None:
    fh.write("delta,max_time\n")
    for delta, worst in zip(probe.delta_values, probe.max_times):
        fh.write(f"{float(delta):.17g},{worst:.17g}\n")
    fh.write(f"# fitted_exponent={probe.fitted_exponent!r}\n")
    fh.write(f"# fitted_constant={probe.fitted_constant!r}\n")
    fh.write(f"# censored_fraction={probe.censored_fraction!r}\n")
