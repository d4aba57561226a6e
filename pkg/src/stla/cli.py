"""Command-line surface: analyze, simulate, verify, catalog.

Exit codes: 0 for a usable certificate or a passing study, 2 for an
inconclusive verdict or a failing study, 1 for any error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .analysis import ConsistencyError, second_order_data
from .catalog import CATALOG_NAMES, UnknownCatalogEntry, catalog_lookup, catalog_text
from .derivatives import DerivativeOracle, grad_u
from .expr import ParseError
from .spectral import (
    Kind,
    TOL_EIG,
    ZeroGradientError,
    classify,
    eigh,
    tol_petrov,
    tol_sym,
)
from .studies import (
    bracket_realization_study,
    default_t_values,
    min_time_probe,
    one_switch_expansion_study,
    prop3_decay_study,
    u_expansion_study,
    write_probe_csv,
    write_study_csv,
)
from .systems import ConfigError, EvaluationError, load_config
from .trajectories import (
    IntegrationBlowup,
    SwitchSchedule,
    certificate_schedule,
    integrate,
    write_trajectory_csv,
)

ORDER_THRESHOLD = 2.9
DECAY_ORDER_THRESHOLD = 0.9
SQRT_BAND = (0.4, 0.6)
LINEAR_BAND = (0.9, 1.1)

_REPORT_KEYS = (
    "system",
    "point",
    "verdict",
    "tangency",
    "S",
    "S_sym",
    "S_skew",
    "K",
    "eigenvalues",
    "lambda_min",
    "a1",
    "a2",
    "symmetry_defect",
    "tolerances",
)


@dataclass
class AnalysisReport:
    system: str
    point: list
    verdict: str
    tangency: list
    S: list
    S_sym: list
    S_skew: list
    K: list
    eigenvalues: list
    lambda_min: float
    a1: list
    a2: list
    symmetry_defect: float
    tolerances: dict


def report_to_json(report: AnalysisReport) -> str:
    data = asdict(report)
    return json.dumps({key: data[key] for key in _REPORT_KEYS}, indent=2)


def report_from_json(text: str) -> AnalysisReport:
    return AnalysisReport(**json.loads(text))


def report_to_text(report: AnalysisReport) -> str:
    lines = []
    for key in _REPORT_KEYS:
        value = getattr(report, key)
        if key == "tolerances":
            value = ", ".join(f"{k}={v!r}" for k, v in value.items())
        lines.append(f"{key}: {value}")
    return "\n".join(lines)


def build_report(system, target, oracle, point, tol_overrides=None):
    """Assemble the full analysis report plus the underlying certificate."""
    overrides = tol_overrides or {}
    point = np.asarray(point, dtype=float)
    cert = classify(
        system,
        target,
        oracle,
        point,
        tol_transversal=overrides.get("petrov"),
        tol_eigenvalue=overrides.get("eig", TOL_EIG),
        tol_symmetry=overrides.get("sym"),
    )
    data = second_order_data(system, target, oracle, point)
    eig = eigh(data.K)
    grad = grad_u(target, oracle, point)
    sig = system.sigma_at(point)
    tolerances = {
        "petrov": overrides.get("petrov") or tol_petrov(grad, sig),
        "eig": overrides.get("eig", TOL_EIG),
        "sym": overrides.get("sym") or tol_sym(data.S),
    }
    report = AnalysisReport(
        system=system.name,
        point=point.tolist(),
        verdict=cert.kind.value,
        tangency=data.tangency.tolist(),
        S=data.S.tolist(),
        S_sym=data.S_sym.tolist(),
        S_skew=data.S_skew.tolist(),
        K=data.K.tolist(),
        eigenvalues=eig.eigenvalues.tolist(),
        lambda_min=cert.lambda_min,
        a1=cert.a1.tolist(),
        a2=cert.a2.tolist(),
        symmetry_defect=cert.symmetry_defect,
        tolerances=tolerances,
    )
    return report, cert


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_point(text: str) -> np.ndarray:
    try:
        return np.array([float(part) for part in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse point {text!r}: {exc}") from exc


def _parse_controls(text: str, m: int) -> list:
    segments = []
    for chunk in text.split(";"):
        values = [float(part) for part in chunk.split(",")]
        if len(values) != m:
            raise ConfigError(f"control {chunk!r} has {len(values)} entries, expected {m}")
        segments.append(np.array(values))
    return segments


def _load(args):
    if getattr(args, "catalog", None):
        cfg = catalog_lookup(args.catalog)
    else:
        cfg = load_config(Path(args.config).read_text(encoding="utf-8"))
    if getattr(args, "point", None):
        point = _parse_point(args.point)
        if len(point) != cfg.system.n:
            raise ConfigError(
                f"point has dimension {len(point)}, system has {cfg.system.n}"
            )
        cfg.point = point
    if cfg.point is None:
        raise ConfigError("no analysis point: give [analysis] point or --point")
    return cfg


def _open_out(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _tol_overrides(args) -> dict:
    out = {}
    if getattr(args, "tol_petrov", None) is not None:
        out["petrov"] = args.tol_petrov
    if getattr(args, "tol_eig", None) is not None:
        out["eig"] = args.tol_eig
    if getattr(args, "tol_sym", None) is not None:
        out["sym"] = args.tol_sym
    return out


def _cmd_analyze(args) -> int:
    cfg = _load(args)
    oracle = DerivativeOracle()
    report, cert = build_report(cfg.system, cfg.target, oracle, cfg.point, _tol_overrides(args))
    if args.format == "json":
        print(report_to_json(report))
    else:
        print(report_to_text(report))
    return 0 if cert.kind != Kind.INCONCLUSIVE else 2


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    oracle = DerivativeOracle()
    if args.from_certificate:
        cert = classify(cfg.system, cfg.target, oracle, cfg.point)
        schedule = certificate_schedule(cert, args.t)
    elif args.controls:
        controls = _parse_controls(args.controls, cfg.system.m)
        schedule = SwitchSchedule([(a, args.t) for a in controls])
    else:
        raise ConfigError("give --controls or --from-certificate")
    record = integrate(cfg.system, schedule, cfg.point, args.steps, target=cfg.target)
    fh, owned = _open_out(args.out)
    try:
        write_trajectory_csv(record, fh)
    finally:
        if owned:
            fh.close()
    endpoint = record.states[-1].tolist()
    u_start = float(record.u_values[0])
    u_end = float(record.u_values[-1])
    summary = sys.stdout if owned else sys.stderr
    print(f"endpoint: {endpoint}", file=summary)
    print(f"u_start: {u_start!r}", file=summary)
    print(f"u_end: {u_end!r}", file=summary)
    print(f"u_drop: {u_start - u_end!r}", file=summary)
    return 0


def _default_pair(m: int):
    a1 = np.zeros(m)
    a1[0] = 1.0
    a2 = np.zeros(m)
    a2[min(1, m - 1)] = 1.0
    return a1, a2


def _cmd_verify(args) -> int:
    cfg = _load(args)
    oracle = DerivativeOracle()
    system, target = cfg.system, cfg.target
    name = system.name or "config"
    t_values = default_t_values(args.t0)

    if args.controls:
        pair = _parse_controls(args.controls, system.m)
        if len(pair) != 2:
            raise ConfigError("--controls must give exactly two controls for studies")
        a1, a2 = pair
    else:
        a1, a2 = _default_pair(system.m)

    probe = None
    if args.study == "prop1":
        study = one_switch_expansion_study(system, oracle, a1, a2, cfg.point, t_values, args.steps)
        passed = study.fitted_order >= ORDER_THRESHOLD
        detail = f"order={study.fitted_order!r} threshold={ORDER_THRESHOLD}"
    elif args.study == "prop2":
        study = u_expansion_study(system, target, oracle, a1, a2, cfg.point, t_values, args.steps)
        passed = study.fitted_order >= ORDER_THRESHOLD
        detail = f"order={study.fitted_order!r} threshold={ORDER_THRESHOLD}"
    elif args.study == "bracket3":
        study = bracket_realization_study(system, oracle, args.i, args.j, cfg.point, t_values, args.steps)
        passed = study.fitted_order >= ORDER_THRESHOLD
        detail = f"order={study.fitted_order!r} threshold={ORDER_THRESHOLD}"
    elif args.study == "prop3":
        cert = classify(system, target, oracle, cfg.point)
        study = prop3_decay_study(system, target, oracle, cert, cfg.point, t_values, args.steps)
        limit = study.values[-1]
        passed = study.fitted_order >= DECAY_ORDER_THRESHOLD
        detail = (
            f"limit={limit!r} lambda_min={cert.lambda_min!r} "
            f"order={study.fitted_order!r} threshold={DECAY_ORDER_THRESHOLD}"
        )
    else:  # mintime
        cert = classify(system, target, oracle, cfg.point)
        deltas = [float(part) for part in args.deltas.split(",")]
        probe = min_time_probe(
            system,
            target,
            oracle,
            cert,
            cfg.point,
            deltas,
            samples_per_delta=args.samples,
            rng_seed=args.seed,
            steps=args.steps,
        )
        band = SQRT_BAND if cert.kind == Kind.SECOND_ORDER else LINEAR_BAND
        passed = band[0] <= probe.fitted_exponent <= band[1]
        detail = f"exponent={probe.fitted_exponent!r} band={band}"
        if probe.flagged:
            detail += f" censored={probe.censored_fraction!r}"

    fh, owned = _open_out(args.out)
    try:
        if probe is not None:
            write_probe_csv(probe, fh)
        else:
            write_study_csv(study, fh)
    finally:
        if owned:
            fh.close()
    print(f"{'PASS' if passed else 'FAIL'} {args.study} {name}: {detail}")
    return 0 if passed else 2


def _cmd_catalog(args) -> int:
    if args.action == "list":
        for name in CATALOG_NAMES:
            print(name)
        return 0
    print(catalog_text(args.name), end="")
    return 0


def _add_source_options(sub, point=True):
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--catalog", choices=CATALOG_NAMES, help="built-in example name")
    group.add_argument("--config", help="path to a TOML config file")
    if point:
        sub.add_argument("--point", help="comma-separated analysis point override")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stla", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    analyze = subs.add_parser("analyze", help="classify attainability at a point")
    _add_source_options(analyze)
    analyze.add_argument("--format", choices=("text", "json"), default="text")
    analyze.add_argument("--tol-petrov", type=float, dest="tol_petrov")
    analyze.add_argument("--tol-eig", type=float, dest="tol_eig")
    analyze.add_argument("--tol-sym", type=float, dest="tol_sym")
    analyze.set_defaults(handler=_cmd_analyze)

    simulate = subs.add_parser("simulate", help="integrate a switched trajectory")
    _add_source_options(simulate)
    simulate.add_argument("--controls", help="semicolon-separated controls, e.g. '1,0;0,1'")
    simulate.add_argument("--from-certificate", action="store_true", dest="from_certificate")
    simulate.add_argument("--t", type=float, required=True, help="duration per segment")
    simulate.add_argument("--steps", type=int, default=200)
    simulate.add_argument("--out", help="trajectory CSV path (default: stdout)")
    simulate.set_defaults(handler=_cmd_simulate)

    verify = subs.add_parser("verify", help="run a numerical verification study")
    verify.add_argument("study", choices=("prop1", "prop2", "prop3", "bracket3", "mintime"))
    _add_source_options(verify)
    verify.add_argument("--t0", type=float, default=0.1, help="largest switch time of the ladder")
    verify.add_argument("--steps", type=int, default=200)
    verify.add_argument("--controls", help="two controls for prop1/prop2, e.g. '1,0;0,1'")
    verify.add_argument("--i", type=int, default=1, help="bracket3 first column (1-based)")
    verify.add_argument("--j", type=int, default=2, help="bracket3 second column (1-based)")
    verify.add_argument("--deltas", default="1e-2,1e-3,1e-4,1e-5")
    verify.add_argument("--samples", type=int, default=16)
    verify.add_argument("--seed", type=int, default=7)
    verify.add_argument("--out", help="study CSV path (default: stdout)")
    verify.set_defaults(handler=_cmd_verify)

    catalog = subs.add_parser("catalog", help="list or show the built-in examples")
    catalog_subs = catalog.add_subparsers(dest="action", required=True)
    catalog_subs.add_parser("list").set_defaults(handler=_cmd_catalog)
    show = catalog_subs.add_parser("show")
    show.add_argument("name")
    show.set_defaults(handler=_cmd_catalog)
    return parser


_ERRORS = (
    ConfigError,
    ParseError,
    EvaluationError,
    ZeroGradientError,
    UnknownCatalogEntry,
    ConsistencyError,
    IntegrationBlowup,
    ValueError,
    IndexError,
    OSError,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except _ERRORS as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
