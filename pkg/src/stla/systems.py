"""Control systems, target level functions, and config loading.

A system is n state variables plus an n-by-m grid of expressions whose
columns are the admissible vector fields; controls range over the closed
unit ball. Both model objects are immutable after construction and safe to
share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .expr import (
    Expression,
    FUNCTIONS,
    compile_expression,
    compile_matrix,
    parse_expression,
    variables,
)

CONTROL_NORM_SLACK = 1e-12

_IDENT_OK = str.isidentifier


class ConfigError(ValueError):
    pass


class EvaluationError(RuntimeError):
    """Expression left its domain (log of non-positive, division by zero, ...)."""


def _check_identifiers(expr: Expression, declared: frozenset[str], where: str):
    unknown = variables(expr) - declared
    if unknown:
        names = ", ".join(sorted(unknown))
        raise ConfigError(f"undeclared identifier(s) in {where}: {names}")


@dataclass
class ControlSystem:
    name: str
    state_vars: tuple
    sigma: tuple  # n rows of m Expression columns
    sigma_fn: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.state_vars = tuple(self.state_vars)
        self.sigma = tuple(tuple(row) for row in self.sigma)
        if not self.state_vars:
            raise ConfigError("state list is empty")
        if len(set(self.state_vars)) != len(self.state_vars):
            raise ConfigError("duplicate state variable names")
        for v in self.state_vars:
            if not _IDENT_OK(v):
                raise ConfigError(f"invalid state variable name {v!r}")
            if v in FUNCTIONS:
                raise ConfigError(f"state variable {v!r} shadows a function name")
        n = len(self.state_vars)
        if len(self.sigma) != n:
            raise ConfigError(f"sigma has {len(self.sigma)} rows for {n} state variables")
        widths = {len(row) for row in self.sigma}
        if len(widths) != 1:
            raise ConfigError("sigma rows have inconsistent lengths")
        if widths == {0}:
            raise ConfigError("sigma has no columns")
        declared = frozenset(self.state_vars)
        for i, row in enumerate(self.sigma):
            for j, cell in enumerate(row):
                _check_identifiers(cell, declared, f"sigma[{i + 1}][{j + 1}]")
        self.sigma_fn = compile_matrix(self.sigma, self.state_vars)

    @property
    def n(self) -> int:
        return len(self.state_vars)

    @property
    def m(self) -> int:
        return len(self.sigma[0])

    def sigma_at(self, x) -> np.ndarray:
        """Evaluate the field matrix at a point; raises EvaluationError off-domain."""
        vals = [float(v) for v in x]
        if len(vals) != self.n:
            raise ValueError(f"point has dimension {len(vals)}, expected {self.n}")
        try:
            rows = self.sigma_fn(*vals)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvaluationError(f"sigma evaluation failed at {vals}: {exc}") from exc
        return np.array(rows, dtype=float)

    def field_fn(self, a):
        """RHS closure x -> sigma(x) a over plain float lists (integrator hot path)."""
        fn = self.sigma_fn
        weights = [float(v) for v in a]
        cols = range(len(weights))
        return lambda x: [sum(row[j] * weights[j] for j in cols) for row in fn(*x)]


@dataclass
class TargetFunction:
    u: Expression
    state_vars: tuple
    reference_level: Optional[float] = None  # u at the analysis point, filled by classify
    u_fn: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.state_vars = tuple(self.state_vars)
        _check_identifiers(self.u, frozenset(self.state_vars), "target u")
        self.u_fn = compile_expression(self.u, self.state_vars)

    def value_at(self, x) -> float:
        vals = [float(v) for v in x]
        try:
            out = self.u_fn(*vals)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvaluationError(f"u evaluation failed at {vals}: {exc}") from exc
        return float(out)


def validate_control(a, m: Optional[int] = None) -> np.ndarray:
    """Clamp a control to the closed unit ball.

    Norms beyond 1 + 1e-12 are rejected; norms in (1, 1+1e-12] are an
    artifact of roundoff and get renormalized.
    """
    vec = np.asarray(a, dtype=float).reshape(-1)
    if m is not None and vec.shape != (m,):
        raise ValueError(f"control has dimension {vec.shape[0]}, expected {m}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("control has non-finite entries")
    norm = float(np.linalg.norm(vec))
    if norm > 1.0 + CONTROL_NORM_SLACK:
        raise ValueError(f"control norm {norm} exceeds the unit ball")
    if norm > 1.0:
        vec = vec / norm
    return vec


@dataclass
class LoadedConfig:
    system: ControlSystem
    target: TargetFunction
    point: Optional[np.ndarray]
    tol: Optional[float]


def _parse_cell(text, where: str) -> Expression:
    if not isinstance(text, str):
        raise ConfigError(f"{where} must be an expression string, got {type(text).__name__}")
    return parse_expression(text)


def load_config(text: str) -> LoadedConfig:
    """Parse the TOML config format described in the README."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc

    try:
        system_tbl = doc["system"]
        target_tbl = doc["target"]
    except KeyError as exc:
        raise ConfigError(f"missing config section {exc.args[0]!r}") from exc

    name = system_tbl.get("name", "")
    state = system_tbl.get("state")
    grid = system_tbl.get("sigma")
    if not isinstance(state, list) or not all(isinstance(s, str) for s in state):
        raise ConfigError("[system] state must be a list of identifier strings")
    if not isinstance(grid, list) or not all(isinstance(row, list) for row in grid):
        raise ConfigError("[system] sigma must be a list of expression-string rows")

    sigma = tuple(
        tuple(_parse_cell(cell, f"sigma[{i + 1}][{j + 1}]") for j, cell in enumerate(row))
        for i, row in enumerate(grid)
    )
    system = ControlSystem(name=str(name), state_vars=tuple(state), sigma=sigma)

    if "u" not in target_tbl:
        raise ConfigError("[target] section must define u")
    target = TargetFunction(u=_parse_cell(target_tbl["u"], "target u"), state_vars=system.state_vars)

    point = None
    tol = None
    analysis = doc.get("analysis", {})
    if "point" in analysis:
        raw = analysis["point"]
        if not isinstance(raw, list) or len(raw) != system.n:
            raise ConfigError(f"[analysis] point must list {system.n} coordinates")
        point = np.array([float(v) for v in raw])
        if not np.all(np.isfinite(point)):
            raise ConfigError("[analysis] point has non-finite coordinates")
    if "tol" in analysis:
        tol = float(analysis["tol"])
        if not (tol > 0.0 and math.isfinite(tol)):
            raise ConfigError("[analysis] tol must be a positive real")
    return LoadedConfig(system=system, target=target, point=point, tol=tol)


def parse_config(text: str):
    """(system, target) from config text; see load_config for the full bundle."""
    cfg = load_config(text)
    return cfg.system, cfg.target
