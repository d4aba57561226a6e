import numpy as np
import pytest

from stla import ControlSystem, DerivativeOracle, TargetFunction
from stla.expr import Binary, Literal, Var, parse_expression


def _make_models(state, grid, u, name="test"):
    sigma = tuple(tuple(parse_expression(cell) for cell in row) for row in grid)
    system = ControlSystem(name=name, state_vars=tuple(state), sigma=sigma)
    target = TargetFunction(u=parse_expression(u), state_vars=system.state_vars)
    return system, target


@pytest.fixture
def make_models():
    return _make_models


@pytest.fixture
def oracle():
    return DerivativeOracle()


@pytest.fixture
def central_oracle():
    return DerivativeOracle(mode="central")


_VAR_POOL = ("x", "y", "z")


def _poly_expr(rng, names, ensure_linear=False):
    """Random polynomial of degree <= 2 as an AST."""
    monomials = [None] + [(a,) for a in names]
    monomials += [(a, b) for i, a in enumerate(names) for b in names[i:]]
    node = Literal(float(rng.uniform(-1.0, 1.0)))
    for mono in monomials[1:]:
        if not ensure_linear and rng.random() < 0.35:
            continue
        term = Literal(float(rng.uniform(-1.0, 1.0)))
        for var in mono:
            term = Binary("*", term, Var(var))
        node = Binary("+", node, term)
    return node


def _random_tangent_models(rng):
    """Polynomial system + target with every field tangent at the point."""
    n = int(rng.integers(2, 4))
    m = int(rng.integers(1, 3))
    names = _VAR_POOL[:n]
    oracle = DerivativeOracle()
    point = rng.uniform(-1.0, 1.0, n)
    while True:
        target = TargetFunction(u=_poly_expr(rng, names, ensure_linear=True), state_vars=names)
        grad = oracle.gradient(target.u_fn, point)
        if np.linalg.norm(grad) >= 0.3:
            break
    grid = [[_poly_expr(rng, names) for _ in range(m)] for _ in range(n)]
    system = ControlSystem(name="fixture", state_vars=names, sigma=grid)
    sig = system.sigma_at(point)
    coeff = (sig.T @ grad) / float(grad @ grad)
    corrected = [
        [Binary("-", grid[i][j], Literal(float(coeff[j] * grad[i]))) for j in range(m)]
        for i in range(n)
    ]
    system = ControlSystem(name="fixture", state_vars=names, sigma=corrected)
    return system, target, point


@pytest.fixture
def tangent_models():
    return _random_tangent_models


def _grid_points(m, step):
    axes = np.arange(-1.0, 1.0 + step / 2.0, step)
    if m == 1:
        return axes.reshape(-1, 1)
    mesh = np.stack(np.meshgrid(*([axes] * m)), -1).reshape(-1, m)
    return mesh[np.linalg.norm(mesh, axis=1) <= 1.0 + 1e-12]


def _grid_min_h(K, m, step=0.05):
    """Brute-force minimum of the quadratic form over the control-ball grid."""
    pts = _grid_points(m, step)
    S = K[m:, :m]
    SP = pts @ S.T
    diag = np.einsum("ij,ij->i", pts, SP)
    h = diag[:, None] + diag[None, :] + 2.0 * (SP @ pts.T)
    return float(h.min())


@pytest.fixture
def grid_min_h():
    return _grid_min_h
