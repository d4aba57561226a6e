"""Second-order analysis at a point: Lie brackets, Hamiltonians, S and K.

Conventions, pinned by the catalog reference matrices this package
regression-tests against:

* bracket(i, j) = D sigma_j sigma_i - D sigma_i sigma_j
* S[i][j] = sigma_i . grad(grad u . sigma_j)
          = sigma_i . D2u sigma_j + grad u . (D sigma_j sigma_i)
* skew part S_skew[i][j] = (1/2) grad u . bracket(i, j)
* K = [[S_sym, S^T], [S, S_sym]], symmetric by construction

The quadratic form h(a1, a2) = K (a1, a2) . (a1, a2) is the t^2/2
coefficient of u along a one-switch trajectory that applies sigma a2 first
and sigma a1 second (see trajectories.certificate_schedule).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .derivatives import DerivativeOracle, grad_u, hess_u, sigma_jacobian
from .systems import validate_control


class ConsistencyError(RuntimeError):
    """Two internal evaluation routes disagreed beyond tolerance."""


def lie_bracket(system, oracle: DerivativeOracle, i: int, j: int, x) -> np.ndarray:
    """Bracket of column fields i and j (1-based) at x."""
    m = system.m
    if not (1 <= i <= m and 1 <= j <= m):
        raise IndexError(f"column indices ({i}, {j}) outside 1..{m}")
    sig = system.sigma_at(x)
    jac = sigma_jacobian(system, oracle, x)
    return jac[:, j - 1, :] @ sig[:, i - 1] - jac[:, i - 1, :] @ sig[:, j - 1]


def second_hamiltonian(system, target, oracle: DerivativeOracle, a1, a2, x) -> float:
    """H_{f,g}(x) = D2u f . g + grad u . (Df g) with f = sigma a1, g = sigma a2.

    Bilinear in (a1, a2); the first control selects the differentiated field.
    """
    a1 = validate_control(a1, system.m)
    a2 = validate_control(a2, system.m)
    sig = system.sigma_at(x)
    f = sig @ a1
    g = sig @ a2
    jac = sigma_jacobian(system, oracle, x)
    df = np.tensordot(jac, a1, axes=([1], [0]))  # sum_j a1_j D sigma_j
    grad = grad_u(target, oracle, x)
    hess = hess_u(target, oracle, x)
    return float(hess @ f @ g + grad @ (df @ g))


def build_S(system, target, oracle: DerivativeOracle, x) -> np.ndarray:
    """Assemble the m x m matrix of pairwise second-order Hamiltonians."""
    sig = system.sigma_at(x)
    grad = grad_u(target, oracle, x)
    hess = hess_u(target, oracle, x)
    jac = sigma_jacobian(system, oracle, x)
    curvature = sig.T @ hess @ sig
    m = system.m
    drift = np.empty((m, m))
    for j in range(m):
        dsj = jac[:, j, :]
        for i in range(m):
            drift[i, j] = grad @ (dsj @ sig[:, i])
    return curvature + drift


def split_S(S) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric and antisymmetric parts; S_sym + S_skew reassembles S exactly."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S must be square")
    sym = (S + S.T) / 2.0
    return sym, S - sym


def build_K(S_sym, S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    S_sym = np.asarray(S_sym, dtype=float)
    if S.shape != S_sym.shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S and S_sym must be square matrices of equal size")
    if not np.allclose(S_sym, (S + S.T) / 2.0, rtol=0.0, atol=1e-12 * max(1.0, np.abs(S).max())):
        raise ValueError("S_sym is not the symmetric part of S")
    K = np.block([[S_sym, S.T], [S, S_sym]])
    assert np.array_equal(K, K.T)
    return K


@dataclass
class QuadraticFormValue:
    h: float
    a1: np.ndarray
    a2: np.ndarray


def quad_form(K, a1, a2) -> QuadraticFormValue:
    """Evaluate h(a1, a2) = K (a1, a2) . (a1, a2) through two routes.

    The block product and the identity
    S_sym (a1+a2).(a1+a2) + 2 S_skew a1 . a2 must agree to 1e-12.
    """
    K = np.asarray(K, dtype=float)
    m = K.shape[0] // 2
    a1 = validate_control(a1, m)
    a2 = validate_control(a2, m)
    v = np.concatenate([a1, a2])
    direct = float(v @ K @ v)
    S_sym = K[:m, :m]
    S = K[m:, :m]
    S_skew = S - S_sym
    s = a1 + a2
    via_parts = float(S_sym @ s @ s + 2.0 * (S_skew @ a1) @ a2)
    tol = 1e-12 * max(1.0, abs(direct), abs(via_parts))
    if abs(direct - via_parts) > tol:
        raise ConsistencyError(
            f"quadratic form routes disagree: {direct} vs {via_parts}"
        )
    return QuadraticFormValue(h=direct, a1=a1, a2=a2)


@dataclass
class SecondOrderData:
    """All point data the eigenvalue test consumes."""

    point: np.ndarray
    tangency: np.ndarray  # sigma^T grad u
    S: np.ndarray
    S_sym: np.ndarray
    S_skew: np.ndarray
    K: np.ndarray


def second_order_data(system, target, oracle: DerivativeOracle, x) -> SecondOrderData:
    x = np.asarray(x, dtype=float)
    grad = grad_u(target, oracle, x)
    sig = system.sigma_at(x)
    S = build_S(system, target, oracle, x)
    S_sym, S_skew = split_S(S)
    return SecondOrderData(
        point=x,
        tangency=sig.T @ grad,
        S=S,
        S_sym=S_sym,
        S_skew=S_skew,
        K=build_K(S_sym, S),
    )
