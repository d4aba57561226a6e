"""Symmetric eigensolver, attainability classification, control synthesis.

The eigensolver is a cyclic Jacobi iteration: the matrices here are at most
2m x 2m for small m, where Jacobi is simple, accurate to roundoff, and free
of library-specific tie-breaking. Ordering is deterministic: ascending
eigenvalue (stable under ties), each eigenvector's first nonzero component
made positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .analysis import ConsistencyError, build_K, quad_form, second_order_data, split_S
from .derivatives import DerivativeOracle, grad_u
from .systems import validate_control

TOL_EIG = 1e-9

_JACOBI_SWEEP_CAP = 100
_JACOBI_OFF_FACTOR = 1e-14
_ZERO_GRAD_FLOOR = 1e-12


class ZeroGradientError(ValueError):
    """The target gradient vanishes; the analysis point is invalid."""


class JacobiConvergenceError(RuntimeError):
    pass


def tol_petrov(grad, sigma) -> float:
    """Tangency threshold, scaled to be unit-insensitive."""
    gn = float(np.linalg.norm(grad))
    sn = float(np.linalg.norm(sigma))
    return 1e-9 * max(1.0, gn) * max(1.0, sn)


def tol_sym(S) -> float:
    """Symmetry-defect threshold for S."""
    return 1e-9 * max(1.0, _norm_inf(S))


def _norm_inf(A) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(A), axis=1)))


@dataclass
class EigenDecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # orthonormal columns, eigenvalue order


def eigh(A, max_sweeps: int = _JACOBI_SWEEP_CAP) -> EigenDecomposition:
    """Cyclic Jacobi diagonalization of a symmetric matrix."""
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    defect = _norm_inf(A - A.T)
    if defect > 1e-9 * _norm_inf(A):
        raise ValueError(f"matrix is not symmetric (defect {defect})")
    A = (A + A.T) / 2.0
    n = A.shape[0]
    V = np.eye(n)
    fro = float(np.linalg.norm(A))
    threshold = _JACOBI_OFF_FACTOR * fro

    def off_norm() -> float:
        # summed directly: a difference of totals would cancel catastrophically
        B = A.copy()
        np.fill_diagonal(B, 0.0)
        return float(np.linalg.norm(B))

    converged = fro == 0.0 or off_norm() <= threshold
    for _ in range(max_sweeps):
        if converged:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(apq) < 1e-36 * abs(diff):
                    t = apq / diff  # first-order tangent; avoids theta overflow
                else:
                    theta = diff / (2.0 * apq)
                    if theta == 0.0:
                        t = 1.0
                    else:
                        t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                v_p = V[:, p].copy()
                v_q = V[:, q].copy()
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q
        converged = off_norm() <= threshold
    if not converged:
        raise JacobiConvergenceError(f"no convergence after {max_sweeps} sweeps")

    values = np.diag(A).copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = V[:, order]
    for k in range(n):
        col = vectors[:, k]
        cutoff = 1e-12 * float(np.max(np.abs(col)))
        for comp in col:
            if abs(comp) > cutoff:
                if comp < 0.0:
                    vectors[:, k] = -col
                break
    return EigenDecomposition(eigenvalues=values, eigenvectors=vectors)


def petrov_check(system, target, oracle: DerivativeOracle, x, tol: float = None):
    """First-order transversality test.

    Returns (a, rho) with the steepest descent unit control and decrease rate
    |sigma^T grad u|, or None when every field is tangent at x.
    """
    x = np.asarray(x, dtype=float)
    grad = grad_u(target, oracle, x)
    if np.linalg.norm(grad) <= _ZERO_GRAD_FLOOR * max(1.0, float(np.max(np.abs(x)))):
        raise ZeroGradientError(f"grad u vanishes at {x.tolist()}")
    sig = system.sigma_at(x)
    g = sig.T @ grad
    threshold = tol_petrov(grad, sig) if tol is None else tol
    gn = float(np.linalg.norm(g))
    if gn > threshold:
        return -g / gn, gn
    return None


def synthesize_from_K(K, tol_eig: float = TOL_EIG, decomposition: EigenDecomposition = None):
    """Controls from a minimal eigenvector of K, scaled so |a1| = |a2| = 1.

    Any eigenvector with nonzero eigenvalue has halves of equal norm; the
    deterministic eigh ordering fixes the representative under multiplicity.
    """
    K = np.asarray(K, dtype=float)
    eig = eigh(K) if decomposition is None else decomposition
    lam = float(eig.eigenvalues[0])
    if lam >= -tol_eig:
        raise ValueError(f"K has no eigenvalue below -{tol_eig}: min is {lam}")
    m = K.shape[0] // 2
    v = eig.eigenvectors[:, 0] * math.sqrt(2.0)
    a1 = v[:m]
    a2 = v[m:]
    n1 = float(np.linalg.norm(a1))
    n2 = float(np.linalg.norm(a2))
    if abs(n1 - 1.0) > 1e-8 or abs(n2 - 1.0) > 1e-8:
        raise ConsistencyError(
            f"eigenvector halves have norms {n1}, {n2}; expected unit halves"
        )
    return a1, a2, lam


def synthesize_from_S(S, tol_eig: float = TOL_EIG, tol_symmetry: float = None):
    """Constructive crossing pair straight from S.

    Symmetric S: a1 = a2 = a minimal unit eigenvector (needs a negative
    eigenvalue). Non-symmetric S: walk the eigenvectors a1 of S^T S in
    descending eigenvalue order, set a2 = -S a1 / |S a1|, and accept the
    first pair that is not the degenerate a1 = -a2 configuration.
    """
    S = np.asarray(S, dtype=float)
    threshold = tol_sym(S) if tol_symmetry is None else tol_symmetry
    defect = _norm_inf(S - S.T)
    if defect <= threshold:
        eig = eigh((S + S.T) / 2.0)
        lam = float(eig.eigenvalues[0])
        if lam >= -tol_eig:
            raise ValueError(
                f"S is symmetric and positive semidefinite (min eigenvalue {lam}); "
                "no second-order pair exists"
            )
        v = eig.eigenvectors[:, 0]
        return v.copy(), v.copy()
    gram = eigh(S.T @ S)
    for idx in range(len(gram.eigenvalues) - 1, -1, -1):
        lam_sq = float(gram.eigenvalues[idx])
        if lam_sq <= tol_eig:
            break
        a1 = gram.eigenvectors[:, idx]
        lam = float(np.linalg.norm(S @ a1))
        a2 = -(S @ a1) / lam
        if float(np.linalg.norm(a1 + a2)) > 1e-8:
            if quad_form(build_K_from(S), a1, a2).h >= 0.0:
                raise ConsistencyError("synthesized pair fails to make h negative")
            return a1.copy(), a2
    raise ConsistencyError(
        "no usable eigenvector of S^T S; S should have been symmetric"
    )


def build_K_from(S) -> np.ndarray:
    sym, _ = split_S(S)
    return build_K(sym, S)


class Kind(str, Enum):
    FIRST_ORDER = "first-order"
    SECOND_ORDER = "second-order"
    INCONCLUSIVE = "inconclusive"


@dataclass
class AttainabilityCertificate:
    """Outcome of the attainability test at a point.

    rho is the decrease rate: |sigma^T grad u| for a first-order
    certificate, -lambda_min(K) for a second-order one, 0 when
    inconclusive. For first-order certificates a2 duplicates a1.
    The s_route/k_route flags record the two equivalent negativity tests.
    """

    kind: Kind
    rho: float
    a1: np.ndarray
    a2: np.ndarray
    lambda_min: float
    tangency: np.ndarray
    symmetry_defect: float
    s_route_negative: bool
    k_route_negative: bool


def classify(
    system,
    target,
    oracle: DerivativeOracle,
    x,
    tol_transversal: float = None,
    tol_eigenvalue: float = TOL_EIG,
    tol_symmetry: float = None,
) -> AttainabilityCertificate:
    """Full certification at a point: first order, second order, or neither.

    The S-based test (non-symmetric, or symmetric with a negative
    eigenvalue) and the K-based test (lambda_min(K) < -tol) are equivalent;
    both are evaluated and a disagreement away from the thresholds raises
    ConsistencyError.
    """
    x = np.asarray(x, dtype=float)
    first = petrov_check(system, target, oracle, x, tol=tol_transversal)
    data = second_order_data(system, target, oracle, x)
    eig = eigh(data.K)
    lam_min = float(eig.eigenvalues[0])
    defect = _norm_inf(data.S - data.S.T)

    sym_threshold = tol_sym(data.S) if tol_symmetry is None else tol_symmetry
    lam_sym = float(eigh(data.S_sym).eigenvalues[0])
    s_route = defect > sym_threshold or lam_sym < -tol_eigenvalue
    k_route = lam_min < -tol_eigenvalue
    if s_route != k_route:
        borderline = (
            abs(lam_min) <= 100.0 * tol_eigenvalue * max(1.0, _norm_inf(data.K))
            or abs(lam_sym) <= 100.0 * tol_eigenvalue * max(1.0, _norm_inf(data.S_sym))
            or defect <= 100.0 * sym_threshold
        )
        if not borderline:
            raise ConsistencyError(
                f"S-based verdict {s_route} contradicts K eigenvalue {lam_min}"
            )

    target.reference_level = target.value_at(x)

    if first is not None:
        a, rho = first
        a = validate_control(a, system.m)
        return AttainabilityCertificate(
            kind=Kind.FIRST_ORDER,
            rho=rho,
            a1=a,
            a2=a.copy(),
            lambda_min=lam_min,
            tangency=data.tangency,
            symmetry_defect=defect,
            s_route_negative=s_route,
            k_route_negative=k_route,
        )
    if k_route:
        a1, a2, lam = synthesize_from_K(data.K, tol_eig=tol_eigenvalue, decomposition=eig)
        h = quad_form(data.K, a1, a2).h
        if abs(h - 2.0 * lam) > 1e-8 * max(1.0, abs(lam)):
            raise ConsistencyError(f"synthesized pair has h={h}, expected {2 * lam}")
        return AttainabilityCertificate(
            kind=Kind.SECOND_ORDER,
            rho=-lam,
            a1=a1,
            a2=a2,
            lambda_min=lam,
            tangency=data.tangency,
            symmetry_defect=defect,
            s_route_negative=s_route,
            k_route_negative=k_route,
        )
    zero = np.zeros(system.m)
    return AttainabilityCertificate(
        kind=Kind.INCONCLUSIVE,
        rho=0.0,
        a1=zero,
        a2=zero.copy(),
        lambda_min=lam_min,
        tangency=data.tangency,
        symmetry_defect=defect,
        s_route_negative=s_route,
        k_route_negative=k_route,
    )
