"""First and second derivative oracles.

Default mode evaluates compiled expressions on (nested) dual numbers, which
is exact to roundoff for the DSL's operations. A central-difference mode with
steps scaled by max(1, |x|_inf) is provided as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import Dual


def _eps(v) -> float:
    return v.eps if isinstance(v, Dual) else 0.0


def _eps2(v) -> float:
    e = _eps(v)
    return e.eps if isinstance(e, Dual) else 0.0


def _scale(x) -> float:
    return max(1.0, float(np.max(np.abs(x)))) if len(x) else 1.0


@dataclass(frozen=True)
class DerivativeOracle:
    """Differentiation backend shared by all analysis routines.

    mode: "dual" (forward-mode, nested for second order) or "central"
    (finite differences with steps h1, h2 times max(1, |x|_inf)).
    """

    mode: str = "dual"
    h1: float = 1e-6
    h2: float = 1e-4

    def __post_init__(self):
        if self.mode not in ("dual", "central"):
            raise ValueError(f"unknown oracle mode {self.mode!r}")
        if self.h1 <= 0.0 or self.h2 <= 0.0:
            raise ValueError("finite difference steps must be positive")

    def gradient(self, fn, x) -> np.ndarray:
        x = [float(v) for v in x]
        n = len(x)
        out = np.empty(n)
        if self.mode == "dual":
            for k in range(n):
                args = [Dual(v, 1.0) if i == k else v for i, v in enumerate(x)]
                out[k] = _eps(fn(*args))
            return out
        h = self.h1 * _scale(x)
        for k in range(n):
            hi = list(x)
            lo = list(x)
            hi[k] += h
            lo[k] -= h
            out[k] = (fn(*hi) - fn(*lo)) / (2.0 * h)
        return out

    def hessian(self, fn, x) -> np.ndarray:
        x = [float(v) for v in x]
        n = len(x)
        out = np.empty((n, n))
        if self.mode == "dual":
            for k in range(n):
                for l in range(k, n):
                    args = [
                        Dual(Dual(v, 1.0 if i == k else 0.0), Dual(1.0 if i == l else 0.0))
                        for i, v in enumerate(x)
                    ]
                    out[k, l] = out[l, k] = _eps2(fn(*args))
            return out
        h = self.h2 * _scale(x)
        f0 = fn(*x)
        for k in range(n):
            hi = list(x)
            lo = list(x)
            hi[k] += h
            lo[k] -= h
            out[k, k] = (fn(*hi) - 2.0 * f0 + fn(*lo)) / (h * h)
        for k in range(n):
            for l in range(k + 1, n):
                pp = list(x)
                pm = list(x)
                mp = list(x)
                mm = list(x)
                pp[k] += h
                pp[l] += h
                pm[k] += h
                pm[l] -= h
                mp[k] -= h
                mp[l] += h
                mm[k] -= h
                mm[l] -= h
                v = (fn(*pp) - fn(*pm) - fn(*mp) + fn(*mm)) / (4.0 * h * h)
                out[k, l] = out[l, k] = v
        return out

    def matrix_jacobian(self, fn, x, rows: int, cols: int) -> np.ndarray:
        """Stack J[i, j, k] = d entry(i, j) / d x_k for a matrix-valued callable."""
        x = [float(v) for v in x]
        n = len(x)
        out = np.empty((rows, cols, n))
        if self.mode == "dual":
            for k in range(n):
                args = [Dual(v, 1.0) if i == k else v for i, v in enumerate(x)]
                vals = fn(*args)
                for i in range(rows):
                    for j in range(cols):
                        out[i, j, k] = _eps(vals[i][j])
            return out
        h = self.h1 * _scale(x)
        for k in range(n):
            hi = list(x)
            lo = list(x)
            hi[k] += h
            lo[k] -= h
            vhi = fn(*hi)
            vlo = fn(*lo)
            for i in range(rows):
                for j in range(cols):
                    out[i, j, k] = (vhi[i][j] - vlo[i][j]) / (2.0 * h)
        return out


def grad_u(target, oracle: DerivativeOracle, x) -> np.ndarray:
    """Gradient of the target level function at x."""
    return oracle.gradient(target.u_fn, x)


def hess_u(target, oracle: DerivativeOracle, x) -> np.ndarray:
    """Hessian of the target level function at x, exactly symmetric."""
    return oracle.hessian(target.u_fn, x)


def sigma_jacobian(system, oracle: DerivativeOracle, x) -> np.ndarray:
    """All column-field Jacobians at once, shape (n, m, n)."""
    return oracle.matrix_jacobian(system.sigma_fn, x, system.n, system.m)


def jac_sigma_col(system, oracle: DerivativeOracle, j: int, x) -> np.ndarray:
    """Jacobian of column field j (1-based, matching the sigma_j notation)."""
    if not 1 <= j <= system.m:
        raise IndexError(f"column index {j} outside 1..{system.m}")
    return sigma_jacobian(system, oracle, x)[:, j - 1, :]
