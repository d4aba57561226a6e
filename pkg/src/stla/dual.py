"""Forward-mode dual numbers, nestable for exact second derivatives.

A ``Dual`` carries a value and one directional derivative. Components may
themselves be ``Dual``, so seeding two independent perturbation levels and
reading ``result.eps.eps`` yields an exact mixed second derivative.

The math functions in this module accept both floats and duals; compiled
expressions are bound to them so a single code path evaluates values and
derivatives alike.
"""

from __future__ import annotations

import math


class Dual:
    __slots__ = ("re", "eps")

    def __init__(self, re, eps=0.0):
        self.re = re
        self.eps = eps

    def __repr__(self):
        return f"Dual({self.re!r}, {self.eps!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re + other.re, self.eps + other.eps)
        return Dual(self.re + other, self.eps)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re - other.re, self.eps - other.eps)
        return Dual(self.re - other, self.eps)

    def __rsub__(self, other):
        return Dual(other - self.re, -self.eps)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.re * other.re, self.re * other.eps + self.eps * other.re)
        return Dual(self.re * other, self.eps * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            q = self.re / other.re
            return Dual(q, (self.eps - q * other.eps) / other.re)
        return Dual(self.re / other, self.eps / other)

    def __rtruediv__(self, other):
        q = other / self.re
        return Dual(q, -q * self.eps / self.re)

    def __neg__(self):
        return Dual(-self.re, -self.eps)

    def __pow__(self, other):
        return pow_(self, other)

    def __rpow__(self, other):
        return pow_(other, self)


def real_part(v):
    """Strip all perturbation levels and return the underlying float."""
    while isinstance(v, Dual):
        v = v.re
    return v


def sin(v):
    if isinstance(v, Dual):
        return Dual(sin(v.re), cos(v.re) * v.eps)
    return math.sin(v)


def cos(v):
    if isinstance(v, Dual):
        return Dual(cos(v.re), -(sin(v.re) * v.eps))
    return math.cos(v)


def tan(v):
    if isinstance(v, Dual):
        c = cos(v.re)
        return Dual(tan(v.re), v.eps / (c * c))
    return math.tan(v)


def exp(v):
    if isinstance(v, Dual):
        e = exp(v.re)
        return Dual(e, e * v.eps)
    return math.exp(v)


def log(v):
    if isinstance(v, Dual):
        return Dual(log(v.re), v.eps / v.re)
    return math.log(v)


def sqrt(v):
    if isinstance(v, Dual):
        s = sqrt(v.re)
        return Dual(s, v.eps / (s * 2.0))
    return math.sqrt(v)


def fabs(v):
    if isinstance(v, Dual):
        r = real_part(v)
        s = 0.0 if r == 0.0 else math.copysign(1.0, r)
        return Dual(fabs(v.re), s * v.eps)
    return abs(v)


def pow_(base, exponent):
    """Power with ``math.pow`` domain semantics on the value.

    Integer exponents keep negative bases differentiable; a state-dependent
    exponent falls back to exp(exponent*log(base)) and so requires base > 0.
    """
    if isinstance(exponent, Dual):
        return exp(exponent * log(base))
    if isinstance(base, Dual):
        if exponent == 0:
            return base * 0.0 + 1.0
        return Dual(pow_(base.re, exponent), (exponent * pow_(base.re, exponent - 1.0)) * base.eps)
    return math.pow(base, exponent)
