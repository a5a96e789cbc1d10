"""Forward-mode dual numbers with complex value and tangent parts.

Phase-space functions in this package are written with plain arithmetic, so
they accept floats, numpy arrays or :class:`Dual` coordinates alike. Seeding
one coordinate with tangent 1 gives the exact partial derivative along it.
"""

from __future__ import annotations


class Dual:
    __slots__ = ("val", "der")
    # keep numpy scalars from swallowing Dual operands into object arrays
    __array_ufunc__ = None

    def __init__(self, val, der=0.0):
        self.val = val
        self.der = der

    @staticmethod
    def _lift(other):
        return other if isinstance(other, Dual) else Dual(other, 0.0)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.der + other.der)
        return Dual(self.val + other, self.der)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.der - other.der)
        return Dual(self.val - other, self.der)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.der)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.der * other.val + self.val * other.der)
        return Dual(self.val * other, self.der * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            return Dual(self.val * inv, (self.der - self.val * inv * other.der) * inv)
        return Dual(self.val / other, self.der / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        return Dual(other * inv, -other * self.der * inv * inv)

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pos__(self):
        return self

    def __pow__(self, n):
        if isinstance(n, int) and not isinstance(n, bool):
            return ipow(self, n)
        if self.val == 0:
            raise ZeroDivisionError("non-integer power of a dual at zero")
        v = self.val ** n
        return Dual(v, n * v / self.val * self.der)

    def conjugate(self):
        # tangent is taken along a real coordinate, so conjugation acts on both parts
        return Dual(self.val.conjugate(), self.der.conjugate())

    @property
    def real(self):
        return Dual(self.val.real, self.der.real)

    @property
    def imag(self):
        return Dual(self.val.imag, self.der.imag)

    def __abs__(self):
        r = abs(self.val)
        if r == 0:
            raise ZeroDivisionError("abs of a dual is not differentiable at zero")
        return Dual(r, (self.val.conjugate() * self.der).real / r)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.der!r})"


def ipow(base, n: int):
    """``base ** n`` for a nonnegative integer ``n`` by repeated squaring.

    Works for any type with ``*``: floats, complex, numpy arrays and :class:`Dual`.
    """
    if n < 0:
        return 1.0 / ipow(base, -n)
    result = None
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    return 1.0 if result is None else result


def value(x):
    return x.val if isinstance(x, Dual) else x


def tangent(x):
    return x.der if isinstance(x, Dual) else 0.0


def seeded(values, index: int, direction=1.0) -> list:
    """Promote ``values`` to duals with a single tangent ``direction`` at ``index``."""
    return [Dual(v, direction if i == index else 0.0) for i, v in enumerate(values)]
