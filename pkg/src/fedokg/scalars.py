"""Coefficient scalars in two modes.

Every computation session runs either in ``exact`` mode, where scalars are
complex numbers with rational real and imaginary parts (gmpy2.mpq pairs, so
ring identities hold on the nose), or in ``float`` mode, where scalars are
plain Python complex.  The two kinds are never mixed inside one jet; the
helpers below dispatch on type so the jet/tensor layers stay mode-agnostic.
"""

from __future__ import annotations

from gmpy2 import mpq

__all__ = ["EXACT", "FLOAT", "QQ", "mpq", "zero", "one", "imag_unit",
           "rational", "from_value", "conj", "is_zero", "to_complex",
           "mode_of", "parse_rational_string", "format_rational"]

EXACT = "exact"
FLOAT = "float"

_MPQ_ZERO = mpq(0)


class QQ:
    """A complex number with exact rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if isinstance(re, type(_MPQ_ZERO)) else mpq(re)
        self.im = im if isinstance(im, type(_MPQ_ZERO)) else mpq(im)

    def __add__(self, other):
        return QQ(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return QQ(self.re - other.re, self.im - other.im)

    def __neg__(self):
        return QQ(-self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, QQ):
            return QQ(self.re * other.re - self.im * other.im,
                      self.re * other.im + self.im * other.re)
        return QQ(self.re * other, self.im * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, QQ):
            d = other.re * other.re + other.im * other.im
            if d == 0:
                raise ZeroDivisionError("division by zero scalar")
            return QQ((self.re * other.re + self.im * other.im) / d,
                      (self.im * other.re - self.re * other.im) / d)
        return QQ(self.re / other, self.im / other)

    def __eq__(self, other):
        if isinstance(other, QQ):
            return self.re == other.re and self.im == other.im
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return self.re != 0 or self.im != 0

    def conjugate(self):
        return QQ(self.re, -self.im)

    def __complex__(self):
        return float(self.re) + 1j * float(self.im)

    def __repr__(self):
        return f"QQ({self.re}, {self.im})"


def zero(mode):
    return QQ() if mode == EXACT else 0j


def one(mode):
    return QQ(1) if mode == EXACT else 1 + 0j


def imag_unit(mode):
    return QQ(0, 1) if mode == EXACT else 1j


def rational(mode, p, q=1):
    """p/q as a scalar of the given mode."""
    if mode == EXACT:
        return QQ(mpq(p, q))
    return complex(p / q) if q != 1 else complex(p)


def from_value(mode, value):
    """Coerce a Python number (int, float, complex, QQ) into the mode."""
    if isinstance(value, QQ):
        if mode == EXACT:
            return value
        return complex(value)
    if mode == EXACT:
        if isinstance(value, complex):
            return QQ(mpq(value.real), mpq(value.imag))
        return QQ(mpq(value))
    return complex(value)


def conj(x):
    return x.conjugate()


def is_zero(x):
    if isinstance(x, QQ):
        return not x
    return x == 0


def to_complex(x):
    return complex(x)


def mode_of(x):
    return EXACT if isinstance(x, QQ) else FLOAT


def parse_rational_string(s):
    """\"p/q\" or \"p\" -> mpq; used by the exact-mode text format."""
    return mpq(s)


def format_rational(q):
    return str(q)
