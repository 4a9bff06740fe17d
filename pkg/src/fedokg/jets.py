"""Truncated multivariate Taylor polynomials ("jets") at a chart base point.

A jet of order J in dim variables stores coefficients for multi-indices of
total degree <= J.  Alongside the structural order we track ``valid_order``,
the largest degree up to which the coefficients are actually trustworthy:
every formal partial derivative consumes one order of validity, and any
attempt to read (or differentiate) past the budget raises BudgetError rather
than silently returning truncated garbage.  Coefficients beyond valid_order
are never stored.

Jets are immutable; all operations return new objects.  The coefficient
scalars are either exact complex rationals or Python complex, see scalars.
"""

from __future__ import annotations

from . import scalars as sc
from .errors import BudgetError, DimensionMismatch

__all__ = [
    "Jet", "jet_add", "jet_sub", "jet_mul", "jet_scale", "jet_partial",
    "jet_truncate", "jet_conj", "jets_agree", "jet_residual",
    "jet_to_dict", "jet_from_dict", "random_jet",
]


def _check_index(dim, idx):
    if len(idx) != dim or any(k < 0 for k in idx):
        raise DimensionMismatch(f"bad multi-index {idx} for dim {dim}")


class Jet:
    __slots__ = ("dim", "order", "valid_order", "coeffs", "mode")

    def __init__(self, dim, order, coeffs, mode, valid_order=None):
        self.dim = dim
        self.order = order
        self.valid_order = order if valid_order is None else valid_order
        if self.valid_order > order:
            raise ValueError("valid_order exceeds order")
        self.mode = mode
        # keep only certified, nonzero coefficients
        self.coeffs = {
            idx: v for idx, v in coeffs.items()
            if sum(idx) <= self.valid_order and not sc.is_zero(v)
        }

    # -- constructors -------------------------------------------------

    @classmethod
    def constant(cls, dim, order, value, mode):
        v = sc.from_value(mode, value)
        return cls(dim, order, {(0,) * dim: v}, mode)

    @classmethod
    def zero(cls, dim, order, mode, valid_order=None):
        return cls(dim, order, {}, mode, valid_order)

    @classmethod
    def coordinate(cls, dim, order, i, mode):
        """The linear monomial in coordinate i (0-based)."""
        if not 0 <= i < dim:
            raise DimensionMismatch(f"coordinate {i} out of range for dim {dim}")
        idx = tuple(1 if j == i else 0 for j in range(dim))
        return cls(dim, order, {idx: sc.one(mode)}, mode)

    # -- access -------------------------------------------------------

    def coefficient(self, idx):
        idx = tuple(idx)
        _check_index(self.dim, idx)
        if sum(idx) > self.valid_order:
            raise BudgetError(
                f"coefficient of degree {sum(idx)} requested but jet is only "
                f"valid to order {self.valid_order}")
        return self.coeffs.get(idx, sc.zero(self.mode))

    def is_zero(self):
        return not self.coeffs

    def max_abs(self):
        """Largest coefficient magnitude (0.0 for the zero jet)."""
        if not self.coeffs:
            return 0.0
        return max(abs(sc.to_complex(v)) for v in self.coeffs.values())

    # -- arithmetic (operators used by the tensor layer) ---------------

    def _binary_guard(self, other):
        if self.dim != other.dim:
            raise DimensionMismatch("jets live on charts of different dimension")
        if self.mode != other.mode:
            raise DimensionMismatch("cannot mix exact and float jets")

    def __add__(self, other):
        self._binary_guard(other)
        order = min(self.order, other.order)
        valid = min(self.valid_order, other.valid_order)
        out = dict(self.coeffs)
        for idx, v in other.coeffs.items():
            out[idx] = out[idx] + v if idx in out else v
        return Jet(self.dim, order, out, self.mode, valid)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return Jet(self.dim, self.order,
                   {i: -v for i, v in self.coeffs.items()},
                   self.mode, self.valid_order)

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._binary_guard(other)
            order = min(self.order, other.order)
            valid = min(self.valid_order, other.valid_order)
            out = {}
            for ia, va in self.coeffs.items():
                da = sum(ia)
                for ib, vb in other.coeffs.items():
                    if da + sum(ib) > valid:
                        continue
                    idx = tuple(x + y for x, y in zip(ia, ib))
                    prod = va * vb
                    out[idx] = out[idx] + prod if idx in out else prod
            return Jet(self.dim, order, out, self.mode, valid)
        return self.scale(other)

    def scale(self, scalar):
        s = sc.from_value(self.mode, scalar)
        return Jet(self.dim, self.order,
                   {i: v * s for i, v in self.coeffs.items()},
                   self.mode, self.valid_order)

    def conj(self):
        return Jet(self.dim, self.order,
                   {i: sc.conj(v) for i, v in self.coeffs.items()},
                   self.mode, self.valid_order)

    def partial(self, i):
        """Formal d/dx^i; costs one order of validity."""
        if not 0 <= i < self.dim:
            raise DimensionMismatch(f"coordinate {i} out of range")
        if self.valid_order <= 0:
            raise BudgetError("derivative budget exhausted")
        out = {}
        for idx, v in self.coeffs.items():
            k = idx[i]
            if k == 0:
                continue
            didx = tuple(idx[j] - 1 if j == i else idx[j] for j in range(self.dim))
            out[didx] = v * k if self.mode == sc.FLOAT else v * sc.QQ(k)
        return Jet(self.dim, self.order, out, self.mode, self.valid_order - 1)

    def truncate(self, k):
        """Retain degrees <= k; lowers both order and valid_order to k."""
        k = min(k, self.order)
        return Jet(self.dim, k,
                   {i: v for i, v in self.coeffs.items() if sum(i) <= k},
                   self.mode, min(self.valid_order, k))

    def with_order(self, order, valid_order=None):
        """Re-cap the structural order (coefficients unchanged)."""
        v = self.valid_order if valid_order is None else valid_order
        return Jet(self.dim, order, self.coeffs, self.mode, min(v, order))

    def __repr__(self):
        return (f"Jet(dim={self.dim}, order={self.order}, "
                f"valid={self.valid_order}, terms={len(self.coeffs)})")


# -- spec-level operation aliases --------------------------------------

def jet_add(a, b):
    return a + b


def jet_sub(a, b):
    return a - b


def jet_mul(a, b):
    return a * b


def jet_scale(a, s):
    return a.scale(s)


def jet_partial(a, i):
    return a.partial(i)


def jet_truncate(a, k):
    return a.truncate(k)


def jet_conj(a):
    return a.conj()


# -- comparison ----------------------------------------------------------

def jet_residual(a, b):
    """Max coefficient magnitude of a - b up to the shared valid order."""
    d = a - b
    return d.max_abs()


def jets_agree(a, b, tol=0.0):
    """Exact equality (exact mode) or <= tol per coefficient (float mode)."""
    d = a - b
    if a.mode == sc.EXACT and tol == 0.0:
        return d.is_zero()
    return d.max_abs() <= tol


# -- serialization --------------------------------------------------------

def jet_to_dict(j):
    items = sorted(j.coeffs.items())
    if j.mode == sc.EXACT:
        coeffs = [[list(idx), sc.format_rational(v.re), sc.format_rational(v.im)]
                  for idx, v in items]
    else:
        coeffs = [[list(idx), v.real, v.imag] for idx, v in items]
    return {"dim": j.dim, "order": j.order, "valid_order": j.valid_order,
            "coeffs": coeffs}


def jet_from_dict(d, mode):
    coeffs = {}
    for idx, re, im in d["coeffs"]:
        if mode == sc.EXACT:
            v = sc.QQ(sc.parse_rational_string(str(re)),
                      sc.parse_rational_string(str(im)))
        else:
            v = complex(float(re), float(im))
        coeffs[tuple(idx)] = v
    return Jet(d["dim"], d["order"], coeffs, mode,
               d.get("valid_order", d["order"]))


# -- test helper -----------------------------------------------------------

def random_jet(rng, dim, order, mode, terms=6, max_den=4, valid_order=None):
    """A sparse random jet with small rational (or float) coefficients."""
    coeffs = {}
    for _ in range(terms):
        idx = tuple(int(rng.integers(0, order + 1)) for _ in range(dim))
        if sum(idx) > order:
            continue
        p = int(rng.integers(-5, 6))
        q = int(rng.integers(1, max_den + 1))
        pi = int(rng.integers(-5, 6))
        if mode == sc.EXACT:
            coeffs[idx] = sc.QQ(sc.mpq(p, q), sc.mpq(pi, q))
        else:
            coeffs[idx] = complex(p / q, pi / q)
    return Jet(dim, order, coeffs, mode, valid_order)
