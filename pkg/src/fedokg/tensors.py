"""Dense tensors of jets over one chart.

A TensorJet is a small dense array (dim <= 4 per slot, rank <= 5 in
practice) whose entries are jets.  Slots carry a variance mark, 'u' for
contravariant and 'd' for covariant; contraction pairs one 'u' with one
'd'.  Symmetry is not encoded structurally; ``symmetry_residual`` verifies
declared (anti)symmetries entrywise, exactly in exact mode.
"""

from __future__ import annotations

from itertools import permutations, product

from . import scalars as sc
from .jets import Jet
from .errors import DimensionMismatch

__all__ = [
    "TensorJet", "tensor_contract", "tensor_invert", "symmetry_residual",
    "constant_tensor",
]


def _perm_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, cycle = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            cycle += 1
        if cycle % 2 == 0:
            sign = -sign
    return sign


class TensorJet:
    __slots__ = ("dim", "variance", "entries", "mode")

    def __init__(self, dim, variance, entries, mode):
        self.dim = dim
        self.variance = tuple(variance)
        self.entries = entries  # dict full-index-tuple -> Jet, zeros omitted
        self.mode = mode

    @property
    def rank(self):
        return len(self.variance)

    @classmethod
    def build(cls, dim, variance, fn, mode):
        """Entry (i1,...,ir) = fn(idx); fn returns a Jet or None for zero."""
        entries = {}
        for idx in product(range(dim), repeat=len(variance)):
            j = fn(idx)
            if j is not None and not j.is_zero():
                entries[idx] = j
        return cls(dim, variance, entries, mode)

    def entry(self, idx, order, valid_order=None):
        idx = tuple(idx)
        j = self.entries.get(idx)
        if j is None:
            return Jet.zero(self.dim, order, self.mode, valid_order)
        return j

    def some_entry(self):
        for j in self.entries.values():
            return j
        return None

    def __add__(self, other):
        if self.variance != other.variance:
            raise DimensionMismatch("tensor variance mismatch in addition")
        out = dict(self.entries)
        for idx, j in other.entries.items():
            out[idx] = out[idx] + j if idx in out else j
        out = {i: j for i, j in out.items() if not j.is_zero()}
        return TensorJet(self.dim, self.variance, out, self.mode)

    def __neg__(self):
        return TensorJet(self.dim, self.variance,
                         {i: -j for i, j in self.entries.items()}, self.mode)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        return TensorJet(self.dim, self.variance,
                         {i: j.scale(s) for i, j in self.entries.items()},
                         self.mode)

    def map_jets(self, fn):
        out = {}
        for idx, j in self.entries.items():
            r = fn(j)
            if not r.is_zero():
                out[idx] = r
        return TensorJet(self.dim, self.variance, out, self.mode)

    def transpose(self, perm):
        """Reorder slots: new slot a holds old slot perm[a]."""
        var = tuple(self.variance[p] for p in perm)
        out = {}
        for idx, j in self.entries.items():
            out[tuple(idx[p] for p in perm)] = j
        return TensorJet(self.dim, var, out, self.mode)

    def max_abs(self):
        return max((j.max_abs() for j in self.entries.values()), default=0.0)

    def is_zero(self):
        return not self.entries


def constant_tensor(dim, variance, matrix, order, mode):
    """TensorJet with constant entries taken from a nested sequence."""
    def fn(idx):
        v = matrix
        for i in idx:
            v = v[i]
        if v == 0:
            return None
        return Jet.constant(dim, order, v, mode)
    return TensorJet.build(dim, variance, fn, mode)


def tensor_contract(a, b, pairs):
    """Contract slot pairs (i_a, i_b) of opposite variance.

    Free slots of the result are a's remaining slots followed by b's.
    """
    for ia, ib in pairs:
        va, vb = a.variance[ia], b.variance[ib]
        if {va, vb} != {"u", "d"}:
            raise DimensionMismatch(
                f"contraction needs opposite variance, got {va}/{vb}")
    a_con = [ia for ia, _ in pairs]
    b_con = [ib for _, ib in pairs]
    a_free = [i for i in range(a.rank) if i not in a_con]
    b_free = [i for i in range(b.rank) if i not in b_con]
    variance = tuple(a.variance[i] for i in a_free) + \
        tuple(b.variance[i] for i in b_free)

    # bucket b-entries by their contracted sub-index for linear-time pairing
    buckets = {}
    for idx, j in b.entries.items():
        key = tuple(idx[i] for i in b_con)
        buckets.setdefault(key, []).append((tuple(idx[i] for i in b_free), j))

    out = {}
    for idx, ja in a.entries.items():
        key = tuple(idx[i] for i in a_con)
        hits = buckets.get(key)
        if not hits:
            continue
        afree = tuple(idx[i] for i in a_free)
        for bfree, jb in hits:
            oidx = afree + bfree
            prod = ja * jb
            out[oidx] = out[oidx] + prod if oidx in out else prod
    out = {i: j for i, j in out.items() if not j.is_zero()}
    return TensorJet(a.dim, variance, out, a.mode)


def tensor_invert(g, order=None):
    """Inverse of a rank-2 tensor of jets with invertible constant term.

    Newton iteration h <- h(2 - g h) on jets; the constant term is inverted
    by Gaussian elimination on scalars (exact in exact mode).
    """
    if g.rank != 2:
        raise DimensionMismatch("tensor_invert expects a rank-2 tensor")
    dim = g.dim
    proto = g.some_entry()
    if proto is None:
        raise DimensionMismatch("degenerate metric at base point")
    jorder = proto.order if order is None else order
    valid = min(j.valid_order for j in g.entries.values())
    zero_idx = (0,) * dim

    g0 = [[g.entry((i, k), jorder).coeffs.get(zero_idx, sc.zero(g.mode))
           for k in range(dim)] for i in range(dim)]
    h0 = _solve_identity(g0, g.mode)

    var = tuple("u" if v == "d" else "d" for v in g.variance)
    h = TensorJet.build(
        dim, var,
        lambda idx: Jet.constant(dim, jorder, h0[idx[0]][idx[1]], g.mode)
        if not _is_zero_scalar(h0[idx[0]][idx[1]], g.mode) else None,
        g.mode)
    # cap validity of the seed to the metric's
    h = h.map_jets(lambda j: j.with_order(jorder, valid))

    two = Jet.constant(dim, jorder, 2, g.mode).with_order(jorder, valid)
    steps = 1
    while (1 << steps) <= jorder + 1:
        steps += 1
    for _ in range(steps):
        gh = tensor_contract(g, h, [(1, 0)])          # g_{ik} h^{kj}
        corr = TensorJet.build(
            dim, gh.variance,
            lambda idx: (two if idx[0] == idx[1] else None), g.mode)
        # h(2*id - g h): contract h^{ik} with (2 delta - gh)_k{}^j
        delta_m = corr + (-gh)
        h = tensor_contract(h, delta_m, [(1, 0)])
    return h


def _is_zero_scalar(v, mode):
    if mode == sc.EXACT:
        return sc.is_zero(v)
    return v == 0


def _solve_identity(m, mode):
    """Invert a small scalar matrix by Gauss-Jordan elimination."""
    n = len(m)
    if mode == sc.EXACT:
        a = [[v for v in row] for row in m]
        inv = [[sc.QQ(1) if i == k else sc.QQ() for k in range(n)]
               for i in range(n)]
        zero = sc.is_zero
    else:
        a = [[complex(v) for v in row] for row in m]
        inv = [[1 + 0j if i == k else 0j for k in range(n)] for i in range(n)]
        zero = lambda x: abs(x) < 1e-300
    for col in range(n):
        piv = None
        for r in range(col, n):
            if not zero(a[r][col]):
                piv = r
                break
        if piv is None:
            raise DimensionMismatch("degenerate metric at base point")
        a[col], a[piv] = a[piv], a[col]
        inv[col], inv[piv] = inv[piv], inv[col]
        p = a[col][col]
        a[col] = [v / p for v in a[col]]
        inv[col] = [v / p for v in inv[col]]
        for r in range(n):
            if r == col or zero(a[r][col]):
                continue
            f = a[r][col]
            a[r] = [v - f * w for v, w in zip(a[r], a[col])]
            inv[r] = [v - f * w for v, w in zip(inv[r], inv[col])]
    return inv


def symmetry_residual(t, slots, sign=1):
    """Max deviation from (anti)symmetry under permuting the given slots.

    Returns 0.0 when the declared symmetry holds exactly.
    """
    slots = list(slots)
    worst = 0.0
    for perm in permutations(range(len(slots))):
        psign = _perm_sign(list(perm))
        factor = 1 if sign == 1 else psign
        for idx, j in t.entries.items():
            pidx = list(idx)
            for a, s in enumerate(slots):
                pidx[s] = idx[slots[perm[a]]]
            other = t.entries.get(tuple(pidx))
            if other is None:
                other = Jet.zero(t.dim, j.order, t.mode, j.valid_order)
            d = j - other.scale(factor)
            worst = max(worst, d.max_abs())
    return worst
