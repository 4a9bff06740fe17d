"""The formal Wick algebra of W-valued forms on one chart.

An element is graded by (p, k, n): p counts powers of the formal parameter
hbar, k is the antisymmetric form rank (dx slots), n the symmetric fiber
rank (y slots).  The total degree Deg = 2p + n filters every fixed-point
construction downstream; blocks with 2p + n beyond the cap are dropped on
the fly, and blocks with k > dim vanish identically.

Storage convention: a block is a sparse dict mapping a full index tuple
(k dx-indices followed by n y-indices, each in range(dim)) to a jet, kept
fully antisymmetrized in the dx slots and symmetrized in the y slots.  The
element the array represents is the full sum t_{I;A} dx^I (x) y^A, so e.g.
the monomial y^0 y^1 is stored as {(0,1): 1/2, (1,0): 1/2}.

Products: the fiber Wick product contracts kappa pairs of y slots through
a rank-2 contravariant form omega with the weight
hbar^kappa n! m! / (kappa! (n-kappa)! (m-kappa)!), and wedges the dx slots
left-factor-first.  The Weyl-Moyal variant replaces omega by (i/2) sigma.
"""

from __future__ import annotations

import math
from itertools import permutations

from . import scalars as sc
from .jets import Jet, jet_to_dict, jet_from_dict
from .errors import DimensionMismatch, FedokgError

__all__ = [
    "FiberForm", "GradedElement", "wick_mul", "weyl_mul", "dagger",
    "delta_op", "delta_inv_op", "tau_project", "graded_commutator",
    "ad_bullet", "commutator_over_hbar", "hbar_divide", "hbar_mul",
    "sigma_two_form", "ge_residual", "ge_agree", "random_element",
]


def _perm_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, cyc = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            cyc += 1
        if cyc % 2 == 0:
            sign = -sign
    return sign


def _sort_with_sign(idx):
    """Sorted tuple and the sign of the sorting permutation."""
    lst = list(idx)
    sign = 1
    for i in range(1, len(lst)):
        j = i
        while j > 0 and lst[j - 1] > lst[j]:
            lst[j - 1], lst[j] = lst[j], lst[j - 1]
            sign = -sign
            j -= 1
    return tuple(lst), sign


def _project_block(raw, k, n, mode, antisym=True, symm=True):
    """Alt over the first k slots and Sym over the last n slots.

    Works per canonical index class: raw entries accumulate onto the
    sorted representative with the permutation sign, the class average is
    taken once, and the full-sum storage is re-expanded with shared jet
    objects (so downstream products can memoize on identity).
    """
    if not raw:
        return {}
    do_a = antisym and k > 1
    do_s = symm and n > 1
    if not do_a and not do_s:
        return {i: j for i, j in raw.items() if not j.is_zero()}

    acc = {}
    for idx, jet in raw.items():
        I, A = idx[:k], idx[k:]
        sign = 1
        if do_a:
            if len(set(I)) != k:
                continue
            I, sign = _sort_with_sign(I)
        if do_s:
            A = tuple(sorted(A))
        key = I + A
        piece = jet if sign == 1 else -jet
        acc[key] = acc[key] + piece if key in acc else piece

    out = {}
    for key, jet in acc.items():
        if jet.is_zero():
            continue
        I, A = key[:k], key[k:]
        y_perms = set(permutations(A)) if do_s else [A]
        dx_size = math.factorial(k) if do_a else 1
        denom = dx_size * len(y_perms)
        val = jet if denom == 1 else jet.scale(sc.rational(mode, 1, denom))
        neg = None
        if do_a:
            dx_perms = []
            for perm in permutations(I):
                _, s = _sort_with_sign(perm)
                dx_perms.append((perm, s))
        else:
            dx_perms = [(I, 1)]
        for dxp, s in dx_perms:
            if s == -1 and neg is None:
                neg = -val
            piece = val if s == 1 else neg
            for yp in y_perms:
                out[dxp + yp] = piece
    return out


class FiberForm:
    """The fiber contraction form omega^{ij} = (G^{ij} + i sigma^{ij}) / 2."""

    def __init__(self, omega):
        if omega.rank != 2 or omega.variance != ("u", "u"):
            raise DimensionMismatch("fiber form must be rank-2 contravariant")
        self.omega = omega
        half_i = sc.rational(omega.mode, 1, 2)
        # sigma^{ij} = 2 Im omega^{ij} = (omega - conj omega) / i
        mi = sc.imag_unit(omega.mode)
        self.sigma_inv = omega.map_jets(
            lambda j: (j - j.conj()).scale(half_i).scale(-mi).scale(2))

    @property
    def dim(self):
        return self.omega.dim

    @property
    def mode(self):
        return self.omega.mode

    def metric_inv(self):
        """G^{ij} = 2 Re omega^{ij}."""
        return self.omega.map_jets(lambda j: (j + j.conj()))

    def weyl_form(self):
        """The contraction form (i/2) sigma^{ij} of the Weyl-Moyal product."""
        half = sc.rational(self.mode, 1, 2)
        i_unit = sc.imag_unit(self.mode)
        return self.sigma_inv.map_jets(lambda j: j.scale(half).scale(i_unit))


class GradedElement:
    __slots__ = ("dim", "deg_cap", "mode", "blocks")

    def __init__(self, dim, deg_cap, mode, blocks=None):
        # deg_cap caps the Deg filtration in *products* (and explicit
        # truncate_deg); linear operators like delta^{-1} may overflow it
        # by one, so the constructor only removes identically-zero data.
        self.dim = dim
        self.deg_cap = deg_cap
        self.mode = mode
        self.blocks = {}
        for (p, k, n), entries in (blocks or {}).items():
            if k > dim:
                continue
            clean = {i: j for i, j in entries.items() if not j.is_zero()}
            if clean:
                self.blocks[(p, k, n)] = clean

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, dim, deg_cap, mode):
        return cls(dim, deg_cap, mode)

    @classmethod
    def from_jet(cls, jet, deg_cap, p=0):
        return cls(jet.dim, deg_cap, jet.mode, {(p, 0, 0): {(): jet}})

    @classmethod
    def unit(cls, dim, deg_cap, mode, order):
        return cls.from_jet(Jet.constant(dim, order, 1, mode), deg_cap)

    @classmethod
    def monomial(cls, dim, deg_cap, mode, order, dx_indices=(), y_indices=(),
                 p=0, coeff=1):
        """coeff * dx^{i1} ^ ... (x) y^{j1} ... as a one-block element."""
        k, n = len(dx_indices), len(y_indices)
        jet = Jet.constant(dim, order, coeff, mode)
        raw = {tuple(dx_indices) + tuple(y_indices): jet}
        entries = _project_block(raw, k, n, mode)
        return cls(dim, deg_cap, mode, {(p, k, n): entries})

    # -- linear structure -------------------------------------------------

    def _guard(self, other):
        if self.dim != other.dim:
            raise DimensionMismatch("elements on different charts")
        if self.deg_cap != other.deg_cap:
            raise DimensionMismatch("degree-cap mismatch")
        if self.mode != other.mode:
            raise DimensionMismatch("mode mismatch")

    def __add__(self, other):
        self._guard(other)
        blocks = {key: dict(entries) for key, entries in self.blocks.items()}
        for key, entries in other.blocks.items():
            tgt = blocks.setdefault(key, {})
            for idx, jet in entries.items():
                tgt[idx] = tgt[idx] + jet if idx in tgt else jet
        return GradedElement(self.dim, self.deg_cap, self.mode, blocks)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        blocks = {key: {i: j.scale(s) for i, j in entries.items()}
                  for key, entries in self.blocks.items()}
        return GradedElement(self.dim, self.deg_cap, self.mode, blocks)

    def map_jets(self, fn):
        blocks = {key: {i: fn(j) for i, j in entries.items()}
                  for key, entries in self.blocks.items()}
        return GradedElement(self.dim, self.deg_cap, self.mode, blocks)

    def block(self, p, k, n):
        return self.blocks.get((p, k, n), {})

    def deg_a_parts(self):
        """Split into deg_a-homogeneous summands, keyed by k."""
        parts = {}
        for (p, k, n), entries in self.blocks.items():
            parts.setdefault(k, {})[(p, k, n)] = entries
        return {k: GradedElement(self.dim, self.deg_cap, self.mode, b)
                for k, b in parts.items()}

    def select(self, pred):
        """Sub-element of blocks whose (p, k, n) satisfies pred."""
        return GradedElement(self.dim, self.deg_cap, self.mode,
                             {key: ent for key, ent in self.blocks.items()
                              if pred(*key)})

    def deg_part(self, deg):
        """The Deg-homogeneous component 2p + n == deg."""
        return self.select(lambda p, k, n: 2 * p + n == deg)

    def truncate_deg(self, cap=None):
        """Drop blocks with 2p + n beyond the cap (filtration truncation)."""
        cap = self.deg_cap if cap is None else cap
        out = self.select(lambda p, k, n: 2 * p + n <= cap)
        out.deg_cap = self.deg_cap
        return out

    def with_cap(self, cap):
        return GradedElement(self.dim, cap, self.mode, self.blocks)

    def is_zero(self):
        return not self.blocks

    def max_abs(self):
        return max((j.max_abs() for e in self.blocks.values()
                    for j in e.values()), default=0.0)

    def min_valid_order(self):
        vals = [j.valid_order for e in self.blocks.values() for j in e.values()]
        return min(vals) if vals else None

    def __repr__(self):
        keys = sorted(self.blocks)
        return f"GradedElement(dim={self.dim}, cap={self.deg_cap}, blocks={keys})"

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        out = []
        for (p, k, n) in sorted(self.blocks):
            entries = self.blocks[(p, k, n)]
            out.append({
                "p": p, "k": k, "n": n,
                "tensor": [[list(idx), jet_to_dict(j)]
                           for idx, j in sorted(entries.items())],
            })
        return {"dim": self.dim, "deg_cap": self.deg_cap, "blocks": out}

    @classmethod
    def from_dict(cls, d, mode):
        blocks = {}
        for blk in d["blocks"]:
            entries = {tuple(idx): jet_from_dict(jd, mode)
                       for idx, jd in blk["tensor"]}
            blocks[(blk["p"], blk["k"], blk["n"])] = entries
        return cls(d["dim"], d["deg_cap"], mode, blocks)


# -- products ---------------------------------------------------------------


def _fiber_product(a, b, form, kappa_min=0, cap_override=None):
    """Common core of the Wick and Weyl products; form is omega-like.

    kappa_min skips low contraction orders (the graded commutator has no
    kappa = 0 part, and skipping it keeps hbar-divisibility structural).
    """
    a._guard(b)
    dim, mode = a.dim, a.mode
    limit = a.deg_cap if cap_override is None else cap_override
    omega = form.entries if hasattr(form, "entries") else form.omega.entries
    blocks = {}
    for (pa, ka, na), A in a.blocks.items():
        for (pb, kb, nb), B in b.blocks.items():
            k_out = ka + kb
            if k_out > dim:
                continue
            for kappa in range(kappa_min, min(na, nb) + 1):
                p_out = pa + pb + kappa
                n_out = na + nb - 2 * kappa
                if 2 * p_out + n_out > limit:
                    continue
                cnum = (math.factorial(na) * math.factorial(nb))
                cden = (math.factorial(kappa) * math.factorial(na - kappa)
                        * math.factorial(nb - kappa))
                weight = sc.rational(mode, cnum, cden)
                raw = {}
                # symmetrized storage shares jet objects across permuted
                # indices, so products repeat heavily; memoize on identity
                cache = {}
                for ia, ja in A.items():
                    aI, ay = ia[:ka], ia[ka:]
                    for ib, jb in B.items():
                        bI, by = ib[:kb], ib[kb:]
                        ckey = (id(ja), id(jb), ay[:kappa], by[:kappa])
                        jet = cache.get(ckey)
                        if jet is None:
                            jet = ja * jb
                            skip = False
                            for t in range(kappa):
                                om = omega.get((ay[t], by[t]))
                                if om is None:
                                    skip = True
                                    break
                                jet = jet * om
                            cache[ckey] = False if skip else jet
                            if skip:
                                continue
                        elif jet is False:
                            continue
                        oidx = aI + bI + ay[kappa:] + by[kappa:]
                        raw[oidx] = raw[oidx] + jet if oidx in raw else jet
                if not raw:
                    continue
                raw = {i: j.scale(weight) for i, j in raw.items()}
                proj = _project_block(raw, k_out, n_out, mode)
                if not proj:
                    continue
                tgt = blocks.setdefault((p_out, k_out, n_out), {})
                for idx, jet in proj.items():
                    tgt[idx] = tgt[idx] + jet if idx in tgt else jet
    return GradedElement(dim, a.deg_cap, mode, blocks)


def wick_mul(a, b, w):
    """Fiber Wick product with contraction form w (a FiberForm)."""
    return _fiber_product(a, b, w)


def weyl_mul(a, b, w):
    """Weyl-Moyal product: contraction through (i/2) sigma^{ij}.

    w may be a FiberForm (its sigma part is used) or the (i/2) sigma tensor.
    """
    form = w.weyl_form() if isinstance(w, FiberForm) else w
    return _fiber_product(a, b, form)


def dagger(a):
    """Hermitian conjugation: complex-conjugate every coefficient jet."""
    return a.map_jets(lambda j: j.conj())


def delta_op(a):
    """dx^i ^ d_{y^i}: block (k, n) -> (k+1, n-1), weight n."""
    blocks = {}
    for (p, k, n), entries in a.blocks.items():
        if n == 0:
            continue
        raw = {}
        for idx, jet in entries.items():
            I, A = idx[:k], idx[k:]
            nidx = (A[0],) + I + A[1:]
            piece = jet.scale(n)
            raw[nidx] = raw[nidx] + piece if nidx in raw else piece
        proj = _project_block(raw, k + 1, n - 1, a.mode, symm=False)
        if proj:
            tgt = blocks.setdefault((p, k + 1, n - 1), {})
            for idx, jet in proj.items():
                tgt[idx] = tgt[idx] + jet if idx in tgt else jet
    return GradedElement(a.dim, a.deg_cap, a.mode, blocks)


def delta_inv_op(a):
    """y^j i(d_{x^j}): block (k, n) -> (k-1, n+1), weight k/(n+k)."""
    blocks = {}
    for (p, k, n), entries in a.blocks.items():
        if k == 0:
            continue
        w = sc.rational(a.mode, k, n + k)
        raw = {}
        for idx, jet in entries.items():
            I, A = idx[:k], idx[k:]
            nidx = I[1:] + (I[0],) + A
            piece = jet.scale(w)
            raw[nidx] = raw[nidx] + piece if nidx in raw else piece
        proj = _project_block(raw, k - 1, n + 1, a.mode, antisym=False)
        if proj:
            tgt = blocks.setdefault((p, k - 1, n + 1), {})
            for idx, jet in proj.items():
                tgt[idx] = tgt[idx] + jet if idx in tgt else jet
    return GradedElement(a.dim, a.deg_cap, a.mode, blocks)


def tau_project(a):
    """Projection onto the deg_s = deg_a = 0 part."""
    return a.select(lambda p, k, n: k == 0 and n == 0)


def graded_commutator(a, b, w, product=wick_mul, cap_override=None):
    """[a, b] with the deg_a-graded sign on homogeneous parts.

    The kappa = 0 contraction order cancels identically between a•b and
    (-1)^{ka kb} b•a, so it is never computed; every term of the result
    carries at least one power of hbar.
    """
    form = w
    if product is weyl_mul and isinstance(w, FiberForm):
        form = w.weyl_form()
    out = GradedElement.zero(a.dim, a.deg_cap, a.mode)
    for ka, ap in a.deg_a_parts().items():
        for kb, bp in b.deg_a_parts().items():
            fwd = _fiber_product(ap, bp, form, kappa_min=1,
                                 cap_override=cap_override)
            bwd = _fiber_product(bp, ap, form, kappa_min=1,
                                 cap_override=cap_override)
            if (ka * kb) % 2:
                out = out + fwd + bwd
            else:
                out = out + fwd - bwd
    return out


def ad_bullet(t, w, product=wick_mul):
    """The curried adjoint action [t, .] of the graded commutator."""
    def act(x):
        return graded_commutator(t, x, w, product)
    return act


def commutator_over_hbar(x, t, w, product=wick_mul, scale=None):
    """(scale/hbar) [x, t], computed without losing blocks at the Deg cap.

    The commutator transiently exceeds the cap by up to two before the
    hbar division brings it back, so products run with a lifted cap and
    the result is truncated to t's cap.  scale defaults to the imaginary
    unit, giving the ubiquitous (i/hbar) ad(x) building block.
    """
    cap = t.deg_cap
    comm = graded_commutator(x, t, w, product=product, cap_override=cap + 2)
    out = hbar_divide(comm).truncate_deg(cap)
    s = sc.imag_unit(t.mode) if scale is None else scale
    return out.scale(s)


def hbar_mul(a, powers=1):
    blocks = {(p + powers, k, n): entries
              for (p, k, n), entries in a.blocks.items()}
    return GradedElement(a.dim, a.deg_cap, a.mode, blocks)


def hbar_divide(a, powers=1):
    for (p, k, n) in a.blocks:
        if p < powers:
            raise FedokgError("element not divisible by hbar")
    blocks = {(p - powers, k, n): entries
              for (p, k, n), entries in a.blocks.items()}
    return GradedElement(a.dim, a.deg_cap, a.mode, blocks)


def sigma_two_form(sigma_lower, deg_cap, order, mode):
    """The symplectic form as a (0, 2, 0) element.

    The stored full-sum component array is sigma_{ij}/2, so that the
    element equals the ordered sum over i < j of sigma_{ij} dx^i ^ dx^j.
    """
    dim = sigma_lower.dim
    half = sc.rational(mode, 1, 2)
    entries = {}
    for (i, j), jet in sigma_lower.entries.items():
        entries[(i, j)] = jet.scale(half).with_order(order)
    return GradedElement(dim, deg_cap, mode, {(0, 2, 0): entries})


# -- comparison and randomness ----------------------------------------------


def ge_residual(a, b=None):
    """Max difference coefficient within the shared jet-validity floor.

    Identities between elements produced by different operator pipelines
    are only meaningful up to the smaller propagated valid_order; stored
    coefficients beyond it are not compared.
    """
    if b is None:
        d = a
        floor = a.min_valid_order()
    else:
        d = a - b
        floors = [v for v in (a.min_valid_order(), b.min_valid_order())
                  if v is not None]
        floor = min(floors) if floors else None
    if floor is None:
        return d.max_abs()
    worst = 0.0
    for entries in d.blocks.values():
        for jet in entries.values():
            for idx, v in jet.coeffs.items():
                if sum(idx) <= floor:
                    worst = max(worst, abs(sc.to_complex(v)))
    return worst


def ge_agree(a, b, tol=0.0):
    return ge_residual(a, b) <= tol


def random_element(rng, dim, deg_cap, mode, order, n_blocks=3, terms=2,
                   max_k=None, max_p=None, real=False):
    """A sparse random element for property tests."""
    from .jets import random_jet
    max_k = dim if max_k is None else max_k
    blocks = {}
    for _ in range(n_blocks):
        p = int(rng.integers(0, (deg_cap // 2) + 1 if max_p is None
                             else max_p + 1))
        k = int(rng.integers(0, max_k + 1))
        n = int(rng.integers(0, max(deg_cap - 2 * p, 0) + 1))
        if 2 * p + n > deg_cap:
            continue
        raw = {}
        for _ in range(terms):
            idx = tuple(int(rng.integers(0, dim)) for _ in range(k + n))
            jet = random_jet(rng, dim, order, mode, terms=3)
            if real:
                jet = (jet + jet.conj()).scale(sc.rational(mode, 1, 2))
            raw[idx] = raw[idx] + jet if idx in raw else jet
        proj = _project_block(raw, k, n, mode)
        if proj:
            tgt = blocks.setdefault((p, k, n), {})
            for idx, jet in proj.items():
                tgt[idx] = tgt[idx] + jet if idx in tgt else jet
    return GradedElement(dim, deg_cap, mode, blocks)
