"""Wick/Weyl algebra: products, Fedosov operators, gradings.

The fiber-product oracle expands m(exp(hbar omega^{ij} d_i (x) d_j)(f (x) h))
by brute force on polynomial dictionaries, independently of the block code.
"""

import math
from itertools import product as iproduct

import numpy as np
import pytest

from conftest import std_fiber_form, std_sigma_lower, std_sigma_upper

from fedokg import scalars as sc
from fedokg.errors import FedokgError
from fedokg.jets import Jet
from fedokg.tensors import constant_tensor
from fedokg.wick import (FiberForm, GradedElement, ad_bullet,
                         commutator_over_hbar, dagger, delta_inv_op, delta_op,
                         ge_agree, ge_residual, graded_commutator,
                         hbar_divide, hbar_mul, random_element,
                         sigma_two_form, tau_project, weyl_mul, wick_mul)

D1 = 2  # chart dimension 2d for d = 1
CAP = 6
ORD = 4


def y(i, dim=D1, cap=CAP, p=0):
    return GradedElement.monomial(dim, cap, sc.EXACT, ORD, y_indices=(i,), p=p)


def ys(idx, dim=D1, cap=CAP):
    return GradedElement.monomial(dim, cap, sc.EXACT, ORD, y_indices=idx)


# ---------------------------------------------------------------- oracle


def poly_partial(poly, i, dim):
    out = {}
    for exp, c in poly.items():
        if exp[i] == 0:
            continue
        nexp = tuple(e - 1 if t == i else e for t, e in enumerate(exp))
        out[nexp] = out.get(nexp, sc.QQ()) + c * sc.QQ(exp[i])
    return out


def oracle_wick(f, h, omega, dim, hbar_max=6):
    """exp(hbar B) with B = sum omega^{ij} d_i (x) d_j, on polynomial dicts.

    Returns dict hbar-power -> polynomial dict.
    """
    out = {}
    kappa = 0
    pairs = [(f, h)]
    while kappa <= hbar_max:
        total = {}
        for (pf, ph) in pairs:
            for ef, cf in pf.items():
                for eh, ch in ph.items():
                    exp = tuple(a + b for a, b in zip(ef, eh))
                    total[exp] = total.get(exp, sc.QQ()) + cf * ch
        scale = sc.QQ(sc.mpq(1, math.factorial(kappa)))
        lvl = {e: c * scale for e, c in total.items() if c}
        if lvl:
            out[kappa] = lvl
        nxt = []
        for (pf, ph) in pairs:
            for i, j in iproduct(range(dim), repeat=2):
                if sc.is_zero(omega[i][j]):
                    continue
                df = poly_partial(pf, i, dim)
                dh = poly_partial(ph, j, dim)
                if df and dh:
                    nxt.append((
                        {e: c * omega[i][j] for e, c in df.items()}, dh))
        pairs = nxt
        kappa += 1
        if not pairs:
            break
    return out


def block_to_poly(entries, k, n, dim):
    """Contract a stored (k=0) symmetric block against y monomials."""
    assert k == 0
    out = {}
    for idx, jet in entries.items():
        exp = [0] * dim
        for i in idx:
            exp[i] += 1
        c = jet.coefficient((0,) * dim)
        out[tuple(exp)] = out.get(tuple(exp), sc.QQ()) + c
    return {e: c for e, c in out.items() if not sc.is_zero(c)}


def element_to_hbar_polys(a):
    out = {}
    for (p, k, n), entries in a.blocks.items():
        assert k == 0
        poly = block_to_poly(entries, k, n, a.dim)
        tgt = out.setdefault(p, {})
        for e, c in poly.items():
            tgt[e] = tgt.get(e, sc.QQ()) + c
    return {p: {e: c for e, c in poly.items() if not sc.is_zero(c)}
            for p, poly in out.items() if poly}


def omega_matrix_exact(d):
    su = std_sigma_upper(d)
    return [[sc.QQ(sc.mpq(1, 2) if i == j else 0, sc.mpq(su[i][j], 2))
             for j in range(2 * d)] for i in range(2 * d)]


# ---------------------------------------------------------------- products


def test_wick_basic_example():
    w = std_fiber_form(1, ORD, sc.EXACT)
    prod = wick_mul(y(0), y(1), w)
    # y^1 y^2 part
    expect_sym = ys((0, 1))
    sym_part = prod.select(lambda p, k, n: n == 2)
    assert ge_agree(sym_part, expect_sym)
    # hbar omega^{12} = i hbar / 2
    scal = prod.block(1, 0, 0)[()]
    assert scal.coefficient((0, 0)) == sc.QQ(0, sc.mpq(1, 2))


def test_wick_unit(rng):
    w = std_fiber_form(1, ORD, sc.EXACT)
    one = GradedElement.unit(D1, CAP, sc.EXACT, ORD)
    for _ in range(5):
        t = random_element(rng, D1, CAP, sc.EXACT, ORD)
        assert ge_agree(wick_mul(one, t, w), t)
        assert ge_agree(wick_mul(t, one, w), t)


def test_wick_matches_exponential_oracle():
    w = std_fiber_form(1, ORD, sc.EXACT)
    om = omega_matrix_exact(1)
    # degree-(2,2) monomials
    for a_idx, b_idx in [((0, 0), (0, 0)), ((0, 1), (0, 1)),
                         ((1, 1), (0, 0)), ((0, 1), (1, 1))]:
        a, b = ys(a_idx), ys(b_idx)
        prod = wick_mul(a, b, w)
        got = element_to_hbar_polys(prod)
        fa = block_to_poly(a.blocks[(0, 0, 2)], 0, 2, D1)
        fb = block_to_poly(b.blocks[(0, 0, 2)], 0, 2, D1)
        want = oracle_wick(fa, fb, om, D1)
        assert got == want


def test_weyl_basic_and_commutators():
    for d in (1, 2):
        dim = 2 * d
        w = std_fiber_form(d, ORD, sc.EXACT)
        su = std_sigma_upper(d)
        one = GradedElement.unit(dim, CAP, sc.EXACT, ORD)
        t = GradedElement.monomial(dim, CAP, sc.EXACT, ORD, y_indices=(0,))
        assert ge_agree(weyl_mul(one, t, w), t)
        for i in range(dim):
            for j in range(dim):
                yi = GradedElement.monomial(dim, CAP, sc.EXACT, ORD,
                                            y_indices=(i,))
                yj = GradedElement.monomial(dim, CAP, sc.EXACT, ORD,
                                            y_indices=(j,))
                comm = graded_commutator(yi, yj, w, product=weyl_mul)
                expect = GradedElement.monomial(
                    dim, CAP, sc.EXACT, ORD, p=1,
                    coeff=sc.QQ(0, sc.mpq(su[i][j])))
                assert ge_agree(comm, expect)


def test_weyl_y1_y2():
    w = std_fiber_form(1, ORD, sc.EXACT)
    prod = weyl_mul(y(0), y(1), w)
    scal = prod.block(1, 0, 0)[()]
    assert scal.coefficient((0, 0)) == sc.QQ(0, sc.mpq(1, 2))


def test_associativity_wick_and_weyl(rng):
    for d in (1, 2):
        w = std_fiber_form(d, 6, sc.EXACT)
        for _ in range(4):
            a = random_element(rng, 2 * d, 6, sc.EXACT, ORD, n_blocks=2)
            b = random_element(rng, 2 * d, 6, sc.EXACT, ORD, n_blocks=2)
            c = random_element(rng, 2 * d, 6, sc.EXACT, ORD, n_blocks=2)
            for prod in (wick_mul, weyl_mul):
                lhs = prod(prod(a, b, w), c, w)
                rhs = prod(a, prod(b, c, w), w)
                assert ge_agree(lhs, rhs)


def test_deg_filtration(rng):
    w = std_fiber_form(1, 6, sc.EXACT)
    for _ in range(6):
        a = random_element(rng, D1, 6, sc.EXACT, ORD, n_blocks=2)
        b = random_element(rng, D1, 6, sc.EXACT, ORD, n_blocks=2)
        da = max((2 * p + n for (p, k, n) in a.blocks), default=0)
        db = max((2 * p + n for (p, k, n) in b.blocks), default=0)
        prod = wick_mul(a, b, w)
        for (p, k, n) in prod.blocks:
            assert 2 * p + n <= da + db


# ---------------------------------------------------------------- dagger


def test_dagger_examples():
    assert ge_agree(dagger(y(0)), y(0))
    i_one = GradedElement.monomial(D1, CAP, sc.EXACT, ORD,
                                   coeff=sc.QQ(0, 1))
    assert ge_agree(dagger(i_one), -i_one)


def test_dagger_antihomomorphism(rng):
    w = std_fiber_form(1, 6, sc.EXACT)
    for _ in range(5):
        t = random_element(rng, D1, 6, sc.EXACT, ORD, n_blocks=2)
        s = random_element(rng, D1, 6, sc.EXACT, ORD, n_blocks=2)
        ts = t.select(lambda p, k, n: k == 0)
        ss = s.select(lambda p, k, n: k == 0)
        lhs = dagger(wick_mul(ts, ss, w))
        rhs = wick_mul(dagger(ss), dagger(ts), w)
        assert ge_agree(lhs, rhs)
        assert ge_agree(dagger(dagger(t)), t)


# ---------------------------------------------------------------- delta ops


def test_delta_example():
    t = ys((0, 1))
    dt = delta_op(t)
    expect = (GradedElement.monomial(D1, CAP, sc.EXACT, ORD,
                                     dx_indices=(0,), y_indices=(1,))
              + GradedElement.monomial(D1, CAP, sc.EXACT, ORD,
                                       dx_indices=(1,), y_indices=(0,)))
    assert ge_agree(dt, expect)


def test_delta_kills_scalars():
    f = GradedElement.from_jet(Jet.constant(D1, ORD, 3, sc.EXACT), CAP)
    assert delta_op(f).is_zero()


def test_delta_nilpotent(rng):
    for _ in range(10):
        t = random_element(rng, D1, 6, sc.EXACT, ORD)
        assert delta_op(delta_op(t)).is_zero()
        assert delta_inv_op(delta_inv_op(t)).is_zero()


def test_delta_inv_example():
    t = GradedElement.monomial(D1, CAP, sc.EXACT, ORD, dx_indices=(0,),
                               y_indices=(1,))
    expect = ys((0, 1)).scale(sc.rational(sc.EXACT, 1, 2))
    assert ge_agree(delta_inv_op(t), expect)
    assert delta_inv_op(ys((0, 1))).is_zero()


def test_tau_and_hodge(rng):
    f = GradedElement.from_jet(Jet.constant(D1, ORD, 2, sc.EXACT), CAP)
    t = f + GradedElement.monomial(D1, CAP, sc.EXACT, ORD, dx_indices=(0,),
                                   y_indices=(1,))
    assert ge_agree(tau_project(t), f)
    assert tau_project(y(0)).is_zero()
    for d in (1, 2):
        for _ in range(25):
            t = random_element(rng, 2 * d, 6, sc.EXACT, ORD)
            hodge = (delta_op(delta_inv_op(t)) + delta_inv_op(delta_op(t))
                     + tau_project(t))
            assert ge_agree(hodge, t)


# ---------------------------------------------------------------- commutator


def test_commutator_basic():
    w = std_fiber_form(1, CAP, sc.EXACT)
    comm = graded_commutator(y(0), y(1), w)
    expect = GradedElement.monomial(D1, CAP, sc.EXACT, ORD, p=1,
                                    coeff=sc.QQ(0, 1))
    assert ge_agree(comm, expect)


def test_commutator_even_self(rng):
    w = std_fiber_form(1, 6, sc.EXACT)
    for _ in range(5):
        t = random_element(rng, D1, 6, sc.EXACT, ORD, max_k=0)
        t = t + GradedElement.monomial(D1, 6, sc.EXACT, ORD,
                                       dx_indices=(0, 1), y_indices=(0,))
        assert graded_commutator(t, t, w).is_zero()


def test_lemma_delta_is_inner(rng):
    """delta = (2i/hbar) ad(delta^{-1} sigma) for the Wick product."""
    for d in (1, 2):
        dim = 2 * d
        sl = constant_tensor(dim, ("d", "d"), std_sigma_lower(d), ORD,
                             sc.EXACT)
        w = std_fiber_form(d, ORD, sc.EXACT)
        sform = sigma_two_form(sl, 6, ORD, sc.EXACT)
        dis = delta_inv_op(sform)
        for _ in range(6):
            t = random_element(rng, dim, 6, sc.EXACT, ORD)
            lhs = delta_op(t)
            rhs = commutator_over_hbar(dis, t, w, scale=sc.QQ(0, 2))
            assert ge_agree(lhs, rhs)


# ---------------------------------------------------------------- hbar ops


def test_hbar_divide():
    t = hbar_mul(y(0))
    assert ge_agree(hbar_divide(t), y(0))
    with pytest.raises(FedokgError):
        hbar_divide(y(0))


def test_commutators_divisible_by_hbar(rng):
    w = std_fiber_form(1, 6, sc.EXACT)
    for _ in range(8):
        a = random_element(rng, D1, 6, sc.EXACT, ORD, max_k=0, max_p=0)
        b = random_element(rng, D1, 6, sc.EXACT, ORD, max_k=0, max_p=0)
        a = a - tau_project(a)  # strip deg_s = 0 parts
        b = b - tau_project(b)
        a = a.select(lambda p, k, n: n >= 1)
        b = b.select(lambda p, k, n: n >= 1)
        comm = graded_commutator(a, b, w)
        hbar_divide(comm)  # must not raise


# ---------------------------------------------------------------- center


def test_center_characterization(rng):
    w = std_fiber_form(1, 6, sc.EXACT)
    gens = [y(0), y(1), ys((0, 1)), ys((0, 0))]
    # deg_s = 0 elements commute with the generators
    f = GradedElement.from_jet(Jet.constant(D1, ORD, 5, sc.EXACT), 6, p=1)
    for g in gens:
        assert graded_commutator(f, g, w).is_zero()
    # any element with a deg_s >= 1 block fails to commute with some y^i;
    # the hbar-divided adjoint action keeps the top filtration degree visible
    for _ in range(8):
        t = random_element(rng, D1, 6, sc.EXACT, ORD, max_k=0)
        if not any(n >= 1 for (p, k, n) in t.blocks):
            continue
        assert any(
            not commutator_over_hbar(t, y(i), w).is_zero() for i in range(D1))


# ---------------------------------------------------------------- misc


def test_serialization_roundtrip(rng):
    t = random_element(rng, D1, 6, sc.EXACT, ORD)
    d = t.to_dict()
    s = GradedElement.from_dict(d, sc.EXACT)
    assert ge_agree(t, s)


def test_float_mode_identity_tolerance(rng):
    w = std_fiber_form(1, 6, sc.FLOAT)
    a = random_element(rng, D1, 6, sc.FLOAT, ORD, n_blocks=2)
    b = random_element(rng, D1, 6, sc.FLOAT, ORD, n_blocks=2)
    c = random_element(rng, D1, 6, sc.FLOAT, ORD, n_blocks=2)
    lhs = wick_mul(wick_mul(a, b, w), c, w)
    rhs = wick_mul(a, wick_mul(b, c, w), w)
    scale = max(a.max_abs(), b.max_abs(), c.max_abs(), 1.0)
    assert ge_residual(lhs, rhs) / scale < 1e-10
