"""Jet arithmetic against brute-force dense polynomial oracles."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedokg import scalars as sc
from fedokg.errors import BudgetError, DimensionMismatch
from fedokg.jets import (Jet, jet_add, jet_from_dict, jet_mul, jet_partial,
                         jet_to_dict, jets_agree, random_jet)


def poly_mul_oracle(a, b):
    """Untruncated dense convolution of coefficient dicts."""
    out = {}
    for ia, va in a.items():
        for ib, vb in b.items():
            idx = tuple(x + y for x, y in zip(ia, ib))
            out[idx] = out.get(idx, sc.QQ()) + va * vb
    return out


def test_add_cancellation():
    # (1 + y1) + (2 - y1) -> 3
    one_plus = Jet(2, 4, {(0, 0): sc.QQ(1), (1, 0): sc.QQ(1)}, sc.EXACT)
    two_minus = Jet(2, 4, {(0, 0): sc.QQ(2), (1, 0): sc.QQ(-1)}, sc.EXACT)
    s = jet_add(one_plus, two_minus)
    assert s.coeffs == {(0, 0): sc.QQ(3)}


def test_add_identity():
    rng = np.random.default_rng(0)
    a = random_jet(rng, 2, 4, sc.EXACT)
    z = Jet.zero(2, 4, sc.EXACT)
    assert jets_agree(jet_add(a, z), a)


def test_add_matches_polynomial_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = random_jet(rng, 2, 4, sc.EXACT, terms=8)
        b = random_jet(rng, 2, 4, sc.EXACT, terms=8)
        s = jet_add(a, b)
        expect = dict(a.coeffs)
        for idx, v in b.coeffs.items():
            expect[idx] = expect.get(idx, sc.QQ()) + v
        expect = {i: v for i, v in expect.items() if not sc.is_zero(v)}
        assert s.coeffs == expect


def test_mul_truncation_order1():
    # (1+y1)(1-y1) at order 1 -> 1
    a = Jet(2, 1, {(0, 0): sc.QQ(1), (1, 0): sc.QQ(1)}, sc.EXACT)
    b = Jet(2, 1, {(0, 0): sc.QQ(1), (1, 0): sc.QQ(-1)}, sc.EXACT)
    p = jet_mul(a, b)
    assert p.coeffs == {(0, 0): sc.QQ(1)}


def test_mul_order2_keeps_square():
    a = Jet(2, 2, {(0, 0): sc.QQ(1), (1, 0): sc.QQ(1)}, sc.EXACT)
    b = Jet(2, 2, {(0, 0): sc.QQ(1), (1, 0): sc.QQ(-1)}, sc.EXACT)
    p = jet_mul(a, b)
    assert p.coeffs == {(0, 0): sc.QQ(1), (2, 0): sc.QQ(-1)}


def test_mul_matches_convolution_oracle_degree5():
    rng = np.random.default_rng(2)
    for _ in range(10):
        a = random_jet(rng, 2, 5, sc.EXACT, terms=10)
        b = random_jet(rng, 2, 5, sc.EXACT, terms=10)
        p = jet_mul(a, b)
        oracle = poly_mul_oracle(a.coeffs, b.coeffs)
        oracle = {i: v for i, v in oracle.items()
                  if sum(i) <= 5 and not sc.is_zero(v)}
        assert p.coeffs == oracle


def test_mul_truncation_consistency():
    rng = np.random.default_rng(3)
    a = random_jet(rng, 2, 6, sc.EXACT, terms=12)
    b = random_jet(rng, 2, 6, sc.EXACT, terms=12)
    for k in range(7):
        lhs = jet_mul(a, b).truncate(k)
        rhs = jet_mul(a.truncate(k), b.truncate(k))
        assert jets_agree(lhs, rhs)


def test_partial_basics():
    y1sq = Jet(2, 4, {(2, 0): sc.QQ(1)}, sc.EXACT)
    d = jet_partial(y1sq, 0)
    assert d.coeffs == {(1, 0): sc.QQ(2)}
    assert d.valid_order == 3
    y1 = Jet(2, 4, {(1, 0): sc.QQ(1)}, sc.EXACT)
    assert jet_partial(y1, 1).is_zero()


def test_partials_commute():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a = random_jet(rng, 3, 5, sc.EXACT, terms=10)
        ab = jet_partial(jet_partial(a, 0), 1)
        ba = jet_partial(jet_partial(a, 1), 0)
        assert jets_agree(ab, ba)


def test_partial_budget_exhausted():
    a = Jet(2, 3, {(1, 0): sc.QQ(1)}, sc.EXACT, valid_order=0)
    with pytest.raises(BudgetError):
        jet_partial(a, 0)


def test_read_past_validity_raises():
    a = Jet(2, 4, {(1, 0): sc.QQ(1)}, sc.EXACT, valid_order=1)
    a.coefficient((1, 0))
    with pytest.raises(BudgetError):
        a.coefficient((2, 0))


def test_dimension_mismatch():
    a = Jet.zero(2, 3, sc.EXACT)
    b = Jet.zero(4, 3, sc.EXACT)
    with pytest.raises(DimensionMismatch):
        jet_add(a, b)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
def test_ring_axioms_exact(sa, sb, sc_seed):
    """Associativity, commutativity, distributivity hold exactly."""
    ra = np.random.default_rng(sa)
    rb = np.random.default_rng(sb)
    rc = np.random.default_rng(sc_seed)
    a = random_jet(ra, 2, 6, sc.EXACT, terms=5)
    b = random_jet(rb, 2, 6, sc.EXACT, terms=5)
    c = random_jet(rc, 2, 6, sc.EXACT, terms=5)
    assert jets_agree(jet_mul(jet_mul(a, b), c), jet_mul(a, jet_mul(b, c)))
    assert jets_agree(jet_mul(a, b), jet_mul(b, a))
    assert jets_agree(jet_mul(a, jet_add(b, c)),
                      jet_add(jet_mul(a, b), jet_mul(a, c)))


def test_serialization_roundtrip_exact():
    rng = np.random.default_rng(5)
    a = random_jet(rng, 2, 4, sc.EXACT, terms=8)
    d = jet_to_dict(a)
    b = jet_from_dict(d, sc.EXACT)
    assert jets_agree(a, b)
    assert isinstance(d["coeffs"][0][1], str)  # "p/q" strings in exact mode


def test_serialization_roundtrip_float():
    rng = np.random.default_rng(6)
    a = random_jet(rng, 2, 4, sc.FLOAT, terms=8)
    b = jet_from_dict(jet_to_dict(a), sc.FLOAT)
    assert jets_agree(a, b, tol=0.0)
