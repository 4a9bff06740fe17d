"""Connection and curvature data of one almost-Kaehler Darboux chart.

The chart carries a constant symplectic form sigma_{ij}, a Riemannian
metric G_{ij} given as jets around the base point, and the compatible
almost-complex structure J^i_j = G^{il} sigma_{lj}.  From these we derive
the Levi-Civita symbols, the Nijenhuis tensor, the sigma- and G-parallel
connection with torsion -N/4, its curvature, and the two curvature
elements of the Wick-algebra layer (antisymmetric rank 2, symmetric rank
1 and 2 respectively).

Index conventions: the first lower index of a Christoffel symbol is the
derivative direction, covariant derivatives act as
grad_i t_j = d_i t_j - Gamma^l_{ij} t_l, and the curvature is
R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj}
          + Gamma^i_{km} Gamma^m_{lj} - Gamma^i_{lm} Gamma^m_{kj}.
"""

from __future__ import annotations

from itertools import product as iproduct

from . import scalars as sc
from .errors import ConfigError, DimensionMismatch, FedokgError
from .jets import Jet, jet_from_dict, jet_to_dict
from .tensors import TensorJet, constant_tensor, tensor_contract, tensor_invert
from .wick import FiberForm, GradedElement, _project_block

__all__ = [
    "ChartGeometry", "compatible_triple", "levi_civita", "nijenhuis", "yano",
    "torsion_curvature", "hat_tensors", "nabla", "std_sigma_lower",
    "std_sigma_upper", "make_symplectic_chart", "chart_to_dict",
    "chart_from_dict",
]


def std_sigma_upper(d):
    m = [[0] * (2 * d) for _ in range(2 * d)]
    for b in range(d):
        m[2 * b][2 * b + 1] = 1
        m[2 * b + 1][2 * b] = -1
    return m


def std_sigma_lower(d):
    m = [[0] * (2 * d) for _ in range(2 * d)]
    for b in range(d):
        m[2 * b][2 * b + 1] = -1
        m[2 * b + 1][2 * b] = 1
    return m


# ------------------------------------------------------------ operations


def levi_civita(metric, metric_inv):
    """Christoffel symbols of the metric; costs one order of validity."""
    dim = metric.dim
    order = metric.some_entry().order
    dG = {}
    for (i, j), jet in metric.entries.items():
        for k in range(dim):
            dG[(k, i, j)] = jet.partial(k)

    def d_at(k, i, j):
        jet = dG.get((k, i, j))
        return jet

    half = sc.rational(metric.mode, 1, 2)

    def fn(idx):
        k, i, j = idx
        acc = None
        for ell in range(dim):
            gup = metric_inv.entries.get((k, ell))
            if gup is None:
                continue
            term = None
            for part in (d_at(i, ell, j), d_at(j, i, ell)):
                if part is not None:
                    term = part if term is None else term + part
            neg = d_at(ell, i, j)
            if neg is not None:
                term = -neg if term is None else term - neg
            if term is None:
                continue
            piece = gup * term
            acc = piece if acc is None else acc + piece
        return None if acc is None else acc.scale(half)

    return TensorJet.build(dim, ("u", "d", "d"), fn, metric.mode)


def nijenhuis(acs):
    """Nijenhuis tensor of the almost-complex structure (antisym in i, j)."""
    dim = acs.dim
    dJ = {}
    for (k, i), jet in acs.entries.items():
        for ell in range(dim):
            dJ[(ell, k, i)] = jet.partial(ell)

    def fn(idx):
        k, i, j = idx
        acc = None
        for ell in range(dim):
            terms = []
            a = dJ.get((ell, k, i))
            b = acs.entries.get((ell, j))
            if a is not None and b is not None:
                terms.append(a * b)
            a = acs.entries.get((k, ell))
            b = dJ.get((i, ell, j))
            if a is not None and b is not None:
                terms.append(a * b)
            a = dJ.get((ell, k, j))
            b = acs.entries.get((ell, i))
            if a is not None and b is not None:
                terms.append(-(a * b))
            a = acs.entries.get((k, ell))
            b = dJ.get((j, ell, i))
            if a is not None and b is not None:
                terms.append(-(a * b))
            for t in terms:
                acc = t if acc is None else acc + t
        return acc

    return TensorJet.build(dim, ("u", "d", "d"), fn, acs.mode)


def yano(lc, nij, metric, metric_inv):
    """sigma- and G-parallel connection with torsion -N/4."""
    dim = metric.dim
    eighth = sc.rational(metric.mode, 1, 8)

    def fn(idx):
        k, i, j = idx
        acc = nij.entries.get((k, i, j))
        for s in range(dim):
            gup = metric_inv.entries.get((k, s))
            if gup is None:
                continue
            inner = None
            for r in range(dim):
                for (na, nb, gc) in (((r, s, i), (r, j), None),
                                     ((r, s, j), (r, i), None)):
                    nval = nij.entries.get(na)
                    gval = metric.entries.get(nb)
                    if nval is not None and gval is not None:
                        piece = nval * gval
                        inner = piece if inner is None else inner + piece
            if inner is not None:
                piece = gup * inner
                acc = piece if acc is None else acc + piece
        corr = None if acc is None else acc.scale(eighth)
        base = lc.entries.get((k, i, j))
        if base is None and corr is None:
            return None
        if base is None:
            return -corr
        if corr is None:
            return base
        return base - corr

    return TensorJet.build(dim, ("u", "d", "d"), fn, metric.mode)


def torsion_curvature(gamma):
    """Torsion T^k_{ij} = Gamma^k_{ij} - Gamma^k_{ji} and the curvature."""
    dim = gamma.dim
    mode = gamma.mode

    def t_fn(idx):
        k, i, j = idx
        a = gamma.entries.get((k, i, j))
        b = gamma.entries.get((k, j, i))
        if a is None and b is None:
            return None
        if a is None:
            return -b
        if b is None:
            return a
        return a - b

    torsion = TensorJet.build(dim, ("u", "d", "d"), t_fn, mode)

    dGamma = {}
    for (k, i, j), jet in gamma.entries.items():
        for ell in range(dim):
            dGamma[(ell, k, i, j)] = jet.partial(ell)

    def r_fn(idx):
        i, j, k, ell = idx
        acc = dGamma.get((k, i, ell, j))
        b = dGamma.get((ell, i, k, j))
        if b is not None:
            acc = -b if acc is None else acc - b
        for m in range(dim):
            a1 = gamma.entries.get((i, k, m))
            b1 = gamma.entries.get((m, ell, j))
            if a1 is not None and b1 is not None:
                piece = a1 * b1
                acc = piece if acc is None else acc + piece
            a2 = gamma.entries.get((i, ell, m))
            b2 = gamma.entries.get((m, k, j))
            if a2 is not None and b2 is not None:
                piece = a2 * b2
                acc = -piece if acc is None else acc - piece
        return acc

    curvature = TensorJet.build(dim, ("u", "d", "d", "d"), r_fn, mode)
    return torsion, curvature


def hat_tensors(sigma, torsion, curvature, deg_cap):
    """The torsion and curvature elements of the form algebra.

    T-hat: block (0, 2, 1) with components sigma_{j l} T^l_{i1 i2} / 2;
    R-hat: block (0, 2, 2) with components sigma_{j1 l} R^l_{j2 i1 i2} / 4,
    symmetrized in the y pair.
    """
    dim = sigma.dim
    mode = sigma.mode
    half = sc.rational(mode, 1, 2)
    quarter = sc.rational(mode, 1, 4)

    st = tensor_contract(sigma, torsion, [(1, 0)])      # (j, i1, i2)
    t_entries = {}
    for (j, i1, i2), jet in st.entries.items():
        t_entries[(i1, i2, j)] = jet.scale(half)
    t_hat = GradedElement(dim, deg_cap, mode,
                          {(0, 2, 1): t_entries} if t_entries else {})

    sr = tensor_contract(sigma, curvature, [(1, 0)])    # (j1, j2, i1, i2)
    raw = {}
    for (j1, j2, i1, i2), jet in sr.entries.items():
        idx = (i1, i2, j1, j2)
        piece = jet.scale(quarter)
        raw[idx] = raw[idx] + piece if idx in raw else piece
    proj = _project_block(raw, 2, 2, mode, antisym=False)
    r_hat = GradedElement(dim, deg_cap, mode, {(0, 2, 2): proj} if proj else {})
    return t_hat, r_hat


def nabla(a, geom):
    """Covariant exterior derivative on W-valued forms.

    Wedges dx^{i0} in front and applies d_{i0} to the coefficient jets with
    a Gamma correction on every y slot; raises k by one, costs one order
    of jet validity.  Every output jet is clipped to one order below the
    input element's validity floor: entries absent from the sparse input
    are only known to vanish up to that floor, so their (unknown) higher
    coefficients would feed exactly the clipped orders.
    """
    gamma = geom.yano
    dim = a.dim
    floor = a.min_valid_order()
    if floor is None:
        return GradedElement.zero(dim, a.deg_cap, a.mode)
    if floor <= 0:
        from .errors import BudgetError
        raise BudgetError("derivative budget exhausted")
    out_valid = floor - 1
    blocks = {}
    for (p, k, n), entries in a.blocks.items():
        if k + 1 > dim:
            continue
        raw = {}

        def put(idx, jet):
            raw[idx] = raw[idx] + jet if idx in raw else jet

        for idx, jet in entries.items():
            I, A = idx[:k], idx[k:]
            for i0 in range(dim):
                put((i0,) + I + A, jet.partial(i0))
            for slot in range(n):
                ell = A[slot]
                for (gk, gi, gj), gjet in gamma.entries.items():
                    if gk != ell:
                        continue
                    nidx = (gi,) + I + A[:slot] + (gj,) + A[slot + 1:]
                    put(nidx, -(gjet * jet))
        proj = _project_block(raw, k + 1, n, a.mode, symm=False)
        if proj:
            tgt = blocks.setdefault((p, k + 1, n), {})
            for idx, jet in proj.items():
                jet = jet.with_order(jet.order,
                                     min(jet.valid_order, out_valid))
                tgt[idx] = tgt[idx] + jet if idx in tgt else jet
    return GradedElement(dim, a.deg_cap, a.mode, blocks)


# ------------------------------------------------------------ the chart


class ChartGeometry:
    """All derived connection data of one chart, built once, then shared."""

    def __init__(self, sigma, metric, deg_cap, *, validate=True):
        self.dim = sigma.dim
        self.mode = sigma.mode
        self.deg_cap = deg_cap
        self.sigma = sigma                       # sigma_{ij}, constant
        self.sigma_upper = tensor_invert(sigma)  # sigma^{ij}
        self.metric = metric                     # G_{ij}
        self.metric_inv = tensor_invert(metric)  # G^{ij}
        self.acs = tensor_contract(self.metric_inv, sigma, [(1, 0)])
        self.order = metric.some_entry().order
        if validate:
            self._validate()
        half = sc.rational(self.mode, 1, 2)
        half_i = sc.imag_unit(self.mode) * half if self.mode == sc.EXACT \
            else 0.5j
        omega = self.metric_inv.map_jets(lambda j: j.scale(half)) + \
            self.sigma_upper.map_jets(lambda j: j.scale(half_i))
        self.omega_fiber = FiberForm(omega)
        self.lc = levi_civita(metric, self.metric_inv)
        self.nijenhuis = nijenhuis(self.acs)
        self.yano = yano(self.lc, self.nijenhuis, metric, self.metric_inv)
        self.torsion, self.curvature = torsion_curvature(self.yano)
        self.t_hat, self.r_hat = hat_tensors(sigma, self.torsion,
                                             self.curvature, deg_cap)

    def _validate(self):
        tol = 0.0 if self.mode == sc.EXACT else 1e-9
        jj = tensor_contract(self.acs, self.acs, [(1, 0)])
        ident = constant_tensor(self.dim, ("u", "d"),
                                [[1 if i == j else 0 for j in range(self.dim)]
                                 for i in range(self.dim)],
                                self.order, self.mode)
        if (jj + ident).max_abs() > tol:
            raise ConfigError("metric and symplectic form are not compatible "
                              "(J^2 + id != 0)")

    def is_kahler(self):
        return self.nijenhuis.is_zero()

    def sigma_matrix(self):
        z = (0,) * self.dim
        return [[sc.to_complex(self.sigma.entry((i, j), self.order)
                               .coeffs.get(z, sc.zero(self.mode))).real
                 for j in range(self.dim)] for i in range(self.dim)]


def _as_map(t):
    """Relabel a rank-2 tensor as a linear map (mixed variance)."""
    return TensorJet(t.dim, ("u", "d"), t.entries, t.mode)


def _map_mul(a, b):
    return _as_map(tensor_contract(_as_map(a), _as_map(b), [(1, 0)]))


def _map_inv(a):
    return _as_map(tensor_invert(TensorJet(a.dim, ("d", "d"), a.entries,
                                           a.mode)))


def _map_transpose_times_sigma(j_mix, sigma):
    """G_{ij} = J^a_i sigma_{aj} as a covariant rank-2 tensor."""
    return tensor_contract(j_mix, sigma, [(0, 0)])


def compatible_triple(sigma, seed_metric, max_iter=50):
    """Metric and almost-complex structure compatible with sigma.

    Polar construction: A = seed^{-1} sigma, J = A (-A^2)^{-1/2} by a
    Denman-Beavers square-root iteration on jets, G = sigma(J., .).  A
    seed that is already compatible is a fixed point.  In exact mode the
    square root generally leaves the rationals, so only exactly-compatible
    seeds are accepted there.
    """
    dim = sigma.dim
    mode = sigma.mode
    order = seed_metric.some_entry().order
    seed_inv = tensor_invert(seed_metric)
    a_mix = _as_map(tensor_contract(seed_inv, sigma, [(1, 0)]))  # A^i_j
    m = -_map_mul(a_mix, a_mix)                                  # -A^2

    ident = constant_tensor(dim, ("u", "d"),
                            [[1 if i == j else 0 for j in range(dim)]
                             for i in range(dim)], order, mode)
    if (m - ident).is_zero():
        j_mix = a_mix
    elif mode == sc.EXACT:
        raise FedokgError("polar decomposition failed: exact mode needs an "
                          "exactly compatible seed")
    else:
        inv_sqrt = _db_inverse_sqrt(m, ident, max_iter)
        j_mix = _map_mul(a_mix, inv_sqrt)
    metric = _map_transpose_times_sigma(j_mix, sigma)
    return metric, j_mix


def _db_inverse_sqrt(m, ident, max_iter):
    """Denman-Beavers: Y -> M^{1/2}, Z -> M^{-1/2}; returns Z."""
    y, z = m, ident
    for _ in range(max_iter):
        y_next = (y + _map_inv(z)).map_jets(lambda j: j.scale(0.5))
        z_next = (z + _map_inv(y)).map_jets(lambda j: j.scale(0.5))
        y, z = y_next, z_next
        resid = _map_mul(y, y) - m
        if resid.max_abs() < 1e-14 * max(m.max_abs(), 1.0):
            return z
    raise FedokgError("polar decomposition failed")


# ------------------------------------------------- chart construction


def _transvection(dim, order, mode, sigma_lower, v_poly, c):
    """S = I + c * v (sigma v)^T with polynomial v; exactly symplectic.

    v has v(0) = 0, so S(0) = id and the chart base point stays standard.
    """
    sv = [None] * dim  # (sigma v)_j = sum_a v^a sigma_{aj}
    for j in range(dim):
        acc = None
        for a in range(dim):
            s_aj = sigma_lower.entries.get((a, j))
            va = v_poly[a]
            if s_aj is None or va is None:
                continue
            piece = va * s_aj
            acc = piece if acc is None else acc + piece
        sv[j] = acc

    def fn(idx):
        i, j = idx
        base = Jet.constant(dim, order, 1, mode) if i == j else None
        if v_poly[i] is None or sv[j] is None:
            return base
        corr = (v_poly[i] * sv[j]).scale(c)
        return corr if base is None else base + corr

    return TensorJet.build(dim, ("u", "d"), fn, mode)


def _jet_reciprocal(f):
    """1/f for a jet with nonzero constant term (Newton iteration)."""
    dim, order, mode = f.dim, f.order, f.mode
    c0 = f.coeffs.get((0,) * dim)
    if c0 is None or sc.is_zero(c0):
        raise DimensionMismatch("reciprocal of a jet vanishing at the base")
    inv0 = (sc.QQ(1) / c0) if mode == sc.EXACT else 1.0 / c0
    h = Jet.constant(dim, order, inv0, mode).with_order(order, f.valid_order)
    two = Jet.constant(dim, order, 2, mode).with_order(order, f.valid_order)
    steps = 1
    while (1 << steps) <= order + 1:
        steps += 1
    for _ in range(steps):
        h = h * (two - f * h)
    return h


def make_symplectic_chart(d, order, mode, deg_cap, seed=0, kind="generic",
                          strength=(2, 3)):
    """A compatible chart over the standard constant sigma.

    kind "flat" is the standard pair; "kahler" is a product of det-1
    block metrics, each depending only on its own coordinate pair, so the
    Nijenhuis tensor vanishes; "generic" conjugates the standard complex
    structure by y-dependent symplectic transvections, which for d >= 2
    generically gives nonvanishing torsion.  All data is rational, so
    exact mode verifies identities on the nose.
    """
    import numpy as np
    dim = 2 * d
    rng = np.random.default_rng(seed)
    sigma = constant_tensor(dim, ("d", "d"), std_sigma_lower(d), order, mode)

    if kind == "flat":
        metric = constant_tensor(dim, ("d", "d"),
                                 [[1 if i == j else 0 for j in range(dim)]
                                  for i in range(dim)], order, mode)
        return ChartGeometry(sigma, metric, deg_cap)

    if kind == "kahler":
        # per sigma-block metric diag(f, 1/f): det = 1 keeps J^2 = -id,
        # and own-pair dependence keeps the structure integrable
        num, den = strength
        entries = {}
        for b in range(d):
            c = sc.rational(mode, int(rng.integers(1, num + 1)) *
                            (1 if rng.integers(0, 2) else -1), den)
            coord = 2 * b + int(rng.integers(0, 2))
            f = Jet.constant(dim, order, 1, mode) + \
                Jet.coordinate(dim, order, coord, mode).scale(c)
            entries[(2 * b, 2 * b)] = f
            entries[(2 * b + 1, 2 * b + 1)] = _jet_reciprocal(f)
        metric = TensorJet(dim, ("d", "d"), entries, mode)
        return ChartGeometry(sigma, metric, deg_cap)

    # generic: conjugate J_std by transvections with v(0) = 0
    s_total = None
    num, den = strength
    for _ in range(2 if d == 1 else 3):
        v = [None] * dim
        target = int(rng.integers(0, dim))
        coord = int(rng.integers(0, dim))
        c = sc.rational(mode, int(rng.integers(1, num + 1)) *
                        (1 if rng.integers(0, 2) else -1), den)
        v[target] = Jet.coordinate(dim, order, coord, mode)
        s = _transvection(dim, order, mode, sigma, v, c)
        s_total = s if s_total is None else _map_mul(s_total, s)

    j0 = constant_tensor(dim, ("u", "d"), std_sigma_lower(d), order, mode)
    j_mix = _map_mul(_map_mul(s_total, j0), _map_inv(s_total))
    metric = _map_transpose_times_sigma(j_mix, sigma)
    return ChartGeometry(sigma, metric, deg_cap)


# ------------------------------------------------------------ file format


def chart_to_dict(geom):
    z = (0,) * geom.dim

    def sig_entry(i, j):
        v = geom.sigma.entry((i, j), geom.order).coeffs.get(
            z, sc.zero(geom.mode))
        if geom.mode == sc.EXACT:
            return sc.format_rational(v.re)
        return sc.to_complex(v).real

    return {
        "dim": geom.dim,
        "order": geom.order,
        "mode": "direct",
        "sigma": [[sig_entry(i, j) for j in range(geom.dim)]
                  for i in range(geom.dim)],
        "metric": [[jet_to_dict(geom.metric.entry((i, j), geom.order))
                    for j in range(geom.dim)] for i in range(geom.dim)],
    }


def chart_from_dict(d, mode, deg_cap):
    dim = d["dim"]
    order = d["order"]
    sig_rows = d["sigma"]

    def sig_fn(idx):
        i, j = idx
        v = sig_rows[i][j]
        v = sc.parse_rational_string(str(v)) if mode == sc.EXACT else float(v)
        if v == 0:
            return None
        return Jet.constant(dim, order, v, mode)

    sigma = TensorJet.build(dim, ("d", "d"), sig_fn, mode)

    if d.get("mode", "direct") == "direct":
        if "metric" not in d:
            raise ConfigError("chart file: mode 'direct' needs field 'metric'")
        rows = d["metric"]

        def met_fn(idx):
            i, j = idx
            jd = rows[i][j]
            jet = jet_from_dict(jd, mode)
            return None if jet.is_zero() else jet

        metric = TensorJet.build(dim, ("d", "d"), met_fn, mode)
        return ChartGeometry(sigma, metric, deg_cap)

    if d["mode"] == "seed":
        if "seed_metric" not in d:
            raise ConfigError("chart file: mode 'seed' needs 'seed_metric'")
        rows = d["seed_metric"]

        def seed_fn(idx):
            i, j = idx
            jet = jet_from_dict(rows[i][j], mode)
            return None if jet.is_zero() else jet

        seed = TensorJet.build(dim, ("d", "d"), seed_fn, mode)
        metric, _ = compatible_triple(sigma, seed)
        return ChartGeometry(sigma, metric, deg_cap)

    raise ConfigError(f"chart file: unknown mode {d.get('mode')!r}")
