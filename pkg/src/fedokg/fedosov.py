"""Flat connection, quantization map, star product and gauge equivalence.

Everything is graded by the total degree Deg = 2p + n and solved by
fixed-point iteration: the one-form r of the flat derivative
D = grad - delta + (i/hbar) ad(r) obeys

    delta r = grad r + (i/hbar) r . r - R-hat - T-hat - Omega,
    r = r^dagger,  r^(0) = r^(1) = 0,  delta^{-1} r = s,

which Hodge-inverts to r = delta^{-1}(...) + delta s, a contraction in
Deg.  Degree bookkeeping: with r complete through the element cap C, the
operator D is exact on every stored block, one application of D is
complete through C - 1 (its delta part consumes one degree), and D^2
through C - 2; flatness is therefore asserted on the Deg <= C - 2 part.

The gauge sector compares the constructions of two compatible structures
over one constant symplectic form: the fiberwise intertwiner alpha
(a Gaussian in the difference of the two contraction forms), the
connection-difference element C, and the conjugator H solving

    r - r^alpha + sum_k 1/(k+1)! ((i/hbar) ad H)^k (D^alpha H) = theta.
"""

from __future__ import annotations

import math

from . import scalars as sc
from .errors import BudgetError, ConfigError, FedokgError
from .geometry import nabla
from .jets import Jet
from .tensors import tensor_contract
from .wick import (GradedElement, _project_block, commutator_over_hbar,
                   dagger, delta_inv_op, delta_op, ge_residual, hbar_mul,
                   tau_project, wick_mul)

__all__ = [
    "FedosovData", "build_r", "apply_D", "quantize", "star", "star_series",
    "alpha_map", "c_tensor", "n_coeffs", "GaugePair", "build_H",
    "equiv_residual", "equivalence_B", "flatness_residual",
    "r_equation_residual", "shuffled_clone",
]


# ------------------------------------------------------------ Fedosov data


class FedosovData:
    """The one-form r and its inputs, built once per chart and cap."""

    def __init__(self, geom, deg_cap, r, aux_omega, aux_s):
        self.geom = geom
        self.deg_cap = deg_cap
        self.r = r
        self.aux_omega = aux_omega
        self.aux_s = aux_s

    @property
    def omega_fiber(self):
        return self.geom.omega_fiber


def build_r(geom, deg_cap, aux_omega=None, aux_s=None):
    """Solve the flatness source equation through Deg <= deg_cap.

    Assembled level by level in the total degree: the Deg-m component is
    delta^{-1} of the Deg-(m-1) source (which only involves lower levels)
    plus the delta-image of the auxiliary datum.
    """
    w = geom.omega_fiber
    dim, mode = geom.dim, geom.mode
    if geom.order < deg_cap:
        raise BudgetError(
            f"chart jets of order {geom.order} cannot support Deg {deg_cap}")
    zero = GradedElement.zero(dim, deg_cap, mode)
    source_const = -(geom.t_hat.with_cap(deg_cap)
                     + geom.r_hat.with_cap(deg_cap))
    if aux_omega is not None:
        source_const = source_const - aux_omega.with_cap(deg_cap)
    delta_s = delta_op(aux_s.with_cap(deg_cap)) if aux_s is not None \
        else zero

    half = sc.rational(mode, 1, 2)
    parts = {m: zero for m in range(deg_cap + 1)}
    for m in range(2, deg_cap + 1):
        src = source_const.deg_part(m - 1)
        if not parts[m - 1].is_zero():
            src = src + nabla(parts[m - 1], geom)
        for a in range(2, m):
            b = m + 1 - a
            if b < 2 or b > deg_cap:
                continue
            if parts[a].is_zero() or parts[b].is_zero():
                continue
            src = src + commutator_over_hbar(
                parts[a], parts[b], w).scale(half)
        parts[m] = delta_inv_op(src) + delta_s.deg_part(m)
    r = zero
    for m in range(2, deg_cap + 1):
        r = r + parts[m]
    return FedosovData(geom, deg_cap, r, aux_omega, aux_s)


def r_equation_residual(fd):
    """Independent evaluation of the source equation.

    Complete through Deg <= cap - 1 (the delta r term consumes a degree).
    """
    geom, r, w = fd.geom, fd.r, fd.omega_fiber
    half = sc.rational(geom.mode, 1, 2)
    resid = nabla(r, geom) - delta_op(r) \
        + commutator_over_hbar(r, r, w).scale(half) \
        - geom.r_hat.with_cap(fd.deg_cap) - geom.t_hat.with_cap(fd.deg_cap)
    if fd.aux_omega is not None:
        resid = resid - fd.aux_omega.with_cap(fd.deg_cap)
    return ge_residual(resid.truncate_deg(fd.deg_cap - 1))


def apply_D(fd, a, product=wick_mul):
    """The flat derivative grad - delta + (i/hbar) ad(r)."""
    out = nabla(a, fd.geom) - delta_op(a)
    if not fd.r.is_zero():
        out = out + commutator_over_hbar(fd.r, a, fd.omega_fiber,
                                         product=product)
    return out


def flatness_residual(fd, a):
    """max |D^2 a| over the blocks where the truncation is complete."""
    dda = apply_D(fd, apply_D(fd, a))
    return ge_residual(dda.truncate_deg(fd.deg_cap - 2))


# ------------------------------------------------------------ quantization


def quantize(f, fd):
    """The flat section with deg_s = deg_a = 0 part f (inverse of tau).

    f may be a Jet or an hbar-series of Jets (list indexed by power).
    """
    if isinstance(f, Jet):
        series = [f]
    else:
        series = list(f)
    geom, w, cap = fd.geom, fd.omega_fiber, fd.deg_cap
    out = GradedElement.zero(geom.dim, cap, geom.mode)
    for power, jet in enumerate(series):
        if jet is None or jet.is_zero():
            continue
        if 2 * power > cap:
            break
        base = hbar_mul(GradedElement.from_jet(jet, cap), power)
        out = out + _quantize_element(base, fd)
    return out


def _quantize_element(base, fd):
    # D t = 0 and tau t = f Hodge-invert to t = f + delta^{-1}(grad t
    # + (i/hbar) ad(r) t); assembled level by level in Deg.
    geom, w, cap = fd.geom, fd.omega_fiber, fd.deg_cap
    zero = GradedElement.zero(geom.dim, cap, geom.mode)
    r_parts = {m: fd.r.deg_part(m) for m in range(cap + 1)}
    parts = {m: base.deg_part(m) for m in range(cap + 1)}
    for m in range(1, cap + 1):
        src = zero
        if not parts[m - 1].is_zero():
            src = nabla(parts[m - 1], geom)
        for a in range(2, m + 1):
            b = m + 1 - a
            if b < 0 or b > cap:
                continue
            if r_parts[a].is_zero() or parts[b].is_zero():
                continue
            src = src + commutator_over_hbar(r_parts[a], parts[b], w)
        if not src.is_zero():
            parts[m] = parts[m] + delta_inv_op(src)
    out = zero
    for m in range(cap + 1):
        out = out + parts[m]
    return out


def _series_from_tau(elt, order):
    """Extract the hbar-series of jets from the (p, 0, 0) blocks."""
    series = {}
    for (p, k, n), entries in tau_project(elt).blocks.items():
        jet = entries.get(())
        if jet is not None:
            series[p] = jet
    if not series:
        return []
    top = max(series)
    dim, mode = elt.dim, elt.mode
    return [series.get(p, Jet.zero(dim, order, mode)) for p in range(top + 1)]


def star(f, h, fd):
    """Star product of two jets; returns the list of hbar coefficients."""
    return star_series(f, h, fd)


def star_series(f, h, fd):
    qf = quantize(f, fd)
    qh = quantize(h, fd)
    prod = wick_mul(qf, qh, fd.omega_fiber)
    order = fd.geom.order
    return _series_from_tau(prod, order)


# ------------------------------------------------------------ alpha and C


def _laplace_like(a, diff):
    """Contract one y pair of every block through the rank-2 form diff."""
    blocks = {}
    for (p, k, n), entries in a.blocks.items():
        if n < 2:
            continue
        raw = {}
        for idx, jet in entries.items():
            I, A = idx[:k], idx[k:]
            dkey = (A[0], A[1])
            djet = diff.entries.get(dkey)
            if djet is None:
                continue
            weight = n * (n - 1)
            piece = (jet * djet).scale(weight)
            nidx = I + A[2:]
            raw[nidx] = raw[nidx] + piece if nidx in raw else piece
        if raw:
            tgt = blocks.setdefault((p + 1, k, n - 2), {})
            for idx, jet in raw.items():
                tgt[idx] = tgt[idx] + jet if idx in tgt else jet
    return GradedElement(a.dim, a.deg_cap, a.mode, blocks)


def alpha_map(a, w_from, w_to):
    """Intertwiner of the fiber products of two contraction forms.

    exp((hbar/2) (omega_to - omega_from)^{ij} d_{y^i} d_{y^j}) applied
    blockwise; Deg-neutral, identity on deg_s <= 1.
    """
    diff = w_to.omega - w_from.omega
    if diff.is_zero():
        return a
    out = a
    term = a
    k = 1
    while True:
        term = _laplace_like(term, diff)
        if term.is_zero():
            break
        coeff = sc.rational(a.mode, 1, (2 ** k) * math.factorial(k))
        out = out + term.scale(coeff)
        k += 1
        if k > a.deg_cap:
            break
    return out


def c_tensor(geom, geom_p, deg_cap):
    """The connection-difference element (one dx slot, two y slots)."""
    if (geom.sigma - geom_p.sigma).max_abs() != 0.0:
        raise ConfigError("gauge pair must share the symplectic form")
    dgamma = geom_p.yano - geom.yano
    if dgamma.is_zero():
        return GradedElement.zero(geom.dim, deg_cap, geom.mode)
    sg = tensor_contract(geom.sigma, dgamma, [(1, 0)])  # (j1, i, j2)
    half = sc.rational(geom.mode, 1, 2)
    raw = {}
    for (j1, i, j2), jet in sg.entries.items():
        idx = (i, j1, j2)
        piece = jet.scale(half)
        raw[idx] = raw[idx] + piece if idx in raw else piece
    proj = _project_block(raw, 1, 2, geom.mode, antisym=False)
    return GradedElement(geom.dim, deg_cap, geom.mode, {(0, 1, 2): proj})


def n_coeffs(max_order):
    """Coefficients of the series inverse of sum_k x^k/(k+1)!."""
    out = [sc.mpq(1)]
    for lam in range(1, max_order + 1):
        acc = sc.mpq(0)
        for lp in range(1, lam + 1):
            acc += out[lam - lp] / math.factorial(lp + 1)
        out.append(-acc)
    return out


# ------------------------------------------------------------ gauge pair


class GaugePair:
    """Two compatible structures over one sigma, with the gauge data."""

    def __init__(self, geom, geom_p, deg_cap, theta=None):
        self.geom = geom
        self.geom_p = geom_p
        self.deg_cap = deg_cap
        self.theta = theta
        self.c_elt = c_tensor(geom, geom_p, deg_cap)
        self.n_coeffs = n_coeffs(deg_cap)
        self.h_elt = None

    @property
    def w(self):
        return self.geom.omega_fiber

    @property
    def w_p(self):
        return self.geom_p.omega_fiber


def _check_theta_closed(theta, dim):
    """theta: a (p, 1, 0)-blocked element; d theta must vanish."""
    for (p, k, n), entries in theta.blocks.items():
        if (k, n) != (1, 0):
            raise ConfigError("theta must be an hbar-series of 1-forms")
        for i in range(dim):
            for j in range(i + 1, dim):
                ji = entries.get((i,))
                jj = entries.get((j,))
                dji = ji.partial(j) if ji is not None else None
                djj = jj.partial(i) if jj is not None else None
                if dji is None and djj is None:
                    continue
                if dji is None:
                    resid = djj
                elif djj is None:
                    resid = dji
                else:
                    resid = djj - dji
                if resid.max_abs() > (0.0 if resid.mode == sc.EXACT
                                      else 1e-12):
                    raise ConfigError("theta must be closed")


def r_alpha(pair, fd_p):
    """Pull the primed one-form back: alpha^{-1}(r') - C."""
    pulled = alpha_map(fd_p.r, pair.w_p, pair.w)
    return pulled.with_cap(pair.deg_cap) - pair.c_elt


def build_H(pair, fd, fd_p, deg_cap=None):
    """Conjugator between D and the pulled-back primed derivative.

    Fixed point of
    H = delta^{-1}[ grad H + (i/hbar) ad(r^alpha) H
                    - sum_l n_l ((i/hbar) ad H)^l (r^alpha - r + theta) ].
    """
    cap = pair.deg_cap if deg_cap is None else deg_cap
    geom, w = pair.geom, pair.w
    if pair.theta is not None:
        _check_theta_closed(pair.theta, geom.dim)
    ra = r_alpha(pair, fd_p).truncate_deg(cap)
    drive = ra - fd.r.with_cap(cap).truncate_deg(cap)
    if pair.theta is not None:
        drive = drive + pair.theta.with_cap(cap)
    ncs = n_coeffs(cap)

    h = GradedElement.zero(geom.dim, cap, geom.mode)
    for _ in range(cap + 2):
        series = drive
        term = drive
        for lam in range(1, cap + 1):
            if h.is_zero() or term.is_zero():
                break
            term = commutator_over_hbar(h, term, w)
            if term.is_zero():
                break
            series = series + term.scale(sc.rational(geom.mode,
                                                     ncs[lam].numerator,
                                                     ncs[lam].denominator))
        inner = -series
        if not h.is_zero():
            inner = inner + nabla(h, geom) \
                + commutator_over_hbar(ra, h, w)
        nxt = delta_inv_op(inner).truncate_deg(cap)
        if ge_residual(nxt, h) == 0.0 and set(nxt.blocks) == set(h.blocks):
            h = nxt
            break
        h = nxt
    pair.h_elt = h
    return h


def _d_alpha(pair, fd, fd_p, t):
    """The pulled-back primed derivative on the unprimed algebra."""
    ra = r_alpha(pair, fd_p)
    return nabla(t, pair.geom) - delta_op(t) \
        + commutator_over_hbar(ra, t, pair.w)


def equiv_residual(pair, fd, fd_p, h=None):
    """Deviation of H from solving the conjugation equation.

    Returns (residual of the deg_s >= 1 blocks, the deg_s = 0 leftover),
    both truncated to the complete degrees; for exact inputs the first
    entry must be 0.0 and the second equals theta (0 when unset).
    """
    cap = pair.deg_cap
    h = pair.h_elt if h is None else h
    w = pair.w
    ra = r_alpha(pair, fd_p).truncate_deg(cap)
    acc = fd.r.with_cap(cap).truncate_deg(cap) - ra
    dah = _d_alpha(pair, fd, fd_p, h)
    term = dah
    acc = acc + term
    for k in range(1, cap + 1):
        term = commutator_over_hbar(h, term, w)
        if term.is_zero():
            break
        acc = acc + term.scale(sc.rational(pair.geom.mode, 1,
                                           math.factorial(k + 1)))
    if pair.theta is not None:
        acc = acc - pair.theta.with_cap(cap)
    acc = acc.truncate_deg(cap - 1)
    noncentral = acc.select(lambda p, k, n: n >= 1)
    central = acc.select(lambda p, k, n: n == 0)
    return ge_residual(noncentral), central


def _exp_ad(h, w, t, cap, mode):
    out = t
    term = t
    for k in range(1, cap + 2):
        term = commutator_over_hbar(h, term, w)
        if term.is_zero():
            break
        out = out + term.scale(sc.rational(mode, 1, math.factorial(k)))
    return out


def equivalence_B(f, pair, fd, fd_p):
    """The induced star-isomorphism: tau alpha exp((i/hbar) ad H) tau^{-1}."""
    if pair.h_elt is None:
        build_H(pair, fd, fd_p)
    lifted = quantize(f, fd)
    rotated = _exp_ad(pair.h_elt, pair.w, lifted, pair.deg_cap,
                      pair.geom.mode)
    moved = alpha_map(rotated, pair.w, pair.w_p)
    return _series_from_tau(moved, pair.geom.order)


# ------------------------------------------------------------ determinism


def shuffled_clone(elt):
    """Same element with reversed dict insertion order (probe for
    evaluation-order independence of the recursions)."""
    blocks = {}
    for key in sorted(elt.blocks, reverse=True):
        entries = elt.blocks[key]
        blocks[key] = {idx: entries[idx]
                       for idx in sorted(entries, reverse=True)}
    return GradedElement(elt.dim, elt.deg_cap, elt.mode, blocks)
