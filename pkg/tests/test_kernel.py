import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from satbound.distributions import DistributionSpec, ModelId, build_distribution
from satbound.errors import KernelOverflow, NotLight
from satbound.kernel import (
    BetaFixed, Multipliers, Restriction, a_pq, batir_check, batir_margins, derive_stationary, kernel_for,
    ln_f, objective, residuals, y_and_grad,
)
from satbound.schemes import Scheme, VarType, omega

STD_POINT = Multipliers(1.0083, 2.06625, 2.18256, 1.01253)
SCHEMES = [Scheme.all_solutions(), Scheme.nps(), Scheme.nps_imbalance(), Scheme.alpha(2.0), Scheme.alpha(1.01)]


def naive_a(scheme, mult, p, q, restriction=Restriction.FULL):
    """Direct summation over every type of A[p, q]."""
    x1, x2, y1, y2 = mult.as_tuple()
    terms = []
    for v, (sat, fal) in ((1, (p, q)), (0, (q, p))):
        for i in range(sat + 1):
            for j in range(sat - i + 1):
                k = sat - i - j
                for l in range(fal + 1):  # noqa: E741
                    m = fal - l
                    if restriction is Restriction.NO_TYPE2 and (j or m):
                        continue
                    if restriction is Restriction.NO_TYPE3 and k:
                        continue
                    if not omega(scheme, VarType(i, j, k, l, m, v)):
                        continue
                    coef = math.factorial(sat) // (math.factorial(i) * math.factorial(j) * math.factorial(k))
                    coef *= math.comb(fal, l)
                    terms.append(coef * x1 ** (2 * i) * x2 ** j * y1 ** l * y2 ** (2 * m))
    return math.fsum(terms)


def test_a_all_solutions_unit_point():
    spec = build_distribution("standard", 4.5)
    assert a_pq(spec, Scheme.all_solutions(), Multipliers(1, 1, 1, 1), 1, 1) == pytest.approx(12.0, rel=1e-14)


@pytest.mark.parametrize("scheme", SCHEMES[1:], ids=str)
def test_a_empty_pair_is_one(scheme):
    spec = build_distribution("standard", 4.5)
    assert a_pq(spec, scheme, Multipliers(0.7, 1.3, 2.1, 0.4), 0, 0) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("p,q", [(0, 5), (3, 3), (7, 2), (9, 12), (15, 6), (21, 21)])
def test_a_matches_direct_sum(p, q):
    spec = build_distribution("standard", 4.5)
    got = a_pq(spec, Scheme.alpha(2.0), STD_POINT, p, q)
    assert got == pytest.approx(naive_a(Scheme.alpha(2.0), STD_POINT, p, q), rel=1e-12)


mults = st.tuples(*[st.floats(0.3, 3.0)] * 4).map(lambda t: Multipliers(*t))
pairs = st.tuples(st.integers(0, 8), st.integers(0, 8))


@given(scheme=st.sampled_from(SCHEMES), mult=mults, pq=pairs,
       restriction=st.sampled_from(list(Restriction)))
def test_a_property_against_direct_sum(scheme, mult, pq, restriction):
    spec = build_distribution("standard", 4.5)
    expect = naive_a(scheme, mult, *pq, restriction)
    if expect == 0:
        return
    assert a_pq(spec, scheme, mult, *pq, restriction) == pytest.approx(expect, rel=1e-11)


@given(mult=mults, pq=pairs)
def test_no_type2_equals_masked_full(mult, pq):
    """Dropping j and m equals a full evaluation whose weights vanish whenever j + m > 0."""
    scheme = Scheme.alpha(2.0)
    spec = build_distribution("standard", 4.5)
    x1, _, y1, _ = mult.as_tuple()
    # with x2 -> 0 and y2 -> 0 only j = m = 0 monomials survive in the direct sum
    squeezed = Multipliers(x1, 1e-300, y1, 1e-300)
    expect = naive_a(scheme, squeezed, *pq)
    assert a_pq(spec, scheme, mult, *pq, Restriction.NO_TYPE2) == pytest.approx(expect, rel=1e-11)


def test_not_light_and_overflow():
    spec = build_distribution("balanced-both", 3.546)
    with pytest.raises(NotLight):
        a_pq(spec, Scheme.nps(), STD_POINT, 1, 1)
    with pytest.raises(KernelOverflow):
        a_pq(spec, Scheme.all_solutions(), Multipliers(1e30, 1e30, 1e30, 1e30), 6, 6)


def test_single_point_spec():
    spec = DistributionSpec(ModelId.STANDARD, 1.0, 21, {(0, 0): 1.0}, 0.0, 0.0)
    y, g = y_and_grad(spec, Scheme.nps(), STD_POINT)
    assert y == 0.0 and np.all(g == 0)


def _fd_grad(spec, scheme, mult, restriction, h=1e-6):
    x = mult.as_array()
    out = np.zeros(4)
    for a in range(4):
        step = h * x[a]
        up, dn = x.copy(), x.copy()
        up[a] += step
        dn[a] -= step
        out[a] = (y_and_grad(spec, scheme, Multipliers(*up), restriction)[0]
                  - y_and_grad(spec, scheme, Multipliers(*dn), restriction)[0]) / (2 * step)
    return out


models = st.sampled_from([str(m) for m in ModelId])


@given(model=models, c=st.floats(3.0, 5.5), scheme=st.sampled_from(SCHEMES), mult=mults,
       restriction=st.sampled_from(list(Restriction)))
def test_gradient_matches_finite_differences(model, c, scheme, mult, restriction):
    spec = build_distribution(model, c, 12 if model != "balanced-occurrences" else 18)
    _, g = y_and_grad(spec, scheme, mult, restriction)
    fd = _fd_grad(spec, scheme, mult, restriction)
    active = [0, 2] if restriction is Restriction.NO_TYPE2 else [0, 1, 2, 3]
    for a in active:
        assert abs(g[a] - fd[a]) <= 1e-6 * max(abs(fd[a]), 1.0)
    for a in set(range(4)) - set(active):
        assert g[a] == 0.0


@given(mult=mults, restriction=st.sampled_from(list(Restriction)))
def test_hessian_matches_gradient_differences(mult, restriction):
    spec = build_distribution("balanced-signs", 3.5, 12)
    kern = kernel_for(spec, Scheme.alpha(1.01), restriction)
    u = mult.log()
    _, _, hess = objective(kern, 3.5, u, restriction)
    h = 1e-6
    for a in range(4):
        e = np.zeros(4)
        e[a] = h
        col = (objective(kern, 3.5, u + e, restriction, False)[1]
               - objective(kern, 3.5, u - e, restriction, False)[1]) / (2 * h)
        assert np.allclose(hess[:, a], col, rtol=1e-5, atol=1e-6)


def test_table_point_is_nearly_stationary():
    spec = build_distribution("standard", 4.5)
    assert np.max(np.abs(residuals(spec, Scheme.alpha(2.0), 4.5, STD_POINT, Restriction.FULL))) < 1e-2
    assert abs(ln_f(spec, Scheme.alpha(2.0), 4.5, STD_POINT)) < 1e-2
    bs = build_distribution("balanced-signs", 3.509)
    point = Multipliers(1.47787, 3.09005, 3.27457, 1.02742)
    assert np.max(np.abs(residuals(bs, Scheme.alpha(1.01), 3.509, point, Restriction.FULL))) < 1e-2


def test_boundary_rates_at_published_points():
    spec = build_distribution("standard", 4.5)
    s = Scheme.alpha(2.0)
    no2 = Multipliers(0.997334, 1.0, 2.07123, 1.0)
    assert ln_f(spec, s, 4.5, no2, Restriction.NO_TYPE2) == pytest.approx(-2.463, abs=5e-3)
    no3 = Multipliers(0.512382, 0.546014, 0.583465, 0.529328)
    assert ln_f(spec, s, 4.5, no3, Restriction.NO_TYPE3) == pytest.approx(-0.682149, abs=5e-3)
    bb = build_distribution("balanced-both", 3.546)
    flat = Multipliers(*[0.494614] * 4)
    assert ln_f(bb, Scheme.alpha(1.01), 3.546, flat, Restriction.NO_TYPE3) == pytest.approx(-0.33427, abs=5e-3)


def test_derived_beta_at_published_points():
    spec = build_distribution("standard", 4.5)
    rep = derive_stationary(spec, Scheme.alpha(2.0), 4.5, STD_POINT)
    assert rep.beta == pytest.approx((0.44373, 0.421847, 0.134422), abs=1e-3)
    bb = build_distribution("balanced-both", 3.546)
    rep = derive_stationary(bb, Scheme.alpha(1.01), 3.546, Multipliers(1.57726, 3.38506, 3.51076, 1.045))
    assert rep.beta == pytest.approx((0.568436, 0.363128, 0.0684362), abs=1e-3)


@given(model=models, mult=mults, scheme=st.sampled_from(SCHEMES),
       restriction=st.sampled_from(list(Restriction)))
def test_closed_form_identities(model, mult, scheme, restriction):
    c = 4.2
    spec = build_distribution(model, c, 12 if model != "balanced-occurrences" else 18)
    rep = derive_stationary(spec, scheme, c, mult, restriction)
    x1, x2, y1, y2 = mult.as_tuple()
    assert sum(rep.beta) == pytest.approx(1.0, abs=1e-10)
    assert sum(rep.heavy) == pytest.approx(spec.bigH, abs=1e-10 * max(1.0, spec.bigH))
    if restriction is Restriction.FULL:
        assert rep.b == pytest.approx(x1 * y1 / 2 + x2 * y2 / 2 + 1 / 3, rel=1e-14)
        assert rep.h == pytest.approx(spec.bigH / (x1 ** 2 + x2 + 1), rel=1e-14)
    assert np.all(rep.pi.values >= 0)
    expect = np.array([spec.light[k] for k in rep.pair_keys])
    assert np.allclose(rep.pair_mass, expect, rtol=0, atol=1e-10)


def test_pi_lookup_and_closed_form():
    spec = build_distribution("balanced-both", 3.546)
    scheme = Scheme.alpha(1.01)
    mult = Multipliers(1.2, 2.0, 2.5, 0.9)
    rep = derive_stationary(spec, scheme, 3.546, mult)
    t = VarType(1, 2, 2, 3, 2, 1)  # p = 5 satisfied, q = 5 falsified
    a = naive_a(scheme, mult, 5, 5)
    x1, x2, y1, y2 = mult.as_tuple()
    expect = spec.light[5, 5] / a * 30 * 10 * x1 ** 2 * x2 ** 2 * y1 ** 3 * y2 ** 4
    assert rep.pi[t] == pytest.approx(expect, rel=1e-12)
    assert rep.pi[VarType(0, 0, 0, 0, 0, 0)] == 0.0


def test_beta_fixed_rejects_infeasible():
    with pytest.raises(ValueError):
        BetaFixed(0.7, 0.5)
    assert BetaFixed(0.25, 0.5).beta3 == pytest.approx(0.25)


@pytest.mark.parametrize("k", [1, 2, 10, 100, 170])
def test_batir_points(k):
    assert batir_check(k)


def test_batir_equality_at_one():
    below, above = batir_margins(1)
    assert below > 0
    assert abs(above) < 1e-40  # the upper bound is attained exactly


def test_batir_range():
    with pytest.raises(KernelOverflow):
        batir_margins(171)
