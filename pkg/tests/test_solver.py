import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from satbound.distributions import build_distribution
from satbound.errors import BracketInvalid, NoConvergence
from satbound.kernel import BetaFixed, Multipliers, Restriction, ln_f, residuals
from satbound.solver import (
    SolveOptions, alpha_sweep, beta_grid, beta_sweep, boundary_report, check_boundary_dominance, gauge_invariants,
    gauge_shift, literal_band, solve_stationary, threshold_bound,
)
from satbound.schemes import Scheme

BB = ("balanced-both", Scheme.alpha(1.01), 3.546)
BS = ("balanced-signs", Scheme.alpha(1.01), 3.509)


def _setup(case):
    model, scheme, c = case
    return build_distribution(model, c), scheme, c


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(tol_residual=0)
    with pytest.raises(ValueError):
        SolveOptions(damping=1.5)
    with pytest.raises(ValueError):
        SolveOptions(max_iter=0)
    assert SolveOptions().init.as_tuple() == (1.0, 2.0, 2.0, 1.0)


def test_balanced_both_stationary_point():
    spec, scheme, c = _setup(BB)
    rep = solve_stationary(spec, scheme, c)
    assert rep.mult.as_tuple() == pytest.approx((1.57726, 3.38506, 3.51076, 1.045), abs=1e-3)
    assert rep.residual_norm < 1e-12
    assert abs(rep.lnF) < 1e-3


def test_resolve_is_idempotent():
    spec, scheme, c = _setup(BS)
    rep = solve_stationary(spec, scheme, c)
    again = solve_stationary(spec, scheme, c, opts=SolveOptions(init=rep.mult))
    assert again.iterations <= 2
    assert np.allclose(again.mult.as_array(), rep.mult.as_array(), rtol=0, atol=1e-10)


def test_iteration_cap_reports_residual():
    spec, scheme, c = _setup(BS)
    with pytest.raises(NoConvergence) as err:
        solve_stationary(spec, scheme, c, opts=SolveOptions(max_iter=1, init=Multipliers(0.2, 5, 0.3, 4)))
    assert err.value.residual > 0


def test_beta_fixed_at_stationary_beta_matches_interior():
    spec, scheme, c = _setup(BS)
    full = solve_stationary(spec, scheme, c)
    fibre = solve_stationary(spec, scheme, c, BetaFixed(full.beta[0], full.beta[1]))
    assert fibre.lnF == pytest.approx(full.lnF, abs=1e-8)


def test_no_type3_gauge_direction():
    spec, scheme, c = _setup(BS)
    rep = solve_stationary(spec, scheme, c, Restriction.NO_TYPE3, SolveOptions(init=Multipliers(0.5, 0.5, 0.5, 0.5)))
    moved = gauge_shift(rep.mult, x2=0.8)
    assert moved.x2 == pytest.approx(0.8)
    assert ln_f(spec, scheme, c, moved, Restriction.NO_TYPE3) == pytest.approx(rep.lnF, abs=1e-10)
    assert np.allclose(gauge_invariants(moved), gauge_invariants(rep.mult))
    assert np.max(np.abs(residuals(spec, scheme, c, moved, Restriction.NO_TYPE3))) < 1e-8


def test_boundary_dominance_balanced_both():
    spec, scheme, c = _setup(BB)
    full = solve_stationary(spec, scheme, c)
    no2, no3 = boundary_report(spec, scheme, c)
    assert no2.lnF == pytest.approx(-1.79349, abs=5e-3)
    assert no3.lnF == pytest.approx(-0.33427, abs=5e-3)
    assert check_boundary_dominance(full, no2, no3)


@pytest.mark.parametrize("model,c", [("balanced-both", 3.6), ("balanced-signs", 3.8), ("standard", 4.8)])
def test_scheme_dominance(model, c):
    spec = build_distribution(model, c)
    values = [solve_stationary(spec, s, c).lnF
              for s in (Scheme.all_solutions(), Scheme.nps(), Scheme.nps_imbalance())]
    assert values[0] >= values[1] >= values[2] - 1e-12


def test_bracket_must_change_sign():
    with pytest.raises(BracketInvalid):
        threshold_bound("balanced-both", Scheme.nps(), c_bracket=(3.7, 4.0))
    with pytest.raises(BracketInvalid):
        threshold_bound("balanced-both", Scheme.nps(), c_bracket=(4.0, 3.7))


def test_bound_result_invariants():
    res = threshold_bound("balanced-both", Scheme.nps_imbalance())
    lo, hi = res.bracket
    assert lo < res.c_star <= hi and hi - lo < 5e-4
    assert res.reports["full"].lnF <= 0
    assert all(v > 0 for cc, v in res.history if cc <= lo)
    assert res.c_star == pytest.approx(3.548, abs=3e-3)
    d = res.to_dict()
    assert d["model"] == "balanced-both" and d["scheme"] == "nps-imbalance"


def test_balanced_both_imbalance_is_vacuous():
    a = threshold_bound("balanced-both", Scheme.nps()).c_star
    b = threshold_bound("balanced-both", Scheme.nps_imbalance()).c_star
    assert a == pytest.approx(b, abs=1e-9)


def test_alpha_one_equals_imbalance():
    [(alpha, bound)] = alpha_sweep("balanced-signs", [1.0], workers=1)
    assert bound == pytest.approx(threshold_bound("balanced-signs", Scheme.nps_imbalance()).c_star, abs=5e-4)


def test_alpha_sweep_flat_range():
    rows = alpha_sweep("balanced-signs", [1.16, 1.01, 1.10], workers=1)
    assert [a for a, _ in rows] == [1.01, 1.10, 1.16]
    assert all(abs(b - 3.509) <= 3e-3 for _, b in rows)
    with pytest.raises(ValueError):
        alpha_sweep("balanced-signs", [0.0])


def test_literal_band():
    lo, hi = literal_band(build_distribution("balanced-both", 3.546))
    assert lo == pytest.approx(1.5) and hi == pytest.approx(1.5)
    lo, hi = literal_band(build_distribution("standard", 4.5))
    assert 1.0 < lo < 1.5 < hi < 2.0


def test_balanced_both_grid_is_a_line():
    rows = beta_grid(build_distribution("balanced-both", 3.546), 0.01)
    for b1, cols in rows:
        assert len(cols) == 1 and cols[0] == pytest.approx(1.5 - 2 * b1, abs=1e-9)


@settings(max_examples=10)
@given(step=st.sampled_from([0.02, 0.05, 0.1]))
def test_grid_cells_feasible(step):
    spec = build_distribution("balanced-signs", 3.509)
    lo, hi = literal_band(spec)
    for b1, cols in beta_grid(spec, step):
        for b2 in cols:
            assert b1 >= 0 and b2 >= 0 and b1 + b2 <= 1 + 1e-12
            assert lo - 1e-9 <= 2 * b1 + b2 <= hi + 1e-9


def test_coarse_sweep_dominated():
    spec, scheme, c = _setup(BS)
    sw = beta_sweep(spec, scheme, c, 0.05)
    assert sw.max_lnF <= sw.reference.lnF + 1e-3
    b1, b2 = sw.argmax
    assert abs(b1 - 0.557479) <= 0.05 and abs(b2 - 0.365723) <= 0.05
    assert sw.missing == 0


@settings(max_examples=8)
@given(c=st.floats(3.3, 3.9), a=st.floats(1.0, 1.5))
def test_redundant_occurrence_constraint(c, a):
    spec = build_distribution("balanced-signs", c)
    rep = solve_stationary(spec, Scheme.alpha(a), c)
    i, j, k, l, m = rep.pi.moments()  # noqa: E741
    b1, b2, b3 = rep.beta
    h1, h2, h3 = rep.heavy
    tol = 1e-8 * c
    assert abs(i + h1 - c * b1) < tol and abs(j + h2 - 2 * c * b2) < tol
    assert abs(l - 2 * c * b1) < tol and abs(m - c * b2) < tol
    assert abs(k + h3 - 3 * c * b3) < tol
