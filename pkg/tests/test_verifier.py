import itertools

import pytest
from hypothesis import given, settings, strategies as st

from satbound.distributions import build_distribution
from satbound.errors import ExclusionViolation, NoOrientation, NotASolution, ParseError, TooLarge, WrongWidth
from satbound.schemes import Scheme, flip_type
from satbound.verifier import (
    PHI, Formula, build_solution_graph, classify_variable, clause_counts, enumerate_solutions,
    monte_carlo_first_moment, monte_carlo_table, orient_by_potential, orient_graph, parse_dimacs,
    sample_configuration, weighted_count,
)

ORIENTING = [Scheme.nps(), Scheme.nps_imbalance(), Scheme.alpha(2.0), Scheme.alpha(1.01)]
PHI_TEXT = """c running example
p cnf 4 7
1 2 3 0
1 3 -4 0
1 -3 -4 0
1 -2 -4 0
-2 3 -4 0
-1 -2 -4 0
-1 2 -3 0
"""


def brute_solutions(f):
    out = []
    for bits in itertools.product((0, 1), repeat=f.n):
        if all(any((bits[abs(x) - 1] == 1) == (x > 0) for x in cl) for cl in f.clauses):
            out.append(bits)
    return out


def recount_type(f, assignment, var):
    """Second implementation: walk the clauses one literal at a time."""
    i = j = k = l = m = 0  # noqa: E741
    for cl in f.clauses:
        truths = [(assignment[abs(x) - 1] == 1) == (x > 0) for x in cl]
        t = sum(truths)
        for x, tr in zip(cl, truths):
            if abs(x) != var:
                continue
            if tr:
                i, j, k = i + (t == 1), j + (t == 2), k + (t == 3)
            else:
                l, m = l + (t == 1), m + (t == 2)  # noqa: E741
    return (i, j, k, l, m, assignment[var - 1])


def test_parse_phi():
    f = parse_dimacs(PHI_TEXT)
    assert f == PHI and f.n == 4 and f.m == 7
    assert parse_dimacs(f.to_dimacs()) == f


@pytest.mark.parametrize("text,err", [
    ("p cnf 2 1\n1 2 0\n", WrongWidth),
    ("p cnf 2 1\n0\n", WrongWidth),
    ("p cnf 2 1\n1 2 3 0\n", ParseError),
    ("1 2 -1 0\n", ParseError),
    ("p cnf 2 2\n1 2 -1 0\n", ParseError),
    ("p cnf 2 1\n1 x 2 0\n", ParseError),
    ("p cnf 2 1\n1 2 -1\n", ParseError),
])
def test_parse_errors(text, err):
    with pytest.raises(err):
        parse_dimacs(text)


def test_parse_error_carries_line():
    with pytest.raises(ParseError) as e:
        parse_dimacs("p cnf 2 1\nc ok\n1 q 2 0\n")
    assert e.value.line == 3


def test_phi_has_seven_solutions():
    sols = enumerate_solutions(PHI)
    assert len(sols) == 7
    assert sols == sorted(sols) == brute_solutions(PHI)


def test_tiny_formulas():
    assert enumerate_solutions(Formula(1, ((1, 1, 1),))) == [(1,)]
    assert enumerate_solutions(Formula(1, ((1, 1, 1), (-1, -1, -1)))) == []
    with pytest.raises(TooLarge):
        enumerate_solutions(Formula(25, ()))


def test_classify_against_recount():
    for sol in enumerate_solutions(PHI):
        for v in range(1, 5):
            assert tuple(classify_variable(PHI, sol, v)) == recount_type(PHI, sol, v)


def test_classify_absent_variable_and_non_solution():
    f = Formula(3, ((1, 2, 2),))
    assert tuple(classify_variable(f, (1, 0, 1), 3)) == (0, 0, 0, 0, 0, 1)
    with pytest.raises(NotASolution):
        classify_variable(f, (0, 0, 0), 1)


def test_flip_image_on_phi():
    sols = enumerate_solutions(PHI)
    index = {s: n for n, s in enumerate(sols)}
    for sol in sols:
        for v in range(1, 5):
            t = classify_variable(PHI, sol, v)
            if t.i:
                continue
            other = list(sol)
            other[v - 1] ^= 1
            assert tuple(other) in index
            assert classify_variable(PHI, other, v) == flip_type(t)


def _brute_edges(sols):
    out = set()
    for a, b in itertools.combinations(range(len(sols)), 2):
        diff = [i for i in range(len(sols[a])) if sols[a][i] != sols[b][i]]
        if len(diff) == 1:
            out.add((a, b, diff[0] + 1))
    return out


def test_graph_edges_phi():
    g = build_solution_graph(PHI)
    assert len(g.solutions) == 7
    assert set(g.edges) == _brute_edges(g.solutions)


def test_graph_corner_cases():
    cube = build_solution_graph(Formula(2, ()))
    assert len(cube.solutions) == 4 and len(cube.edges) == 4
    unique = build_solution_graph(Formula(1, ((1, 1, 1),)))
    assert unique.edges == []


@pytest.mark.parametrize("scheme", ORIENTING, ids=str)
def test_phi_orientation_matches_potential(scheme):
    g = build_solution_graph(PHI)
    rep = orient_graph(g, PHI, scheme)
    ref = orient_by_potential(g, PHI, scheme)
    assert rep.is_acyclic and rep.X >= 1
    assert sorted(rep.arcs) == sorted(ref.arcs)
    assert rep.minimal == ref.minimal
    assert rep.X == weighted_count(PHI, scheme)


def test_phi_nps_arcs_point_to_true():
    g = build_solution_graph(PHI)
    rep = orient_graph(g, PHI, Scheme.nps())
    for src, dst, v in rep.arcs:
        assert g.solutions[src][v - 1] == 0 and g.solutions[dst][v - 1] == 1


def test_all_solutions_has_no_orientation():
    with pytest.raises(NoOrientation):
        orient_graph(build_solution_graph(PHI), PHI, Scheme.all_solutions())
    assert weighted_count(PHI, Scheme.all_solutions()) == 7


def _check_formula(f, schemes=ORIENTING):
    """Orientation, minimality and flip identity on one formula; returns whether it was satisfiable."""
    g = build_solution_graph(f)
    if not g.solutions:
        return False
    for s in schemes:
        rep = orient_graph(g, f, s)
        assert rep.is_acyclic
        assert 1 <= rep.X <= len(g.solutions)
        assert rep.X == weighted_count(f, s, g.codes)
    for a, b, v in g.edges:
        t = classify_variable(f, g.solutions[a], v)
        ca, cb = clause_counts(f, g.solutions[a]), clause_counts(f, g.solutions[b])
        r_jl, r_km = t.j - t.l, t.k - t.m
        # moving from a to b flips v
        assert (cb[0] - ca[0], cb[1] - ca[1], cb[2] - ca[2]) == (r_jl, r_km - r_jl, -r_km)
    return True


clause = st.tuples(*[st.integers(1, 7).flatmap(lambda v: st.sampled_from([v, -v]))] * 3).filter(
    lambda c: len({abs(x) for x in c}) == 3)


@given(st.lists(clause, min_size=3, max_size=30))
def test_random_legal_formulas(clauses):
    _check_formula(Formula(7, tuple(clauses)))


def test_sample_configuration_basics():
    spec = build_distribution("standard", 4.5)
    f = sample_configuration(spec, 12, seed=7)
    assert f == sample_configuration(spec, 12, seed=7)
    assert 3 * f.m == sum(p + q for p, q in f.degrees())
    legal = sample_configuration(spec, 12, seed=7, legal=True)
    assert legal.is_legal()
    assert sorted(legal.degrees()) == sorted(f.degrees())


def test_balanced_both_degrees_in_sample():
    spec = build_distribution("balanced-both", 3.546)
    f = sample_configuration(spec, 12, seed=1)
    for p, q in f.degrees():
        assert p == q and p in (5, 6)


@pytest.mark.parametrize("model", ["standard", "balanced-signs", "balanced-occurrences", "balanced-both"])
def test_degree_conservation(model):
    spec = build_distribution(model, 4.0)
    for seed in range(20):
        f = sample_configuration(spec, 10, seed, legal=True)
        degs = f.degrees()
        for sol in enumerate_solutions(f)[:5]:
            for v in range(1, f.n + 1):
                t = classify_variable(f, sol, v)
                p, q = degs[v - 1]
                sat, fal = (p, q) if t.v else (q, p)
                assert t.i + t.j + t.k == sat and t.l + t.m == fal


def test_raw_configuration_repeats_break_exclusion():
    """With a repeated variable the flipped variable need not be free at both ends."""
    f = Formula(1, ((-1, -1, 1),))  # a = 1 makes the clause type 1 with a true
    g = build_solution_graph(f)
    assert not f.is_legal() and len(g.edges) == 1
    with pytest.raises(ExclusionViolation):
        orient_graph(g, f, Scheme.nps())


@settings(max_examples=5)
@given(seed=st.integers(0, 1000))
def test_markov_and_subset(seed):
    spec = build_distribution("standard", 4.5)
    table = monte_carlo_table(spec, [Scheme.all_solutions(), Scheme.alpha(2.0)], 10, 40, seed, legal=True)
    allx, alpha = table[Scheme.all_solutions()], table[Scheme.alpha(2.0)]
    for r in table.values():
        assert r.markov_margin >= 0
        assert r.sat_without_selected == 0
    assert all(a[2] >= b[2] for a, b in zip(allx.rows, alpha.rows))


def test_monte_carlo_golden():
    spec = build_distribution("standard", 4.5)
    schemes = [Scheme.all_solutions(), Scheme.nps(), Scheme.nps_imbalance(), Scheme.alpha(2.0)]
    table = monte_carlo_table(spec, schemes, 12, 2000, 2024, legal=True)
    frozen = {"all": 0.836, "nps": 0.5705, "nps-imbalance": 0.5655, "alpha:2,1": 0.5665}
    for s, r in table.items():
        assert r.p_sat_hat == 0.4115
        assert r.ex_hat == frozen[str(s)]


def test_monte_carlo_csv_and_limits():
    spec = build_distribution("balanced-both", 3.546)
    r = monte_carlo_first_moment(spec, Scheme.nps(), 8, 5, 3, legal=True)
    lines = r.to_csv().splitlines()
    assert lines[0] == "trial,sat,X" and len(lines) == 6
    with pytest.raises(TooLarge):
        monte_carlo_first_moment(spec, Scheme.nps(), 17, 1, 0)
    with pytest.raises(ValueError):
        monte_carlo_first_moment(spec, Scheme.nps(), 8, 0, 0)
