from __future__ import annotations

import json
from fractions import Fraction

import pytest

from quotfock import exact_sparse as xs
from quotfock.curve_algebra import (
    POINT,
    UNIT,
    CurveClass,
    ModuliParams,
    alpha,
    beta,
    diagonal_class,
    integrate_all,
    letter_product,
    letters,
    mul,
)
from quotfock.fock_space import FockBasisVector, FockState
from quotfock.operator_engine import OperatorError
from quotfock.relation_suite import (
    MUTATIONS,
    RELATIONS,
    YANGIAN,
    CheckReport,
    RelationCase,
    check_confluence,
    check_fa_restricted,
    check_mult_identity,
    check_pairing,
    check_relation,
    chern_twisted_from_m,
    detect_mutation,
    dual_pairing,
    engine_for,
    exact_rank,
    index_ranges,
    pairing_matrix,
    relation_sides,
    run_cases,
)


def v(*slots):
    return FockBasisVector(tuple(slots))


def delta_pairing(u, w, g):
    return integrate_all(mul(diagonal_class("a", "b", g), CurveClass.monomial(("a", "b"), (u, w), g)))


def test_relation_ids():
    assert set(YANGIAN) <= set(RELATIONS) and len(RELATIONS) == 10
    assert len(MUTATIONS) >= 6


def test_ef_vacuum_example():
    eng = engine_for(ModuliParams(1, 0, 0))
    lhs, rhs = relation_sides("EF", eng, 0, 0, 0, UNIT, POINT)
    assert lhs.shape == rhs.shape == (1, 1)
    assert xs.equal(lhs, rhs)
    assert abs(lhs.toarray()[0, 0]) == 1
    # e_0 f_0 kills |0>, so the bracket is -f_0 a_0 |0>
    f0a0 = xs.matmul(eng.f(0, POINT, 1), eng.a(0, UNIT, 0)).toarray()[0, 0]
    assert lhs.toarray()[0, 0] == -f0a0


@pytest.mark.parametrize("params", [ModuliParams(1, 1, 3), ModuliParams(2, 0, 1)])
def test_mm_is_identically_zero(params):
    report = check_relation(RelationCase("MM", params, 2))
    assert report.passed and report.failure is None and report.tuples > 0


@pytest.mark.parametrize("relation", YANGIAN + ("AA",))
@pytest.mark.parametrize("params", [ModuliParams(1, 1, 1), ModuliParams(2, 1, 0)])
def test_yangian_families_small_grid(relation, params):
    report = check_relation(RelationCase(relation, params, 2, k_max=3, l_max=3))
    assert report.passed, report.summary()


def test_ee_mutation_is_pinpointed():
    params = ModuliParams(1, 0, 0)
    report = check_relation(RelationCase("EE", params, 2), mutation="EE-delta")
    assert not report.passed
    f = report.failure
    assert set(f) >= {"d", "indices", "caps", "vector", "target", "lhs", "rhs"}
    assert f["lhs"] != f["rhs"]
    # nothing fails below the reported charge
    if f["d"] > 0:
        assert check_relation(RelationCase("EE", params, f["d"] - 1), mutation="EE-delta").passed
    assert check_relation(RelationCase("EE", params, 2)).passed


@pytest.mark.parametrize("mutation", ["FF-delta", "ME-sign", "EF-sign", "AA-koszul", "FA-chi", "MULT-sign"])
def test_mutations_detected(mutation):
    grid = [ModuliParams(1, 1, 1), ModuliParams(2, 1, 1)]
    report = detect_mutation(mutation, grid, 2)
    assert report is not None and not report.passed


def test_index_ranges():
    assert index_ranges("MM", 2, None, None) == (range(3), range(3))
    assert index_ranges("AA", 2, None, None) == (range(2), range(2))
    assert index_ranges("EF", 1, None, None) == (range(5), range(5))
    assert index_ranges("ME", 1, 2, 9) == (range(3), range(2))


# [f, a]


def test_fa_restricted_vanishes_rank_two():
    eng = engine_for(ModuliParams(2, 1, 3))
    for u in eng.letters:
        for w in eng.letters:
            assert xs.is_zero(eng.commutator_fa_restricted(1, 1, u, w, 0))
            assert xs.is_zero(xs.matmul(eng.f(1, w, 1), eng.a(1, u, 0)))


@pytest.mark.parametrize("g", [0, 1, 2])
def test_fa_rank_one_is_pure_delta(g):
    eng = engine_for(ModuliParams(1, g, 2))
    for d in range(3):
        for u in letters(g):
            for w in letters(g):
                want = xs.identity(eng.dim(d)) * int(delta_pairing(u, w, g))
                assert xs.equal(eng.commutator_fa_restricted(0, 0, u, w, d), want)


def test_fa_restricted_range_is_enforced():
    eng = engine_for(ModuliParams(1, 0, 0))
    with pytest.raises(OperatorError):
        eng.commutator_fa_restricted(0, 1, UNIT, POINT, 0)


@pytest.mark.parametrize("params", [ModuliParams(1, 1, 3), ModuliParams(2, 0, 1), ModuliParams(2, 1, 0)])
def test_fa_restricted_matches_general(params):
    assert check_fa_restricted(params, 2).passed


# multiplication identity


@pytest.mark.parametrize("params", [ModuliParams(1, 0, 2), ModuliParams(1, 2, 0), ModuliParams(2, 1, 1)])
def test_mult_identity(params):
    report = check_mult_identity(params, 2)
    assert report.passed, report.summary()


def test_mult_on_vacuum_vanishes():
    eng = engine_for(ModuliParams(2, 1, 3))
    for k in range(1, 5):
        assert all(xs.is_zero(m) for m in chern_twisted_from_m(eng, k, 0).values())


@pytest.mark.parametrize("g", [0, 1, 2])
def test_mult_rank_one_charge_one_is_diagonal(g):
    # on Sym^1 C the rank-zero class V - E has c_1 = delta, so capping with gamma multiplies by gamma
    eng = engine_for(ModuliParams(1, g, 3))
    op = chern_twisted_from_m(eng, 1, 1)
    index = eng.index(1)
    for gamma in eng.letters:
        want = {}
        for c in eng.letters:
            prod = letter_product(c, gamma)
            if prod is not None:
                want[(index[v((0, prod[1]))], index[v((0, c))])] = prod[0]
        assert xs.equal(op[gamma], xs.from_entries(eng.dim(1), eng.dim(1), want))


def test_mult_does_not_truncate_at_two_r():
    # c_k of a rank-(r d) class survives past k = 2r once d >= 2
    eng = engine_for(ModuliParams(1, 0, 0))
    assert any(not xs.is_zero(m) for m in chern_twisted_from_m(eng, 3, 2).values())
    assert all(xs.is_zero(m) for m in chern_twisted_from_m(eng, 4, 2).values())


# pairing


@pytest.mark.parametrize("r", [1, 2])
def test_pairing_single_slot(r):
    eng = engine_for(ModuliParams(r, 1, 0))
    assert abs(dual_pairing(eng, [(r - 1, POINT)], v((0, UNIT)))) == 1
    assert dual_pairing(eng, [(r - 1, POINT)], v((0, POINT))) == 0


def test_pairing_larger_partition_vanishes():
    eng = engine_for(ModuliParams(2, 0, 0))
    # the dual word of a_1(1)|0> kills every a_0 vector
    for c in eng.letters:
        assert dual_pairing(eng, [(0, POINT)], v((0, c))) == 0
    assert abs(dual_pairing(eng, [(0, POINT)], v((1, UNIT)))) == 1


def test_pairing_length_mismatch():
    eng = engine_for(ModuliParams(1, 0, 0))
    with pytest.raises(ValueError):
        dual_pairing(eng, [(0, POINT)], FockState.fundamental(2))


def test_pairing_full_rank_example():
    eng = engine_for(ModuliParams(2, 0, 0))
    rows = pairing_matrix(eng, 2)
    assert exact_rank(rows) == len(rows) == eng.dim(2)


@pytest.mark.parametrize("params", [ModuliParams(1, 1, 0), ModuliParams(2, 1, 2)])
def test_check_pairing(params):
    report = check_pairing(params, 2)
    assert report.passed and len(report.notes) == 3


def test_exact_rank_detects_dependence():
    assert exact_rank([[1, 2], [2, 4]]) == 1
    assert exact_rank([[0, 1], [1, 0]]) == 2
    assert exact_rank([]) == 0


# reports, plumbing


def test_report_json():
    report = check_relation(RelationCase("EF", ModuliParams(1, 0, 0), 1))
    data = json.loads(json.dumps(report.to_json()))
    assert data["passed"] is True and data["tuples_checked"] == report.tuples > 0
    assert data["params"] == {"r": 1, "g": 0, "n": 0}
    assert report.summary().startswith("PASS EF r=1 g=0 n=0")
    failed = CheckReport("EE", ModuliParams(1, 0, 0), 1, passed=False)
    assert failed.summary().startswith("FAIL")


def test_unknown_relation():
    with pytest.raises(ValueError):
        check_relation(RelationCase("XX", ModuliParams(1, 0, 0), 1))


def test_threaded_run_matches_serial():
    cases = [RelationCase(rel, ModuliParams(2, 0, n), 1) for rel in ("EF", "ME") for n in (0, 3)]
    serial = [r.to_json() for r in run_cases(cases)]
    threaded = [r.to_json() for r in run_cases(cases, threads=4)]
    assert serial == threaded


@pytest.mark.parametrize("params", [ModuliParams(1, 1, 2), ModuliParams(2, 1, 0)])
def test_confluence_small(params):
    report = check_confluence(params, trials=150, seed=11)
    assert report.passed and report.trials == 150 and report.fuel_exhausted == 0


def test_alpha_beta_caps_are_exercised():
    eng = engine_for(ModuliParams(1, 1, 0))
    lhs, rhs = relation_sides("EF", eng, 1, 0, 0, alpha(1), beta(1))
    assert xs.equal(lhs, rhs) and not xs.is_zero(lhs)
    assert Fraction(delta_pairing(alpha(1), beta(1), 1)) != 0
