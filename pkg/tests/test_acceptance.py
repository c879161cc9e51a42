"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` or directly as a script.
"""

from __future__ import annotations

import itertools
import sys
import time
from fractions import Fraction

import pytest

from quotfock import exact_sparse as xs
from quotfock.curve_algebra import (
    POINT,
    UNIT,
    CurveClass,
    ModuliParams,
    diagonal_class,
    diagonal_from_pairs,
    integrate,
    letters,
    mul,
)
from quotfock.fock_space import FockState, graded_dimensions, poincare_closed_form
from quotfock.operator_engine import Evaluator, fundamental_vector, make_token
from quotfock.relation_suite import (
    MUTATIONS,
    YANGIAN,
    RelationCase,
    check_confluence,
    check_fa_restricted,
    check_pairing,
    check_relation,
    detect_mutation,
    engine_for,
)

GRID = [ModuliParams(r, g, n) for r in (1, 2) for g in (0, 1, 2) for n in (0, 1, 3)]


def verdict(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})")
    assert ok, detail


def test_criterion_1_betti_agreement(capsys):
    start = time.perf_counter()
    mismatches = []
    for r, g in itertools.product((1, 2, 3), (0, 1, 2)):
        d_max = 5 if r <= 2 else 3
        table = poincare_closed_form(r, g, d_max)
        for d in range(d_max + 1):
            if graded_dimensions(r, g, d) != table[d]:
                mismatches.append((r, g, d))
    spots = poincare_closed_form(2, 0, 1)[1] == [1, 0, 2, 0, 1] and poincare_closed_form(1, 1, 2)[2] == [1, 2, 2, 2, 1]
    elapsed = time.perf_counter() - start
    ok = not mismatches and spots and elapsed < 60
    verdict(capsys, 1, "Betti agreement", ok, f"{len(mismatches)} mismatches, spot values {spots}, {elapsed:.1f}s")


def test_criterion_2_yangian_relations(capsys):
    start = time.perf_counter()
    failures, tuples = [], 0
    for params in GRID:
        d_max = 3 if params.r == 1 else 2
        for relation in YANGIAN:
            report = check_relation(RelationCase(relation, params, d_max))
            tuples += report.tuples
            if not report.passed:
                failures.append(report.summary())
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 600
    detail = f"{len(GRID)} grid points, {tuples} tuples, {elapsed:.0f}s" + (f", first: {failures[0]}" if failures else "")
    verdict(capsys, 2, "six Yangian families", ok, detail)


def test_criterion_3_fa_restricted_vs_general(capsys):
    failures = []
    for params in GRID:
        report = check_fa_restricted(params, 3)
        if not report.passed:
            failures.append(report.summary())
    verdict(capsys, 3, "restricted vs general [f, a]", not failures, f"{len(GRID)} grid points, d <= 3, {len(failures)} failures")


def test_criterion_4_truncation(capsys):
    bad = []
    for params in GRID:
        eng = engine_for(params)
        for d in range(4):
            for k in range(1, 6):
                if not all(xs.is_zero(m) for m in eng.p(params.r + k, d).values()):
                    bad.append((params, d, k))
    verdict(capsys, 4, "series truncation", not bad, f"z^-1..z^-5 on d <= 3, {len(bad)} nonzero coefficients")


def test_criterion_5_vacuum_oracles(capsys):
    bad = []
    for params in GRID:
        eng = engine_for(params)
        r, n = params.r, params.n
        fund = fundamental_vector(eng, 1)
        for c in eng.letters:
            # f(w) on 1_{Quot_1} against 1/c(V, w) = w^-r (1 + n w_C / w)
            for j in range(2 * r + 3):
                got = xs.apply(eng.f(j, c, 1), fund).get(0, Fraction(0))
                want = int(c == POINT) if j == r - 1 else n * int(c == UNIT) if j == r else 0
                if got != want:
                    bad.append(("f", params, j, c))
            # e(z)|0> = (Id - M(z)) 1_{Quot_1}
            for k in range(2 * r + 3):
                got = xs.apply(eng.e(k, c, 0), {0: Fraction(1)})
                want = {i: -x for i, x in xs.apply(eng.x(k + 1, 1)[c], fund).items()}
                if got != want:
                    bad.append(("e", params, k, c))
    eng = engine_for(ModuliParams(1, 0, 3))
    word = [make_token("f", 1, UNIT), make_token("a", 0, UNIT)]
    concrete = Evaluator(eng).act_word(word, FockState.vacuum()) == FockState.vacuum() * 3
    verdict(capsys, 5, "vacuum oracles", not bad and concrete, f"{len(bad)} mismatches on {len(GRID)} grid points, f_1(1)a_0(1)|0> = 3|0>: {concrete}")


def test_criterion_6_curve_invariants(capsys):
    checked, bad = 0, []
    for g in (0, 1, 2):
        delta = diagonal_class("a", "b", g)
        K = CurveClass(("a", "b"), g, {(POINT, UNIT): 2 * g - 2})
        if not mul(delta, delta + K).is_zero():
            bad.append(("delta(delta+K)", g))
        if delta != diagonal_from_pairs("a", "b", g):
            bad.append(("reconstruction", g))
        checked += 2
        for x, y in itertools.product(letters(g), repeat=2):
            # correspondence identity on every monomial of H*(C x C)
            m = CurveClass.monomial(("a", "b"), (x, y), g)
            pushed = integrate(mul(delta, m), "a")
            want = mul(CurveClass.monomial(("b",), (x,), g), CurveClass.monomial(("b",), (y,), g))
            checked += 1
            if pushed != want:
                bad.append(("correspondence", g, x, y))
    verdict(capsys, 6, "curve-algebra invariants", not bad, f"{checked} exhaustive checks for g <= 2, {len(bad)} failures")


def test_criterion_7_confluence(capsys):
    reports = [check_confluence(p, trials=1000, seed=i) for i, p in enumerate(GRID)]
    trials = min(r.trials for r in reports)
    mismatches = sum(r.mismatches for r in reports)
    fuel = sum(r.fuel_exhausted for r in reports)
    ok = trials >= 1000 and not mismatches and not fuel
    verdict(capsys, 7, "straightening confluence", ok, f"{len(GRID)} grid points x {trials} trials, {mismatches} mismatches, {fuel} fuel exhaustions")


def test_criterion_8_pairing(capsys):
    failed = []
    for r, g in itertools.product((1, 2), (0, 1)):
        report = check_pairing(ModuliParams(r, g, 0), 3)
        if not report.passed:
            failed.append(f"r={r} g={g}: " + "; ".join(report.notes))
    verdict(capsys, 8, "pairing non-degeneracy", not failed, f"r in 1,2, g in 0,1, d <= 3, {len(failed)} rank or triangularity failures")


def test_criterion_9_mutation_sensitivity(capsys):
    grid = [ModuliParams(1, 1, 1), ModuliParams(2, 1, 1)]
    caught = [m for m in MUTATIONS if detect_mutation(m, grid, 2) is not None]
    ok = len(caught) >= 6 and len(caught) == len(MUTATIONS)
    verdict(capsys, 9, "mutation sensitivity", ok, f"{len(caught)}/{len(MUTATIONS)} mutations caught")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
