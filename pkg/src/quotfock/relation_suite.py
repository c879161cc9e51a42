"""Exact checks of the commutation relations on the Fock basis.

Relations are compared in a two-label form.  Operators carrying the first
index family (k, or i for a) live on the curve factor ``p``, those carrying
the second family (l, or j for f) on ``q``.  A two-label operator is stored
through its caps: T(u, w) is the operator capped with u on p and w on q.
For a composition X Y (X applied last) this gives

    T(u, w) = (-1)^{|u||w|} X(u) Y(w)   if X sits on p,
    T(u, w) = X(w) Y(u)                 if X sits on q.

Multiplying by the diagonal class is T -> T(delta . (u (x) w)) and pushing
a one-label operator Z forward along the diagonal is T(u, w) = Z(u w).
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, NamedTuple, Sequence

import scipy.sparse as sp
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from . import exact_sparse as xs
from .curve_algebra import Letter, ModuliParams, dual_letter, letter_product
from .fock_space import FockBasisVector, FockState
from .operator_engine import (
    Engine,
    Evaluator,
    FuelExhausted,
    OperatorToken,
    charge_shift,
    make_token,
    state_to_vector,
    vector_to_state,
)

YANGIAN = ("MM", "EE", "FF", "ME", "FM", "EF")
RELATIONS = YANGIAN + ("AA", "FA-restricted", "MULT", "PAIRING")

# single sign flips in right-hand sides, used to show the checks are not vacuous
MUTATIONS = (
    "EE-delta",
    "FF-delta",
    "ME-sign",
    "FM-sign",
    "EF-sign",
    "MULT-sign",
    "FA-chi",
    "AA-koszul",
)


class RelationCase(NamedTuple):
    relation: str
    params: ModuliParams
    d_max: int
    k_max: int | None = None
    l_max: int | None = None


@dataclass
class CheckReport:
    relation: str
    params: ModuliParams
    d_max: int
    passed: bool = True
    tuples: int = 0
    failure: dict | None = None
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "relation": self.relation,
            "params": {"r": self.params.r, "g": self.params.g, "n": self.params.n},
            "d_max": self.d_max,
            "passed": self.passed,
            "tuples_checked": self.tuples,
            "failure": self.failure,
            "notes": list(self.notes),
        }

    def summary(self) -> str:
        r, g, n = self.params
        status = "PASS" if self.passed else "FAIL"
        line = f"{status} {self.relation} r={r} g={g} n={n} d<={self.d_max} tuples={self.tuples}"
        if self.failure:
            f = self.failure
            line += f" first failure at d={f['d']} indices={f['indices']} caps={f['caps']}"
        return line


_ENGINES: dict[ModuliParams, Engine] = {}


def engine_for(params: ModuliParams) -> Engine:
    """Shared engine per parameter triple (idempotent under races)."""
    params = ModuliParams(*params)
    eng = _ENGINES.get(params)
    if eng is None:
        eng = _ENGINES.setdefault(params, Engine(params))
    return eng


def _ksign(u: Letter, w: Letter) -> int:
    return -1 if (u.odd and w.odd) else 1


class _Tables:
    """Two-label operator tables at a fixed domain charge."""

    def __init__(self, eng: Engine, d: int):
        self.eng = eng
        self.d = d

    def op(self, kind: str, index: int, c: Letter, d: int) -> sp.csr_matrix:
        return self.eng.matrix(kind, index, c, d)

    def comp(self, outer: tuple[str, int, str], inner: tuple[str, int, str], u: Letter, w: Letter) -> sp.csr_matrix:
        """Table of outer . inner; each operand is (kind, index, label in {'p','q'})."""
        (ko, io, lo), (ki, ii, li) = outer, inner
        if lo == li:
            raise ValueError("composed operators must sit on different factors")
        mid = self.d + charge_shift(ki)
        if lo == "p":
            m = xs.matmul(self.op(ko, io, u, mid), self.op(ki, ii, w, self.d))
            return -m if _ksign(u, w) == -1 else m
        return xs.matmul(self.op(ko, io, w, mid), self.op(ki, ii, u, self.d))

    def bracket(self, x: tuple[str, int, str], y: tuple[str, int, str], u: Letter, w: Letter, koszul: bool = True) -> sp.csr_matrix:
        """[x, y] = x y - y x in table form; the super-sign comes out of the table convention."""
        a = self.comp(x, y, u, w)
        b = self.comp(y, x, u, w)
        if not koszul:
            # deliberately wrong: treat odd caps as if they commuted
            b = b * _ksign(u, w)
        return xs.combine([(1, a), (-1, b)], *a.shape)

    def times_delta(self, table: Callable[[Letter, Letter], sp.csr_matrix], u: Letter, w: Letter, shape) -> sp.csr_matrix:
        terms = [(c, table(x, y)) for c, x, y in self.eng.delta_times(u, w)]
        return xs.combine(terms, *shape)

    def push_diagonal(self, single: Callable[[Letter], sp.csr_matrix], u: Letter, w: Letter, shape) -> sp.csr_matrix:
        prod = letter_product(u, w)
        if prod is None:
            return xs.zeros(*shape)
        return single(prod[1]) * prod[0]


def _shape(eng: Engine, d_out: int, d_in: int) -> tuple[int, int]:
    return eng.dim(d_out), eng.dim(d_in)


def relation_sides(relation: str, eng: Engine, d: int, k: int, l: int, u: Letter, w: Letter, mutation: str | None = None):
    """(lhs, rhs) matrices of one coefficient relation at domain charge d, caps (u on p, w on q)."""
    t = _Tables(eng, d)
    r = eng.r
    if relation == "MM":
        shape = _shape(eng, d, d)
        lhs = t.bracket(("m", k, "p"), ("m", l, "q"), u, w)
        return lhs, xs.zeros(*shape)
    if relation == "AA":
        shape = _shape(eng, d + 2, d)
        lhs = t.bracket(("a", k, "p"), ("a", l, "q"), u, w, koszul=mutation != "AA-koszul")
        return lhs, xs.zeros(*shape)
    if relation == "EE":
        shape = _shape(eng, d + 2, d)
        lhs = t.bracket(("e", k + 1, "p"), ("e", l, "q"), u, w) - t.bracket(("e", k, "p"), ("e", l + 1, "q"), u, w)
        sign = 1 if mutation == "EE-delta" else -1
        rhs = t.times_delta(
            lambda x, y: t.comp(("e", k, "p"), ("e", l, "q"), x, y) + t.comp(("e", l, "q"), ("e", k, "p"), x, y), u, w, shape
        )
        return lhs, rhs * sign
    if relation == "FF":
        shape = _shape(eng, d - 2, d)
        lhs = t.bracket(("f", l, "q"), ("f", k + 1, "p"), u, w) - t.bracket(("f", l + 1, "q"), ("f", k, "p"), u, w)
        sign = 1 if mutation == "FF-delta" else -1
        rhs = t.times_delta(
            lambda x, y: t.comp(("f", k, "p"), ("f", l, "q"), x, y) + t.comp(("f", l, "q"), ("f", k, "p"), x, y), u, w, shape
        )
        return lhs, rhs * sign
    if relation == "ME":
        shape = _shape(eng, d + 1, d)
        lhs = t.bracket(("m", l, "q"), ("e", k, "p"), u, w)

        def table(x, y):
            terms = []
            for s in range(l):
                sign = (-1) ** (s + 1)
                if mutation == "ME-sign" and s == 0:
                    sign = -sign
                terms.append((sign, t.comp(("e", k + s, "p"), ("m", l - s - 1, "q"), x, y)))
            return xs.combine(terms, *shape)

        return lhs, t.times_delta(table, u, w, shape)
    if relation == "FM":
        shape = _shape(eng, d - 1, d)
        lhs = t.bracket(("f", k, "p"), ("m", l, "q"), u, w)

        def table(x, y):
            terms = []
            for s in range(l):
                sign = (-1) ** (s + 1)
                if mutation == "FM-sign" and s == 0:
                    sign = -sign
                terms.append((sign, t.comp(("m", l - s - 1, "q"), ("f", k + s, "p"), x, y)))
            return xs.combine(terms, *shape)

        return lhs, t.times_delta(table, u, w, shape)
    if relation == "EF":
        shape = _shape(eng, d, d)
        lhs = t.bracket(("e", k, "p"), ("f", l, "q"), u, w)
        sign = 1 if mutation == "EF-sign" else -1
        idx = k + l - r + 1
        rhs = t.push_diagonal(lambda x: eng.h(idx, d)[x], u, w, shape)
        return lhs, rhs * sign
    raise ValueError(f"no two-label form for relation {relation!r}")


def index_ranges(relation: str, r: int, k_max: int | None, l_max: int | None) -> tuple[range, range]:
    top = 2 * r + 2
    k_max = top if k_max is None else k_max
    l_max = top if l_max is None else l_max
    if relation == "MM":
        return range(min(k_max, r) + 1), range(min(l_max, r) + 1)
    if relation in ("ME", "FM"):
        return range(k_max + 1), range(min(l_max, r) + 1)
    if relation == "AA":
        return range(min(k_max, r - 1) + 1), range(min(l_max, r - 1) + 1)
    return range(k_max + 1), range(l_max + 1)


def _failure(eng: Engine, relation: str, d: int, indices, caps, lhs, rhs, d_out: int) -> dict:
    diff = xs.first_difference(lhs, rhs)
    row, col, lv, rv = diff
    return {
        "d": d,
        "indices": list(indices),
        "caps": [str(c) for c in caps],
        "vector": str(eng.basis(d)[col]),
        "target": str(eng.basis(d_out)[row]),
        "lhs": lv,
        "rhs": rv,
    }


def _out_charge(relation: str, d: int) -> int:
    return d + {"MM": 0, "AA": 2, "EE": 2, "FF": -2, "ME": 1, "FM": -1, "EF": 0, "FA-restricted": 0, "MULT": 0}[relation]


def check_relation(case: RelationCase, mutation: str | None = None, fail_fast: bool = True) -> CheckReport:
    relation = case.relation
    if relation == "FA-restricted":
        return check_fa_restricted(case.params, case.d_max, mutation=mutation, fail_fast=fail_fast)
    if relation == "MULT":
        return check_mult_identity(case.params, case.d_max, case.k_max, mutation=mutation, fail_fast=fail_fast)
    if relation == "PAIRING":
        return check_pairing(case.params, case.d_max)
    if relation not in YANGIAN + ("AA",):
        raise ValueError(f"unknown relation {relation!r}")
    eng = engine_for(case.params)
    report = CheckReport(relation, eng.params, case.d_max)
    ks, ls = index_ranges(relation, eng.r, case.k_max, case.l_max)
    for d in range(case.d_max + 1):
        for k in ks:
            for l in ls:
                for u in eng.letters:
                    for w in eng.letters:
                        lhs, rhs = relation_sides(relation, eng, d, k, l, u, w, mutation)
                        report.tuples += 1
                        if not xs.equal(lhs, rhs):
                            report.passed = False
                            if report.failure is None:
                                report.failure = _failure(eng, relation, d, (k, l), (u, w), lhs, rhs, _out_charge(relation, d))
                            if fail_fast:
                                return report
    return report


def check_fa_restricted(params: ModuliParams, d_max: int, mutation: str | None = None, fail_fast: bool = True, j_max: int | None = None) -> CheckReport:
    """Two-case formula for [f_j, a_i] (i, j < r) against the general one and against the commutator itself.

    The general formula is additionally checked against the commutator for
    every j up to ``j_max`` (default 2r + 2).
    """
    eng = engine_for(params)
    r = eng.r
    j_max = 2 * r + 2 if j_max is None else j_max
    report = CheckReport("FA-restricted", eng.params, d_max)
    for d in range(d_max + 1):
        t = _Tables(eng, d)
        shape = _shape(eng, d, d)
        for i in range(r):
            for j in range(j_max + 1):
                for u in eng.letters:
                    for w in eng.letters:
                        lhs = t.bracket(("f", j, "q"), ("a", i, "p"), u, w)
                        general = t.push_diagonal(lambda x: eng.r_term(i, j, x, d), u, w, shape)
                        pairs = [(lhs, general)]
                        if j < r:
                            restricted = eng.commutator_fa_restricted(i, j, u, w, d)
                            if mutation == "FA-chi" and i + j == r - 1:
                                chi = xs.combine(
                                    [(2 * (-1) ** i * c, xs.identity(eng.dim(d))) for c, x, y in eng.delta_times(u, w) if x.kind == 3 and y.kind == 3],
                                    *shape,
                                )
                                restricted = restricted - chi
                            pairs += [(restricted, general), (lhs, restricted)]
                        for a, b in pairs:
                            report.tuples += 1
                            if not xs.equal(a, b):
                                report.passed = False
                                if report.failure is None:
                                    report.failure = _failure(eng, "FA-restricted", d, (i, j), (u, w), a, b, d)
                                if fail_fast:
                                    return report
    return report


def chern_twisted_from_m(eng: Engine, k: int, d: int):
    """c_k((V - E) (x) K^{-1}) as a class operator, built from the m operators alone.

    c(E, z+K) = sum_i (-1)^i m_i (z+K)^{r-i} and c(V, z+K) = z^r + B w z^{r-1};
    the ratio is inverted as a power series in 1/z.
    """
    r = eng.r
    # c(E, z+K) = z^r sum_q P_q z^{-q}
    P = []
    for q in range(r + 1):
        terms = [((-1) ** q, eng.m(q, d))]
        if q >= 1:
            terms.append(((-1) ** (q - 1) * (r - q + 1) * eng.K, eng.cop_point(eng.m(q - 1, d), d)))
        P.append(eng.cop_combine(terms, d))
    inv = [eng.cop_identity(d)]
    for q in range(1, k + 1):
        terms = [(-1, eng.cop_product(P[s], inv[q - s], d)) for s in range(1, min(q, r) + 1)]
        inv.append(eng.cop_combine(terms, d))
    x_k = eng.cop_combine([(1, inv[k]), (eng.B, eng.cop_point(inv[k - 1], d))], d) if k >= 1 else inv[0]
    return eng.cop_combine([((-1) ** k, x_k)], d)


def check_mult_identity(params: ModuliParams, d_max: int, k_max: int | None = None, mutation: str | None = None, fail_fast: bool = True) -> CheckReport:
    """c_k((V - E) (x) K^{-1}) = sum_i a_i f_{r+k-2-i}|_Delta (-1)^{i-k-1}, and it vanishes for k > r d + 1."""
    eng = engine_for(params)
    r = eng.r
    report = CheckReport("MULT", eng.params, d_max)
    for d in range(d_max + 1):
        top = r * d + 1
        ks = range(1, (top + 2 if k_max is None else k_max) + 1)
        shape = _shape(eng, d, d)
        for k in ks:
            left = chern_twisted_from_m(eng, k, d)
            for gamma in eng.letters:
                terms = []
                for i in range(r):
                    idx = r + k - 2 - i
                    sign = (-1) ** (i - k - 1)
                    if mutation == "MULT-sign":
                        sign = -sign
                    m = eng.diag(lambda x: eng.a(i, x, d - 1), lambda y: eng.f(idx, y, d), gamma, shape)
                    terms.append((sign, m))
                right = xs.combine(terms, *shape)
                checks = [(left[gamma], right)]
                if k > top:
                    checks.append((right, xs.zeros(*shape)))
                for a, b in checks:
                    report.tuples += 1
                    if not xs.equal(a, b):
                        report.passed = False
                        if report.failure is None:
                            report.failure = _failure(eng, "MULT", d, (k,), (gamma,), a, b, d)
                        if fail_fast:
                            return report
    return report


# pairing


def f_word_for(vec: FockBasisVector, r: int) -> list[tuple[int, int, Letter]]:
    """The dual f-word of a basis vector: slot (k, c) gives f_{r-1-k}(c^dual).

    Returned in application order: the last slot's f acts first.
    """
    word = []
    for k, c in reversed(vec.slots):
        sign, dual = dual_letter(c)
        word.append((r - 1 - k, sign, dual))
    return word


def dual_pairing(eng: Engine, word: Sequence[tuple[int, Letter]], v: FockBasisVector | FockState) -> Fraction:
    """Coefficient of |0> after applying f_{j_1}(phi_1), then f_{j_2}(phi_2), ... to v."""
    if isinstance(v, FockBasisVector):
        v = FockState.basis(v)
    charges = v.charges()
    if len(charges) > 1:
        raise ValueError("pairing needs a state of a single charge")
    d = charges.pop() if charges else len(word)
    if len(word) != d:
        raise ValueError(f"word length {len(word)} does not match charge {d}")
    col = state_to_vector(eng, v, d)
    for step, (j, phi) in enumerate(word):
        col = xs.apply(eng.f(j, phi, d - step), col)
    return col.get(0, Fraction(0))


def pairing_row(eng: Engine, word: Sequence[tuple[int, int, Letter]], d: int) -> sp.csr_matrix:
    """Row vector (1 x dim V_d) of the f-word, with caps scaled by their signs."""
    m = xs.identity(eng.dim(d))
    sign = 1
    for step, (j, s, phi) in enumerate(word):
        m = xs.matmul(eng.f(j, phi, d - step), m)
        sign *= s
    return m * sign if sign == -1 else m


def pairing_matrix(eng: Engine, d: int) -> list[list[int]]:
    basis = eng.basis(d)
    rows = []
    for b in basis:
        row = pairing_row(eng, f_word_for(b, eng.r), d).toarray()
        rows.append([int(x) for x in row[0]]) if row.shape[0] else rows.append([0] * len(basis))
    return rows


def exact_rank(rows: list[list[int]]) -> int:
    if not rows or not rows[0]:
        return 0
    return DomainMatrix([[QQ(x) for x in row] for row in rows], (len(rows), len(rows[0])), QQ).rank()


def partition_of(vec: FockBasisVector) -> tuple[int, ...]:
    return tuple(k for k, _ in vec.slots)


def pairing_triangular(eng: Engine, d: int, rows: list[list[int]] | None = None) -> bool:
    """Pairing of the dual word of b with v vanishes whenever v has a lexicographically smaller partition."""
    rows = pairing_matrix(eng, d) if rows is None else rows
    basis = eng.basis(d)
    for a, b in enumerate(basis):
        for c, v in enumerate(basis):
            if partition_of(v) < partition_of(b) and rows[a][c]:
                return False
    return True


def check_pairing(params: ModuliParams, d_max: int) -> CheckReport:
    eng = engine_for(params)
    report = CheckReport("PAIRING", eng.params, d_max)
    for d in range(d_max + 1):
        rows = pairing_matrix(eng, d)
        rank = exact_rank(rows)
        report.tuples += len(rows)
        triangular = pairing_triangular(eng, d, rows)
        report.notes.append(f"d={d} dim={len(rows)} rank={rank} triangular={triangular}")
        if rank != len(rows) or not triangular:
            report.passed = False
            if report.failure is None:
                report.failure = {"d": d, "indices": [], "caps": [], "vector": "", "target": "", "lhs": rank, "rhs": len(rows)}
    return report


def run_cases(cases: Iterable[RelationCase], threads: int = 1, mutation: str | None = None) -> list[CheckReport]:
    cases = list(cases)
    if threads <= 1:
        return [check_relation(c, mutation) for c in cases]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda c: check_relation(c, mutation), cases))


def detect_mutation(mutation: str, params_grid: Sequence[ModuliParams], d_max: int) -> CheckReport | None:
    """First failing report for a mutated right-hand side, or None if nothing catches it."""
    relation = {
        "EE-delta": "EE",
        "FF-delta": "FF",
        "ME-sign": "ME",
        "FM-sign": "FM",
        "EF-sign": "EF",
        "MULT-sign": "MULT",
        "FA-chi": "FA-restricted",
        "AA-koszul": "AA",
    }[mutation]
    for params in params_grid:
        report = check_relation(RelationCase(relation, params, d_max), mutation=mutation)
        if not report.passed:
            return report
    return None


# confluence


def random_word(eng: Engine, rng: random.Random, length: int) -> list[OperatorToken]:
    r = eng.r
    tokens = []
    for _ in range(length):
        kind = rng.choice("aaaaffffmhe")
        index = {
            "a": lambda: rng.randrange(r),
            "f": lambda: rng.randrange(2 * r + 2),
            "m": lambda: rng.randrange(r + 1),
            "h": lambda: rng.randrange(2 * r),
            "e": lambda: rng.randrange(2 * r),
        }[kind]()
        letters_ = rng.sample(eng.letters, rng.choice((1, 1, 1, 2)))
        cap = {x: Fraction(rng.choice((1, 1, -1, 2, -3))) for x in letters_}
        tokens.append(make_token(kind, index, cap))
    return tokens


def word_by_matrices(eng: Engine, tokens: Sequence[OperatorToken], state: FockState) -> FockState:
    """Reference evaluation through memoized operator matrices."""
    out = FockState()
    for d in sorted(state.charges()):
        part = FockState({k: c for k, c in state.terms.items() if k[0].d == d})
        col = state_to_vector(eng, part, d)
        for token in reversed(tokens):
            scaled = eng.operator_matrix(token, d)
            col = {i: c / scaled.denominator for i, c in xs.apply(scaled.matrix, col).items()}
            d += charge_shift(token.kind)
            if d < 0:
                col = {}
                break
        if d >= 0:
            out = out + vector_to_state(eng, col, d)
    return out


@dataclass
class ConfluenceReport:
    params: ModuliParams
    trials: int = 0
    mismatches: int = 0
    fuel_exhausted: int = 0
    max_steps: int = 0
    first_mismatch: dict | None = None

    @property
    def passed(self) -> bool:
        return self.trials > 0 and not self.mismatches and not self.fuel_exhausted


def check_confluence(params: ModuliParams, trials: int = 1000, seed: int = 0, d_max: int = 2, max_length: int = 4, fuel: int = 10**5) -> ConfluenceReport:
    """Random words on random basis vectors, each evaluated along two random rewrite orders and by matrices."""
    eng = engine_for(params)
    rng = random.Random(seed)
    report = ConfluenceReport(eng.params)
    for _ in range(trials):
        d = rng.randrange(d_max + 1)
        vec = rng.choice(eng.basis(d))
        tokens = random_word(eng, rng, rng.randint(1, max_length))
        state = FockState.basis(vec)
        results = []
        try:
            for sub_seed in (rng.random(), rng.random()):
                ev = Evaluator(eng, random.Random(sub_seed), fuel=fuel)
                results.append(ev.act_word(tokens, state, shuffle_a=True))
                report.max_steps = max(report.max_steps, ev.steps)
        except FuelExhausted:
            report.fuel_exhausted += 1
            report.trials += 1
            continue
        results.append(word_by_matrices(eng, tokens, state))
        report.trials += 1
        if not (results[0] == results[1] == results[2]):
            report.mismatches += 1
            if report.first_mismatch is None:
                report.first_mismatch = {
                    "word": [str(t) for t in tokens],
                    "vector": str(vec),
                    "values": [repr(x) for x in results],
                }
    return report
