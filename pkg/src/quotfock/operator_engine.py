"""Creation, annihilation and multiplication operators on the Fock basis.

Every capped operator X(c) is stored, per domain charge, as an integer CSR
matrix between canonical bases.  "Class operators" (multiplication by a
class on Quot_d x C, then integration against the cap) are dicts
letter -> matrix; their product is composition followed by restriction to
the diagonal.

Conventions used throughout:

* diag(P, Q, gamma) = sum over Delta_*(gamma) = sum s x (x) y of
  s (-1)^{|x||y|} P(x) Q(y); this is (P Q)|_Delta capped with gamma.
* f_j(c) is straightened through the first slot of a basis vector with
  f_j(c) a_i(c') = (-1)^{|c||c'|} a_i(c') f_j(c) + R_{ij}(c' c), where
  R_{ij} = sum_{s<i} (-1)^{i-s} a_s f_{i+j-s-1}|_Delta
         + sum_{s<=i} (-1)^{i-s} h_{i+j-r-s+1} m_s.
* X(z) = c(V, z+K)/c(E, z+K) = Id - [a(z) f(z)|_Delta]_{z<0}; the m and h
  operators are read off from X by series inversion.
"""

from __future__ import annotations

import random
from fractions import Fraction
from math import lcm
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence, Union

import scipy.sparse as sp

from . import exact_sparse as xs
from .curve_algebra import (
    POINT,
    UNIT,
    CurveClass,
    Letter,
    ModuliParams,
    diagonal_expansion,
    dual_letter,
    letter_product,
    letters,
)
from .fock_space import (
    FockBasisVector,
    FockState,
    basis_index,
    canonical_slots,
    enumerate_basis,
)

ClassOp = dict  # Letter -> csr matrix, charge preserving
KINDS = ("a", "f", "m", "h", "e")


class OperatorError(ValueError):
    pass


class FuelExhausted(RuntimeError):
    """The rewriting evaluator ran out of steps; this always indicates a bug."""


Cap = Union[tuple, str]


class OperatorToken(NamedTuple):
    """kind in a/f/m/h/e, an index, and a cap.

    The cap is either a tuple of (Letter, Fraction) pairs, a class on one
    curve factor, or a string naming an open label.
    """

    kind: str
    index: int
    cap: Cap

    @property
    def is_open(self) -> bool:
        return isinstance(self.cap, str)

    def cap_terms(self) -> list[tuple[Letter, Fraction]]:
        if self.is_open:
            raise OperatorError(f"token {self} has an open label, not a cap")
        return [(x, Fraction(c)) for x, c in self.cap if c]

    def __str__(self) -> str:
        if self.is_open:
            cap = self.cap
        else:
            cap = " + ".join(f"{c}*{x}" if c != 1 else str(x) for x, c in self.cap) or "0"
        return f"{self.kind}[{self.index}]({cap})"


def make_token(kind: str, index: int, cap) -> OperatorToken:
    """Build a token from a Letter, a CurveClass on one label, a mapping, or a label name."""
    if kind not in KINDS:
        raise OperatorError(f"unknown operator kind {kind!r}")
    if isinstance(cap, str):
        return OperatorToken(kind, index, cap)
    if isinstance(cap, Letter):
        terms = {cap: Fraction(1)}
    elif isinstance(cap, CurveClass):
        if len(cap.labels) != 1:
            raise OperatorError("a cap must live on exactly one curve factor")
        terms = {m[0]: c for m, c in cap.terms.items()}
    else:
        terms = {x: Fraction(c) for x, c in dict(cap).items()}
    return OperatorToken(kind, index, tuple(sorted((x, c) for x, c in terms.items() if c)))


def charge_shift(kind: str) -> int:
    return {"a": 1, "e": 1, "f": -1, "m": 0, "h": 0}[kind]


def degree_shift(kind: str, index: int, r: int) -> int:
    """Shift of cohomological degree for a cap of degree 0."""
    return {
        "a": 2 * index,
        "e": 2 * index,
        "f": 2 * index - 2 * r,
        "m": 2 * index - 2,
        "h": 2 * index - 2,
    }[kind]


class ScaledMatrix(NamedTuple):
    """The rational matrix ``matrix / denominator``."""

    matrix: sp.csr_matrix
    denominator: int


class Engine:
    """Memoized operator matrices for fixed (r, g, n).

    The caches are plain dicts.  Concurrent readers may race to fill the same
    entry; the recomputed value is identical, so a lost race only wastes work.
    """

    def __init__(self, params: ModuliParams):
        self.params = ModuliParams(*params).validate()
        self.r, self.g, self.n = self.params
        self.letters = letters(self.g)
        self.B = (2 * self.g - 2) * self.r - self.n
        self.K = 2 * self.g - 2
        self._cache: dict = {}
        self._diag = {
            gamma: tuple(
                (c * (-1) ** (x.degree * y.degree), x, y) for c, x, y in diagonal_expansion(gamma, self.g)
            )
            for gamma in self.letters
        }

    # bases

    def basis(self, d: int) -> tuple[FockBasisVector, ...]:
        return enumerate_basis(self.r, self.g, d) if d >= 0 else ()

    def dim(self, d: int) -> int:
        return len(self.basis(d))

    def index(self, d: int) -> dict[FockBasisVector, int]:
        return basis_index(self.r, self.g, d)

    def zero(self, d_out: int, d_in: int) -> sp.csr_matrix:
        return xs.zeros(self.dim(d_out), self.dim(d_in))

    def _memo(self, key, build):
        try:
            return self._cache[key]
        except KeyError:
            value = build()
            self._cache[key] = value
            return value

    def cache_size(self) -> int:
        return len(self._cache)

    # a, strip

    def a(self, i: int, c: Letter, d: int) -> sp.csr_matrix:
        """a_i(c): V_d -> V_{d+1}."""
        if not 0 <= i < self.r:
            raise OperatorError(f"a-index {i} outside 0..{self.r - 1}")
        return self._memo(("a", i, c, d), lambda: self._build_a(i, c, d))

    def _build_a(self, i: int, c: Letter, d: int) -> sp.csr_matrix:
        target = self.index(d + 1)
        entries = {}
        for col, vec in enumerate(self.basis(d)):
            got = canonical_slots(((i, c),) + vec.slots)
            if got is not None:
                entries[(target[got[1]], col)] = got[0]
        return xs.from_entries(self.dim(d + 1), self.dim(d), entries)

    def strip(self, i: int, c: Letter, d: int) -> sp.csr_matrix:
        """V_d -> V_{d-1}: sends a_i(c) w to w when (i, c) is the first slot, else 0."""

        def build():
            target = self.index(d - 1)
            entries = {}
            for col, vec in enumerate(self.basis(d)):
                if vec.slots and vec.slots[0] == (i, c):
                    entries[(target[FockBasisVector(vec.slots[1:])], col)] = 1
            return xs.from_entries(self.dim(d - 1), self.dim(d), entries)

        return self._memo(("strip", i, c, d), build)

    def leading_slots(self, d: int) -> list[tuple[int, Letter]]:
        return self._memo(
            ("lead", d), lambda: sorted({vec.slots[0] for vec in self.basis(d)}, key=lambda s: (-s[0], s[1]))
        )

    # diagonal compositions

    def diag(self, outer: Callable[[Letter], sp.csr_matrix], inner: Callable[[Letter], sp.csr_matrix], gamma: Letter, shape) -> sp.csr_matrix:
        terms = []
        for coeff, x, y in self._diag[gamma]:
            m = xs.matmul(outer(x), inner(y))
            terms.append((coeff, m))
        return xs.combine(terms, *shape)

    # f

    def f(self, j: int, c: Letter, d: int) -> sp.csr_matrix:
        """f_j(c): V_d -> V_{d-1}."""
        if j < 0:
            return self.zero(d - 1, d)
        return self._memo(("f", j, c, d), lambda: self._build_f(j, c, d))

    def _build_f(self, j: int, c: Letter, d: int) -> sp.csr_matrix:
        if d <= 0:
            return self.zero(d - 1, d)
        terms = []
        for i, cp in self.leading_slots(d):
            s = -1 if (cp.odd and c.odd) else 1
            pieces = [(s, xs.matmul(self.a(i, cp, d - 2), self.f(j, c, d - 1)))] if d >= 2 else []
            prod = letter_product(cp, c)
            if prod is not None:
                pieces.append((prod[0], self.r_term(i, j, prod[1], d - 1)))
            inner = xs.combine(pieces, self.dim(d - 1), self.dim(d - 1))
            terms.append((1, xs.matmul(inner, self.strip(i, cp, d))))
        return xs.combine(terms, self.dim(d - 1), self.dim(d))

    def r_term(self, i: int, j: int, gamma: Letter, d: int) -> sp.csr_matrix:
        """[f_j, a_i] with the a-slot stripped, capped with gamma, acting on V_d."""

        def build():
            shape = (self.dim(d), self.dim(d))
            terms = []
            for s in range(i):
                idx = i + j - s - 1
                m = self.diag(lambda x: self.a(s, x, d - 1), lambda y: self.f(idx, y, d), gamma, shape)
                terms.append(((-1) ** (i - s), m))
            for s in range(i + 1):
                t = i + j - self.r - s + 1
                if t < 0:
                    continue
                terms.append(((-1) ** (i - s), self.hm(t, s, d)[gamma]))
            return xs.combine(terms, *shape)

        return self._memo(("R", i, j, gamma, d), build)

    def commutator_fa_restricted(self, i: int, j: int, u: Letter, w: Letter, d: int) -> sp.csr_matrix:
        """Right side of [f_j, a_i] from the two-case formula, capped with u (a) and w (f).

        Only valid for i, j in 0..r-1.
        """
        if not (0 <= i < self.r and 0 <= j < self.r):
            raise OperatorError("the two-case formula needs i, j in 0..r-1")
        shape = (self.dim(d), self.dim(d))
        total = []
        for coeff, x, y in self.delta_times(u, w):
            if i + j <= self.r - 1:
                if i + j == self.r - 1:
                    val = (x.kind == 3) * (y.kind == 3)
                    if val:
                        total.append(((-1) ** i * coeff, xs.identity(self.dim(d))))
                for s in range(i):
                    sign = (-1) ** (x.degree * y.degree) * (-1) ** (i - s)
                    m = xs.matmul(self.a(s, x, d - 1), self.f(i + j - s - 1, y, d))
                    total.append((coeff * sign, m))
            else:
                for s in range(i, self.r):
                    sign = -((-1) ** (x.degree * y.degree)) * (-1) ** (i - s)
                    m = xs.matmul(self.a(s, x, d - 1), self.f(i + j - s - 1, y, d))
                    total.append((coeff * sign, m))
        return xs.combine(total, *shape)

    def hm(self, t: int, s: int, d: int) -> ClassOp:
        return self._memo(("HM", t, s, d), lambda: self.cop_product(self.h(t, d), self.m(s, d), d))

    def delta_times(self, u: Letter, w: Letter) -> list[tuple[int, Letter, Letter]]:
        """delta . (u (x) w) as (coeff, x, y) triples."""
        return self._memo(("dt", u, w), lambda: _delta_times(u, w, self.g))

    # class operators

    def cop_identity(self, d: int) -> ClassOp:
        def build():
            z = self.zero(d, d)
            return {x: (xs.identity(self.dim(d)) if x == POINT else z) for x in self.letters}

        return self._memo(("I", d), build)

    def cop_zero(self, d: int) -> ClassOp:
        z = self.zero(d, d)
        return {x: z for x in self.letters}

    def cop_combine(self, terms: Iterable[tuple[int, ClassOp]], d: int) -> ClassOp:
        terms = list(terms)
        return {x: xs.combine([(c, op[x]) for c, op in terms], self.dim(d), self.dim(d)) for x in self.letters}

    def cop_product(self, p: ClassOp, q: ClassOp, d: int) -> ClassOp:
        shape = (self.dim(d), self.dim(d))
        return {x: self.diag(p.__getitem__, q.__getitem__, x, shape) for x in self.letters}

    def cop_point(self, p: ClassOp, d: int) -> ClassOp:
        """w . P, so (w P)(gamma) = P(w gamma)."""
        z = self.zero(d, d)
        return {x: (p[POINT] if x == UNIT else z) for x in self.letters}

    def x(self, k: int, d: int) -> ClassOp:
        """Coefficient of z^{-k} in c(V, z+K)/c(E, z+K) on Quot_d x C."""
        if k < 0:
            return self.cop_zero(d)
        if k == 0:
            return self.cop_identity(d)

        def build():
            shape = (self.dim(d), self.dim(d))
            out = {}
            for gamma in self.letters:
                terms = []
                for i in range(self.r):
                    idx = self.r + k - 2 - i
                    m = self.diag(lambda u: self.a(i, u, d - 1), lambda w: self.f(idx, w, d), gamma, shape)
                    terms.append(((-1) ** (i + 1), m))
                out[gamma] = xs.combine(terms, *shape)
            return out

        return self._memo(("X", k, d), build)

    def y(self, k: int, d: int) -> ClassOp:
        """Coefficient of z^{-k} in the inverse series of x."""
        if k < 0:
            return self.cop_zero(d)
        if k == 0:
            return self.cop_identity(d)
        return self._memo(
            ("Y", k, d),
            lambda: self.cop_combine(
                [(-1, self.cop_product(self.x(j, d), self.y(k - j, d), d)) for j in range(1, k + 1)], d
            ),
        )

    def p(self, q: int, d: int) -> ClassOp:
        """Coefficient of z^{r-q} in c(E, z+K) = c(V, z+K) / X(z)."""
        if q < 0:
            return self.cop_zero(d)
        return self._memo(
            ("P", q, d), lambda: self.cop_combine([(1, self.y(q, d)), (self.B, self.cop_point(self.y(q - 1, d), d))], d)
        )

    def m(self, k: int, d: int) -> ClassOp:
        """Multiplication by c_k(E), 0 <= k <= r."""
        if not 0 <= k <= self.r:
            raise OperatorError(f"m-index {k} outside 0..{self.r}")
        sign = (-1) ** k
        return self._memo(
            ("M", k, d),
            lambda: self.cop_combine(
                [
                    (sign, self.p(k, d)),
                    (-sign * (self.r - k + 1) * self.K, self.cop_point(self.p(k - 1, d), d)),
                ],
                d,
            ),
        )

    def u(self, q: int, d: int) -> ClassOp:
        """z^r / c(E, z) = sum_q U_q z^{-q}."""
        if q < 0:
            return self.cop_zero(d)
        if q == 0:
            return self.cop_identity(d)

        def build():
            terms = []
            for k in range(1, min(q, self.r) + 1):
                ck = self.m(k, d)
                terms.append((-((-1) ** k), self.cop_product(ck, self.u(q - k, d), d)))
            return self.cop_combine(terms, d)

        return self._memo(("U", q, d), build)

    def h(self, t: int, d: int) -> ClassOp:
        """h(z) = sum h_t z^{-t-r} = c(V, z+K)/(c(E, z) c(E, z+K))."""
        if t < 0:
            return self.cop_zero(d)
        return self._memo(
            ("H", t, d),
            lambda: self.cop_combine([(1, self.cop_product(self.x(p, d), self.u(t - p, d), d)) for p in range(t + 1)], d),
        )

    def w_series(self, p: int, d: int) -> ClassOp:
        """z^r / c(E, z+K) = sum_p W_p z^{-p}."""
        if p < 0:
            return self.cop_zero(d)
        return self._memo(
            ("W", p, d),
            lambda: self.cop_combine([(1, self.x(p, d)), (-self.B, self.cop_point(self.x(p - 1, d), d))], d),
        )

    # e

    def e(self, k: int, c: Letter, d: int) -> sp.csr_matrix:
        """e_k(c): V_d -> V_{d+1}, from e(z) = c(E, z+K)^{-1} a(z+K) restricted to the diagonal."""
        if k < 0:
            return self.zero(d + 1, d)
        return self._memo(("e", k, c, d), lambda: self._build_e(k, c, d))

    def _build_e(self, k: int, c: Letter, d: int) -> sp.csr_matrix:
        shape = (self.dim(d + 1), self.dim(d))
        terms = []
        for i in range(min(k, self.r - 1) + 1):
            sign = (-1) ** i
            w0 = self.w_series(k - i, d + 1)
            terms.append((sign, self.diag(w0.__getitem__, lambda y: self.a(i, y, d), c, shape)))
            mult = self.r - 1 - i
            if mult and k - i - 1 >= 0 and self.K:
                w1 = self.w_series(k - i - 1, d + 1)
                ka = lambda y: self.a(i, POINT, d) if y == UNIT else self.zero(d + 1, d)
                m = self.diag(w1.__getitem__, ka, c, shape)
                terms.append((sign * mult * self.K, m))
        return xs.combine(terms, *shape)

    # generic access

    def matrix(self, kind: str, index: int, c: Letter, d: int) -> sp.csr_matrix:
        """Matrix of a capped single-letter operator with domain charge d."""
        if d < 0:
            return self.zero(d + charge_shift(kind), d)
        if kind == "a":
            return self.a(index, c, d)
        if kind == "f":
            return self.f(index, c, d)
        if kind == "e":
            return self.e(index, c, d)
        if kind == "m":
            return self.m(index, d)[c]
        if kind == "h":
            return self.h(index, d)[c]
        raise OperatorError(f"unknown operator kind {kind!r}")

    def operator_matrix(self, token: OperatorToken, d: int) -> ScaledMatrix:
        terms = token.cap_terms()
        den = lcm(*(c.denominator for _, c in terms)) if terms else 1
        rows = self.dim(d + charge_shift(token.kind))
        mats = [(int(c * den), self.matrix(token.kind, token.index, x, d)) for x, c in terms]
        return ScaledMatrix(xs.combine(mats, rows, self.dim(d)), den)


def _delta_times(u: Letter, w: Letter, g: int) -> list[tuple[int, Letter, Letter]]:
    from .curve_algebra import diagonal_class, mul

    mono = CurveClass(("p", "q"), g, {(u, w): 1})
    prod = mul(diagonal_class("p", "q", g), mono)
    return sorted((int(c), m[0], m[1]) for m, c in prod.terms.items())


# vector-level evaluation


def state_to_vector(engine: Engine, state: FockState, d: int) -> dict[int, Fraction]:
    index = engine.index(d)
    return {index[vec]: c for (vec, _), c in state.terms.items()}


def vector_to_state(engine: Engine, vec: Mapping[int, Fraction], d: int) -> FockState:
    basis = engine.basis(d)
    return FockState({basis[i]: c for i, c in vec.items()})


class Evaluator:
    """Applies operator words to states by rewriting.

    a-tokens prepend a slot and re-canonicalize.  f-tokens are pushed through
    a slot chosen by ``rng`` (the first slot when ``rng`` is None), so two
    evaluators with different seeds follow different rewrite orders.  m, h
    and e act through their memoized matrices.  Every rewrite step costs one
    unit of fuel.
    """

    def __init__(self, engine: Engine, rng: random.Random | None = None, fuel: int = 10**6):
        self.engine = engine
        self.rng = rng
        self.fuel = fuel
        self.steps = 0

    def _burn(self) -> None:
        self.steps += 1
        if self.steps > self.fuel:
            raise FuelExhausted(f"fuel exhausted: rewriting exceeded {self.fuel} steps")

    # single basis vectors, returned as dict vector -> coefficient

    def a_on(self, i: int, c: Letter, vec: FockBasisVector) -> dict:
        if not 0 <= i < self.engine.r:
            raise OperatorError(f"a-index {i} outside 0..{self.engine.r - 1}")
        self._burn()
        got = canonical_slots(((i, c),) + vec.slots)
        return {} if got is None else {got[1]: Fraction(got[0])}

    def f_on(self, j: int, c: Letter, vec: FockBasisVector) -> dict:
        self._burn()
        if not vec.slots or j < 0:
            return {}
        p = self.rng.randrange(vec.d) if self.rng is not None else 0
        i, cp = vec.slots[p]
        before = sum(x.degree for _, x in vec.slots[:p])
        sigma = -1 if (cp.odd and before % 2) else 1
        rest = FockBasisVector(vec.slots[:p] + vec.slots[p + 1 :])
        out: dict = {}
        s = -1 if (cp.odd and c.odd) else 1
        for w, cw in self.f_on(j, c, rest).items():
            _accumulate(out, self.a_on(i, cp, w), sigma * s * cw)
        prod = letter_product(cp, c)
        if prod is not None:
            _accumulate(out, self.r_on(i, j, prod[1], rest), sigma * prod[0])
        return out

    def r_on(self, i: int, j: int, gamma: Letter, vec: FockBasisVector) -> dict:
        eng = self.engine
        out: dict = {}
        for s in range(i):
            idx = i + j - s - 1
            for coeff, x, y in eng._diag[gamma]:
                for w, cw in self.f_on(idx, y, vec).items():
                    _accumulate(out, self.a_on(s, x, w), (-1) ** (i - s) * coeff * cw)
        d = vec.d
        for s in range(i + 1):
            t = i + j - eng.r - s + 1
            if t < 0:
                continue
            self._burn()
            hm = eng.hm(t, s, d)[gamma]
            _accumulate(out, self._matrix_on(hm, vec, d, d), (-1) ** (i - s))
        return out

    def _matrix_on(self, m: sp.csr_matrix, vec: FockBasisVector, d_in: int, d_out: int) -> dict:
        col = {self.engine.index(d_in)[vec]: Fraction(1)}
        basis = self.engine.basis(d_out)
        return {basis[i]: c for i, c in xs.apply(m, col).items()}

    def token_on(self, kind: str, index: int, c: Letter, vec: FockBasisVector) -> dict:
        if kind == "a":
            return self.a_on(index, c, vec)
        if kind == "f":
            return self.f_on(index, c, vec)
        self._burn()
        d = vec.d
        return self._matrix_on(self.engine.matrix(kind, index, c, d), vec, d, d + charge_shift(kind))

    # states

    def apply(self, token: OperatorToken, state: FockState) -> FockState:
        if token.is_open:
            return self._apply_open(token, state)
        out: dict = {}
        for x, cx in token.cap_terms():
            for (vec, mono), cv in state.terms.items():
                # moving the cap past odd open letters costs a Koszul sign
                odd_mono = sum(y.degree for y in mono) % 2
                sign = -1 if (x.odd and odd_mono) else 1
                for w, cw in self.token_on(token.kind, token.index, x, vec).items():
                    key = (w, mono)
                    out[key] = out.get(key, 0) + sign * cx * cv * cw
        return FockState(out, state.labels)

    def _apply_open(self, token: OperatorToken, state: FockState) -> FockState:
        label = token.cap
        if label in state.labels:
            raise OperatorError(f"open label {label!r} already in use")
        out: dict = {}
        for u in self.engine.letters:
            sgn, dual = dual_letter(u)
            capped = self.apply(OperatorToken(token.kind, token.index, ((dual, Fraction(sgn)),)), state)
            for (vec, mono), c in capped.terms.items():
                # undo the sign picked up by capping past the old open letters
                if u.odd and sum(y.degree for y in mono) % 2:
                    c = -c
                key = (vec, (u,) + mono)
                out[key] = out.get(key, 0) + c
        return FockState(out, (label,) + state.labels)

    def act_word(self, tokens: Sequence[OperatorToken], state: FockState, shuffle_a: bool = False) -> FockState:
        """Apply ``tokens`` right to left.

        With ``shuffle_a`` and an rng, runs of adjacent capped a-tokens with
        single-letter caps are first permuted at random with their Koszul
        sign, which must not change the result.
        """
        tokens = list(tokens)
        sign = 1
        if shuffle_a and self.rng is not None:
            tokens, sign = _shuffle_a_runs(tokens, self.rng)
        for token in reversed(tokens):
            state = self.apply(token, state)
        return state * sign


def _accumulate(out: dict, part: Mapping, coeff) -> None:
    for k, v in part.items():
        val = out.get(k, 0) + coeff * v
        if val:
            out[k] = val
        else:
            out.pop(k, None)


def _shuffle_a_runs(tokens: list[OperatorToken], rng: random.Random) -> tuple[list[OperatorToken], int]:
    sign = 1
    for _ in range(2 * len(tokens)):
        if len(tokens) < 2:
            break
        p = rng.randrange(len(tokens) - 1)
        s, t = tokens[p], tokens[p + 1]
        if s.kind == t.kind == "a" and not s.is_open and not t.is_open and len(s.cap) == 1 and len(t.cap) == 1:
            if s.cap[0][0].odd and t.cap[0][0].odd:
                sign = -sign
            tokens[p], tokens[p + 1] = t, s
    return tokens, sign


def fundamental_vector(engine: Engine, d: int) -> dict[int, Fraction]:
    return state_to_vector(engine, FockState.fundamental(d), d)
