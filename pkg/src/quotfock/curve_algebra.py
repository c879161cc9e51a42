"""Cohomology rings of powers of a smooth genus-g curve.

H*(C) has the symplectic basis 1, al_1..al_g, be_1..be_g, w with
al_i * be_i = w and integral of w equal to 1.  A class on C^L is a sparse
rational combination of tensor monomials, one letter per named label.
All products follow the Koszul sign rule.
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple, Sequence

UNIT_KIND, ALPHA_KIND, BETA_KIND, POINT_KIND = 0, 1, 2, 3


class CurveError(ValueError):
    pass


class Letter(NamedTuple):
    """Basis element of H*(C).  Ordered by (kind, index)."""

    kind: int
    index: int = 0

    @property
    def degree(self) -> int:
        return (0, 1, 1, 2)[self.kind]

    @property
    def odd(self) -> bool:
        return self.kind in (ALPHA_KIND, BETA_KIND)

    def __str__(self) -> str:
        if self.kind == UNIT_KIND:
            return "1"
        if self.kind == POINT_KIND:
            return "w"
        return ("al" if self.kind == ALPHA_KIND else "be") + str(self.index)

    def __repr__(self) -> str:
        return f"Letter({self})"


UNIT = Letter(UNIT_KIND)
POINT = Letter(POINT_KIND)


def alpha(i: int) -> Letter:
    return Letter(ALPHA_KIND, i)


def beta(i: int) -> Letter:
    return Letter(BETA_KIND, i)


@lru_cache(maxsize=None)
def letters(g: int) -> tuple[Letter, ...]:
    """The 2g + 2 basis letters of H*(C) in canonical order."""
    if g < 0:
        raise CurveError(f"genus must be non-negative, got {g}")
    return (
        (UNIT,)
        + tuple(alpha(i) for i in range(1, g + 1))
        + tuple(beta(i) for i in range(1, g + 1))
        + (POINT,)
    )


_LETTER_RE = re.compile(r"^(1|w|al(\d+)|be(\d+))$")


def parse_letter(text: str, g: int | None = None) -> Letter:
    m = _LETTER_RE.match(text.strip())
    if not m:
        raise CurveError(f"unknown class letter {text!r}")
    if m.group(1) == "1":
        letter = UNIT
    elif m.group(1) == "w":
        letter = POINT
    elif m.group(2) is not None:
        letter = alpha(int(m.group(2)))
    else:
        letter = beta(int(m.group(3)))
    if g is not None:
        check_letter(letter, g)
    return letter


def check_letter(letter: Letter, g: int) -> None:
    if letter.odd and not 1 <= letter.index <= g:
        raise CurveError(f"letter {letter} does not exist in genus {g}")


@lru_cache(maxsize=None)
def letter_product(x: Letter, y: Letter) -> tuple[int, Letter] | None:
    """Cup product of two letters as (sign, letter), or None when it vanishes."""
    if x.kind == UNIT_KIND:
        return 1, y
    if y.kind == UNIT_KIND:
        return 1, x
    if x.kind == POINT_KIND or y.kind == POINT_KIND:
        return None
    if x.index != y.index or x.kind == y.kind:
        return None
    return (1, POINT) if x.kind == ALPHA_KIND else (-1, POINT)


def integral(x: Letter) -> int:
    return 1 if x.kind == POINT_KIND else 0


@lru_cache(maxsize=None)
def dual_letter(u: Letter) -> tuple[int, Letter]:
    """(sign, v) such that the integral of u * (sign * v) is 1."""
    if u.kind == UNIT_KIND:
        return 1, POINT
    if u.kind == POINT_KIND:
        return 1, UNIT
    if u.kind == ALPHA_KIND:
        return 1, beta(u.index)
    return -1, alpha(u.index)


def monomial_sign(xs: Sequence[Letter], ys: Sequence[Letter]) -> int:
    """Koszul sign of (x_1 (x) ... (x) x_L)(y_1 (x) ... (x) y_L) -> prod (x_i y_i)."""
    parity = 0
    odd_x_right = 0
    for i in range(len(xs) - 1, -1, -1):
        if ys[i].odd:
            parity ^= odd_x_right & 1
        if xs[i].odd:
            odd_x_right += 1
    return -1 if parity else 1


def reorder_sign(monomial: Sequence[Letter], perm: Sequence[int]) -> int:
    """Koszul sign of listing the factors of ``monomial`` in the order ``perm``."""
    odd_positions = [p for p in perm if monomial[p].odd]
    inversions = 0
    for a in range(len(odd_positions)):
        for b in range(a + 1, len(odd_positions)):
            if odd_positions[a] > odd_positions[b]:
                inversions += 1
    return -1 if inversions & 1 else 1


Monomial = tuple[Letter, ...]


class CurveClass:
    """Element of H*(C^L) for a finite ordered set of labels L.

    ``terms`` maps tensor monomials (one letter per label, in label order)
    to non-zero rationals.  Instances are treated as immutable.
    """

    __slots__ = ("labels", "genus", "terms")

    def __init__(self, labels: Iterable[str], genus: int, terms: Mapping[Monomial, object] | None = None):
        self.labels = tuple(labels)
        if len(set(self.labels)) != len(self.labels):
            raise CurveError(f"repeated label in {self.labels}")
        self.genus = genus
        clean: dict[Monomial, Fraction] = {}
        for mono, c in (terms or {}).items():
            mono = tuple(mono)
            if len(mono) != len(self.labels):
                raise CurveError(f"monomial {mono} does not match labels {self.labels}")
            for letter in mono:
                check_letter(letter, genus)
            c = Fraction(c)
            if c:
                clean[mono] = clean.get(mono, Fraction(0)) + c
        self.terms = {m: c for m, c in clean.items() if c}

    # constructors

    @classmethod
    def monomial(cls, labels: Sequence[str], mono: Sequence[Letter], genus: int, coeff=1) -> "CurveClass":
        return cls(labels, genus, {tuple(mono): coeff})

    @classmethod
    def scalar(cls, value, genus: int) -> "CurveClass":
        return cls((), genus, {(): value})

    @classmethod
    def one(cls, labels: Sequence[str], genus: int) -> "CurveClass":
        return cls(labels, genus, {tuple(UNIT for _ in labels): 1})

    @classmethod
    def point(cls, label: str, genus: int) -> "CurveClass":
        return cls((label,), genus, {(POINT,): 1})

    @classmethod
    def canonical(cls, label: str, genus: int) -> "CurveClass":
        """K_C = (2g - 2) w."""
        return cls((label,), genus, {(POINT,): 2 * genus - 2})

    # arithmetic

    def _check_compatible(self, other: "CurveClass") -> None:
        if self.labels != other.labels:
            raise CurveError(f"label mismatch: {self.labels} vs {other.labels}")
        if self.genus != other.genus:
            raise CurveError(f"genus mismatch: {self.genus} vs {other.genus}")

    def __add__(self, other: "CurveClass") -> "CurveClass":
        self._check_compatible(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, 0) + c
        return CurveClass(self.labels, self.genus, terms)

    def __neg__(self) -> "CurveClass":
        return CurveClass(self.labels, self.genus, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "CurveClass") -> "CurveClass":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, CurveClass):
            return mul(self, other)
        return CurveClass(self.labels, self.genus, {m: c * other for m, c in self.terms.items()})

    def __rmul__(self, other):
        return CurveClass(self.labels, self.genus, {m: other * c for m, c in self.terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, CurveClass):
            return NotImplemented
        return self.labels == other.labels and self.genus == other.genus and self.terms == other.terms

    def __hash__(self):
        return hash((self.labels, self.genus, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def scalar_value(self) -> Fraction:
        if self.labels:
            raise CurveError("class still carries labels")
        return self.terms.get((), Fraction(0))

    def homogeneous_degree(self) -> int | None:
        degrees = {sum(x.degree for x in m) for m in self.terms}
        if len(degrees) == 1:
            return degrees.pop()
        return None if degrees else 0

    def __repr__(self) -> str:
        if not self.terms:
            return f"CurveClass({self.labels}, 0)"
        parts = [f"{c}*" + "(x)".join(map(str, m)) for m, c in sorted(self.terms.items())]
        return f"CurveClass({self.labels}, " + " + ".join(parts) + ")"


def mul(x: CurveClass, y: CurveClass) -> CurveClass:
    """Graded super-commutative cup product on H*(C^L)."""
    x._check_compatible(y)
    out: dict[Monomial, Fraction] = {}
    for mx, cx in x.terms.items():
        for my, cy in y.terms.items():
            sign = monomial_sign(mx, my)
            prod = []
            for a, b in zip(mx, my):
                p = letter_product(a, b)
                if p is None:
                    break
                sign *= p[0]
                prod.append(p[1])
            else:
                key = tuple(prod)
                out[key] = out.get(key, 0) + sign * cx * cy
    return CurveClass(x.labels, x.genus, out)


def reorder(x: CurveClass, labels: Sequence[str]) -> CurveClass:
    """Same class stored with the factors listed in the order ``labels``."""
    labels = tuple(labels)
    if sorted(labels) != sorted(x.labels):
        raise CurveError(f"{labels} is not a reordering of {x.labels}")
    perm = [x.labels.index(lab) for lab in labels]
    out = {}
    for m, c in x.terms.items():
        out[tuple(m[p] for p in perm)] = reorder_sign(m, perm) * c
    return CurveClass(labels, x.genus, out)


def permute_labels(x: CurveClass, sigma: Mapping[str, str]) -> CurveClass:
    """Pull back along the permutation of factors: the factor named ``a`` becomes ``sigma[a]``."""
    renamed = tuple(sigma.get(lab, lab) for lab in x.labels)
    if sorted(renamed) != sorted(x.labels):
        raise CurveError(f"{dict(sigma)} does not permute {x.labels}")
    return reorder(CurveClass(renamed, x.genus, x.terms), x.labels)


def integrate(x: CurveClass, label: str) -> CurveClass:
    """Integrate out the factor ``label`` (fiber integration on the right)."""
    if label not in x.labels:
        raise CurveError(f"unknown label {label!r}")
    pos = x.labels.index(label)
    out = {}
    for m, c in x.terms.items():
        if m[pos].kind != POINT_KIND:
            continue
        # w is even, so moving it to the far right costs no sign
        key = m[:pos] + m[pos + 1 :]
        out[key] = out.get(key, 0) + c
    return CurveClass(x.labels[:pos] + x.labels[pos + 1 :], x.genus, out)


def integrate_all(x: CurveClass) -> Fraction:
    for label in list(x.labels):
        x = integrate(x, label)
    return x.scalar_value()


def tensor(x: CurveClass, y: CurveClass) -> CurveClass:
    """External product p_1^* x . p_2^* y on disjoint label sets."""
    if set(x.labels) & set(y.labels):
        raise CurveError("tensor factors must have disjoint labels")
    if x.genus != y.genus:
        raise CurveError("genus mismatch")
    out = {}
    for mx, cx in x.terms.items():
        for my, cy in y.terms.items():
            out[mx + my] = out.get(mx + my, 0) + cx * cy
    return CurveClass(x.labels + y.labels, x.genus, out)


def extend(x: CurveClass, label: str) -> CurveClass:
    return tensor(x, CurveClass.one((label,), x.genus))


def place(x: CurveClass, labels: Sequence[str]) -> CurveClass:
    """Pull ``x`` back to the labels ``labels`` (a superset), then store in that order."""
    missing = [lab for lab in labels if lab not in x.labels]
    return reorder(tensor(x, CurveClass.one(missing, x.genus)), labels)


@lru_cache(maxsize=None)
def diagonal_class(l1: str, l2: str, g: int) -> CurveClass:
    """Class of the diagonal in C x C on labels (l1, l2).

    delta = 1 (x) w + w (x) 1 + sum_i (be_i (x) al_i - al_i (x) be_i); this is the
    unique class with integral(delta . (a (x) b)) = integral(a b).
    """
    if l1 == l2:
        raise CurveError("diagonal needs two distinct labels")
    terms: dict[Monomial, int] = {(UNIT, POINT): 1, (POINT, UNIT): 1}
    for i in range(1, g + 1):
        terms[(alpha(i), beta(i))] = -1
        terms[(beta(i), alpha(i))] = 1
    return CurveClass((l1, l2), g, terms)


def dual_basis_pairs(g: int) -> list[tuple[Letter, Letter, int]]:
    """Triples (u, v, s) with integral(u * s v) = 1, so u^dual = s v.

    The diagonal is recovered as sum (-1)^deg(u) s u (x) v.
    """
    return [(u,) + dual_letter(u)[::-1] for u in letters(g)]


def diagonal_from_pairs(l1: str, l2: str, g: int) -> CurveClass:
    terms = {}
    for u, v, s in dual_basis_pairs(g):
        terms[(u, v)] = (-1) ** u.degree * s
    return CurveClass((l1, l2), g, terms)


def restrict_diagonal(x: CurveClass, l1: str, l2: str, new: str | None = None) -> CurveClass:
    """Pull back along the diagonal of the factors l1, l2; the merged factor is named ``new``."""
    new = l1 if new is None else new
    rest = [lab for lab in x.labels if lab not in (l1, l2)]
    y = reorder(x, [l1, l2] + rest)
    out = {}
    for m, c in y.terms.items():
        p = letter_product(m[0], m[1])
        if p is None:
            continue
        key = (p[1],) + m[2:]
        out[key] = out.get(key, 0) + p[0] * c
    return CurveClass([new] + rest, x.genus, out)


def push_diagonal(x: CurveClass, label: str, new: str) -> CurveClass:
    """Delta_*: a class with factor ``label`` goes to delta . (x (x) 1_new)."""
    y = extend(x, new)
    d = place(diagonal_class(label, new, x.genus), y.labels)
    return mul(y, d)


@lru_cache(maxsize=None)
def diagonal_expansion(gamma: Letter, g: int) -> tuple[tuple[int, Letter, Letter], ...]:
    """Delta_*(gamma) = sum coeff * x (x) y, as (coeff, x, y) triples."""
    x = push_diagonal(CurveClass.monomial(("p",), (gamma,), g), "p", "q")
    return tuple(sorted((int(c), m[0], m[1]) for m, c in x.terms.items()))


class ModuliParams(NamedTuple):
    """Rank r and degree n of V on a genus-g curve."""

    r: int
    g: int
    n: int = 0

    def validate(self) -> "ModuliParams":
        if self.r < 1:
            raise CurveError(f"rank must be at least 1, got {self.r}")
        if self.g < 0:
            raise CurveError(f"genus must be non-negative, got {self.g}")
        return self

    @property
    def canonical_degree(self) -> int:
        return 2 * self.g - 2
