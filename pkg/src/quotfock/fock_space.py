"""Canonical basis of the charge-graded module and the Betti series.

A basis vector a_{k_1}(c_1) ... a_{k_d}(c_d)|0> is stored as the tuple of
slots (k_i, c_i), sorted by k descending and then by letter.  Reordering
slots costs the Koszul sign of the odd letters that pass each other.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement, product
from math import comb, factorial
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

from .curve_algebra import (
    CurveClass,
    CurveError,
    Letter,
    ModuliParams,
    UNIT,
    letters,
    parse_letter,
    reorder_sign,
)

Slot = tuple[int, Letter]


class FockError(ValueError):
    pass


class FockBasisVector(NamedTuple):
    slots: tuple[Slot, ...]

    @property
    def d(self) -> int:
        return len(self.slots)

    @property
    def degree(self) -> int:
        return sum(2 * k + c.degree for k, c in self.slots)

    @property
    def odd(self) -> bool:
        return sum(c.degree for _, c in self.slots) % 2 == 1

    def __str__(self) -> str:
        if not self.slots:
            return "|0>"
        return " ".join(f"a[{k}]({c})" for k, c in self.slots) + " |0>"


VACUUM = FockBasisVector(())


def _slot_key(slot: Slot):
    return (-slot[0], slot[1])


def canonical_slots(raw: Sequence[Slot]) -> tuple[int, FockBasisVector] | None:
    """(sign, vector) for a raw slot sequence, or None if it vanishes."""
    raw = tuple(raw)
    perm = sorted(range(len(raw)), key=lambda i: _slot_key(raw[i]))
    slots = tuple(raw[i] for i in perm)
    for a, b in zip(slots, slots[1:]):
        if a == b and a[1].odd:
            return None
    sign = reorder_sign([c for _, c in raw], perm)
    return sign, FockBasisVector(slots)


def canonicalize(raw_slots: Sequence[Slot], sign=1, r: int | None = None) -> "FockState":
    for k, c in raw_slots:
        if k < 0 or (r is not None and k >= r):
            raise FockError(f"slot index {k} outside 0..{'r-1' if r is None else r - 1}")
    out = canonical_slots(raw_slots)
    if out is None:
        return FockState()
    s, vec = out
    return FockState({vec: s * Fraction(sign)})


def _blocks(size: int, g: int) -> list[tuple[Letter, ...]]:
    """Sorted letter multisets of the given size with no repeated odd letter."""
    out = []
    for combo in combinations_with_replacement(letters(g), size):
        if all(not (a == b and a.odd) for a, b in zip(combo, combo[1:])):
            out.append(combo)
    return out


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def enumerate_basis(r: int, g: int, d: int) -> tuple[FockBasisVector, ...]:
    """All canonical vectors of charge d, in a fixed deterministic order."""
    if d < 0:
        return ()
    out = []
    for sizes in _compositions(d, r):
        # sizes[j] is the block size of k = r - 1 - j
        choices = [_blocks(s, g) for s in sizes]
        for pick in product(*choices):
            slots = []
            for j, block in enumerate(pick):
                slots.extend((r - 1 - j, c) for c in block)
            out.append(FockBasisVector(tuple(slots)))
    out.sort(key=lambda v: (v.degree, [_slot_key(s) for s in v.slots]))
    return tuple(out)


@lru_cache(maxsize=None)
def basis_index(r: int, g: int, d: int) -> dict[FockBasisVector, int]:
    return {v: i for i, v in enumerate(enumerate_basis(r, g, d))}


def graded_dimensions(r: int, g: int, d: int) -> list[int]:
    dims = [0] * (2 * r * d + 1)
    for v in enumerate_basis(r, g, d):
        dims[v.degree] += 1
    return dims


def poincare_closed_form(r: int, g: int, d_max: int) -> list[list[int]]:
    """Coefficients [d][degree] of prod_{i<r} (1 + t z^{2i+1})^{2g} / ((1 - t z^{2i})(1 - t z^{2i+2}))."""
    if d_max < 0:
        raise FockError("d_max must be non-negative")
    width = 2 * r * d_max + 1
    series = [[0] * width for _ in range(d_max + 1)]
    series[0][0] = 1

    def multiply(factor: dict[tuple[int, int], int]) -> None:
        nonlocal series
        out = [[0] * width for _ in range(d_max + 1)]
        for d, row in enumerate(series):
            for deg, c in enumerate(row):
                if not c:
                    continue
                for (dt, dz), f in factor.items():
                    if d + dt <= d_max and deg + dz < width:
                        out[d + dt][deg + dz] += c * f
        series = out

    for i in range(r):
        multiply({(j, (2 * i + 1) * j): comb(2 * g, j) for j in range(min(2 * g, d_max) + 1)})
        multiply({(j, 2 * i * j): 1 for j in range(d_max + 1)})
        multiply({(j, (2 * i + 2) * j): 1 for j in range(d_max + 1)})
    return [row[: 2 * r * d + 1] for d, row in enumerate(series)]


class FockState:
    """Sparse rational combination of basis vectors, tensored with open curve labels.

    Keys are (vector, monomial) where the monomial carries one letter per open
    label; the Fock factor is written first.
    """

    __slots__ = ("terms", "labels")

    def __init__(self, terms: Mapping | None = None, labels: Iterable[str] = ()):
        self.labels = tuple(labels)
        clean: dict[tuple[FockBasisVector, tuple[Letter, ...]], Fraction] = {}
        for key, c in (terms or {}).items():
            if isinstance(key, FockBasisVector):
                key = (key, ())
            vec, mono = key
            if len(mono) != len(self.labels):
                raise FockError("open-label monomial does not match labels")
            c = Fraction(c)
            if c:
                k = (vec, tuple(mono))
                clean[k] = clean.get(k, Fraction(0)) + c
        self.terms = {k: c for k, c in clean.items() if c}

    @classmethod
    def vacuum(cls) -> "FockState":
        return cls({VACUUM: 1})

    @classmethod
    def basis(cls, vec: FockBasisVector, coeff=1) -> "FockState":
        return cls({vec: coeff})

    @classmethod
    def fundamental(cls, d: int) -> "FockState":
        """1_{Quot_d} = a_0(1)^d |0> / d!."""
        return cls({FockBasisVector(((0, UNIT),) * d): Fraction(1, factorial(d))})

    def charges(self) -> set[int]:
        return {vec.d for vec, _ in self.terms}

    @property
    def homogeneous(self) -> bool:
        return len(self.charges()) <= 1

    def is_zero(self) -> bool:
        return not self.terms

    def _check(self, other: "FockState") -> None:
        if self.labels != other.labels:
            raise FockError(f"label mismatch: {self.labels} vs {other.labels}")

    def __add__(self, other: "FockState") -> "FockState":
        self._check(other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, 0) + c
        return FockState(terms, self.labels)

    def __neg__(self) -> "FockState":
        return FockState({k: -c for k, c in self.terms.items()}, self.labels)

    def __sub__(self, other: "FockState") -> "FockState":
        return self + (-other)

    def __mul__(self, scalar) -> "FockState":
        return FockState({k: c * scalar for k, c in self.terms.items()}, self.labels)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, FockState):
            return NotImplemented
        return self.labels == other.labels and self.terms == other.terms

    def __hash__(self):
        return hash((self.labels, frozenset(self.terms.items())))

    def coefficient(self, vec: FockBasisVector, mono: tuple[Letter, ...] = ()) -> Fraction:
        return self.terms.get((vec, tuple(mono)), Fraction(0))

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (kv[0][0].d, kv[0][0].degree, [_slot_key(s) for s in kv[0][0].slots], kv[0][1]))

    def __repr__(self) -> str:
        return f"FockState({format_state(self)})"

    def to_json(self) -> list[dict]:
        out = []
        for (vec, mono), c in self.sorted_terms():
            item = {"slots": [[k, str(x)] for k, x in vec.slots], "coeff": _fraction_text(c)}
            if self.labels:
                item["curve"] = [str(x) for x in mono]
            out.append(item)
        return out

    @classmethod
    def from_json(cls, data: list[dict], g: int | None = None, labels: Sequence[str] = ()) -> "FockState":
        terms = {}
        for item in data:
            try:
                slots = [(int(k), parse_letter(x, g)) for k, x in item["slots"]]
                coeff = Fraction(item["coeff"])
                mono = tuple(parse_letter(x, g) for x in item.get("curve", ()))
            except (KeyError, TypeError, ValueError, CurveError) as exc:
                raise FockError(f"malformed state entry {item!r}: {exc}") from exc
            if any(k < 0 for k, _ in slots):
                raise FockError(f"negative slot index in {item!r}")
            got = canonical_slots(slots)
            if got is None:
                continue
            s, vec = got
            key = (vec, mono)
            terms[key] = terms.get(key, 0) + s * coeff
        return cls(terms, labels)


def _fraction_text(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_state(state: FockState) -> str:
    if state.is_zero():
        return "0"
    parts = []
    for (vec, mono), c in state.sorted_terms():
        text = f"{_fraction_text(c)} · {vec}"
        if mono:
            text += " ⊗ " + "⊗".join(map(str, mono))
        parts.append(text)
    return " + ".join(parts)


def state_from_class(vec_terms: Mapping[FockBasisVector, object], curve: CurveClass) -> FockState:
    """Tensor a plain state with a curve class on open labels."""
    terms = {}
    for vec, c in vec_terms.items():
        for mono, cc in curve.terms.items():
            terms[(vec, mono)] = terms.get((vec, mono), 0) + Fraction(c) * cc
    return FockState(terms, curve.labels)


def params_basis(params: ModuliParams, d: int) -> tuple[FockBasisVector, ...]:
    return enumerate_basis(params.r, params.g, d)
