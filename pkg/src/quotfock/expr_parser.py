"""Parser for operator words such as ``f[1](1) a[0](2*al1 - w) |0>``.

    word  := token+ ("|0>" | "@" filename)
    token := kind "[" int "]" "(" class ")"       kind in a f m h e
    class := term (("+" | "-") term)*
    term  := [rational ["*"]] letter | rational    letter in 1 w al<i> be<i>

A bare rational means that multiple of the unit class.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .curve_algebra import UNIT, CurveError, Letter, parse_letter
from .operator_engine import KINDS, OperatorToken, make_token


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


@dataclass(frozen=True)
class ExprAst:
    tokens: tuple[OperatorToken, ...]
    target: str | None  # None for the vacuum, else a state file name

    @property
    def on_vacuum(self) -> bool:
        return self.target is None


_NUMBER = re.compile(r"\d+(?:/\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\d+")


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, s: str) -> bool:
        self.skip()
        return self.text.startswith(s, self.pos)

    def expect(self, s: str) -> None:
        self.skip()
        if not self.text.startswith(s, self.pos):
            found = self.text[self.pos : self.pos + 1] or "end of input"
            raise ParseError(f"expected {s!r}, found {found!r}", self.pos)
        self.pos += len(s)

    def match(self, pattern: re.Pattern) -> tuple[str, int] | None:
        self.skip()
        m = pattern.match(self.text, self.pos)
        if not m:
            return None
        self.pos = m.end()
        return m.group(0), m.start()

    def done(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)


def parse_class(text: str, g: int | None = None) -> dict[Letter, Fraction]:
    sc = _Scanner(text)
    out = _parse_class(sc, g, closing=None)
    if not sc.done():
        raise ParseError(f"unexpected {text[sc.pos]!r}", sc.pos)
    return out


def _parse_class(sc: _Scanner, g: int | None, closing: str | None) -> dict[Letter, Fraction]:
    terms: dict[Letter, Fraction] = {}
    sign = 1
    first = True
    while True:
        if sc.peek("-"):
            sc.expect("-")
            sign = -sign
        elif sc.peek("+") and not first:
            sc.expect("+")
        coeff, letter = _parse_term(sc, g)
        terms[letter] = terms.get(letter, Fraction(0)) + sign * coeff
        first = False
        sign = 1
        if sc.peek("+"):
            sc.expect("+")
            continue
        if sc.peek("-"):
            continue
        break
    return {x: c for x, c in terms.items() if c}


def _parse_term(sc: _Scanner, g: int | None) -> tuple[Fraction, Letter]:
    sc.skip()
    start = sc.pos
    num = sc.match(_NUMBER)
    coeff = Fraction(1)
    if num is not None:
        coeff = Fraction(num[0])
        if sc.peek("*"):
            sc.expect("*")
        elif not _letter_ahead(sc):
            return coeff, UNIT
    name = sc.match(_NAME)
    if name is None:
        raise ParseError("expected a class letter", sc.pos if num else start)
    try:
        letter = parse_letter(name[0], g)
    except CurveError as exc:
        raise ParseError(str(exc), name[1]) from None
    return coeff, letter


def _letter_ahead(sc: _Scanner) -> bool:
    sc.skip()
    rest = sc.text[sc.pos :]
    return bool(re.match(r"(w|al\d|be\d|[A-Za-z])", rest))


def parse_expr(text: str, r: int | None = None, g: int | None = None) -> ExprAst:
    """Parse a word; tokens come back in written order, the rightmost acts first."""
    sc = _Scanner(text)
    tokens = []
    while True:
        sc.skip()
        if sc.peek("|0>"):
            sc.expect("|0>")
            target = None
            break
        if sc.peek("@"):
            sc.expect("@")
            sc.skip()
            name = sc.text[sc.pos :].strip()
            if not name:
                raise ParseError("expected a file name after '@'", sc.pos)
            sc.pos = len(sc.text)
            target = name
            break
        if sc.done():
            raise ParseError("expected '|0>' or '@file' at the end of the word", sc.pos)
        start = sc.pos
        kind = sc.text[sc.pos]
        if kind not in KINDS:
            raise ParseError(f"unknown operator {kind!r}", start)
        sc.pos += 1
        sc.expect("[")
        idx = sc.match(re.compile(r"-?\d+"))
        if idx is None:
            raise ParseError("expected an integer index", sc.pos)
        index = int(idx[0])
        if index < 0:
            raise ParseError(f"negative index {index}", idx[1])
        if kind == "a" and r is not None and index >= r:
            raise ParseError(f"a-index {index} out of range 0..{r - 1}", idx[1])
        if kind == "m" and r is not None and index > r:
            raise ParseError(f"m-index {index} out of range 0..{r}", idx[1])
        sc.expect("]")
        sc.expect("(")
        cap = _parse_class(sc, g, closing=")")
        sc.expect(")")
        tokens.append(make_token(kind, index, cap))
    if not sc.done():
        raise ParseError("trailing input after the target state", sc.pos)
    if not tokens and target is None:
        return ExprAst((), None)
    return ExprAst(tuple(tokens), target)


def format_token(token: OperatorToken) -> str:
    if token.is_open:
        return f"{token.kind}[{token.index}]({token.cap})"
    parts = []
    for x, c in token.cap_terms():
        text = str(x) if c == 1 else f"{c}*{x}"
        parts.append(text)
    body = " + ".join(parts).replace("+ -", "- ") or "0"
    return f"{token.kind}[{token.index}]({body})"
