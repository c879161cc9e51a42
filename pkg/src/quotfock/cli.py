"""Command line front end: ``quotfock {betti,act,check,matrix} ...``.

Exit status: 0 on success, 1 when a relation check fails or rewriting runs
out of fuel, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import exact_sparse as xs
from .curve_algebra import CurveError, ModuliParams
from .expr_parser import ParseError, format_token, parse_expr
from .fock_space import FockError, FockState, format_state, graded_dimensions, poincare_closed_form
from .operator_engine import Engine, Evaluator, FuelExhausted, OperatorError, charge_shift
from .relation_suite import RELATIONS, RelationCase, run_cases

DEFAULT_FORMAT = {"betti": "json", "act": "text", "check": "text", "matrix": "json"}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Config:
    rank: int
    genus: int
    deg_v: int
    d_max: int
    relations: tuple[str, ...]
    k_max: int | None
    fuel: int
    fmt: str
    threads: int
    out: str | None

    def validate(self) -> "Config":
        if self.rank < 1:
            raise UsageError("--rank must be at least 1")
        if self.genus < 0:
            raise UsageError("--genus must be non-negative")
        if self.d_max < 0:
            raise UsageError("--dmax must be non-negative")
        if self.fuel <= 0:
            raise UsageError("--fuel must be positive")
        if self.threads < 1:
            raise UsageError("--threads must be at least 1")
        for rel in self.relations:
            if rel not in RELATIONS:
                raise UsageError(f"unknown relation {rel!r}; choose from {', '.join(RELATIONS)}")
        return self

    @property
    def params(self) -> ModuliParams:
        return ModuliParams(self.rank, self.genus, self.deg_v)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quotfock", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("betti", "compare enumerated basis dimensions with the closed-form series"),
        ("act", "apply an operator word to a state"),
        ("check", "run relation checks"),
        ("matrix", "dump the matrix of one operator token"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--rank", type=int, default=1)
        p.add_argument("--genus", type=int, default=0)
        p.add_argument("--deg-v", type=int, default=0, dest="deg_v")
        p.add_argument("--dmax", type=int, default=2)
        p.add_argument("--expr", default=None)
        p.add_argument("--relations", default=",".join(r for r in RELATIONS))
        p.add_argument("--kmax", type=int, default=None, help="largest k and l index in relation checks")
        p.add_argument("--fuel", type=int, default=10**6)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("json", "csv", "text"), default=None)
        if name == "matrix":
            p.add_argument("--charge", type=int, default=0, help="domain charge d")
    return parser


def config_from_args(args: argparse.Namespace) -> Config:
    return Config(
        rank=args.rank,
        genus=args.genus,
        deg_v=args.deg_v,
        d_max=args.dmax,
        relations=tuple(r.strip() for r in args.relations.split(",") if r.strip()),
        k_max=args.kmax,
        fuel=args.fuel,
        fmt=args.format or DEFAULT_FORMAT[args.command],
        threads=args.threads,
        out=args.out,
    ).validate()


def _document(cfg: Config, command: str, results) -> str:
    doc = {
        "params": {"rank": cfg.rank, "genus": cfg.genus, "deg_v": cfg.deg_v},
        "command": command,
        "results": results,
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def betti_results(r: int, g: int, d_max: int) -> dict:
    closed = poincare_closed_form(r, g, d_max)
    tables = []
    for d in range(d_max + 1):
        dims = graded_dimensions(r, g, d)
        tables.append({"d": d, "enumerated": dims, "closed_form": closed[d], "match": dims == closed[d]})
    return {"tables": tables, "match": all(t["match"] for t in tables)}


def _betti_csv(results: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d", "degree", "dim_enumerated", "dim_closed_form"])
    for t in results["tables"]:
        for deg, (a, b) in enumerate(zip(t["enumerated"], t["closed_form"])):
            w.writerow([t["d"], deg, a, b])
    return buf.getvalue()


def load_state(path: str, g: int) -> FockState:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read state file {path!r}: {exc}") from None
    if isinstance(data, dict):
        data = data.get("results", data)
        data = data.get("state", data) if isinstance(data, dict) else data
    if not isinstance(data, list):
        raise UsageError(f"state file {path!r} holds no state list")
    try:
        return FockState.from_json(data, g)
    except FockError as exc:
        raise UsageError(str(exc)) from None


def run_act(cfg: Config, expr: str) -> tuple[int, str]:
    ast = parse_expr(expr, cfg.rank, cfg.genus)
    state = FockState.vacuum() if ast.on_vacuum else load_state(ast.target, cfg.genus)
    for (vec, _), _c in state.terms.items():
        if any(k >= cfg.rank for k, _x in vec.slots):
            raise UsageError("state uses a slot index >= rank")
    engine = Engine(cfg.params)
    result = Evaluator(engine, fuel=cfg.fuel).act_word(ast.tokens, state)
    if cfg.fmt == "json":
        results = {
            "expr": " ".join(format_token(t) for t in ast.tokens) + (" |0>" if ast.on_vacuum else f" @{ast.target}"),
            "state": result.to_json(),
            "text": format_state(result),
        }
        return 0, _document(cfg, "act", results)
    return 0, format_state(result) + "\n"


def run_check(cfg: Config) -> tuple[int, str]:
    cases = [RelationCase(rel, cfg.params, cfg.d_max, cfg.k_max, cfg.k_max) for rel in cfg.relations]
    reports = run_cases(cases, threads=cfg.threads)
    ok = all(r.passed for r in reports)
    if cfg.fmt == "json":
        text = _document(cfg, "check", {"passed": ok, "reports": [r.to_json() for r in reports]})
    elif cfg.fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["relation", "passed", "tuples_checked"])
        for r in reports:
            w.writerow([r.relation, r.passed, r.tuples])
        text = buf.getvalue()
    else:
        text = "\n".join(r.summary() for r in reports) + "\n"
    return (0 if ok else 1), text


def run_matrix(cfg: Config, expr: str, charge: int) -> tuple[int, str]:
    if charge < 0:
        raise UsageError("--charge must be non-negative")
    text = expr.strip()
    if not (text.endswith("|0>") or "@" in text):
        text += " |0>"
    ast = parse_expr(text, cfg.rank, cfg.genus)
    if len(ast.tokens) != 1:
        raise UsageError("matrix needs exactly one operator token")
    token = ast.tokens[0]
    engine = Engine(cfg.params)
    scaled = engine.operator_matrix(token, charge)
    target = charge + charge_shift(token.kind)
    entries = [[i, j, _frac(Fraction(v, scaled.denominator))] for i, j, v in xs.entries(scaled.matrix)]
    results = {
        "token": format_token(token),
        "charge": charge,
        "shape": [engine.dim(target), engine.dim(charge)],
        "rows": [str(v) for v in engine.basis(target)],
        "columns": [str(v) for v in engine.basis(charge)],
        "entries": entries,
    }
    if cfg.fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "column", "value"])
        w.writerows(entries)
        return 0, buf.getvalue()
    return 0, _document(cfg, "matrix", results)


def _frac(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def run(argv: Sequence[str] | None = None) -> tuple[int, str, str | None]:
    """Parse arguments and execute; returns (exit status, output text, output path)."""
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = config_from_args(args)
    if args.command == "betti":
        results = betti_results(cfg.rank, cfg.genus, cfg.d_max)
        text = _betti_csv(results) if cfg.fmt == "csv" else _document(cfg, "betti", results)
        return (0 if results["match"] else 1), text, cfg.out
    if not args.expr and args.command in ("act", "matrix"):
        raise UsageError(f"{args.command} needs --expr")
    if args.command == "act":
        status, text = run_act(cfg, args.expr)
    elif args.command == "check":
        status, text = run_check(cfg)
    else:
        status, text = run_matrix(cfg, args.expr, args.charge)
    return status, text, cfg.out


def main(argv: Sequence[str] | None = None) -> int:
    try:
        status, text, out = run(argv)
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code or 0)
    except (UsageError, ParseError, CurveError, OperatorError, FockError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FuelExhausted, xs.ExactnessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
