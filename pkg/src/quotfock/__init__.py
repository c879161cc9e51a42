"""Exact Fock-space model of the cohomology of Quot schemes on a curve."""

from .curve_algebra import (
    CurveClass,
    Letter,
    ModuliParams,
    diagonal_class,
    dual_basis_pairs,
    integrate,
    mul,
    permute_labels,
)
from .fock_space import (
    FockBasisVector,
    FockState,
    canonicalize,
    enumerate_basis,
    poincare_closed_form,
)
from .operator_engine import Engine, Evaluator, FuelExhausted, OperatorToken, make_token
from .relation_suite import CheckReport, RelationCase, check_relation

__all__ = [
    "CheckReport",
    "CurveClass",
    "Engine",
    "Evaluator",
    "FockBasisVector",
    "FockState",
    "FuelExhausted",
    "Letter",
    "ModuliParams",
    "OperatorToken",
    "RelationCase",
    "canonicalize",
    "check_relation",
    "diagonal_class",
    "dual_basis_pairs",
    "enumerate_basis",
    "integrate",
    "make_token",
    "mul",
    "permute_labels",
    "poincare_closed_form",
]
