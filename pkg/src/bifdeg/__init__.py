"""Degree invariants and bifurcation verdicts for parametrised elliptic families."""

from .degree import (
    ORIENTATION,
    DegreeResult,
    IndexParityError,
    IntegralityError,
    additivity_check,
    clutching_degree,
    fedosov_degree,
    index_degree,
    local_degree,
)
from .familyfile import FamilyFileError, read_family_file
from .findim import (
    FiniteFamily,
    LSReduction,
    bifurcation_search,
    det_winding,
    ls_reduce,
    parity,
    reduced_map,
)
from .numtheory import Verdict, VerdictKind, c_k, j_group, m_function, n_of_q, verdict_global, verdict_local
from .quadrature import QuadratureSpec, integrate_top_form
from .symbol import QuotientSymbol, SymbolFamily, quotient_symbol

__version__ = "0.1.0"

__all__ = [
    "ORIENTATION",
    "DegreeResult",
    "IndexParityError",
    "IntegralityError",
    "additivity_check",
    "clutching_degree",
    "fedosov_degree",
    "index_degree",
    "local_degree",
    "FamilyFileError",
    "read_family_file",
    "FiniteFamily",
    "LSReduction",
    "bifurcation_search",
    "det_winding",
    "ls_reduce",
    "parity",
    "reduced_map",
    "Verdict",
    "VerdictKind",
    "c_k",
    "j_group",
    "m_function",
    "n_of_q",
    "verdict_global",
    "verdict_local",
    "QuadratureSpec",
    "integrate_top_form",
    "QuotientSymbol",
    "SymbolFamily",
    "quotient_symbol",
]
