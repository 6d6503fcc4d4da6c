"""scikit-learn style wrappers around the degree pipelines.

The "data" passed to ``fit`` is a family (or a path to a family file), not a
feature matrix; parameters follow the estimator conventions so the objects
clone, repr and grid-search like any other estimator.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .degree import fedosov_degree, index_degree, local_degree
from .familyfile import read_family_file
from .findim import FiniteFamily, bifurcation_search, ls_reduce
from .numtheory import UnsupportedDimensionError, verdict_global, verdict_local
from .quadrature import QuadratureSpec
from .symbol import QuotientSymbol, SymbolFamily, quotient_symbol

__all__ = ["SymbolDegree", "LocalDegree"]


def _spec(est) -> QuadratureSpec:
    return QuadratureSpec(scheme=est.scheme, order=est.order, samples=est.samples, seed=est.seed)


class SymbolDegree(BaseEstimator):
    """d(σ) of a symbol family, with the index degree and global verdict.

    After ``fit``: ``degree_``, ``result_``, ``index_degree_`` (None when q is
    not 0 or 4 mod 8 or the parity forbids it) and ``verdict_``.
    """

    def __init__(self, scheme="gauss", order=16, samples=200_000, seed=0, refine_max=3, check=True):
        self.scheme = scheme
        self.order = order
        self.samples = samples
        self.seed = seed
        self.refine_max = refine_max
        self.check = check

    def fit(self, X, y=None):
        if isinstance(X, (str, Path)):
            X = read_family_file(X).symbol_family()
        if isinstance(X, SymbolFamily):
            X = quotient_symbol(X, check=self.check, seed=self.seed)
        if not isinstance(X, QuotientSymbol):
            raise TypeError("expected a SymbolFamily, QuotientSymbol or family file path")
        self.result_ = fedosov_degree(X, _spec(self), refine_max=self.refine_max)
        self.degree_ = self.result_.rounded
        self.q_ = X.q
        try:
            self.index_degree_ = index_degree(self.degree_, X.q)
        except (UnsupportedDimensionError, ValueError):
            self.index_degree_ = None
        try:
            self.verdict_ = verdict_global(self.degree_, X.q)
        except UnsupportedDimensionError:
            self.verdict_ = None
        return self

    def score(self, X=None, y=None) -> float:
        """Negative integrality residual of the fitted degree (0 is best)."""
        check_is_fitted(self, "result_")
        return -float(self.result_.residual)


class LocalDegree(BaseEstimator):
    """d(λ₀) of a finite family at an isolated singular parameter.

    With ``confirm=True`` a bifurcation search is run as well and stored in
    ``search_``.
    """

    def __init__(self, lambda0=None, radius=0.5, order=16, seed=0, refine_max=3, d_sigma=None, confirm=False):
        self.lambda0 = lambda0
        self.radius = radius
        self.order = order
        self.seed = seed
        self.refine_max = refine_max
        self.d_sigma = d_sigma
        self.confirm = confirm

    def fit(self, X, y=None):
        lam0 = self.lambda0
        if isinstance(X, (str, Path)):
            ff = read_family_file(X)
            X = ff.finite_family()
            lam0 = lam0 if lam0 is not None else ff.lambda0()
        if not isinstance(X, FiniteFamily):
            raise TypeError("expected a FiniteFamily or family file path")
        lam0 = np.zeros(X.q) if lam0 is None else np.asarray(lam0, dtype=float)
        if X.q % 4:
            raise UnsupportedDimensionError(f"the local degree needs q = 0 mod 4 (q={X.q})")
        self.reduction_ = ls_reduce(X, lam0, self.radius, seed=self.seed)
        spec = QuadratureSpec(order=self.order, seed=self.seed)
        self.result_ = local_degree(self.reduction_.R_field(), X.q // 4, spec, refine_max=self.refine_max)
        self.degree_ = self.result_.rounded
        self.verdict_ = verdict_local(self.degree_, self.d_sigma, X.q)
        self.search_ = bifurcation_search(X, lam0, seed=self.seed) if self.confirm else None
        return self
