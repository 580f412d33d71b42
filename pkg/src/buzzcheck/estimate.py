"""Least-squares fit of the forecast-error model with clustered inference."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .errors import NotEnoughRows, RankDeficient, SingleCluster
from .features import DesignMatrix

CLUSTER_DIMS = ("tournament", "match")


@dataclass(frozen=True)
class RegressionFit:
    """OLS estimates for one design.

    ``params`` covers every design column. The reported coefficients are
    the intercept and slopes, with the intercept re-expressed as the grand
    intercept (fixed effects centred to an observation-weighted mean of
    zero), so ``alpha_hat = mean(response - slopes . regressors)``.
    """

    columns: tuple[str, ...]
    params: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    n_rows: int
    names: tuple[str, ...]  # reported coefficient names
    coef: np.ndarray  # reported coefficients
    transform: np.ndarray  # maps params -> coef
    fe_estimates: dict[str, dict[str, float]] = field(default_factory=dict)
    covariance: np.ndarray | None = None  # over reported coefficients
    cluster_counts: tuple[int, ...] | None = None
    model: str = "pm"

    @property
    def alpha_hat(self) -> float:
        return float(self.coef[0])

    @property
    def beta_hat(self) -> dict[str, float]:
        return {n: float(c) for n, c in zip(self.names[1:], self.coef[1:])}

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    @property
    def se(self) -> np.ndarray:
        if self.covariance is None:
            raise ValueError("fit has no covariance; call cluster_covariance first")
        return np.sqrt(np.diag(self.covariance))

    @property
    def df_resid(self) -> int:
        if self.cluster_counts:
            return min(self.cluster_counts) - 1
        return self.n_rows - len(self.params)

    @property
    def t_values(self) -> np.ndarray:
        return self.coef / self.se

    @property
    def p_values(self) -> np.ndarray:
        return 2.0 * stats.t.sf(np.abs(self.t_values), self.df_resid)

    def se_of(self, name: str) -> float:
        return float(self.se[self.names.index(name)])

    def p_of(self, name: str) -> float:
        return float(self.p_values[self.names.index(name)])


def _qr_solve(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Q, R = scipy.linalg.qr(X, mode="economic")
    diag = np.abs(np.diag(R))
    if diag.size and diag.min() <= diag.max() * max(X.shape) * np.finfo(float).eps:
        raise RankDeficient("design matrix is not of full column rank")
    beta = scipy.linalg.solve_triangular(R, Q.T @ y)
    return beta, R


def _reporting_transform(design: DesignMatrix) -> np.ndarray:
    """Rows select the slopes; the intercept row adds the mean dummy effects."""
    k, p = design.n_core, design.X.shape[1]
    L = np.zeros((k, p))
    L[np.arange(k), np.arange(k)] = 1.0
    if p > k:
        L[0, k:] = design.X[:, k:].mean(axis=0)
    return L


def fit_ols(design: DesignMatrix, covariance: bool = True) -> RegressionFit:
    """Solve by QR and, unless ``covariance=False``, attach the two-way clustered covariance."""
    X, y = design.X, design.response
    n, p = X.shape
    if n <= p:
        raise NotEnoughRows(f"{n} rows for {p} parameters")
    params, _ = _qr_solve(X, y)
    fitted = X @ params
    residuals = y - fitted
    L = _reporting_transform(design)

    fe_estimates = {}
    for kind, sl in design.fe_slices().items():
        effects = np.concatenate([[0.0], params[sl]])  # reference level first
        share = np.concatenate([[1.0 - X[:, sl].mean(axis=0).sum()], X[:, sl].mean(axis=0)])
        centred = effects - share @ effects
        levels = (design.fe_reference[kind],) + design.fe_levels[kind]
        fe_estimates[kind] = {lvl: float(v) for lvl, v in zip(levels, centred)}

    fit = RegressionFit(
        columns=design.columns,
        params=params,
        fitted=fitted,
        residuals=residuals,
        n_rows=n,
        names=design.columns[: design.n_core],
        coef=L @ params,
        transform=L,
        fe_estimates=fe_estimates,
        model=design.model,
    )
    if covariance:
        fit = replace(fit, **cluster_covariance(fit, design))
    return fit


def _codes(keys: np.ndarray) -> tuple[np.ndarray, int]:
    _, inverse = np.unique(keys.astype(str), return_inverse=True)
    return inverse, int(inverse.max()) + 1 if inverse.size else 0


def _meat(scores: np.ndarray, codes: np.ndarray, n_groups: int) -> np.ndarray:
    summed = np.zeros((n_groups, scores.shape[1]))
    np.add.at(summed, codes, scores)
    return summed.T @ summed


def clip_psd(cov: np.ndarray) -> np.ndarray:
    """Symmetrise and floor negative eigenvalues at zero."""
    cov = (cov + cov.T) / 2.0
    w, v = np.linalg.eigh(cov)
    if w.min() >= 0:
        return cov
    return (v * np.clip(w, 0.0, None)) @ v.T


def sandwich(X: np.ndarray, residuals: np.ndarray, groups: Sequence[np.ndarray]) -> tuple[np.ndarray, list[int]]:
    """Multi-way cluster-robust covariance of all parameters by inclusion-exclusion.

    Each term uses the CR1 factor ``G/(G-1) * (N-1)/(N-K)``. With two
    groupings the result is ``V_a + V_b - V_ab``.
    """
    n, k = X.shape
    _, R = scipy.linalg.qr(X, mode="economic")
    Rinv = scipy.linalg.solve_triangular(R, np.eye(k))
    bread = Rinv @ Rinv.T
    scores = X * residuals[:, None]

    coded = [_codes(np.asarray(g)) for g in groups]
    counts = [g for _, g in coded]
    for dim, g in zip(CLUSTER_DIMS, counts):
        if g < 2:
            raise SingleCluster(f"only {g} cluster(s) on {dim}")

    def term(codes: np.ndarray, g: int) -> np.ndarray:
        scale = g / (g - 1) * (n - 1) / (n - k)
        return scale * bread @ _meat(scores, codes, g) @ bread

    V = np.zeros((k, k))
    m = len(coded)
    for mask in range(1, 2**m):
        members = [coded[i][0] for i in range(m) if mask >> i & 1]
        if len(members) == 1:
            codes, g = members[0], int(members[0].max()) + 1
        else:
            joint = np.stack(members, axis=1)
            _, codes = np.unique(joint, axis=0, return_inverse=True)
            codes = codes.ravel()
            g = int(codes.max()) + 1
        sign = 1.0 if len(members) % 2 else -1.0
        V += sign * term(codes, g)
    return V, counts


def cluster_covariance(fit: RegressionFit, design: DesignMatrix) -> dict:
    """Two-way (tournament, match) clustered covariance of the reported coefficients."""
    V, counts = sandwich(design.X, fit.residuals, [design.tournament, design.match])
    V = clip_psd(V)
    return {
        "covariance": clip_psd(fit.transform @ V @ fit.transform.T),
        "cluster_counts": tuple(counts),
    }


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    coef: float
    se: float
    p_value: float


def mispricing_table(fit: RegressionFit) -> list[CoefficientRow]:
    """Slopes first, then the constant, as laid out in the published tables."""
    order = list(fit.names[1:]) + [fit.names[0]]
    return [CoefficientRow(n, fit[n], fit.se_of(n), fit.p_of(n)) for n in order]
