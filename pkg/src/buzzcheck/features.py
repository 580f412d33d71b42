"""Predictors and targets for the mispricing regression.

Implied probabilities are raw inverse decimal odds with no overround
normalisation, so the two sides of a bookmaker book sum to ``1 + K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import BadOdds, NonPositiveInput, RankDeficient

PM = "pm"
PM_NO_RD = "pm-no-rd"
MODELS = (PM, PM_NO_RD)

FE_SEASON = "season"
FE_TOURNAMENT = "tournament"


def implied_probability(odds: float) -> float:
    if odds is None or not odds >= 1.0:
        raise BadOdds(f"decimal odds must be >= 1.0, got {odds!r}")
    return 1.0 / odds


def overround(z_i: float, z_j: float) -> float:
    """Bookmaker margin ``K``; negative for best-of-market books."""
    return z_i + z_j - 1.0


def rank_distance(rank_i: int | None, rank_j: int | None) -> float:
    """Negated difference of inverse ranks. ``None`` is an unranked player (inverse rank 0)."""
    inv_i = 0.0 if rank_i is None else 1.0 / rank_i
    inv_j = 0.0 if rank_j is None else 1.0 / rank_j
    return -(inv_i - inv_j)


def wikibuzz(w_i: float, med_i: float, w_j: float, med_j: float) -> float:
    for name, v in (("w_i", w_i), ("med_i", med_i), ("w_j", w_j), ("med_j", med_j)):
        if v is None or not v > 0:
            raise NonPositiveInput(f"{name} must be > 0, got {v!r}")
    return math.log(w_i / med_i) - math.log(w_j / med_j)


def forecast_error(y: int, z: float) -> float:
    return y - z


@dataclass(frozen=True)
class DesignMatrix:
    """Regression inputs with the cluster keys kept row-aligned."""

    response: np.ndarray
    X: np.ndarray
    columns: tuple[str, ...]
    n_core: int  # intercept + slopes; fixed-effect dummies follow
    tournament: np.ndarray
    match: np.ndarray
    fe_levels: dict[str, tuple[str, ...]] = field(default_factory=dict)
    fe_reference: dict[str, str] = field(default_factory=dict)
    model: str = PM

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def fe_slices(self) -> dict[str, slice]:
        out, start = {}, self.n_core
        for kind, levels in self.fe_levels.items():
            out[kind] = slice(start, start + len(levels))
            start += len(levels)
        return out


def core_columns(model: str) -> tuple[str, ...]:
    if model == PM:
        return ("const", "z", "rank_dist", "wikibuzz")
    if model == PM_NO_RD:
        return ("const", "z", "wikibuzz")
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def _fe_key(row, kind: str) -> str:
    if kind == FE_SEASON:
        return str(row.season)
    if kind == FE_TOURNAMENT:
        return row.tournament_key
    raise ValueError(f"unknown fixed effect {kind!r}")


def build_design(rows: Sequence, model: str = PM, fe: Iterable[str] = (FE_SEASON,)) -> DesignMatrix:
    """Stack player-match rows into ``e ~ 1 + z [+ RankDist] + WikiBuzz + dummies``.

    Each fixed-effect kind contributes one dummy per level except the
    first (sorted) level, which is the reference.
    """
    cols = core_columns(model)
    fe = tuple(dict.fromkeys(fe))  # dedupe, keep order
    n = len(rows)
    core = np.empty((n, len(cols)))
    core[:, 0] = 1.0
    core[:, 1] = [r.z for r in rows]
    if model == PM:
        core[:, 2] = [r.rank_dist for r in rows]
    core[:, -1] = [r.wikibuzz for r in rows]
    response = np.array([r.e for r in rows], dtype=float)

    blocks, names = [core], list(cols)
    fe_levels, fe_reference = {}, {}
    for kind in fe:
        keys = [_fe_key(r, kind) for r in rows]
        levels = sorted(set(keys))
        fe_reference[kind] = levels[0] if levels else ""
        kept = tuple(levels[1:])
        fe_levels[kind] = kept
        index = {lvl: k for k, lvl in enumerate(kept)}
        block = np.zeros((n, len(kept)))
        for i, key in enumerate(keys):
            k = index.get(key)
            if k is not None:
                block[i, k] = 1.0
        blocks.append(block)
        names.extend(f"{kind}[{lvl}]" for lvl in kept)

    X = np.hstack(blocks)
    _check_rank(X, names)
    return DesignMatrix(
        response=response,
        X=X,
        columns=tuple(names),
        n_core=len(cols),
        tournament=np.array([r.tournament_key for r in rows], dtype=object),
        match=np.array([r.match_id for r in rows], dtype=object),
        fe_levels=fe_levels,
        fe_reference=fe_reference,
        model=model,
    )


def _check_rank(X: np.ndarray, names: Sequence[str]) -> None:
    if X.shape[0] <= X.shape[1]:
        return  # fit_ols reports NotEnoughRows
    _, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0:
        return
    tol = diag[0] * max(X.shape) * np.finfo(float).eps
    rank = int((diag > tol).sum())
    if rank < X.shape[1]:
        dropped = sorted(names[i] for i in piv[rank:])
        raise RankDeficient(f"design is rank {rank} < {X.shape[1]}; collinear: {', '.join(dropped)}")
