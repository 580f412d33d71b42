"""Monte-Carlo significance of betting returns against randomly placed bets.

Random streams: numpy ``PCG64`` generators seeded from
``SeedSequence(seed).spawn(n_chunks)``, one child per block of
``CHUNK_TRIALS`` consecutive trials. Within a block each trial draws
``U`` uniforms and bets on the rows holding the ``n_bets`` smallest keys,
in key order. The block layout is fixed, so the result depends only on the
seed and never on how many workers run the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UniverseTooSmall

CHUNK_TRIALS = 1000
UNIT = "unit"
PERMUTED = "permuted"
ROI = "roi"
ABSOLUTE_RETURN = "absolute_return"
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class SignificanceResult:
    p_bs: float
    trials: int
    hits: int
    n_bets: int
    universe_size: int
    seed: int
    real_value: float
    comparison_metric: str = ROI
    staking: str = UNIT

    @property
    def mc_standard_error(self) -> float:
        return float(np.sqrt(self.p_bs * (1.0 - self.p_bs) / self.trials))

    def as_dict(self) -> dict:
        return {
            "p_bs": self.p_bs,
            "trials": self.trials,
            "hits": self.hits,
            "n_bets": self.n_bets,
            "universe_size": self.universe_size,
            "seed": self.seed,
            "real_value": self.real_value,
            "comparison_metric": self.comparison_metric,
            "staking": self.staking,
            "mc_standard_error": self.mc_standard_error,
        }


def _chunk_hits(
    rng: np.random.Generator,
    m: int,
    gross: np.ndarray,
    stakes: np.ndarray,
    n_bets: int,
    metric: str,
    threshold: float,
) -> int:
    keys = rng.random((m, gross.size))
    part = np.argpartition(keys, n_bets - 1, axis=1)[:, :n_bets]
    order = np.argsort(np.take_along_axis(keys, part, axis=1), axis=1)
    picks = np.take_along_axis(part, order, axis=1)
    profit = (gross[picks] - 1.0) * stakes  # stakes broadcast across trials
    total = profit.sum(axis=1)
    value = total / stakes.sum() if metric == ROI else total
    return int(np.count_nonzero(value >= threshold))


def random_strategy_pvalue(
    real_value: float,
    odds: Sequence[float],
    outcomes: Sequence[int],
    n_bets: int,
    trials: int = 100_000,
    seed: int = 42,
    staking: str = UNIT,
    real_stakes: Sequence[float] | None = None,
    metric: str = ROI,
    workers: int = 1,
) -> SignificanceResult:
    """Share of random ``n_bets``-bet strategies whose metric is at least ``real_value``.

    ``real_value`` is a fraction for ROI (0.1244 for 12.44%). ``odds`` and
    ``outcomes`` describe the universe of eligible rows. With
    ``staking="permuted"`` the real stakes are dealt to the sampled rows in
    random order; otherwise every random bet stakes one unit.
    """
    gross = np.asarray(odds, dtype=float) * np.asarray(outcomes, dtype=float)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 < n_bets <= gross.size:
        raise UniverseTooSmall(f"cannot place {n_bets} bets in a universe of {gross.size}")
    if staking == PERMUTED:
        if real_stakes is None or len(real_stakes) != n_bets:
            raise ValueError("permuted staking needs one real stake per bet")
        stakes = np.asarray(real_stakes, dtype=float)
    elif staking == UNIT:
        stakes = np.ones(n_bets)
    else:
        raise ValueError(f"unknown staking {staking!r}")
    if metric not in (ROI, ABSOLUTE_RETURN):
        raise ValueError(f"unknown metric {metric!r}")

    threshold = real_value - _TIE_TOL * max(1.0, abs(real_value))
    n_chunks = -(-trials // CHUNK_TRIALS)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(CHUNK_TRIALS, trials - k * CHUNK_TRIALS) for k in range(n_chunks)]

    def run(k: int) -> int:
        rng = np.random.Generator(np.random.PCG64(children[k]))
        return _chunk_hits(rng, sizes[k], gross, stakes, n_bets, metric, threshold)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(run, range(n_chunks)))
    else:
        hits = sum(run(k) for k in range(n_chunks))
    return SignificanceResult(
        p_bs=hits / trials,
        trials=trials,
        hits=hits,
        n_bets=n_bets,
        universe_size=int(gross.size),
        seed=seed,
        real_value=float(real_value),
        comparison_metric=metric,
        staking=staking,
    )


def ledger_pvalue(ledger, trials: int = 100_000, seed: int = 42, staking: str = UNIT,
                  metric: str = ROI, workers: int = 1) -> SignificanceResult:
    """Test a backtest ledger against random bets drawn from its own eligible rows."""
    bets = ledger.bets
    stakes = [b.f_star for b in bets]
    profit = sum(b.profit for b in bets)
    real = profit / sum(stakes) if metric == ROI else profit
    return random_strategy_pvalue(
        real,
        [r.odds_used for r in ledger.records],
        [r.y for r in ledger.records],
        n_bets=len(bets),
        trials=trials,
        seed=seed,
        staking=staking,
        real_stakes=stakes,
        metric=metric,
        workers=workers,
    )
