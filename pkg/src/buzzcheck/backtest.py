"""Out-of-sample Kelly betting on model forecasts with a bankroll reset to 1 before every bet."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date
from typing import Sequence

import numpy as np

from .errors import EmptyUniverse, MissingFeature, ZeroInvestment
from .estimate import RegressionFit, fit_ols
from .features import FE_SEASON, PM, build_design
from .ingest import BET365, MARKET_AVG, MARKET_BEST, PlayerMatchRow

ODDS_SOURCES = {"bet365": BET365, "best": MARKET_BEST}
P_DECIMALS = 9


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __contains__(self, p: float) -> bool:
        above = p >= self.lo if self.lo_closed else p > self.lo
        below = p <= self.hi if self.hi_closed else p < self.hi
        return above and below

    def __str__(self) -> str:
        return f"{'[' if self.lo_closed else '('}{self.lo:g},{self.hi:g}{']' if self.hi_closed else ')'}"


@dataclass(frozen=True)
class PRange:
    """Union of intervals on the average-odds implied probability."""

    intervals: tuple[Interval, ...]

    def __contains__(self, p: float) -> bool:
        p = round(p, P_DECIMALS)
        return any(p in iv for iv in self.intervals)

    def __str__(self) -> str:
        return "U".join(str(iv) for iv in self.intervals)


_INTERVAL = re.compile(r"([\[(])\s*([0-9.]+)\s*,\s*([0-9.]+)\s*([\])])")


def parse_p_range(text: str) -> PRange:
    """Parse ``"[0.4,0.6]"`` or ``"(0,0.2)U(0.8,1)"``."""
    found = _INTERVAL.findall(text)
    leftover = _INTERVAL.sub("", text).replace("U", "").replace("u", "").replace("∪", "").strip()
    if not found or leftover:
        raise ValueError(f"cannot parse p-range {text!r}")
    ivs = tuple(Interval(float(lo), float(hi), a == "[", b == "]") for a, lo, hi, b in found)
    for iv in ivs:
        if not 0.0 <= iv.lo < iv.hi <= 1.0:
            raise ValueError(f"interval {iv} is not inside [0, 1]")
    return PRange(ivs)


@dataclass(frozen=True)
class StrategyConfig:
    model: str = PM
    odds_source: str = BET365
    competitiveness: PRange | None = None
    excluded: frozenset[str] = frozenset()  # match ids or match_id/perspective row ids
    fe: tuple[str, ...] = (FE_SEASON,)
    refit: bool = True  # re-estimate on the competitiveness-filtered training sample

    @property
    def label(self) -> str:
        parts = [self.model, {BET365: "bet365", MARKET_BEST: "best"}.get(self.odds_source, self.odds_source)]
        if self.competitiveness is not None:
            parts.append(f"p{self.competitiveness}")
        if self.excluded:
            parts.append("excl")
        return " ".join(parts)


@dataclass(frozen=True)
class BetRecord:
    match_id: str
    perspective: str
    date: date
    player: str
    opponent: str
    y: int
    y_tilde: float
    odds_used: float
    f_star: float
    profit: float
    cumulative: float
    overround: float | None

    @property
    def placed(self) -> bool:
        return self.f_star > 0

    @property
    def row_id(self) -> str:
        return f"{self.match_id}/{self.perspective}"


@dataclass(frozen=True)
class BetLedger:
    """Every eligible row with its decision, in chronological order."""

    records: tuple[BetRecord, ...]
    odds_source: str
    out_of_range: int = 0  # forecasts outside [0, 1]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def bets(self) -> list[BetRecord]:
        return [r for r in self.records if r.placed]


@dataclass(frozen=True)
class StrategySummary:
    n_odds: int
    bets_placed: int
    mean_overround_pct: float | None
    investment: float
    absolute_return: float
    roi_pct: float | None
    attribution: tuple[tuple[str, float], ...] = field(default=(), repr=False)

    def as_dict(self) -> dict:
        return {
            "n_odds": self.n_odds,
            "bets_placed": self.bets_placed,
            "mean_overround_pct": self.mean_overround_pct,
            "investment": self.investment,
            "absolute_return": self.absolute_return,
            "roi_pct": self.roi_pct,
        }


def predict_outcome(fit: RegressionFit, row: PlayerMatchRow, model: str | None = None) -> float:
    """Linear win-probability forecast; fixed effects do not enter, and the value is not clamped."""
    model = model or fit.model
    try:
        y = fit.alpha_hat + (1.0 + fit["z"]) * row.z + fit["wikibuzz"] * row.wikibuzz
        if model == PM:
            y += fit["rank_dist"] * row.rank_dist
    except (TypeError, ValueError) as exc:
        raise MissingFeature(f"{row.row_id}: {exc}") from None
    return y


def kelly_fraction(y_tilde: float, odds: float) -> float:
    b = odds - 1.0
    if b <= 0:
        return 0.0
    return max(y_tilde - (1.0 - y_tilde) / b, 0.0)


def settle_bet(f_star: float, odds: float, y: int) -> float:
    return f_star * odds - f_star if y == 1 else -f_star


def apply_competitiveness(rows: Sequence[PlayerMatchRow], p_range: PRange | None) -> list[PlayerMatchRow]:
    """Keep rows whose average-odds implied probability falls in ``p_range``."""
    if p_range is None:
        return list(rows)
    out = []
    for r in rows:
        z = r.z_for(MARKET_AVG)
        if z is None:
            raise MissingFeature(f"{r.row_id}: no average odds")
        if z in p_range:
            out.append(r)
    return out


def eligible_rows(rows: Sequence[PlayerMatchRow], config: StrategyConfig) -> list[PlayerMatchRow]:
    """Rows the strategy can bet on, in chronological order (ties by row id)."""
    rows = apply_competitiveness(rows, config.competitiveness)
    rows = [
        r for r in rows
        if r.odds.get(config.odds_source) is not None
        and r.row_id not in config.excluded
        and r.match_id not in config.excluded
    ]
    return sorted(rows, key=lambda r: (r.date, r.match_id, r.perspective))


def run_backtest(fit: RegressionFit, test_rows: Sequence[PlayerMatchRow], config: StrategyConfig) -> BetLedger:
    universe = eligible_rows(test_rows, config)
    if not universe:
        raise EmptyUniverse(f"no eligible rows for {config.label}")
    records, cumulative, out_of_range = [], 0.0, 0
    for r in universe:
        y_tilde = predict_outcome(fit, r, config.model)
        if not 0.0 <= y_tilde <= 1.0:
            out_of_range += 1
        odds = r.odds[config.odds_source]
        f = kelly_fraction(y_tilde, odds)
        profit = settle_bet(f, odds, r.y)
        cumulative += profit
        records.append(
            BetRecord(
                match_id=r.match_id,
                perspective=r.perspective,
                date=r.date,
                player=r.player,
                opponent=r.opponent,
                y=r.y,
                y_tilde=y_tilde,
                odds_used=odds,
                f_star=f,
                profit=profit,
                cumulative=cumulative,
                overround=r.overround.get(config.odds_source),
            )
        )
    return BetLedger(tuple(records), config.odds_source, out_of_range)


def summarize(ledger: BetLedger) -> StrategySummary:
    """Totals per unit bankroll; raises ZeroInvestment (carrying the partial summary) when nothing was staked."""
    bets = ledger.bets
    investment = float(np.sum([b.f_star for b in bets])) if bets else 0.0
    absolute = float(np.sum([b.profit for b in bets])) if bets else 0.0
    ks = [r.overround for r in ledger.records if r.overround is not None]
    ranking = sorted(bets, key=lambda b: (-abs(b.profit), b.row_id))
    summary = StrategySummary(
        n_odds=len(ledger),
        bets_placed=len(bets),
        mean_overround_pct=100.0 * float(np.mean(ks)) if ks else None,
        investment=investment,
        absolute_return=absolute,
        roi_pct=100.0 * absolute / investment if investment > 0 else None,
        attribution=tuple((b.row_id, b.profit) for b in ranking),
    )
    if investment <= 0:
        raise ZeroInvestment(summary)
    return summary


def cumulative_series(ledger: BetLedger) -> list[tuple[date, float]]:
    """Running profit after each placed bet."""
    out, total = [], 0.0
    for b in ledger.bets:
        total += b.profit
        out.append((b.date, total))
    return out


@dataclass(frozen=True)
class StrategyRun:
    config: StrategyConfig
    fit: RegressionFit
    ledger: BetLedger
    summary: StrategySummary | None  # None when nothing was staked


def run_strategy(
    train_rows: Sequence[PlayerMatchRow],
    test_rows: Sequence[PlayerMatchRow],
    config: StrategyConfig,
    fit: RegressionFit | None = None,
) -> StrategyRun:
    """Fit (on the window-filtered training rows when ``config.refit``) then backtest."""
    if fit is None or config.refit:
        sample = apply_competitiveness(train_rows, config.competitiveness) if config.refit else list(train_rows)
        fit = fit_ols(build_design(sample, config.model, config.fe))
    ledger = run_backtest(fit, test_rows, config)
    try:
        summary = summarize(ledger)
    except ZeroInvestment:
        summary = None
    return StrategyRun(config, fit, ledger, summary)
