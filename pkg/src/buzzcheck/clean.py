"""Four-step cleaning pipeline for match/odds data, with an audit report.

Counts are reported in player-match rows (two per match). A match is
removed whole when either side trips a rule, so the dataset keeps its
two-rows-per-match shape.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from datetime import date
from typing import Callable, Iterable, Mapping, Sequence

from .errors import DegenerateSpread, UnknownMatchId
from .ingest import BET365, MARKET_AVG, MARKET_BEST, SOURCES, Dataset, MatchRecord, PlayerMatchRow
from .pageviews import profile_age_ok

YOUNG_PROFILE = "YoungProfile"
SINGLE_BOOK_ABOVE_BEST = "SingleBookAboveBest"
MISSING_ODDS = "MissingOdds"
BEST_ODDS_OUTLIER = "BestOddsOutlier"

STEP_NAMES = ("new players", "Bet365 above best", "missing odds", "best odds outliers")
OUTLIER_SIGMAS = 4.0
N_EXEMPLARS = 3


@dataclass(frozen=True)
class AnomalyFlag:
    match_id: str
    kind: str
    detail: str


@dataclass(frozen=True)
class StepReport:
    name: str
    rows_before: int
    rows_removed: int
    exemplar_rows: tuple[dict, ...]
    flags: tuple[AnomalyFlag, ...]

    @property
    def rows_after(self) -> int:
        return self.rows_before - self.rows_removed


@dataclass(frozen=True)
class CleaningReport:
    steps: tuple[StepReport, ...]
    sigma_used: float | None

    def checkpoints(self) -> list[int]:
        if not self.steps:
            return []
        return [self.steps[0].rows_before] + [s.rows_after for s in self.steps]

    def flags(self) -> list[AnomalyFlag]:
        return [f for s in self.steps for f in s.flags]

    def to_dict(self) -> dict:
        return {
            "sigma_used": self.sigma_used,
            "checkpoints": self.checkpoints(),
            "steps": [
                {
                    "name": s.name,
                    "rows_before": s.rows_before,
                    "rows_removed": s.rows_removed,
                    "rows_after": s.rows_after,
                    "exemplar_rows": list(s.exemplar_rows),
                    "flags": [f.__dict__ for f in s.flags],
                }
                for s in self.steps
            ],
        }


def exemplar(r: MatchRecord, side: str = "w") -> dict:
    """Printable summary of a removed row from one player's side."""
    other = "l" if side == "w" else "w"
    return {
        "date": r.date.isoformat(),
        "player_i": r.player_w if side == "w" else r.player_l,
        "player_j": r.player_l if side == "w" else r.player_w,
        "best_i": r.odds_for(MARKET_BEST, side),
        "avg_i": r.odds_for(MARKET_AVG, side),
        "bet365_i": r.odds_for(BET365, side),
        "wiki_i": _first(r, side),
        "wiki_j": _first(r, other),
    }


def _first(r: MatchRecord, side: str) -> str | None:
    d = r.wiki_first_w if side == "w" else r.wiki_first_l
    return None if d is None else d.isoformat()


def _split(ds: Dataset, verdict: Callable[[MatchRecord], tuple[str, str, float] | None], kind: str):
    """Partition ``ds``; ``removed`` lists ``(record, side)`` with the most severe hits first."""
    kept, hits, flags = [], [], []
    for r in ds.records:
        hit = verdict(r)
        if hit is None:
            kept.append(r)
        else:
            side, detail, severity = hit
            hits.append((severity, r, side))
            flags.append(AnomalyFlag(r.match_id, kind, detail))
    hits.sort(key=lambda h: -h[0])  # stable, so ties stay chronological
    return Dataset(tuple(kept), ds.duplicates), [(r, side) for _, r, side in hits], flags


def filter_new_players(ds: Dataset, first_available: Mapping[str, date] | None = None):
    """Drop matches where either player's profile is younger than a year and a day.

    Profile dates come from the record's ``wiki_first_*`` fields, falling back
    to ``first_available`` keyed by player name.
    """
    first_available = first_available or {}

    def first(r: MatchRecord, side: str) -> date:
        d = r.wiki_first_w if side == "w" else r.wiki_first_l
        if d is None:
            d = first_available.get(r.player_w if side == "w" else r.player_l)
        if d is None:
            raise ValueError(f"profile start unknown for {side!r} side of {r.match_id}")
        return d

    def verdict(r):
        for side in ("w", "l"):
            d = first(r, side)
            if not profile_age_ok(d, r.date):
                return side, f"profile first available {d}, match {r.date}", -float((r.date - d).days)
        return None

    return _split(ds, verdict, YOUNG_PROFILE)


def filter_bet365_above_best(ds: Dataset):
    def verdict(r):
        for side in ("w", "l"):
            b365, best = r.odds_for(BET365, side), r.odds_for(MARKET_BEST, side)
            if b365 is not None and best is not None and b365 > best:
                return side, f"Bet365 {b365} > best {best}", b365 / best
        return None

    return _split(ds, verdict, SINGLE_BOOK_ABOVE_BEST)


def filter_missing(ds: Dataset):
    def verdict(r):
        for side in ("w", "l"):
            for source in SOURCES:
                if r.odds_for(source, side) is None:
                    return side, f"{source} odds missing", 0.0
        return None

    return _split(ds, verdict, MISSING_ODDS)


def _spreads(r: MatchRecord) -> dict[str, float]:
    out = {}
    for side in ("w", "l"):
        best, avg = r.odds_for(MARKET_BEST, side), r.odds_for(MARKET_AVG, side)
        if best is not None and avg is not None:
            out[side] = abs(1.0 / best - 1.0 / avg)
    return out


def filter_best_odds_outliers(ds: Dataset, sigma: float | None = None):
    """Drop matches whose best-vs-average implied-probability gap is a 4-sigma outlier.

    ``sigma=None`` estimates the (sample) standard deviation of the gap over
    every row in ``ds``. Returns ``(ds', removed, flags, sigma_used)``.
    """
    spreads = [d for r in ds.records for d in _spreads(r).values()]
    if not spreads:
        return ds, [], [], sigma
    mean = statistics.fmean(spreads)
    sigma_used = sigma if sigma is not None else (statistics.stdev(spreads) if len(spreads) > 1 else 0.0)
    if sigma_used == 0 and any(d != spreads[0] for d in spreads):
        raise DegenerateSpread("spread sigma is zero but spreads differ")
    limit = OUTLIER_SIGMAS * sigma_used

    def verdict(r):
        for side, d in _spreads(r).items():
            if abs(d - mean) > limit:
                return side, f"|1/best - 1/avg| = {d:.4f}, mean {mean:.4f}, sigma {sigma_used:.4f}", abs(d - mean)
        return None

    out, removed, flags = _split(ds, verdict, BEST_ODDS_OUTLIER)
    return out, removed, flags, sigma_used


def _step(name: str, before: Dataset, removed, flags) -> StepReport:
    return StepReport(
        name=name,
        rows_before=before.n_rows,
        rows_removed=2 * len(removed),
        exemplar_rows=tuple(exemplar(r, side) for r, side in removed[:N_EXEMPLARS]),
        flags=tuple(flags),
    )


def run_pipeline(
    ds: Dataset,
    first_available: Mapping[str, date] | None = None,
    sigma: float | None = None,
    skip_steps: Iterable[int] = (),
) -> tuple[Dataset, CleaningReport]:
    """Apply steps 1-4 in order; ``skip_steps`` holds 1-based step numbers to bypass."""
    skip = set(skip_steps)
    steps, sigma_used = [], None
    current = ds
    for number, name in enumerate(STEP_NAMES, start=1):
        if number in skip:
            continue
        if number == 1:
            out, removed, flags = filter_new_players(current, first_available)
        elif number == 2:
            out, removed, flags = filter_bet365_above_best(current)
        elif number == 3:
            out, removed, flags = filter_missing(current)
        else:
            out, removed, flags, sigma_used = filter_best_odds_outliers(current, sigma)
        steps.append(_step(name, current, removed, flags))
        current = out
    return current, CleaningReport(tuple(steps), sigma_used)


def exclude_rows(ds: Dataset, match_ids: Iterable[str]) -> Dataset:
    ids = set(match_ids)
    known = {r.match_id for r in ds.records}
    unknown = ids - known
    if unknown:
        raise UnknownMatchId(", ".join(sorted(unknown)))
    return Dataset(tuple(r for r in ds.records if r.match_id not in ids), ds.duplicates)


def exclude_player_rows(rows: Sequence[PlayerMatchRow], ids: Iterable[str]) -> list[PlayerMatchRow]:
    """Drop player-match rows by ``match_id/perspective`` or whole matches by ``match_id``.

    Unknown ids are ignored here because a row can legitimately be absent
    from a filtered sample (e.g. outside a competitiveness window).
    """
    ids = set(ids)
    return [r for r in rows if r.row_id not in ids and r.match_id not in ids]
