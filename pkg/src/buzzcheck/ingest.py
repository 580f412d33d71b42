"""Parse tennis-data style match files into matches and player-match rows."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, replace
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import features
from .errors import BadDate, EmptySplit, MissingColumn, ParseError

log = logging.getLogger(__name__)

BET365 = "Bet365"
MARKET_AVG = "MarketAverage"
MARKET_BEST = "MarketBest"
SOURCES = (BET365, MARKET_AVG, MARKET_BEST)

DATA_START = date(2015, 7, 1)
DATA_END = date(2023, 8, 31)

_MISSING_TOKENS = {"", "na", "n/a", "nan", "none", "null", "nr", "-"}


@dataclass(frozen=True)
class OddsPair:
    source: str
    odds_w: float | None
    odds_l: float | None


@dataclass(frozen=True)
class MatchRecord:
    match_id: str
    date: date
    tournament: str
    player_w: str
    player_l: str
    rank_w: int | None  # None = unranked
    rank_l: int | None
    odds: Mapping[str, OddsPair]
    wiki_yesterday_w: int | None = None
    wiki_yesterday_l: int | None = None
    wiki_med365_w: float | None = None
    wiki_med365_l: float | None = None
    wiki_first_w: date | None = None
    wiki_first_l: date | None = None
    comment: str | None = None

    @property
    def season(self) -> int:
        return self.date.year

    @property
    def tournament_key(self) -> str:
        return f"{self.tournament} {self.season}"

    def odds_for(self, source: str, side: str) -> float | None:
        pair = self.odds.get(source)
        if pair is None:
            return None
        return pair.odds_w if side == "w" else pair.odds_l


@dataclass(frozen=True)
class Dataset:
    records: tuple[MatchRecord, ...]
    duplicates: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self) -> dict[str, MatchRecord]:
        return {r.match_id: r for r in self.records}

    def fingerprint(self) -> str:
        return hashlib.sha256(dataset_to_csv(self).encode()).hexdigest()

    @property
    def n_rows(self) -> int:
        """Player-match rows (two per match)."""
        return 2 * len(self.records)

    def players(self) -> set[str]:
        return {p for r in self.records for p in (r.player_w, r.player_l)}


@dataclass(frozen=True)
class Schema:
    """Maps logical fields to the column names used by one file.

    ``date_format`` is ``"iso"``, ``"dayfirst"``, ``"monthfirst"`` or an
    explicit ``strptime`` pattern. Logical fields absent from ``columns``
    parse as missing.
    """

    columns: Mapping[str, str]
    date_format: str = "iso"
    delimiter: str = ","

    def with_columns(self, **overrides: str) -> "Schema":
        return replace(self, columns={**self.columns, **overrides})

    def without(self, *fields: str) -> "Schema":
        return replace(self, columns={k: v for k, v in self.columns.items() if k not in fields})


REQUIRED_FIELDS = ("date", "tournament", "winner", "loser")

TENNIS_DATA = Schema(
    columns={
        "date": "Date",
        "tournament": "Tournament",
        "winner": "Winner",
        "loser": "Loser",
        "rank_w": "WRank",
        "rank_l": "LRank",
        "b365_w": "B365W",
        "b365_l": "B365L",
        "avg_w": "AvgW",
        "avg_l": "AvgL",
        "best_w": "MaxW",
        "best_l": "MaxL",
        "wiki_yesterday_w": "wiki_yesterday_w",
        "wiki_yesterday_l": "wiki_yesterday_l",
        "wiki_med365_w": "wiki_med365_w",
        "wiki_med365_l": "wiki_med365_l",
        "comment": "Comment",
    },
    date_format="iso",
)

# Column order of the canonical dataset file written by write_dataset.
CANONICAL_COLUMNS = (
    "match_id", "date", "tournament", "winner", "loser", "rank_w", "rank_l",
    "b365_w", "b365_l", "avg_w", "avg_l", "best_w", "best_l",
    "wiki_yesterday_w", "wiki_yesterday_l", "wiki_med365_w", "wiki_med365_l",
    "wiki_first_w", "wiki_first_l", "comment",
)
CANONICAL = Schema(columns={c: c for c in CANONICAL_COLUMNS if c != "match_id"}, date_format="iso")

_ODDS_FIELDS = {
    BET365: ("b365_w", "b365_l"),
    MARKET_AVG: ("avg_w", "avg_l"),
    MARKET_BEST: ("best_w", "best_l"),
}

_DATE_PATTERNS = {
    "iso": ("%Y-%m-%d", "%Y-%m-%d %H:%M:%S", "%Y%m%d"),
    "dayfirst": ("%d/%m/%Y", "%d/%m/%y", "%d.%m.%Y", "%d-%m-%Y"),
    "monthfirst": ("%m/%d/%Y", "%m/%d/%y"),
}


def match_key_id(day: date, player_w: str, player_l: str, tournament_key: str) -> str:
    key = f"{day.isoformat()}|{player_w}|{player_l}|{tournament_key}"
    return hashlib.sha1(key.encode()).hexdigest()[:12]


def _is_missing(cell: str | None) -> bool:
    return cell is None or cell.strip().lower() in _MISSING_TOKENS


def _odds(cell: str | None) -> float | None:
    if _is_missing(cell):
        return None
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if v >= 1.0 else None


def _rank(cell: str | None) -> int | None:
    if _is_missing(cell):
        return None
    try:
        v = float(cell)
    except ValueError:
        return None
    return int(v) if v >= 1 and v == int(v) else None


def _count(cell: str | None) -> int | None:
    if _is_missing(cell):
        return None
    try:
        v = float(cell)
    except ValueError:
        return None
    return int(v) if v >= 0 and v == int(v) else None


def _real(cell: str | None) -> float | None:
    if _is_missing(cell):
        return None
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if v >= 0 else None


def parse_date(cell: str, date_format: str) -> date:
    text = cell.strip()
    patterns = _DATE_PATTERNS.get(date_format, (date_format,))
    for pattern in patterns:
        try:
            return datetime.strptime(text, pattern).date()
        except ValueError:
            continue
    raise ValueError(f"cannot parse date {cell!r} as {date_format}")


def _opt_date(cell: str | None, date_format: str) -> date | None:
    if _is_missing(cell):
        return None
    return parse_date(cell, date_format)


def parse_match_file(content: bytes | str, schema: Schema = TENNIS_DATA) -> list[MatchRecord]:
    """Parse delimited match data.

    Unparseable odds, rank and pageview cells become ``None``. Row indices
    in errors count data rows from 1.
    """
    text = content.decode("utf-8-sig") if isinstance(content, bytes) else content
    reader = csv.reader(io.StringIO(text), delimiter=schema.delimiter)
    header = next(reader, None)
    if header is None:
        return []
    header = [h.strip() for h in header]
    position = {name: i for i, name in enumerate(header)}
    for logical in REQUIRED_FIELDS:
        if logical not in schema.columns:
            raise MissingColumn(logical)
    cols = {}
    for logical, column in schema.columns.items():
        if column not in position:
            raise MissingColumn(column)
        cols[logical] = position[column]

    def cell(row: list[str], logical: str) -> str | None:
        i = cols.get(logical)
        return None if i is None else row[i]

    records = []
    for n, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", row=n)
        try:
            day = parse_date(cell(row, "date"), schema.date_format)
        except ValueError as exc:
            raise BadDate(str(exc), row=n) from None
        try:
            first_w = _opt_date(cell(row, "wiki_first_w"), schema.date_format)
            first_l = _opt_date(cell(row, "wiki_first_l"), schema.date_format)
        except ValueError as exc:
            raise BadDate(str(exc), row=n) from None
        tournament = cell(row, "tournament").strip()
        winner, loser = cell(row, "winner").strip(), cell(row, "loser").strip()
        odds = {
            source: OddsPair(source, _odds(cell(row, fw)), _odds(cell(row, fl)))
            for source, (fw, fl) in _ODDS_FIELDS.items()
        }
        comment = cell(row, "comment")
        records.append(
            MatchRecord(
                match_id=match_key_id(day, winner, loser, f"{tournament} {day.year}"),
                date=day,
                tournament=tournament,
                player_w=winner,
                player_l=loser,
                rank_w=_rank(cell(row, "rank_w")),
                rank_l=_rank(cell(row, "rank_l")),
                odds=odds,
                wiki_yesterday_w=_count(cell(row, "wiki_yesterday_w")),
                wiki_yesterday_l=_count(cell(row, "wiki_yesterday_l")),
                wiki_med365_w=_real(cell(row, "wiki_med365_w")),
                wiki_med365_l=_real(cell(row, "wiki_med365_l")),
                wiki_first_w=first_w,
                wiki_first_l=first_l,
                comment=None if _is_missing(comment) else comment.strip(),
            )
        )
    return records


def _sort_key(r: MatchRecord):
    return (r.date, r.tournament_key, r.player_w, r.player_l, r.match_id)


def normalize_dataset(records: Iterable[MatchRecord], completed_only: bool = False) -> Dataset:
    """Sort, collapse duplicates to their first occurrence, and freeze.

    ``completed_only`` drops rows whose comment marks a retirement or walkover.
    """
    seen: dict[tuple, MatchRecord] = {}
    duplicates = 0
    for r in records:
        if completed_only and r.comment and r.comment.lower() not in ("completed", ""):
            continue
        key = (r.date, r.player_w, r.player_l, r.tournament_key)
        if key in seen:
            duplicates += 1
            continue
        seen[key] = r
    if duplicates:
        log.warning("collapsed %d duplicate match rows", duplicates)
    return Dataset(records=tuple(sorted(seen.values(), key=_sort_key)), duplicates=duplicates)


def load_dataset(path: str | Path, schema: Schema = TENNIS_DATA, completed_only: bool = False) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    return normalize_dataset(parse_match_file(path.read_bytes(), schema), completed_only)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, date):
        return v.isoformat()
    return str(v)


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CANONICAL_COLUMNS)
    for r in ds.records:
        w.writerow(_fmt(v) for v in (
            r.match_id, r.date, r.tournament, r.player_w, r.player_l, r.rank_w, r.rank_l,
            r.odds[BET365].odds_w, r.odds[BET365].odds_l,
            r.odds[MARKET_AVG].odds_w, r.odds[MARKET_AVG].odds_l,
            r.odds[MARKET_BEST].odds_w, r.odds[MARKET_BEST].odds_l,
            r.wiki_yesterday_w, r.wiki_yesterday_l, r.wiki_med365_w, r.wiki_med365_l,
            r.wiki_first_w, r.wiki_first_l, r.comment,
        ))
    return buf.getvalue()


def write_dataset(ds: Dataset, path: str | Path, extra_meta: Mapping | None = None) -> Path:
    """Write the canonical CSV plus a ``.json`` metadata sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = dataset_to_csv(ds)
    path.write_text(text)
    meta = {
        "format": "buzzcheck-dataset/1",
        "columns": list(CANONICAL_COLUMNS),
        "matches": len(ds),
        "rows": ds.n_rows,
        "duplicates_collapsed": ds.duplicates,
        "sha256": hashlib.sha256(text.encode()).hexdigest(),
        **(extra_meta or {}),
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    records = parse_match_file(path.read_bytes(), CANONICAL)
    meta_path = path.with_suffix(".json")
    duplicates = 0
    if meta_path.exists():
        duplicates = json.loads(meta_path.read_text()).get("duplicates_collapsed", 0)
    return Dataset(records=tuple(sorted(records, key=_sort_key)), duplicates=duplicates)


# --- player-match rows -------------------------------------------------------

@dataclass(frozen=True)
class PlayerMatchRow:
    match_id: str
    perspective: str  # "w" = winner's view, "l" = loser's view
    date: date
    player: str
    opponent: str
    y: int
    z: float
    odds: Mapping[str, float | None]
    overround: Mapping[str, float | None]
    rank_dist: float
    wikibuzz: float
    e: float
    season: int
    tournament_key: str

    @property
    def row_id(self) -> str:
        return f"{self.match_id}/{self.perspective}"

    def z_for(self, source: str) -> float | None:
        o = self.odds.get(source)
        return None if o is None else 1.0 / o


def _incomplete_reason(r: MatchRecord, source: str) -> str | None:
    if r.odds_for(source, "w") is None or r.odds_for(source, "l") is None:
        return f"missing {source} odds"
    views = (r.wiki_yesterday_w, r.wiki_med365_w, r.wiki_yesterday_l, r.wiki_med365_l)
    if any(v is None for v in views):
        return "missing pageviews"
    if any(v <= 0 for v in views):
        return "zero pageviews"
    return None


def count_incomplete(ds: Dataset, odds_source_for_z: str = MARKET_AVG) -> Counter:
    """Matches that ``to_player_rows`` would exclude, keyed by reason."""
    return Counter(
        reason for r in ds.records if (reason := _incomplete_reason(r, odds_source_for_z)) is not None
    )


def to_player_rows(ds: Dataset, odds_source_for_z: str = MARKET_AVG) -> list[PlayerMatchRow]:
    """Two directed rows per complete match, winner's view first."""
    rows = []
    for r in ds.records:
        if _incomplete_reason(r, odds_source_for_z) is not None:
            continue
        rd = features.rank_distance(r.rank_w, r.rank_l)
        wb = features.wikibuzz(r.wiki_yesterday_w, r.wiki_med365_w, r.wiki_yesterday_l, r.wiki_med365_l)
        k = {}
        for source in SOURCES:
            ow, ol = r.odds_for(source, "w"), r.odds_for(source, "l")
            k[source] = None if ow is None or ol is None else features.overround(1.0 / ow, 1.0 / ol)
        for side, y, player, opponent, sign in (
            ("w", 1, r.player_w, r.player_l, 1.0),
            ("l", 0, r.player_l, r.player_w, -1.0),
        ):
            z = features.implied_probability(r.odds_for(odds_source_for_z, side))
            rows.append(
                PlayerMatchRow(
                    match_id=r.match_id,
                    perspective=side,
                    date=r.date,
                    player=player,
                    opponent=opponent,
                    y=y,
                    z=z,
                    odds={s: r.odds_for(s, side) for s in SOURCES},
                    overround=k,
                    rank_dist=sign * rd,
                    wikibuzz=sign * wb,
                    e=features.forecast_error(y, z),
                    season=r.season,
                    tournament_key=r.tournament_key,
                )
            )
    return rows


def split_samples(
    rows: Sequence[PlayerMatchRow],
    train_end: date,
    test_end: date,
    train_start: date = date(2016, 1, 1),
) -> tuple[list[PlayerMatchRow], list[PlayerMatchRow]]:
    if not train_end < test_end:
        raise ValueError("train_end must precede test_end")
    train = [r for r in rows if train_start <= r.date <= train_end]
    test = [r for r in rows if train_end < r.date <= test_end]
    if not train:
        raise EmptySplit("train")
    if not test:
        raise EmptySplit("test")
    return train, test


def find_match(ds: Dataset | Sequence[MatchRecord], day: date, player: str) -> MatchRecord:
    """Look up a match by date and a (substring of a) player name."""
    records = ds.records if isinstance(ds, Dataset) else ds
    hits = [
        r for r in records
        if r.date == day and (player.lower() in r.player_w.lower() or player.lower() in r.player_l.lower())
    ]
    if len(hits) != 1:
        raise LookupError(f"{len(hits)} matches on {day} involving {player!r}")
    return hits[0]
