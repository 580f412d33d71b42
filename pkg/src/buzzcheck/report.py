"""Render fits, strategy summaries and cleaning reports as text, CSV and JSON tables.

Values are rounded once, here, and all three renderings are produced from
the same rounded cells.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Mapping

from .backtest import StrategySummary
from .clean import CleaningReport
from .errors import UnknownLayout
from .estimate import RegressionFit

COEF_LABELS = {
    "z": "Odds-implied probability",
    "rank_dist": "WTA rank distance to opponent",
    "wikibuzz": "Wiki relative buzz factor",
    "const": "Constant",
}
COEF_ORDER = ("z", "rank_dist", "wikibuzz", "const")

STRATEGY_ROWS = (
    ("n_odds", "N odds (2 x J matches)", 0),
    ("bets_placed", "Number of bets placed", 0),
    ("mean_overround_pct", "Mean overround (%)", 2),
    ("investment", "Investment (x per bet budget)", 2),
    ("absolute_return", "Absolute return (x per bet budget)", 2),
    ("roi_pct", "Return on Investment (%)", 2),
)

DASH = "-"


@dataclass(frozen=True)
class Table:
    layout: str
    title: str
    header: tuple[str, ...]
    rows: tuple[tuple, ...]  # first cell is the row label; None renders as a dash
    notes: tuple[str, ...] = field(default=())

    def cells(self) -> list[list[str]]:
        return [[_cell(v) for v in row] for row in self.rows]

    def to_text(self) -> str:
        grid = [list(self.header)] + self.cells()
        widths = [max(len(r[i]) for r in grid) for i in range(len(self.header))]
        lines = [self.title, ""]
        for k, row in enumerate(grid):
            lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
            if k == 0:
                lines.append("  ".join("-" * w for w in widths))
        lines.extend(self.notes)
        return "\n".join(lines).rstrip() + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.cells())
        return buf.getvalue()

    def to_json(self) -> str:
        body = {
            "layout": self.layout,
            "title": self.title,
            "header": list(self.header),
            "rows": [[_json_value(v) for v in row] for row in self.rows],
            "notes": list(self.notes),
        }
        return json.dumps(body, indent=2) + "\n"

    def render(self, fmt: str) -> str:
        return {"text": self.to_text, "csv": self.to_csv, "json": self.to_json}[fmt]()


@dataclass(frozen=True)
class Rounded:
    value: float
    places: int
    wrap: bool = False  # standard errors print in parentheses

    def __str__(self) -> str:
        s = f"{self.value:.{self.places}f}"
        if s.startswith("-") and float(s) == 0:
            s = s[1:]
        return f"({s})" if self.wrap else s


def _cell(v) -> str:
    if v is None:
        return DASH
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, Rounded):
        return float(str(v).strip("()"))
    return v


def _r(value, places: int, wrap: bool = False):
    if value is None:
        return None
    if places == 0:
        return int(value)
    return Rounded(float(value), places, wrap)


def coefficient_table(fits: Mapping[str, RegressionFit | None], title: str = "Model estimates") -> Table:
    labels = list(fits)
    rows = []
    for name in COEF_ORDER:
        present = [f for f in fits.values() if f is not None and name in f.names]
        if not present:
            continue
        rows.append((COEF_LABELS[name],) + tuple(
            _r(f[name], 3) if f is not None and name in f.names else None for f in fits.values()
        ))
        rows.append(("",) + tuple(
            _r(f.se_of(name), 3, wrap=True) if f is not None and name in f.names else None for f in fits.values()
        ))
    rows.append(("N of player-matches",) + tuple(None if f is None else f.n_rows for f in fits.values()))
    return Table("coefficients", title, ("",) + tuple(labels), tuple(rows))


def mispricing_table_render(fit: RegressionFit | None, title: str = "Mispricing estimates") -> Table:
    rows = []
    names = [n for n in COEF_ORDER if fit is not None and n in fit.names] or list(COEF_ORDER)
    for name in names:
        if fit is None:
            rows.append((COEF_LABELS[name], None, None, None))
            continue
        rows.append((COEF_LABELS[name], _r(fit[name], 3), _r(fit.se_of(name), 3, wrap=True), _r(fit.p_of(name), 3)))
    rows.append(("N of player-matches", None if fit is None else fit.n_rows, None, None))
    return Table("mispricing", title, ("", "Parameter", "SE", "P-value"), tuple(rows))


def strategy_table(
    summaries: Mapping[str, StrategySummary | None],
    title: str = "Strategy results",
    extra_rows: Mapping[str, Mapping[str, float | None]] | None = None,
) -> Table:
    """Six standard rows per strategy column, plus optional ``{row label: {column: value}}`` rows."""
    rows = []
    for attr, label, places in STRATEGY_ROWS:
        rows.append((label,) + tuple(
            None if s is None else _r(getattr(s, attr), places) for s in summaries.values()
        ))
    for label, values in (extra_rows or {}).items():
        rows.append((label,) + tuple(_r(values.get(col), 3) for col in summaries))
    return Table("strategy", title, ("",) + tuple(summaries), tuple(rows))


def cleaning_table(report: CleaningReport | None, title: str = "Data cleaning steps") -> Table:
    header = ("Step", "Rows", "Removed", "Date", "Player i", "Player j", "Best_i", "Av._i", "Bet365_i", "Wiki_i", "Wiki_j")
    if report is None or not report.steps:
        return Table("cleaning", title, header, (("0",) + (None,) * 10,))
    rows = [("0", report.steps[0].rows_before) + (None,) * 9]
    for k, s in enumerate(report.steps, start=1):
        ex = s.exemplar_rows[0] if s.exemplar_rows else {}
        rows.append((
            f"{k} {s.name}", s.rows_after, s.rows_removed,
            ex.get("date"), ex.get("player_i"), ex.get("player_j"),
            _r(ex.get("best_i"), 2), _r(ex.get("avg_i"), 2), _r(ex.get("bet365_i"), 2),
            ex.get("wiki_i"), ex.get("wiki_j"),
        ))
    notes = () if report.sigma_used is None else (f"sigma used in step 4: {report.sigma_used:.4f}",)
    return Table("cleaning", title, header, tuple(rows), notes)


LAYOUTS = {
    "table1": coefficient_table,
    "coefficients": coefficient_table,
    "table4": mispricing_table_render,
    "mispricing": mispricing_table_render,
    "table2": strategy_table,
    "table3": strategy_table,
    "appendix_b": strategy_table,
    "appendix_c": strategy_table,
    "strategy": strategy_table,
    "appendix_d": cleaning_table,
    "cleaning": cleaning_table,
}


def render_table(obj, layout: str, **kwargs) -> Table:
    try:
        builder = LAYOUTS[layout]
    except KeyError:
        raise UnknownLayout(f"unknown layout {layout!r}; choose from {sorted(LAYOUTS)}") from None
    return builder(obj, **kwargs)
