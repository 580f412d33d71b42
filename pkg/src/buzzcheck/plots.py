"""Cumulative P&L figures.

Figures are written as SVG next to a CSV holding the exact plotted points;
the CSV is the source of truth and its digest is embedded in the SVG
metadata.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.dates as mdates  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402

from .errors import EmptySeries  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 3.6),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "svg.hashsalt": "buzzcheck",
    "svg.fonttype": "none",
}

LINESTYLES = ("--", "-", ":", "-.")


@dataclass(frozen=True)
class Series:
    label: str
    points: Sequence[tuple[date, float]]
    linestyle: str | None = None


def points_csv(series: Sequence[Series], panel: str = "") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["panel", "series", "index", "date", "cumulative_profit"])
    for s in series:
        for i, (day, value) in enumerate(s.points):
            w.writerow([panel, s.label, i, day.isoformat(), repr(float(value))])
    return buf.getvalue()


def emit_pnl_plot(
    series: Sequence[Series] | Sequence[Sequence[Series]],
    path: str | Path,
    marker: date | Sequence[date | None] | None = None,
    titles: Sequence[str] | None = None,
    marker_label: str = "dataset change",
) -> tuple[Path, Path]:
    """Draw one polyline per series (one axis per panel) and write ``.svg`` + ``.csv``.

    ``series`` is either a flat list for a single panel or a list of panels.
    ``marker`` is one date for every panel or one (optional) date per panel.
    Single-point series are drawn as a marker.
    """
    panels = [list(series)] if series and isinstance(series[0], Series) else [list(p) for p in series]
    if not panels or any(not p for p in panels) or any(not s.points for p in panels for s in p):
        raise EmptySeries("every series needs at least one point")
    markers = list(marker) if isinstance(marker, (list, tuple)) else [marker] * len(panels)
    path = Path(path).with_suffix(".svg")
    path.parent.mkdir(parents=True, exist_ok=True)

    table = "".join(
        points_csv(p, panel=str(k)) if k == 0 else points_csv(p, panel=str(k)).split("\n", 1)[1]
        for k, p in enumerate(panels)
    )
    csv_path = path.with_suffix(".csv")
    csv_path.write_text(table)

    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(panels), squeeze=False, figsize=(6.4 * len(panels) / 1.3, 3.6))
        for k, (ax, panel) in enumerate(zip(axes[0], panels)):
            for j, s in enumerate(panel):
                days = [d for d, _ in s.points]
                values = [100.0 * v for _, v in s.points]
                style = s.linestyle or LINESTYLES[j % len(LINESTYLES)]
                if len(days) == 1:
                    ax.plot(days, values, marker="o", linestyle="none", label=s.label)
                else:
                    ax.plot(days, values, linestyle=style, drawstyle="steps-post", label=s.label)
            if k < len(markers) and markers[k] is not None:
                ax.axvline(markers[k], color="0.3", linestyle=":", linewidth=1.0, label=marker_label)
            ax.axhline(0.0, color="0.5", linewidth=0.6)
            ax.set_ylabel("cumulative profit (% of unit bankroll)")
            ax.xaxis.set_major_formatter(mdates.DateFormatter("%b %Y"))
            ax.tick_params(axis="x", labelrotation=30)
            if titles and k < len(titles):
                ax.set_title(titles[k])
            ax.legend(loc="best")
        fig.tight_layout()
        digest = hashlib.sha256(table.encode()).hexdigest()
        fig.savefig(
            path,
            format="svg",
            metadata={"Date": None, "Description": f"points: {csv_path.name} sha256={digest}"},
        )
        plt.close(fig)
    return path, csv_path
