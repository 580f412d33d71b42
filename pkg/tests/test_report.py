import csv
import io
import json
from datetime import date

import pytest

from buzzcheck.backtest import StrategyConfig, StrategySummary, run_strategy
from buzzcheck.clean import run_pipeline
from buzzcheck.errors import EmptySeries, UnknownLayout
from buzzcheck.estimate import fit_ols
from buzzcheck.features import PM_NO_RD, build_design
from buzzcheck.plots import Series, emit_pnl_plot
from buzzcheck.report import (
    Rounded, cleaning_table, coefficient_table, mispricing_table_render, render_table, strategy_table,
)

SUMMARY = StrategySummary(5156, 312, 6.4612, 7.1499, 1.2364, 17.2924)


def _parsed(table):
    return list(csv.reader(io.StringIO(table.to_csv())))


def test_strategy_table_layout():
    t = strategy_table({"PM": SUMMARY, "PM excl.": None})
    rows = _parsed(t)
    assert rows[0] == ["", "PM", "PM excl."]
    assert rows[1:] == [
        ["N odds (2 x J matches)", "5156", "-"],
        ["Number of bets placed", "312", "-"],
        ["Mean overround (%)", "6.46", "-"],
        ["Investment (x per bet budget)", "7.15", "-"],
        ["Absolute return (x per bet budget)", "1.24", "-"],
        ["Return on Investment (%)", "17.29", "-"],
    ]


def test_formats_agree():
    t = strategy_table({"PM": SUMMARY}, extra_rows={"p_bs": {"PM": 0.0021}})
    text_cells = [line.split() for line in t.to_text().splitlines()[4:]]
    csv_rows = _parsed(t)[1:]
    js = json.loads(t.to_json())
    for text, c, j in zip(text_cells, csv_rows, js["rows"]):
        assert text[-1] == c[1]
        assert float(c[1]) == pytest.approx(j[1])
    assert js["rows"][-1] == ["p_bs", 0.002]


def test_rounding_and_negative_zero():
    assert str(Rounded(-0.0004, 3)) == "0.000"
    assert str(Rounded(0.0156, 3, wrap=True)) == "(0.016)"
    assert str(Rounded(-7.356, 2)) == "-7.36"


def test_coefficient_table(synth_split):
    train, _ = synth_split
    fits = {"PM": fit_ols(build_design(train)), "PM w/o RD": fit_ols(build_design(train, PM_NO_RD))}
    rows = _parsed(coefficient_table(fits))
    labels = [r[0] for r in rows]
    assert labels == ["", "Odds-implied probability", "", "WTA rank distance to opponent", "",
                      "Wiki relative buzz factor", "", "Constant", "", "N of player-matches"]
    rd = rows[3]
    assert rd[2] == "-"
    assert rows[2][1].startswith("(") and rows[2][1].endswith(")")
    assert rows[-1][1:] == [str(len(train))] * 2
    assert float(rows[1][1]) == pytest.approx(fits["PM"]["z"], abs=5e-4)


def test_mispricing_table(synth_split):
    fit = fit_ols(build_design(synth_split[0]))
    rows = _parsed(mispricing_table_render(fit))
    assert rows[0] == ["", "Parameter", "SE", "P-value"]
    assert rows[3][0] == "Wiki relative buzz factor"
    assert float(rows[3][3]) == pytest.approx(fit.p_of("wikibuzz"), abs=5e-4)
    empty = _parsed(mispricing_table_render(None))
    assert all(c == "-" for r in empty[1:] for c in r[1:])


def test_cleaning_table(synth_dataset):
    _, report = run_pipeline(synth_dataset)
    t = cleaning_table(report)
    rows = _parsed(t)
    assert [int(r[1]) for r in rows[1:]] == report.checkpoints()
    assert rows[1][2] == "-"
    assert "sigma used" in t.to_text()
    assert _parsed(cleaning_table(None))[1][0] == "0"


def test_render_table_dispatch():
    assert render_table({"PM": SUMMARY}, "table2").layout == "strategy"
    with pytest.raises(UnknownLayout):
        render_table({}, "table9")


def test_dashes_only_table():
    t = strategy_table({"a": None, "b": None})
    assert set(c for r in _parsed(t)[1:] for c in r[1:]) == {"-"}


# --- figures ----------------------------------------------------------------------------


def test_pnl_plot_writes_svg_and_points(tmp_path, synth_split):
    train, test = synth_split
    run = run_strategy(train, test, StrategyConfig())
    pts = [(b.date, b.cumulative) for b in run.ledger.bets]
    svg, points = emit_pnl_plot([Series("PM", pts)], tmp_path / "pnl", marker=date(2019, 3, 22))
    assert svg.suffix == ".svg" and svg.read_text().lstrip().startswith("<?xml")
    rows = list(csv.DictReader(io.StringIO(points.read_text())))
    assert len(rows) == len(pts)
    assert float(rows[-1]["cumulative_profit"]) == pytest.approx(run.summary.absolute_return)
    # deterministic bytes
    svg2, _ = emit_pnl_plot([Series("PM", pts)], tmp_path / "again", marker=date(2019, 3, 22))
    assert svg.read_bytes() == svg2.read_bytes().replace(b"again.csv", b"pnl.csv")


def test_multi_panel_and_single_point(tmp_path):
    panels = [[Series("one", [(date(2019, 1, 2), 0.1)])],
              [Series("a", [(date(2019, 1, 2), 0.1), (date(2019, 2, 2), -0.2)]), Series("b", [(date(2019, 1, 5), 0.3)])]]
    svg, points = emit_pnl_plot(panels, tmp_path / "fig", marker=[None, date(2019, 1, 20)], titles=["x", "y"])
    rows = list(csv.DictReader(io.StringIO(points.read_text())))
    assert [r["panel"] for r in rows] == ["0", "1", "1", "1"]
    assert "dataset change" in svg.read_text()


def test_empty_series_rejected(tmp_path):
    with pytest.raises(EmptySeries):
        emit_pnl_plot([Series("x", [])], tmp_path / "f")
    with pytest.raises(EmptySeries):
        emit_pnl_plot([], tmp_path / "f")
