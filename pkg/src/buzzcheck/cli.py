"""Command-line entry point: ``buzzcheck <verb> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict
from datetime import date
from pathlib import Path

from . import __version__
from .backtest import (
    ODDS_SOURCES, BetLedger, BetRecord, StrategyConfig, cumulative_series, parse_p_range, run_strategy,
)
from .clean import exclude_rows, run_pipeline
from .errors import BuzzError
from .estimate import fit_ols
from .features import build_design
from .ingest import (
    TENNIS_DATA, Dataset, load_dataset, read_dataset, split_samples, to_player_rows, write_dataset,
)
from .pageviews import PageviewCache
from .plots import Series, emit_pnl_plot
from .replicate import build_schema, load_config, replicate_all
from .report import coefficient_table, mispricing_table_render, strategy_table
from .significance import random_strategy_pvalue

log = logging.getLogger("buzzcheck")

LEDGER_COLUMNS = (
    "match_id", "perspective", "date", "player", "opponent", "y", "y_tilde",
    "odds_used", "f_star", "profit", "cumulative", "overround",
)


def _years(text: str) -> tuple[date, date]:
    lo, _, hi = text.partition(":")
    return date(int(lo), 1, 1), date(int(hi or lo), 12, 31)


def _load(path: str, schema: str | None) -> Dataset:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input file not found: {p}")
    sidecar = p.with_suffix(".json")
    if schema is None and sidecar.exists() and "buzzcheck-dataset" in sidecar.read_text():
        return read_dataset(p)
    if schema and Path(schema).exists():
        spec = load_config(schema)
        return load_dataset(p, build_schema(spec.get("schema", spec)))
    return load_dataset(p, build_schema(schema) if schema else TENNIS_DATA)


def _emit(text: str, out: str | None, out_dir: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if out_dir and not path.is_absolute():
        path = Path(out_dir) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def _ids(text: str | None) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


def write_ledger(ledger: BetLedger) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEDGER_COLUMNS)
    for r in ledger.records:
        d = asdict(r)
        w.writerow(["" if d[c] is None else (d[c].isoformat() if c == "date" else d[c]) for c in LEDGER_COLUMNS])
    return buf.getvalue()


def read_ledger(path: str | Path) -> BetLedger:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(BetRecord(
                match_id=row["match_id"], perspective=row["perspective"], date=date.fromisoformat(row["date"]),
                player=row["player"], opponent=row["opponent"], y=int(row["y"]),
                y_tilde=float(row["y_tilde"]), odds_used=float(row["odds_used"]), f_star=float(row["f_star"]),
                profit=float(row["profit"]), cumulative=float(row["cumulative"]),
                overround=float(row["overround"]) if row["overround"] else None,
            ))
    return BetLedger(tuple(records), odds_source="")


# --- verbs ---------------------------------------------------------------------

def cmd_ingest(args) -> int:
    ds = _load(args.input, args.schema)
    out = Path(args.out_dir) / args.out if args.out_dir else Path(args.out)
    write_dataset(ds, out)
    print(f"{len(ds)} matches ({ds.n_rows} rows), {ds.duplicates} duplicates collapsed -> {out}")
    return 0


def cmd_clean(args) -> int:
    ds = _load(args.input, args.schema)
    if args.exclude:
        ds = exclude_rows(ds, _ids(args.exclude))
    first = {}
    if args.pageview_cache:
        first = {k: date.fromisoformat(v["first_available"]) for k, v in PageviewCache(args.pageview_cache).index().items()}
    clean, report = run_pipeline(ds, first, sigma=args.sigma, skip_steps=args.skip_step or ())
    write_dataset(clean, args.out)
    if args.report:
        _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.report, None)
    print(" -> ".join(f"{n:,}" for n in report.checkpoints()), f"(sigma {report.sigma_used})")
    return 0


FEATURE_COLUMNS = ("match_id", "perspective", "date", "player", "opponent", "y", "z", "rank_dist",
                   "wikibuzz", "e", "season", "tournament_key")


def cmd_features(args) -> int:
    rows = to_player_rows(_load(args.input, args.schema))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FEATURE_COLUMNS + ("overround_avg", "odds_b365", "odds_avg", "odds_best"))
    for r in rows:
        w.writerow([getattr(r, c).isoformat() if c == "date" else getattr(r, c) for c in FEATURE_COLUMNS] + [
            r.overround["MarketAverage"], r.odds["Bet365"], r.odds["MarketAverage"], r.odds["MarketBest"],
        ])
    _emit(buf.getvalue(), args.out, args.out_dir)
    return 0


def cmd_estimate(args) -> int:
    rows = to_player_rows(_load(args.input, args.schema))
    start, end = _years(args.train)
    sample = [r for r in rows if start <= r.date <= end]
    if args.p_range:
        from .backtest import apply_competitiveness

        sample = apply_competitiveness(sample, parse_p_range(args.p_range))
    fit = fit_ols(build_design(sample, args.model, _ids(args.fe)))
    table = mispricing_table_render(fit) if args.pvalues else coefficient_table({args.model: fit})
    if args.out:
        _emit(table.render("json" if args.out.endswith(".json") else args.format), args.out, args.out_dir)
    print(table.render(args.format), end="")
    return 0


def cmd_backtest(args) -> int:
    rows = to_player_rows(_load(args.input, args.schema))
    train_start, train_end = _years(args.train)
    train, test = split_samples(rows, train_end, date.fromisoformat(args.test_end), train_start)
    config = StrategyConfig(
        model=args.model,
        odds_source=ODDS_SOURCES[args.odds],
        competitiveness=parse_p_range(args.p_range) if args.p_range else None,
        excluded=frozenset(_ids(args.exclude)),
        fe=tuple(_ids(args.fe)),
        refit=not args.no_refit,
    )
    full_fit = None
    if args.no_refit:
        full_fit = fit_ols(build_design(train, config.model, config.fe))
    run = run_strategy(train, test, config, fit=full_fit)
    if args.ledger:
        _emit(write_ledger(run.ledger), args.ledger, args.out_dir)
    summary = run.summary.as_dict() if run.summary else {"n_odds": len(run.ledger), "bets_placed": 0, "roi_pct": None}
    summary["forecasts_outside_unit_interval"] = run.ledger.out_of_range
    summary["top_bets"] = [list(x) for x in (run.summary.attribution[:5] if run.summary else ())]
    if args.summary:
        _emit(json.dumps(summary, indent=2) + "\n", args.summary, args.out_dir)
    print(strategy_table({config.label: run.summary}).render(args.format), end="")
    return 0


def cmd_significance(args) -> int:
    ledger = read_ledger(args.ledger)
    universe = read_ledger(args.universe) if args.universe else ledger
    bets = ledger.bets
    stakes = [b.f_star for b in bets]
    profit = sum(b.profit for b in bets)
    real = profit / sum(stakes) if args.metric == "roi" else profit
    result = random_strategy_pvalue(
        real, [r.odds_used for r in universe.records], [r.y for r in universe.records],
        n_bets=len(bets), trials=args.trials, seed=args.seed, staking=args.staking,
        real_stakes=stakes, metric=args.metric, workers=args.workers,
    )
    text = json.dumps(result.as_dict(), indent=2) + "\n"
    _emit(text, args.out, args.out_dir) if args.out else sys.stdout.write(text)
    return 0


def cmd_report(args) -> int:
    if args.summary:
        summaries = {}
        for item in args.summary:
            label, _, path = item.rpartition("=")
            data = json.loads(Path(path).read_text())
            from .backtest import StrategySummary

            fields = StrategySummary.__dataclass_fields__
            summaries[label or Path(path).stem] = (
                StrategySummary(**{k: data.get(k) for k in fields if k != "attribution"})
                if data.get("bets_placed") else None
            )
        table = strategy_table(summaries, args.title or "Strategy results")
        _emit(table.render(args.format), args.out, args.out_dir)
    if args.ledger:
        series = []
        for k, item in enumerate(args.ledger):
            label, _, path = item.rpartition("=")
            points = cumulative_series(read_ledger(path))
            series.append(Series(label or Path(path).stem, points))
        marker = date.fromisoformat(args.marker) if args.marker else None
        svg, pts = emit_pnl_plot(series, Path(args.out_dir or ".") / args.plot, marker=marker)
        print(f"wrote {svg} and {pts}")
    return 0


def cmd_replicate_all(args) -> int:
    run = replicate_all(args.config, args.out_dir or "replication", formats=("text", "csv", "json"))
    print(f"{len(run.tables)} tables, {len(run.figures)} figures; manifest {run.manifest_hash()[:16]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out-dir", default=None)
    common.add_argument("--format", choices=("csv", "json", "text"), default="text")
    common.add_argument("-v", "--verbose", action="store_true")

    # Subcommand copies must not reset values given before the verb.
    sub_common = argparse.ArgumentParser(add_help=False)
    sub_common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sub_common.add_argument("--out-dir", default=argparse.SUPPRESS)
    sub_common.add_argument("--format", choices=("csv", "json", "text"), default=argparse.SUPPRESS)
    sub_common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="buzzcheck", parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    def verb(name, func, **kw):
        sp = sub.add_parser(name, parents=[sub_common], **kw)
        sp.set_defaults(func=func)
        return sp

    def data_args(sp):
        sp.add_argument("--in", dest="input", required=True)
        sp.add_argument("--schema", default=None, help="schema preset name or TOML file")

    sp = verb("ingest", cmd_ingest, help="parse raw match files into the canonical dataset")
    data_args(sp)
    sp.add_argument("--out", required=True)

    sp = verb("clean", cmd_clean, help="run the four-step cleaning pipeline")
    data_args(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--report")
    sp.add_argument("--sigma", type=float, default=None)
    sp.add_argument("--skip-step", type=int, action="append")
    sp.add_argument("--exclude")
    sp.add_argument("--pageview-cache")

    sp = verb("features", cmd_features, help="dump per-row features")
    data_args(sp)
    sp.add_argument("--out")

    sp = verb("estimate", cmd_estimate, help="fit the mispricing regression")
    data_args(sp)
    sp.add_argument("--model", choices=("pm", "pm-no-rd"), default="pm")
    sp.add_argument("--fe", default="season")
    sp.add_argument("--train", default="2016:2018")
    sp.add_argument("--p-range")
    sp.add_argument("--pvalues", action="store_true", help="parameter/SE/p-value layout")
    sp.add_argument("--out")

    sp = verb("backtest", cmd_backtest, help="simulate a Kelly strategy out of sample")
    data_args(sp)
    sp.add_argument("--model", choices=("pm", "pm-no-rd"), default="pm")
    sp.add_argument("--odds", choices=tuple(ODDS_SOURCES), default="bet365")
    sp.add_argument("--p-range")
    sp.add_argument("--exclude", help="match ids or match_id/w|l row ids")
    sp.add_argument("--fe", default="season")
    sp.add_argument("--train", default="2016:2018")
    sp.add_argument("--test-end", default="2020-02-29")
    sp.add_argument("--no-refit", action="store_true", help="reuse the full-sample fit inside a p-range")
    sp.add_argument("--ledger")
    sp.add_argument("--summary")

    sp = verb("significance", cmd_significance, help="random-strategy p-value of a ledger")
    sp.add_argument("--ledger", required=True)
    sp.add_argument("--universe")
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--staking", choices=("unit", "permuted"), default="unit")
    sp.add_argument("--metric", choices=("roi", "absolute_return"), default="roi")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out")

    sp = verb("report", cmd_report, help="render summaries and P&L plots")
    sp.add_argument("--summary", action="append", help="[label=]summary.json")
    sp.add_argument("--ledger", action="append", help="[label=]ledger.csv")
    sp.add_argument("--plot", default="pnl.svg")
    sp.add_argument("--marker")
    sp.add_argument("--title")
    sp.add_argument("--out")

    sp = verb("replicate-all", cmd_replicate_all, help="produce every table and figure from a config")
    sp.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (BuzzError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
