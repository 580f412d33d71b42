"""Config-driven end-to-end replication: every table and figure from one TOML file."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .backtest import ODDS_SOURCES, StrategyConfig, StrategyRun, apply_competitiveness, parse_p_range, run_backtest, run_strategy
from .clean import run_pipeline
from .estimate import fit_ols
from .features import FE_SEASON, build_design
from .ingest import CANONICAL, TENNIS_DATA, Dataset, PlayerMatchRow, Schema, find_match, load_dataset, split_samples, to_player_rows
from .pageviews import PageviewCache
from .plots import Series, emit_pnl_plot
from .report import Table, cleaning_table, coefficient_table, mispricing_table_render, strategy_table
from .significance import ledger_pvalue

log = logging.getLogger(__name__)

SCHEMA_PRESETS = {"tennis-data": TENNIS_DATA, "canonical": CANONICAL}
FORMATS = {"text": "txt", "csv": "csv", "json": "json"}


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    cfg = tomllib.loads(path.read_text())
    cfg["_path"] = str(path.resolve())
    cfg["_digest"] = hashlib.sha256(path.read_bytes()).hexdigest()
    return cfg


def build_schema(spec: dict | str | None) -> Schema:
    if spec is None:
        return TENNIS_DATA
    if isinstance(spec, str):
        return SCHEMA_PRESETS[spec]
    schema = SCHEMA_PRESETS[spec.get("preset", "tennis-data")]
    schema = schema.with_columns(**spec.get("columns", {})).without(*spec.get("drop", ()))
    if "date_format" in spec:
        schema = Schema(schema.columns, spec["date_format"], spec.get("delimiter", schema.delimiter))
    return schema


@dataclass
class ReplicationRun:
    config_digest: str
    fingerprints: dict[str, str]
    outputs: dict[str, dict[str, str]] = field(default_factory=dict)
    tool_version: str = __version__

    def manifest(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "dataset_fingerprints": dict(sorted(self.fingerprints.items())),
            "outputs": {k: dict(sorted(v.items())) for k, v in sorted(self.outputs.items())},
            "tool_version": self.tool_version,
        }

    def manifest_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.manifest(), sort_keys=True).encode()).hexdigest()

    @property
    def tables(self) -> list[str]:
        return [k for k in self.outputs if k.startswith("table:")]

    @property
    def figures(self) -> list[str]:
        return [k for k in self.outputs if k.startswith("figure:")]


class Replication:
    """Holds loaded datasets and fitted strategies while a config is executed."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.base = Path(cfg["_path"]).parent
        s = cfg.get("samples", {})
        self.train_start = s.get("train_start", date(2016, 1, 1))
        self.train_end = s.get("train_end", date(2018, 12, 31))
        self.test_end = s.get("test_end", date(2020, 2, 29))
        self.extended_start = s.get("extended_start", date(2020, 2, 1))
        self.extended_end = s.get("extended_end", date(2023, 8, 31))
        self.fe = tuple(cfg.get("estimation", {}).get("fe", [FE_SEASON]))
        sig = cfg.get("significance", {})
        self.trials = int(sig.get("trials", 100_000))
        self.seed = int(sig.get("seed", 42))
        self.staking = sig.get("staking", "unit")
        self.datasets: dict[str, Dataset] = {}
        self.fingerprints: dict[str, str] = {}
        self.cleaning = {}
        self.runs: dict[tuple[str, str], StrategyRun] = {}
        self.pvalues: dict[tuple[str, str], float] = {}

    def _path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else (self.base / path).resolve()

    def dataset(self, name: str) -> Dataset:
        if name not in self.datasets:
            spec = self.cfg["data"][name]
            path = self._path(spec["path"])
            if not path.exists():
                raise FileNotFoundError(f"dataset {name!r} not found: {path}")
            self.fingerprints[name] = hashlib.sha256(path.read_bytes()).hexdigest()
            self.datasets[name] = load_dataset(path, build_schema(spec.get("schema")), spec.get("completed_only", False))
        return self.datasets[name]

    def cleaned(self, name: str) -> Dataset:
        if name not in self.cleaning:
            spec = self.cfg["data"][name]
            first = {}
            if "pageview_cache" in spec:
                index = PageviewCache(self._path(spec["pageview_cache"])).index()
                first = {k: date.fromisoformat(v["first_available"]) for k, v in index.items()}
            sigma = spec.get("sigma", "auto")
            self.cleaning[name] = run_pipeline(
                self.dataset(name), first, sigma=None if sigma == "auto" else float(sigma)
            )
        return self.cleaning[name]

    def rows(self, name: str, clean: bool = False) -> list[PlayerMatchRow]:
        ds = self.cleaned(name)[0] if clean else self.dataset(name)
        return to_player_rows(ds)

    def original_split(self):
        return split_samples(self.rows("original"), self.train_end, self.test_end, self.train_start)

    def exclusion_ids(self, names, dataset: str = "original") -> frozenset[str]:
        ids = set()
        for n in names:
            spec = self.cfg["exclusions"][n]
            days = spec["date"] if isinstance(spec["date"], list) else [spec["date"]]
            rec = self._find(self.dataset(dataset), days, spec["player"])
            side = "w" if spec["player"].lower() in rec.player_w.lower() else "l"
            ids.add(f"{rec.match_id}/{side}" if spec.get("side", "player") == "player" else rec.match_id)
        return frozenset(ids)

    @staticmethod
    def _find(ds: Dataset, days, player: str):
        """First date in ``days`` on which ``player`` has exactly one match."""
        errors = []
        for day in days:
            try:
                return find_match(ds, day, player)
            except LookupError as exc:
                errors.append(str(exc))
        raise LookupError("; ".join(errors))

    def strategy(self, table: str, col: dict) -> StrategyRun:
        key = (table, col["label"])
        if key not in self.runs:
            train, test = self.original_split()
            config = StrategyConfig(
                model=col.get("model", "pm"),
                odds_source=ODDS_SOURCES[col.get("odds", "bet365")],
                competitiveness=parse_p_range(col["p_range"]) if col.get("p_range") else None,
                excluded=self.exclusion_ids(col.get("exclude", ())),
                fe=self.fe,
                refit=col.get("refit", True),
            )
            self.runs[key] = run_strategy(train, test, config)
        return self.runs[key]

    # --- tables ---------------------------------------------------------------

    def table(self, name: str, spec: dict) -> Table:
        layout = spec["layout"]
        title = spec.get("title", name)
        if layout == "coefficients":
            train, _ = self.original_split()
            fits = {}
            for col in spec["columns"]:
                sample = apply_competitiveness(train, parse_p_range(col["p_range"])) if col.get("p_range") else train
                fits[col["label"]] = fit_ols(build_design(sample, col.get("model", "pm"), self.fe))
            return coefficient_table(fits, title)
        if layout == "mispricing":
            ds_name = spec.get("dataset", "extended")
            rows = self.rows(ds_name, clean=spec.get("clean", True))
            start = spec.get("start", self.extended_start)
            end = spec.get("end", self.extended_end)
            sample = [r for r in rows if start <= r.date <= end]
            return mispricing_table_render(fit_ols(build_design(sample, spec.get("model", "pm"), self.fe)), title)
        if layout == "strategy":
            summaries, pvals = {}, {}
            for col in spec["columns"]:
                run = self.strategy(name, col)
                summaries[col["label"]] = run.summary
                if col.get("significance"):
                    result = ledger_pvalue(run.ledger, self.trials, self.seed, self.staking)
                    pvals[col["label"]] = result.p_bs
                    self.pvalues[(name, col["label"])] = result.p_bs
            extra = {"p_bs (random strategy)": pvals} if pvals else None
            return strategy_table(summaries, title, extra)
        if layout == "cleaning":
            _, report = self.cleaned(spec.get("dataset", "extended"))
            return cleaning_table(report, title)
        raise ValueError(f"table {name!r}: unknown layout {layout!r}")

    # --- figures --------------------------------------------------------------

    def series(self, spec: dict) -> Series:
        col = next(c for c in self.cfg["tables"][spec["table"]]["columns"] if c["label"] == spec["column"])
        run = self.strategy(spec["table"], col)
        points = [(b.date, b.cumulative) for b in run.ledger.bets]
        if spec.get("extend"):
            # same coefficients, later rows from the extended dataset, profits keep accumulating
            rows = [r for r in self.rows(spec["extend"], clean=True) if self.test_end < r.date <= self.extended_end]
            offset = points[-1][1] if points else 0.0
            later = run_backtest(run.fit, rows, run.config)
            points += [(b.date, offset + b.cumulative) for b in later.bets]
        return Series(spec.get("label", spec["column"]), points, spec.get("style"))

    def figure(self, name: str, spec: dict, out_dir: Path) -> tuple[Path, Path]:
        panels = [[self.series(s) for s in panel] for panel in spec["panels"]]
        def when(m):
            if m == "test_end":
                return self.test_end + timedelta(days=1)
            return m or None

        marker = spec.get("marker")
        marker = [when(m) for m in marker] if isinstance(marker, list) else when(marker)
        return emit_pnl_plot(panels, out_dir / name, marker=marker, titles=spec.get("titles"))


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def replicate_all(config_path: str | Path, out_dir: str | Path, formats=("text", "csv", "json")) -> ReplicationRun:
    """Run every table and figure in the config and write a manifest of output digests."""
    cfg = load_config(config_path)
    rep = Replication(cfg)
    for name in cfg.get("data", {}):
        rep.dataset(name)  # fail fast on missing inputs
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = ReplicationRun(cfg["_digest"], rep.fingerprints)
    for name, spec in cfg.get("tables", {}).items():
        table = rep.table(name, spec)
        files = {}
        for fmt in formats:
            path = out / f"{name}.{FORMATS[fmt]}"
            path.write_text(table.render(fmt))
            files[path.name] = _sha(path)
        run.outputs[f"table:{name}"] = files
        log.info("wrote table %s", name)
    for name, spec in cfg.get("figures", {}).items():
        svg, points = rep.figure(name, spec, out)
        run.outputs[f"figure:{name}"] = {svg.name: _sha(svg), points.name: _sha(points)}
        log.info("wrote figure %s", name)
    (out / "manifest.json").write_text(json.dumps(run.manifest(), indent=2, sort_keys=True) + "\n")
    return run
