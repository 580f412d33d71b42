from __future__ import annotations

import sys
from collections import defaultdict
from datetime import date
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import SYNTH_SCHEMA, synthetic_csv  # noqa: E402

from buzzcheck.ingest import normalize_dataset, parse_match_file, split_samples, to_player_rows  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, name): acceptance criterion reported in the summary")


# --- one PASS/FAIL line per acceptance criterion ------------------------------

_results: dict[int, dict] = defaultdict(lambda: {"name": "", "outcomes": []})


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when == "teardown" or (call.when == "setup" and call.excinfo is None):
        return
    number, name = mark.args
    entry = _results[number]
    entry["name"] = name
    entry["outcomes"].append((item.name, call.excinfo is None, None if call.excinfo is None else call.excinfo.exconly()))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        ok = all(passed for _, passed, _ in entry["outcomes"])
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {entry['name']}")
        for test, passed, reason in entry["outcomes"]:
            if not passed:
                tr.write_line(f"        {test}: {reason.splitlines()[0][:160]}")


# --- shared data ------------------------------------------------------------------


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def synth_text() -> str:
    return synthetic_csv(young=10, b365_above_best=5, missing=3, best_outliers=4)


@pytest.fixture(scope="session")
def synth_dataset(synth_text):
    return normalize_dataset(parse_match_file(synth_text, SYNTH_SCHEMA))


@pytest.fixture(scope="session")
def clean_synth_dataset():
    return normalize_dataset(parse_match_file(synthetic_csv(seed=11), SYNTH_SCHEMA))


@pytest.fixture(scope="session")
def synth_rows(clean_synth_dataset):
    return to_player_rows(clean_synth_dataset)


@pytest.fixture(scope="session")
def synth_split(synth_rows):
    return split_samples(synth_rows, date(2018, 12, 31), date(2020, 2, 29))


@pytest.fixture(scope="session")
def replication_config(tmp_path_factory):
    """The shipped replication config pointed at synthetic original/extended corpora."""
    root = tmp_path_factory.mktemp("replication")
    appendix = (FIXTURES / "appendix_rows.csv").read_text().split("\n", 1)[1]
    original = synthetic_csv(seed=31, end=date(2020, 2, 24)) + appendix
    extended = synthetic_csv(seed=32, start=date(2015, 7, 6), end=date(2023, 8, 28), matches_per_week=12,
                             young=6, b365_above_best=4, missing=5, best_outliers=3) + appendix
    (root / "original.csv").write_text(original)
    (root / "extended.csv").write_text(extended)
    text = (Path(__file__).parents[1] / "configs" / "replication.toml").read_text()
    text = text.replace('"../data/rrs_original.csv"', '"original.csv"').replace('"../data/extended_raw.csv"', '"extended.csv"')
    text = text.replace("trials = 100000", "trials = 2000")
    path = root / "replication.toml"
    path.write_text(text)
    return path
