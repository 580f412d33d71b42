"""Daily Wikipedia pageviews with an on-disk month cache.

Cache layout under ``cache_dir``::

    index.json                      {profile: {"first_available": ISO date, "months": [...]}}
    <profile>/<YYYY-MM>.csv         date,views  (days absent from a cached month had 0 views)

``fixture`` transport reads only the cache; ``live`` transport fills it from
the Wikimedia per-article endpoint. The endpoint, agent type and request
budget come from ``BUZZ_PAGEVIEWS_URL``, ``BUZZ_PAGEVIEWS_AGENT`` and
``BUZZ_PAGEVIEWS_RPS``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import statistics
import tempfile
import threading
import time
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from urllib.parse import quote

from .errors import CacheMiss, InsufficientHistory, ProfileNotFound, TransportError

log = logging.getLogger(__name__)

API_FLOOR = date(2015, 7, 1)
DEFAULT_URL = "https://wikimedia.org/api/rest_v1/metrics/pageviews/per-article"
WINDOW_DAYS = 366  # trailing median window, also the minimum profile age


@dataclass(frozen=True)
class PageviewSeries:
    profile_key: str
    first_available: date
    counts: dict[date, int]
    start: date  # requested coverage
    end: date

    def views(self, day: date) -> int:
        """Views on ``day``; days the API omitted count as zero."""
        return self.counts.get(day, 0)


def _months(start: date, end: date) -> list[str]:
    out, y, m = [], start.year, start.month
    while (y, m) <= (end.year, end.month):
        out.append(f"{y:04d}-{m:02d}")
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return out


def _safe_name(profile_key: str) -> str:
    return quote(profile_key, safe="")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class PageviewCache:
    def __init__(self, cache_dir: str | Path):
        self.root = Path(cache_dir)
        self._lock = threading.Lock()

    @property
    def index_path(self) -> Path:
        return self.root / "index.json"

    def index(self) -> dict:
        if not self.index_path.exists():
            return {}
        return json.loads(self.index_path.read_text())

    def month_path(self, profile_key: str, month: str) -> Path:
        return self.root / _safe_name(profile_key) / f"{month}.csv"

    def read_month(self, profile_key: str, month: str) -> dict[date, int] | None:
        path = self.month_path(profile_key, month)
        if not path.exists():
            return None
        rows = csv.DictReader(io.StringIO(path.read_text()))
        return {date.fromisoformat(r["date"]): int(r["views"]) for r in rows}

    def write_month(self, profile_key: str, month: str, counts: dict[date, int]) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["date", "views"])
        for day in sorted(counts):
            w.writerow([day.isoformat(), counts[day]])
        _atomic_write(self.month_path(profile_key, month), buf.getvalue())

    def record_profile(self, profile_key: str, first_available: date, months: list[str]) -> None:
        with self._lock:
            index = self.index()
            entry = index.setdefault(profile_key, {"first_available": first_available.isoformat(), "months": []})
            entry["first_available"] = min(date.fromisoformat(entry["first_available"]), first_available).isoformat()
            entry["months"] = sorted(set(entry["months"]) | set(months))
            _atomic_write(self.index_path, json.dumps(index, indent=2, sort_keys=True) + "\n")


class RateLimiter:
    def __init__(self, per_second: float):
        self.interval = 1.0 / per_second if per_second > 0 else 0.0
        self._next = 0.0
        self._lock = threading.Lock()

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            delay = self._next - now
            self._next = max(now, self._next) + self.interval
        if delay > 0:
            time.sleep(delay)


class PageviewClient:
    """Fetch pageview series through the cache.

    ``session`` is anything with a ``get(url, headers=, timeout=)`` method
    returning a response with ``status_code`` and ``json()``; defaults to a
    ``requests.Session``.
    """

    def __init__(
        self,
        cache_dir: str | Path,
        transport: str = "fixture",
        session=None,
        base_url: str | None = None,
        per_second: float | None = None,
        max_retries: int = 4,
        backoff: float = 0.5,
        project: str = "en.wikipedia",
        agent: str | None = None,
    ):
        if transport not in ("fixture", "live"):
            raise ValueError(f"transport must be 'fixture' or 'live', got {transport!r}")
        self.cache = PageviewCache(cache_dir)
        self.transport = transport
        self.base_url = base_url or os.environ.get("BUZZ_PAGEVIEWS_URL", DEFAULT_URL)
        rps = per_second if per_second is not None else float(os.environ.get("BUZZ_PAGEVIEWS_RPS", "10"))
        self.limiter = RateLimiter(rps)
        self.max_retries = max_retries
        self.backoff = backoff
        self.project = project
        self.agent = agent or os.environ.get("BUZZ_PAGEVIEWS_AGENT", "user")
        self._session = session

    @property
    def session(self):
        if self._session is None:
            import requests

            self._session = requests.Session()
        return self._session

    def fetch(self, profile_key: str, start: date, end: date) -> PageviewSeries:
        if start > end:
            raise ValueError(f"start {start} is after end {end}")
        if self.transport == "fixture":
            return self._from_cache(profile_key, start, end)
        try:
            return self._from_cache(profile_key, start, end)
        except CacheMiss:
            self._download(profile_key, start, end)
            return self._from_cache(profile_key, start, end)

    def _from_cache(self, profile_key: str, start: date, end: date) -> PageviewSeries:
        entry = self.cache.index().get(profile_key)
        if entry is None:
            raise CacheMiss(f"no cached pageviews for {profile_key!r}")
        first = date.fromisoformat(entry["first_available"])
        counts: dict[date, int] = {}
        for month in _months(max(start, first), end) if max(start, first) <= end else []:
            data = self.cache.read_month(profile_key, month)
            if data is None:
                raise CacheMiss(f"{profile_key!r} month {month} not cached")
            counts.update({d: v for d, v in data.items() if start <= d <= end and d >= first})
        return PageviewSeries(profile_key, first, counts, start, end)

    def _url(self, profile_key: str, start: date, end: date) -> str:
        title = quote(profile_key.replace(" ", "_"), safe="")
        return (
            f"{self.base_url}/{self.project}/all-access/{self.agent}/{title}/daily/"
            f"{start:%Y%m%d}00/{end:%Y%m%d}00"
        )

    def _get(self, url: str) -> list[dict]:
        last = None
        for attempt in range(self.max_retries + 1):
            self.limiter.wait()
            try:
                resp = self.session.get(url, headers={"User-Agent": "buzzcheck/0.1"}, timeout=30)
            except Exception as exc:  # network layer
                last = exc
            else:
                if resp.status_code == 200:
                    return resp.json().get("items", [])
                if resp.status_code == 404:
                    raise ProfileNotFound(url)
                last = TransportError(f"HTTP {resp.status_code} for {url}")
                if resp.status_code < 500 and resp.status_code != 429:
                    raise last
            if attempt < self.max_retries:
                time.sleep(self.backoff * 2**attempt)
        raise TransportError(f"giving up on {url}: {last}")

    def _download(self, profile_key: str, start: date, end: date) -> None:
        lo = max(start, API_FLOOR)
        items = self._get(self._url(profile_key, lo, end))
        counts = {datetime.strptime(it["timestamp"][:8], "%Y%m%d").date(): int(it["views"]) for it in items}
        if not counts:
            raise ProfileNotFound(f"{profile_key!r} has no pageviews between {lo} and {end}")
        first = max(min(counts), API_FLOOR)
        months = _months(first, end)
        for month in months:
            self.cache.write_month(
                profile_key, month, {d: v for d, v in counts.items() if f"{d:%Y-%m}" == month}
            )
        self.cache.record_profile(profile_key, first, months)


def fetch_daily_pageviews(
    profile_key: str, start: date, end: date, transport: str = "fixture", cache_dir: str | Path = "pageview_cache"
) -> PageviewSeries:
    return PageviewClient(cache_dir, transport=transport).fetch(profile_key, start, end)


def buzz_inputs(series: PageviewSeries, match_date: date, window: int = WINDOW_DAYS) -> tuple[int, float]:
    """Yesterday's views and the median over the ``window`` days before the match."""
    lo, hi = match_date - timedelta(days=window), match_date - timedelta(days=1)
    if series.start > lo or series.end < hi:
        raise InsufficientHistory(
            f"{series.profile_key}: need {lo}..{hi}, series covers {series.start}..{series.end}"
        )
    daily = [series.views(lo + timedelta(days=k)) for k in range(window)]
    return series.views(hi), float(statistics.median(daily))


def profile_age_ok(first_available: date | PageviewSeries, match_date: date) -> bool:
    if isinstance(first_available, PageviewSeries):
        first_available = first_available.first_available
    return (match_date - first_available).days >= WINDOW_DAYS
