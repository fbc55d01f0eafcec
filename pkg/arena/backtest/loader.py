from __future__ import annotations

import datetime
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import pandas as pd

from arena.errors import DataError

logger = logging.getLogger(__name__)

CANONICAL_COLUMNS = ("date", "open", "high", "low", "close", "volume")


@dataclass(frozen=True)
class OhlcvBar:
    date: datetime.date
    open: float
    high: float
    low: float
    close: float
    volume: float


def _check_bar(row, line: int) -> None:
    if min(row.open, row.high, row.low, row.close) <= 0:
        raise DataError("prices must be > 0", line=line)
    if row.low > min(row.open, row.close):
        raise DataError(f"low {row.low} above min(open, close)", line=line)
    if row.high < max(row.open, row.close):
        raise DataError(f"high {row.high} below max(open, close)", line=line)
    if row.volume < 0:
        raise DataError("volume must be >= 0", line=line)


def load_ohlcv_csv(path: str, ticker: str = "", columns: Optional[Mapping[str, str]] = None) -> List[OhlcvBar]:
    """Read one ticker's daily bars, ascending by date.

    ``columns`` maps canonical names (date, open, high, low, close, volume)
    to the headers used in the file; unmapped names are matched
    case-insensitively.
    """
    if not os.path.exists(path):
        raise DataError(f"{ticker or path}: file not found: {path}")

    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    mapping = dict(columns or {})
    lower = {c.strip().lower(): c for c in df.columns}
    rename: Dict[str, str] = {}
    for name in CANONICAL_COLUMNS:
        source = mapping.get(name) or lower.get(name)
        if source is None or source not in df.columns:
            raise DataError(f"{ticker or path}: missing column {name!r}", line=1)
        rename[source] = name
    df = df.rename(columns=rename)[list(CANONICAL_COLUMNS)]

    # header is line 1
    df["line"] = df.index + 2
    df["date"] = pd.to_datetime(df["date"].str.strip(), errors="coerce")
    for name in CANONICAL_COLUMNS[1:]:
        df[name] = pd.to_numeric(df[name].str.strip(), errors="coerce")

    bad = df[df[list(CANONICAL_COLUMNS)].isna().any(axis=1)]
    if not bad.empty:
        raise DataError(f"{ticker or path}: malformed row", line=int(bad["line"].iloc[0]))

    for row in df.itertuples(index=False):
        _check_bar(row, int(row.line))

    dupes = df[df["date"].duplicated(keep="first")]
    if not dupes.empty:
        raise DataError(f"{ticker or path}: duplicate date", line=int(dupes["line"].iloc[0]))

    if not df["date"].is_monotonic_increasing:
        logger.warning("unsorted dates, sorting ticker=%s path=%s", ticker, path)
        df = df.sort_values("date", kind="mergesort")

    return [
        OhlcvBar(
            date=row.date.date(),
            open=float(row.open),
            high=float(row.high),
            low=float(row.low),
            close=float(row.close),
            volume=float(row.volume),
        )
        for row in df.itertuples(index=False)
    ]


def load_universe(data_dir: str, tickers: Sequence[str], columns: Optional[Mapping[str, str]] = None) -> Dict[str, List[OhlcvBar]]:
    """``{data_dir}/{ticker}.csv`` for every ticker."""
    return {t: load_ohlcv_csv(os.path.join(data_dir, f"{t}.csv"), t, columns) for t in tickers}


def slice_bars(
    bars: Mapping[str, Sequence[OhlcvBar]],
    start: Optional[datetime.date] = None,
    end: Optional[datetime.date] = None,
) -> Dict[str, List[OhlcvBar]]:
    """Inclusive date window over every ticker."""
    out: Dict[str, List[OhlcvBar]] = {}
    for ticker, series in bars.items():
        out[ticker] = [
            b for b in series
            if (start is None or b.date >= start) and (end is None or b.date <= end)
        ]
    return out
