from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np

from arena.errors import BacktestError


@dataclass(frozen=True)
class MeanStd:
    mean: float
    std: float


@dataclass(frozen=True)
class Metrics:
    """Metric bundle in percent (SR is dimensionless, NaN when undefined)."""

    tr_pct: float
    mean_pct: float
    std_pct: float
    wr_pct: float
    sr: float

    @property
    def sr_defined(self) -> bool:
        return not math.isnan(self.sr)

    def to_dict(self) -> Dict[str, object]:
        return {
            "tr_pct": self.tr_pct,
            "mean_pct": None if math.isnan(self.mean_pct) else self.mean_pct,
            "std_pct": None if math.isnan(self.std_pct) else self.std_pct,
            "wr_pct": self.wr_pct,
            "sr": self.sr if self.sr_defined else "undefined",
        }


def total_return(c0: float, c1: float) -> float:
    if not c0 > 0:
        raise BacktestError("initial capital must be > 0")
    return (c1 - c0) / c0


def daily_returns(wealth: Sequence[float]) -> np.ndarray:
    w = np.asarray(wealth, dtype=float)
    if w.size < 2:
        return np.empty(0)
    if np.any(w[:-1] <= 0):
        raise BacktestError("wealth must stay > 0 to compute returns")
    return w[1:] / w[:-1] - 1.0


def win_rate(returns: Sequence[float]) -> float:
    r = np.asarray(returns, dtype=float)
    if r.size == 0:
        raise BacktestError("win rate of an empty series")
    # zero-return days count as losses
    return float(np.count_nonzero(r > 0)) / r.size


def mean_std(returns: Sequence[float]) -> MeanStd:
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise BacktestError("mean/std need at least 2 returns")
    return MeanStd(mean=float(r.mean()), std=float(r.std(ddof=1)))


def sharpe(returns: Sequence[float]) -> float:
    """Daily, non-annualised, risk-free rate 0. NaN when the std is 0."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise BacktestError("sharpe needs at least 2 returns")
    if np.all(r == r[0]):
        return math.nan
    ms = mean_std(r)
    if ms.std == 0:
        return math.nan
    return ms.mean / ms.std


def summarize(wealth: Sequence[float]) -> Metrics:
    if len(wealth) < 2:
        raise BacktestError("equity curve needs at least 2 points")
    r = daily_returns(wealth)
    tr = total_return(wealth[0], wealth[-1])
    if r.size >= 2:
        ms = mean_std(r)
        sr = sharpe(r)
        mean, std = ms.mean, ms.std
    else:
        mean, std, sr = float(r.mean()), math.nan, math.nan
    return Metrics(
        tr_pct=tr * 100.0,
        mean_pct=mean * 100.0,
        std_pct=std * 100.0,
        wr_pct=win_rate(r) * 100.0,
        sr=sr,
    )


def format_sr(sr: float) -> str:
    return "undefined" if math.isnan(sr) else f"{sr:.3f}"
