from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from arena.errors import StrategyError
from arena.models import StrategyParams


class Direction(str, Enum):
    LONG_ENTRY = "long_entry"
    EXIT = "exit"
    HOLD = "hold"


@dataclass(frozen=True)
class Signal:
    direction: Direction
    strength: Optional[float] = None

    def __post_init__(self):
        if self.direction is Direction.HOLD and self.strength is not None:
            raise StrategyError("hold signal carries no strength")
        if self.direction is not Direction.HOLD:
            if self.strength is None or not 0.0 <= self.strength <= 1.0:
                raise StrategyError("strength must be in [0, 1]")

    @classmethod
    def hold(cls) -> "Signal":
        return cls(Direction.HOLD)


@dataclass(frozen=True)
class MacdResult:
    macd_line: np.ndarray
    signal_line: np.ndarray
    histogram: np.ndarray


def _series(prices: Sequence[float]) -> np.ndarray:
    return np.asarray(prices, dtype=float)


def _strength(gap: float, price: float) -> float:
    # 1% of price saturates
    if price <= 0:
        return 1.0
    return float(min(1.0, abs(gap) / (0.01 * price)))


# ---------------------------------------------------------------------------
# Moyennes
# ---------------------------------------------------------------------------

def sma(prices: Sequence[float], window: int) -> np.ndarray:
    arr = _series(prices)
    if window < 1:
        raise StrategyError("window must be >= 1")
    if arr.size < window:
        raise StrategyError(f"series of {arr.size} points shorter than window {window}")
    return sliding_window_view(arr, window).mean(axis=1)


def ema(prices: Sequence[float], span: int) -> np.ndarray:
    arr = _series(prices)
    if span < 1:
        raise StrategyError("span must be >= 1")
    if arr.size == 0:
        raise StrategyError("empty series")
    alpha = 2.0 / (span + 1.0)
    if alpha == 1.0:
        return arr.copy()
    out = np.empty_like(arr)
    out[0] = arr[0]
    for i in range(1, arr.size):
        # incremental form keeps a constant series exactly constant
        out[i] = out[i - 1] + alpha * (arr[i] - out[i - 1])
    return out


def macd(prices: Sequence[float], params: StrategyParams = StrategyParams()) -> MacdResult:
    arr = _series(prices)
    if arr.size < params.macd_slow:
        raise StrategyError(f"macd needs {params.macd_slow} points, got {arr.size}")
    line = ema(arr, params.macd_fast) - ema(arr, params.macd_slow)
    signal = ema(line, params.macd_signal)
    return MacdResult(macd_line=line, signal_line=signal, histogram=line - signal)


def cross_above(a: np.ndarray, b: np.ndarray, i: int) -> bool:
    return i >= 1 and a[i - 1] <= b[i - 1] and a[i] > b[i]


def cross_below(a: np.ndarray, b: np.ndarray, i: int) -> bool:
    return i >= 1 and a[i - 1] >= b[i - 1] and a[i] < b[i]


# ---------------------------------------------------------------------------
# Signaux
# ---------------------------------------------------------------------------

def sma_signal(prices: Sequence[float], params: StrategyParams) -> Signal:
    """Golden cross -> entry, death cross -> exit, on the last bar."""
    arr = _series(prices)
    if arr.size < params.sma_long + 1:
        return Signal.hold()
    # last two points of each average line up on the last two bars
    short = sma(arr, params.sma_short)[-2:]
    long_ = sma(arr, params.sma_long)[-2:]
    if cross_above(short, long_, 1):
        return Signal(Direction.LONG_ENTRY, _strength(short[1] - long_[1], arr[-1]))
    if cross_below(short, long_, 1):
        return Signal(Direction.EXIT, _strength(short[1] - long_[1], arr[-1]))
    return Signal.hold()


def macd_signal(prices: Sequence[float], params: StrategyParams) -> Signal:
    arr = _series(prices)
    if arr.size < params.macd_slow + 1:
        return Signal.hold()
    res = macd(arr, params)
    i = arr.size - 1
    if cross_above(res.macd_line, res.signal_line, i):
        return Signal(Direction.LONG_ENTRY, _strength(res.histogram[i], arr[-1]))
    if cross_below(res.macd_line, res.signal_line, i):
        return Signal(Direction.EXIT, _strength(res.histogram[i], arr[-1]))
    return Signal.hold()


def zmr_signal(prices: Sequence[float], params: StrategyParams, position_age: Optional[int] = None) -> Signal:
    """Zone mean reversion over the last ``zmr_window`` closes.

    ``position_age`` is None when flat, else days since entry. Below the
    lower band is an entry; at or above the mean (which covers the upper
    band) is an exit whether or not a position is open, so a flat agent
    gets an exit it has nothing to sell for.
    """
    arr = _series(prices)
    if arr.size < params.zmr_window:
        raise StrategyError(f"zmr needs {params.zmr_window} points, got {arr.size}")
    if position_age is not None and position_age >= params.zmr_hold:
        return Signal(Direction.EXIT, 1.0)

    window = arr[-params.zmr_window:]
    mu = float(window.mean())
    sigma = float(window.std())
    last = float(arr[-1])
    if sigma == 0.0:
        return Signal.hold()

    z = (last - mu) / sigma
    if last < mu - params.zmr_k * sigma:
        return Signal(Direction.LONG_ENTRY, float(min(1.0, abs(z) / (params.zmr_k * 2 or 1.0))))
    if last >= mu:
        return Signal(Direction.EXIT, float(min(1.0, abs(z) / (params.zmr_k or 1.0))))
    return Signal.hold()
