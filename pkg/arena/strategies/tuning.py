from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import List, Mapping, Optional, Sequence

from arena.errors import StrategyError
from arena.models import StrategyParams
from arena.strategies.services import RuleAgent, Strategy

logger = logging.getLogger(__name__)

SMA_WINDOWS = (5, 10, 15, 20)
ZMR_KS = (1.5, 2.0, 2.5)
ZMR_HOLDS = (3, 5, 10)


@dataclass(frozen=True)
class TuningResult:
    params: StrategyParams
    sr: float
    tr_pct: float


def default_grid(strategy: Strategy, base: StrategyParams = StrategyParams()) -> List[StrategyParams]:
    strategy = Strategy(strategy)
    if strategy is Strategy.SMA:
        return [
            replace(base, sma_short=s, sma_long=l)
            for s, l in itertools.combinations(SMA_WINDOWS, 2)
        ]
    if strategy is Strategy.ZMR:
        return [replace(base, zmr_k=k, zmr_hold=h) for k in ZMR_KS for h in ZMR_HOLDS]
    return [base]


def _rank_key(result: TuningResult):
    # undefined SR ranks last; TR breaks ties
    sr = -math.inf if math.isnan(result.sr) else result.sr
    return (sr, result.tr_pct)


def tune_params(
    bars: Mapping[str, Sequence],
    strategy: Strategy,
    grid: Optional[Sequence[StrategyParams]] = None,
    window: int = 20,
    capital: float = 100000.0,
) -> TuningResult:
    """Pick the grid point with the best training-slice Sharpe ratio."""
    from arena.backtest.engine import run_backtest

    strategy = Strategy(strategy)
    grid = list(grid) if grid is not None else default_grid(strategy)
    if not grid:
        raise StrategyError("empty parameter grid")

    results: List[TuningResult] = []
    for params in grid:
        agent = RuleAgent(f"tune-{strategy.value}", strategy, params, full_liquidation=True)
        report = run_backtest(bars, agent, window=window, capital=capital)
        results.append(TuningResult(params=params, sr=report.sr, tr_pct=report.tr_pct))

    # first best wins on exact ties, keeping grid order stable
    best = results[0]
    for r in results[1:]:
        if _rank_key(r) > _rank_key(best):
            best = r
    logger.info("tuned strategy=%s params=%s sr=%s tr=%.4f", strategy.value, best.params, best.sr, best.tr_pct)
    return best
