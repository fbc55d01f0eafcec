from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from arena.backtest.engine import DEFAULT_CAPITAL, BacktestAgent, BacktestReport, run_backtest
from arena.backtest.loader import OhlcvBar
from arena.backtest.metrics import format_sr
from arena.errors import BacktestError

logger = logging.getLogger(__name__)

DEFAULT_WINDOWS: Tuple[int, ...] = (5, 10, 15, 20)

AgentFactory = Callable[[str, int], BacktestAgent]


@dataclass
class AblationRow:
    modality: str
    window: int
    report: BacktestReport


@dataclass
class AblationTable:
    rows: List[AblationRow] = field(default_factory=list)

    COLUMNS = ("Modality", "Window", "TR", "Mean", "Std", "WR", "SR")

    def to_dict(self) -> List[Dict[str, object]]:
        return [
            {"modality": r.modality, "window": r.window, **r.report.metrics.to_dict()}
            for r in self.rows
        ]

    def render(self) -> str:
        lines = [
            f"{'Modality':<10} {'Window':>6} {'TR':>9} {'Mean':>9} {'Std':>9} {'WR':>8} {'SR':>10}"
        ]
        for r in self.rows:
            m = r.report.metrics
            lines.append(
                f"{r.modality:<10} {r.window:>6d} {m.tr_pct:>9.2f} {m.mean_pct:>9.3f} "
                f"{m.std_pct:>9.3f} {m.wr_pct:>8.2f} {format_sr(m.sr):>10}"
            )
        return "\n".join(lines) + "\n"


def window_ablation(
    bars: Mapping[str, Sequence[OhlcvBar]],
    agent_factory: AgentFactory,
    windows: Sequence[int] = DEFAULT_WINDOWS,
    modalities: Sequence[str] = ("textual",),
    capital: float = DEFAULT_CAPITAL,
    workers: int = 4,
    start: Optional[int] = None,
) -> AblationTable:
    """One backtest per (modality, window), all over the same evaluation days.

    ``start`` is the first evaluated bar; it defaults to the largest window.
    """
    if not windows:
        raise BacktestError("no windows to ablate")
    if start is None:
        start = max(windows)
    elif start < max(windows):
        raise BacktestError(f"start {start} is shorter than the largest window {max(windows)}")
    cells = [(m, w) for m in modalities for w in windows]

    def _run(cell: Tuple[str, int]) -> AblationRow:
        modality, window = cell
        agent = agent_factory(modality, window)
        report = run_backtest(
            bars, agent, window=window, capital=capital, start=start, config={"modality": modality}
        )
        return AblationRow(modality=modality, window=window, report=report)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(_run, cells))
    logger.info("window ablation done cells=%d", len(rows))
    return AblationTable(rows=rows)
