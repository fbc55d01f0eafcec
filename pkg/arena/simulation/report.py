from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Union

from openpyxl import Workbook
from openpyxl.utils import get_column_letter

from arena import create_market
from arena.backtest.metrics import Metrics, format_sr, summarize, total_return
from arena.errors import BacktestError, ConfigError
from arena.runconfig import parse_run_config
from arena.simulation.eventlog import EventLog

logger = logging.getLogger(__name__)

COLUMNS = ("Agent", "TR", "Mean", "Std", "WR", "SR", "Avg.Trend", "Δ")


@dataclass(frozen=True)
class AgentRow:
    agent_id: str
    kind: str
    metrics: Metrics
    trend_pct: float
    # vs baseline, baseline = 100
    rel_tr: Optional[float] = None
    rel_sr: Optional[float] = None

    @property
    def delta_pct(self) -> float:
        return self.metrics.tr_pct - self.trend_pct


@dataclass
class ArenaReport:
    run_id: str
    days: int
    rows: List[AgentRow]
    trend: Dict[str, float]
    curves: Dict[str, List[float]]
    closes: Dict[str, List[float]]
    baseline: Optional[str] = None

    @property
    def trend_avg(self) -> float:
        return math.fsum(self.trend.values()) / len(self.trend) if self.trend else 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "run_id": self.run_id,
            "days": self.days,
            "baseline": self.baseline,
            "trend": {"per_ticker": dict(self.trend), "avg": self.trend_avg},
            "agents": [
                {
                    "agent_id": r.agent_id,
                    "kind": r.kind,
                    **r.metrics.to_dict(),
                    "avg_trend_pct": r.trend_pct,
                    "delta_pct": r.delta_pct,
                    "rel_tr": r.rel_tr,
                    "rel_sr": r.rel_sr,
                }
                for r in self.rows
            ],
        }

    def render(self) -> str:
        width = max([len(c) for c in (r.agent_id for r in self.rows)] + [5])
        head = f"{'Agent':<{width}} {'TR':>9} {'Mean':>9} {'Std':>9} {'WR':>8} {'SR':>10} {'Avg.Trend':>10} {'Δ':>9}"
        if self.baseline:
            head += f" {'TR/base':>9} {'SR/base':>9}"
        lines = [head]
        for r in self.rows:
            m = r.metrics
            line = (
                f"{r.agent_id:<{width}} {m.tr_pct:>9.2f} {_num(m.mean_pct, 3):>9} {_num(m.std_pct, 3):>9} "
                f"{m.wr_pct:>8.2f} {format_sr(m.sr):>10} {r.trend_pct:>10.2f} {r.delta_pct:>9.2f}"
            )
            if self.baseline:
                line += f" {_num(r.rel_tr, 1):>9} {_num(r.rel_sr, 1):>9}"
            lines.append(line)
        return "\n".join(lines) + "\n"

    # --- exports ------------------------------------------------------------

    def to_xlsx(self, path: str) -> str:
        wb = Workbook()
        ws = wb.active
        ws.title = "Synthese"
        ws.append([f"Run {self.run_id}: {self.days} days"])
        header = list(COLUMNS) + (["TR/base", "SR/base"] if self.baseline else [])
        ws.append(header)
        for r in self.rows:
            m = r.metrics
            row = [r.agent_id, m.tr_pct, _cell(m.mean_pct), _cell(m.std_pct), m.wr_pct,
                   m.sr if m.sr_defined else "undefined", r.trend_pct, r.delta_pct]
            if self.baseline:
                row += [r.rel_tr, r.rel_sr]
            ws.append(row)
        ws.column_dimensions[get_column_letter(1)].width = 20
        for col_idx in range(2, len(header) + 1):
            ws.column_dimensions[get_column_letter(col_idx)].width = 12

        ws2 = wb.create_sheet("Richesse")
        names = [r.agent_id for r in self.rows]
        ws2.append(["Day"] + names)
        days = max((len(c) for c in self.curves.values()), default=0)
        for d in range(days):
            ws2.append([d - 1] + [_at(self.curves.get(n, []), d) for n in names])

        ws3 = wb.create_sheet("Cours")
        tickers = sorted(self.closes)
        ws3.append(["Day"] + tickers)
        for d in range(max((len(c) for c in self.closes.values()), default=0)):
            ws3.append([d - 1] + [_at(self.closes[t], d) for t in tickers])

        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        wb.save(path)
        return path

    def plot(self, out_dir: str, width: int = 640, height: int = 480) -> List[str]:
        from arena.charts.render import ChartSpec, render_equity_curves, render_price_line

        paths = [
            render_equity_curves(
                self.curves, ChartSpec("equity", width, height, title=f"Wealth, run {self.run_id}"),
                os.path.join(out_dir, "equity.png"),
            )
        ]
        for ticker, closes in sorted(self.closes.items()):
            if len(closes) >= 2:
                paths.append(render_price_line(
                    closes, ChartSpec("line", width, height, title=f"Stock {ticker}"),
                    os.path.join(out_dir, f"{ticker}_line.png"), start=-1,
                ))
        return paths


def _num(v: Optional[float], digits: int) -> str:
    if v is None or math.isnan(v):
        return "n/a"
    return f"{v:.{digits}f}"


def _cell(v: float) -> Optional[float]:
    return None if math.isnan(v) else v


def _at(series: List[float], i: int) -> Optional[float]:
    return series[i] if i < len(series) else None


def _relative(value: float, base: float) -> Optional[float]:
    if math.isnan(value) or math.isnan(base) or base == 0:
        return None
    return 100.0 + (value - base) / abs(base) * 100.0


# ---------------------------------------------------------------------------
# Construction depuis un journal
# ---------------------------------------------------------------------------

def build_report(log: Union[EventLog, str], baseline: Optional[str] = None) -> ArenaReport:
    """Per-agent metrics from the ``metric`` and ``roll_day`` events of a run.

    Day ``-1`` of every curve is the opening state built from the header.
    """
    if isinstance(log, str):
        log = EventLog.load(log)
    cfg = parse_run_config(log.config)
    market = create_market(cfg)

    curves: Dict[str, List[float]] = {a: [market.wealth(a)] for a in market.accounts}
    for rec in log.of_type("metric"):
        curves[rec["agent_id"]].append(float(rec["wealth"]))

    closes: Dict[str, List[float]] = {t: [s.price_curr] for t, s in market.stocks.items()}
    rolls = log.of_type("roll_day")
    for rec in rolls:
        for t, c in rec["closes"].items():
            closes[t].append(float(c))
    trend = {t: total_return(c[0], c[-1]) * 100.0 for t, c in closes.items()}
    trend_avg = math.fsum(trend.values()) / len(trend) if trend else 0.0

    kinds = {a.name: ("rule" if a.backend == "rule" else "llm") for a in cfg.agents}
    rows: List[AgentRow] = []
    for agent_id, wealth in curves.items():
        try:
            metrics = summarize(wealth)
        except BacktestError as exc:
            logger.warning("agent left out of the report agent=%s reason=%s", agent_id, exc)
            continue
        rows.append(AgentRow(agent_id=agent_id, kind=kinds.get(agent_id, "llm"), metrics=metrics, trend_pct=trend_avg))

    if baseline is not None:
        base = next((r for r in rows if r.agent_id == baseline), None)
        if base is None:
            raise ConfigError(f"baseline agent {baseline!r} not in the run")
        rows = [
            AgentRow(
                agent_id=r.agent_id, kind=r.kind, metrics=r.metrics, trend_pct=r.trend_pct,
                rel_tr=_relative(r.metrics.tr_pct, base.metrics.tr_pct),
                rel_sr=_relative(r.metrics.sr, base.metrics.sr),
            )
            for r in rows
        ]
    return ArenaReport(
        run_id=log.header.get("run_id", cfg.run_id),
        days=len(rolls),
        rows=rows,
        trend=trend,
        curves=curves,
        closes=closes,
        baseline=baseline,
    )
