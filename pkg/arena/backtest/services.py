from __future__ import annotations

import datetime
import logging
import os
from dataclasses import asdict
from typing import Dict, List, Optional, Sequence

from arena.agents.pipeline import LLMAgent
from arena.agents.prompts import Modality, RequestOptions
from arena.backtest.ablation import AblationTable, window_ablation
from arena.backtest.engine import BacktestAgent, BacktestReport, align_bars, run_backtest
from arena.backtest.loader import OhlcvBar, load_universe, slice_bars
from arena.backtest.metrics import format_sr
from arena.charts.render import bars_from_history, clear_panels, render_panels
from arena.errors import BacktestError, ConfigError
from arena.llm.gateway import LLMGateway
from arena.models import AgentProfile, MarketConfig, Observation
from arena.runconfig import AgentSpec, RunConfig
from arena.strategies.services import RuleAgent, Strategy
from arena.strategies.tuning import tune_params

logger = logging.getLogger(__name__)

Bars = Dict[str, List[OhlcvBar]]


def load_bars(cfg: RunConfig, data_dir: Optional[str] = None) -> Bars:
    data_dir = data_dir or cfg.backtest.data_dir
    if not data_dir:
        raise ConfigError("backtest needs a data directory (--data or backtest.data_dir)")
    tickers = cfg.backtest.tickers or cfg.tickers
    if not tickers:
        raise ConfigError("backtest needs tickers (backtest.tickers)")
    return load_universe(data_dir, tickers, cfg.backtest.columns or None)


def evaluation_start(bars: Bars, test_start: Optional[datetime.date], window: int) -> int:
    """Index of the first evaluated bar; the bars before it are history only."""
    if test_start is None:
        return window
    dates = [b.date for b in next(iter(align_bars(bars).values()), [])]
    start = next((i for i, d in enumerate(dates) if d >= test_start), len(dates))
    if start < window:
        raise BacktestError(
            f"only {start} bars before {test_start.isoformat()}, the window needs {window}"
        )
    return start


def _chart_source(root: str, run_id: str, agent_id: str, width: int, height: int):
    def _render(obs: Observation) -> List[str]:
        bars = {t: bars_from_history(v.history, []) for t, v in obs.tickers.items()}
        return render_panels(root, run_id, obs.date, agent_id, bars, [], obs.window, width=width, height=height)
    return _render


def make_agent(
    spec: AgentSpec,
    cfg: RunConfig,
    gateways: Dict[str, LLMGateway],
    modality: Optional[Modality] = None,
    chart_root: Optional[str] = None,
    params=None,
    window: Optional[int] = None,
) -> BacktestAgent:
    """Backtest agent for ``spec``: fills at the close, full liquidation allowed.

    LLM agents get their own chart directory per modality and window.
    """
    if spec.backend == "rule":
        return RuleAgent(spec.name, spec.strategy, params or spec.params.to_params(), full_liquidation=True)
    gateway = gateways[spec.backend]
    modality = Modality(modality or spec.modality)
    root = chart_root or os.path.join(cfg.run_dir(), "charts")
    chart_key = f"{cfg.run_id}-{spec.name}-{modality.value}-w{window or cfg.backtest.window}"
    clear_panels(root, chart_key)
    return LLMAgent(
        spec.name,
        gateway,
        modality=modality,
        strategy_text=spec.strategy_text,
        iters=1,
        reflection=spec.reflection,
        profile=AgentProfile(name=spec.name, duration_years=spec.duration_years, profession=spec.profession),
        opts=RequestOptions(
            model=gateway.cfg.model, temperature=cfg.llm.temperature,
            max_tokens=cfg.llm.max_tokens, seed=cfg.seed,
        ),
        market_cfg=MarketConfig(allow_full_liquidation=True),
        charts=_chart_source(root, chart_key, spec.name, cfg.charts.width, cfg.charts.height),
        max_repairs=cfg.llm.max_repairs,
    )


def run_backtests(
    cfg: RunConfig,
    data_dir: Optional[str] = None,
    gateways: Optional[Dict[str, LLMGateway]] = None,
) -> List[BacktestReport]:
    """Every configured agent over the test period, rule parameters tuned on the training one."""
    from arena.simulation.runner import build_gateways

    bt = cfg.backtest
    bars = load_bars(cfg, data_dir)
    history = slice_bars(bars, None, bt.test_end)
    start = evaluation_start(history, bt.test_start, bt.window)
    gateways = gateways if gateways is not None else build_gateways(cfg)

    reports: List[BacktestReport] = []
    for spec in cfg.agents:
        params = None
        extra: Dict[str, object] = {"agent_kind": spec.backend}
        if bt.tune and spec.backend == "rule" and spec.strategy in (Strategy.SMA, Strategy.ZMR):
            train = slice_bars(bars, bt.train_start, bt.train_end)
            tuned = tune_params(train, spec.strategy, window=bt.window, capital=bt.capital)
            params = tuned.params
            extra["tuned_params"] = asdict(params)
        agent = make_agent(spec, cfg, gateways, params=params, window=bt.window)
        reports.append(
            run_backtest(history, agent, window=bt.window, capital=bt.capital, start=start, config=extra)
        )
    return reports


def run_ablation(
    cfg: RunConfig,
    data_dir: Optional[str] = None,
    gateways: Optional[Dict[str, LLMGateway]] = None,
    agent_name: Optional[str] = None,
    windows: Optional[Sequence[int]] = None,
) -> AblationTable:
    """Window ablation for one agent of the config (the first one by default)."""
    from arena.simulation.runner import build_gateways

    bt = cfg.backtest
    specs = {a.name: a for a in cfg.agents}
    if agent_name is not None and agent_name not in specs:
        raise ConfigError(f"unknown agent {agent_name!r}")
    spec = specs[agent_name] if agent_name else cfg.agents[0]
    windows = list(windows or bt.windows)
    bars = slice_bars(load_bars(cfg, data_dir), None, bt.test_end)
    start = evaluation_start(bars, bt.test_start, max(windows)) if windows else None
    gateways = gateways if gateways is not None else build_gateways(cfg)
    modalities = [m.value for m in bt.modalities] if spec.backend != "rule" else ["textual"]

    def _factory(modality: str, window: int) -> BacktestAgent:
        return make_agent(spec, cfg, gateways, modality=Modality(modality), window=window)

    return window_ablation(
        bars, _factory, windows=windows, modalities=modalities,
        capital=bt.capital, workers=bt.workers, start=start,
    )


def render_backtests(reports: Sequence[BacktestReport]) -> str:
    width = max([len(r.agent_id) for r in reports] + [5])
    lines = [f"{'Agent':<{width}} {'TR':>9} {'Mean':>9} {'Std':>9} {'WR':>8} {'SR':>10} {'Avg.Trend':>10} {'Δ':>9}"]
    for r in reports:
        m = r.metrics
        lines.append(
            f"{r.agent_id:<{width}} {m.tr_pct:>9.2f} {m.mean_pct:>9.3f} {m.std_pct:>9.3f} {m.wr_pct:>8.2f} "
            f"{format_sr(m.sr):>10} {r.trend.avg:>10.2f} {r.delta_pct:>9.2f}"
        )
    return "\n".join(lines) + "\n"
