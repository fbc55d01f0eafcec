from __future__ import annotations

import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, TypeVar

from arena import __version__, create_market
from arena.agents.pipeline import LLMAgent, validate_action
from arena.agents.prompts import RequestOptions
from arena.charts.render import bars_from_history, clear_panels, render_panels
from arena.chat.pool import ChatMessage, ChatPool
from arena.llm.gateway import GatewayConfig, HttpBackend, LLMGateway
from arena.llm.stub import ArenaStubResponder, StubBackend
from arena.market.engine import Market
from arena.memory.services import MemoryStore
from arena.models import Observation, Op, Order, TradeRecord
from arena.runconfig import AgentSpec, RunConfig
from arena.simulation.eventlog import EventLog
from arena.strategies.services import RuleAgent

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class RosterEntry:
    spec: AgentSpec
    agent: object

    @property
    def agent_id(self) -> str:
        return self.spec.name

    @property
    def is_llm(self) -> bool:
        return isinstance(self.agent, LLMAgent)


@dataclass
class ArenaContext:
    cfg: RunConfig
    market: Market
    log: EventLog
    pool: ChatPool
    roster: Dict[str, RosterEntry]
    chart_root: str
    store: Optional[MemoryStore] = None
    trades: List[TradeRecord] = field(default_factory=list)
    workers: int = 4

    def map(self, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """Parallel map; results come back in input order."""
        if len(items) <= 1 or self.workers <= 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(max_workers=min(self.workers, len(items))) as ex:
            return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def build_gateways(cfg: RunConfig, trace_path: Optional[str] = None) -> Dict[str, LLMGateway]:
    gw_cfg = GatewayConfig.from_env(model=cfg.llm.model)
    gateways: Dict[str, LLMGateway] = {}
    backends = {a.backend for a in cfg.agents}
    if "stub" in backends:
        stub = StubBackend(responder=ArenaStubResponder(seed=cfg.seed))
        gateways["stub"] = LLMGateway(gw_cfg, stub, trace_path=trace_path)
    if "llm" in backends:
        gateways["llm"] = LLMGateway(gw_cfg, HttpBackend(), trace_path=trace_path)
    return gateways


def _chart_source(ctx_ref: List[ArenaContext], agent_id: str) -> Callable[[Observation], List[str]]:
    def _render(obs: Observation) -> List[str]:
        ctx = ctx_ref[0]
        bars = {
            t: bars_from_history(s.history, s.bars)
            for t, s in ctx.market.stocks.items()
        }
        return render_panels(
            ctx.chart_root, ctx.cfg.run_id, obs.date, agent_id, bars, ctx.trades, obs.window,
            ticker_kinds=ctx.cfg.charts.ticker_kinds, width=ctx.cfg.charts.width, height=ctx.cfg.charts.height,
        )
    return _render


def build_roster(
    cfg: RunConfig,
    market: Market,
    gateways: Dict[str, LLMGateway],
    ctx_ref: List[ArenaContext],
) -> Dict[str, RosterEntry]:
    roster: Dict[str, RosterEntry] = {}
    market_cfg = market.cfg
    for spec in cfg.agents:
        if spec.backend == "rule":
            agent = RuleAgent(spec.name, spec.strategy, spec.params.to_params(), market_cfg.allow_full_liquidation)
        else:
            gateway = gateways[spec.backend]
            opts = RequestOptions(
                model=gateway.cfg.model,
                temperature=cfg.llm.temperature,
                max_tokens=cfg.llm.max_tokens,
                seed=cfg.seed,
            )
            agent = LLMAgent(
                spec.name,
                gateway,
                modality=spec.modality,
                strategy_text=spec.strategy_text,
                iters=cfg.iters,
                reflection=spec.reflection,
                profile=market.account(spec.name).profile,
                opts=opts,
                market_cfg=market_cfg,
                charts=_chart_source(ctx_ref, spec.name),
                max_repairs=cfg.llm.max_repairs,
            )
        roster[spec.name] = RosterEntry(spec=spec, agent=agent)
    return roster


# ---------------------------------------------------------------------------
# Phases d'une journée
# ---------------------------------------------------------------------------

def _error(ctx: ArenaContext, date: int, agent_id: str, stage: str, exc: BaseException, iter: Optional[int] = None) -> None:
    logger.exception("agent failed, holding agent=%s stage=%s date=%d", agent_id, stage, date)
    ctx.log.append("error", date=date, iter=iter, agent_id=agent_id, stage=stage, error=f"{type(exc).__name__}: {exc}")


def phase_gossip(ctx: ArenaContext, date: int) -> None:
    """End of day: each LLM agent posts a rumor drawn from today's analysis, read from tomorrow on."""
    if not ctx.cfg.chat.enabled:
        return
    llm = [e for e in ctx.roster.values() if e.is_llm and e.agent.report is not None]
    if not llm:
        return
    window = ctx.cfg.window

    def _one(entry: RosterEntry) -> Optional[str]:
        try:
            return entry.agent.gossip(ctx.market.observe(entry.agent_id, window))
        except Exception as exc:
            _error(ctx, date, entry.agent_id, "gossip", exc)
            return None

    for entry, text in zip(llm, ctx.map(_one, llm)):
        if text:
            msg = ChatMessage(date=date, author_id=entry.agent_id, text=text)
            ctx.pool.post(msg)
            ctx.log.append("chat", **msg.to_event())


def phase_fetch(ctx: ArenaContext, date: int) -> Dict[str, List[str]]:
    gossip: Dict[str, List[str]] = {}
    limit = ctx.cfg.chat.fetch_limit if ctx.cfg.chat.enabled else 0
    for agent_id, entry in ctx.roster.items():
        texts = [m.text for m in ctx.pool.fetch(date, limit)] if entry.is_llm else []
        gossip[agent_id] = texts
        ctx.log.append("gossip_fetch", date=date, agent_id=agent_id, messages=texts)
    return gossip


def phase_analysis(ctx: ArenaContext, date: int, gossip: Dict[str, List[str]]) -> None:
    llm = [e for e in ctx.roster.values() if e.is_llm]
    for e in llm:
        e.agent.open_day(date, ctx.market.wealth(e.agent_id))
    # chart files are shared per day: render them before the parallel calls
    observations = {
        e.agent_id: ctx.market.observe(e.agent_id, ctx.cfg.window, gossip[e.agent_id], e.agent.strategy.text)
        for e in llm
    }

    def _one(entry: RosterEntry):
        try:
            return entry.agent.analyze(observations[entry.agent_id])
        except Exception as exc:
            _error(ctx, date, entry.agent_id, "analysis", exc)
            return None

    for e in llm:
        if e.agent.modality.needs_charts:
            try:
                e.agent.charts(observations[e.agent_id])
            except Exception as exc:
                _error(ctx, date, e.agent_id, "charts", exc)
    for entry, report in zip(llm, ctx.map(_one, llm)):
        if report is not None:
            ctx.log.append(
                "analysis", date=date, agent_id=entry.agent_id, findings=list(report.results), failed=report.failed
            )


def phase_round(ctx: ArenaContext, date: int, iter: int, gossip: Dict[str, List[str]]) -> None:
    """One decision round: every agent sees the state at round start, orders execute in roster order."""
    ids = ctx.market.roster(date, iter)
    observations = {
        a: ctx.market.observe(
            a, ctx.cfg.window, gossip[a],
            ctx.roster[a].agent.strategy.text if ctx.roster[a].is_llm else "",
        )
        for a in ids
    }

    def _one(agent_id: str) -> List[Order]:
        entry = ctx.roster[agent_id]
        obs = observations[agent_id]
        try:
            if entry.is_llm:
                return [entry.agent.decide(obs, iter).order]
            return entry.agent.decide_orders(obs, ctx.market.account(agent_id), iter)
        except Exception as exc:
            _error(ctx, date, agent_id, "decision", exc, iter=iter)
            return [Order.hold(agent_id, date, iter)]

    decisions = ctx.map(_one, ids)
    for agent_id, orders in zip(ids, decisions):
        entry = ctx.roster[agent_id]
        for order in orders:
            verdict = validate_action(order, ctx.market.account(agent_id), ctx.market.stocks, ctx.market.cfg)
            ctx.log.append(
                "decision", date=date, iter=iter, agent_id=agent_id, kind=entry.agent.kind,
                op=order.op.value, ticker=order.ticker, qty=order.qty, price_deal=order.price_deal,
                ok=verdict.ok, reason=verdict.reason.value if verdict.reason else None,
            )
            if order.op is Op.HOLD:
                continue
            record = ctx.market.submit(order)
            if record.accepted != verdict.ok:
                logger.error("validation and execution disagree agent=%s order=%s", agent_id, order)
            ctx.log.append("trade", **record.to_event())
            ctx.trades.append(record)
            if not entry.is_llm:
                entry.agent.notify(record)


def phase_cash_flows(ctx: ArenaContext, date: int) -> None:
    for flow in ctx.market.pay_dividends(date):
        ctx.log.append("dividend", **flow.to_event())
    for flow in ctx.market.charge_wealth_fee():
        ctx.log.append("fee", **flow.to_event())


def phase_reflection(ctx: ArenaContext, date: int) -> None:
    llm = [e for e in ctx.roster.values() if e.is_llm]
    prices = {t: s.price_curr for t, s in ctx.market.stocks.items()}

    def _one(entry: RosterEntry):
        previous = entry.agent.strategy.text
        try:
            evaluation, scored = entry.agent.close_day(ctx.market.wealth(entry.agent_id), prices)
            return previous, evaluation, scored
        except Exception as exc:
            _error(ctx, date, entry.agent_id, "reflection", exc)
            return None

    for entry, result in zip(llm, ctx.map(_one, llm)):
        if ctx.store is not None and entry.agent.memory is not None:
            ctx.store.flush_day(entry.agent_id, entry.agent.memory)
        if result is None or not entry.agent.reflection:
            continue
        previous, evaluation, scored = result
        ctx.log.append("evaluation", date=date, agent_id=entry.agent_id, score=scored.score, text=evaluation)
        ctx.log.append(
            "strategy", date=date, agent_id=entry.agent_id, score=scored.score,
            text=previous, next_text=entry.agent.strategy.text,
        )
        if ctx.store is not None:
            ctx.store.append_entry(entry.agent_id, scored)


def phase_roll(ctx: ArenaContext, date: int) -> None:
    closes = ctx.market.close_day()
    ctx.log.append("roll_day", date=date, closes=closes)
    ctx.market.audit()
    for agent_id, account in ctx.market.accounts.items():
        history = account.wealth_history
        prev, now = history[-2], history[-1]
        ctx.log.append(
            "metric", date=date, agent_id=agent_id, wealth=now, cash=account.cash,
            daily_return=(now - prev) / prev if prev else 0.0,
        )


# ---------------------------------------------------------------------------
# Boucle principale
# ---------------------------------------------------------------------------

def run_arena(
    cfg: RunConfig,
    out_dir: Optional[str] = None,
    trace_llm: bool = False,
    gateways: Optional[Dict[str, LLMGateway]] = None,
) -> EventLog:
    """Run the closed-loop arena for ``cfg.days`` days.

    With ``out_dir`` the log goes to ``{out_dir}/events.jsonl`` next to the
    memory files, charts and the optional ``llm_trace.jsonl``.
    """
    log_path = os.path.join(out_dir, "events.jsonl") if out_dir else None
    trace_path = os.path.join(out_dir, "llm_trace.jsonl") if (out_dir and trace_llm) else None
    if trace_path and os.path.exists(trace_path):
        os.remove(trace_path)

    market = create_market(cfg)
    owned = gateways is None
    gateways = build_gateways(cfg, trace_path) if owned else gateways
    scratch = None if out_dir else tempfile.TemporaryDirectory(prefix="arena-charts-")
    chart_root = os.path.join(out_dir, "charts") if out_dir else scratch.name
    clear_panels(chart_root, cfg.run_id)

    ctx_ref: List[ArenaContext] = []
    roster = build_roster(cfg, market, gateways, ctx_ref)
    log = EventLog({"version": __version__, "run_id": cfg.run_id, "config": cfg.echo()}, path=log_path)
    ctx = ArenaContext(
        cfg=cfg,
        market=market,
        log=log,
        pool=ChatPool(),
        roster=roster,
        chart_root=chart_root,
        store=MemoryStore(out_dir) if out_dir else None,
        workers=cfg.llm.workers,
    )
    ctx_ref.append(ctx)
    if ctx.store is not None:
        ctx.store.reset()
    for msg in ctx.pool.seed(cfg.chat.seed_gossip):
        log.append("chat", **msg.to_event())

    logger.info("arena start run=%s agents=%d days=%d iters=%d", cfg.run_id, len(roster), cfg.days, cfg.iters)
    try:
        for date in range(cfg.days):
            ctx.pool.open_day(date)
            gossip = phase_fetch(ctx, date)
            phase_analysis(ctx, date, gossip)
            for iter in range(cfg.iters):
                phase_round(ctx, date, iter, gossip)
            phase_gossip(ctx, date)
            phase_cash_flows(ctx, date)
            phase_reflection(ctx, date)
            phase_roll(ctx, date)
            logger.info("day closed run=%s date=%d cash=%.2f", cfg.run_id, date, market.total_cash())
        log.append("final", state=market.snapshot(), ledger=market.ledger.to_dict())
    finally:
        log.close()
        if owned:
            for gateway in gateways.values():
                gateway.close()
        if scratch is not None:
            scratch.cleanup()
    return log
