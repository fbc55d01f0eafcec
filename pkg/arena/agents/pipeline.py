from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from arena.agents.prompts import (
    Modality,
    RequestOptions,
    build_analysis_prompt,
    build_decision_prompt,
    build_gossip_prompt,
)
from arena.errors import ArenaError, GatewayError, OrderError, PromptError
from arena.llm.gateway import CompletionRequest, LLMGateway, complete_json
from arena.market.engine import Stocks, validate_against
from arena.memory.services import (
    LongTermMemory,
    ShortTermMemory,
    StrategyEntry,
    evaluate_day,
    record_step,
    reflect,
    score_strategy,
)
from arena.models import AgentAccount, AgentProfile, MarketConfig, Observation, Op, Order, RejectReason, TradeRecord

logger = logging.getLogger(__name__)

FINDINGS = 3
NO_FINDING = "no additional finding"
DEFAULT_ITERS = 3


# ---------------------------------------------------------------------------
# Rapport d'analyse
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalysisReport:
    results: Tuple[str, ...]
    date: int
    agent_id: str
    failed: bool = False

    def __post_init__(self):
        if len(self.results) != FINDINGS:
            raise PromptError(f"analysis report holds {len(self.results)} findings, expected {FINDINGS}")

    @classmethod
    def empty(cls, date: int, agent_id: str) -> "AnalysisReport":
        return cls(results=(NO_FINDING,) * FINDINGS, date=date, agent_id=agent_id, failed=True)


_PREFIX = re.compile(r"^\s*the analysis results\s*:\s*", re.I)
_BULLET = re.compile(r"(?:^|\n|\s)(?:[-*•]|\d+[.)])\s+")


def split_findings(output: str) -> List[str]:
    """Findings of an ``output`` string: bullet or numbered items, else sentences."""
    body = _PREFIX.sub("", output.strip())
    items = [s.strip(" \n;") for s in _BULLET.split(body) if s.strip(" \n;")]
    if len(items) <= 1:
        items = [s.strip() for s in re.split(r"(?<=[.!?])\s+|\n+", body) if s.strip()]
    return items


def analyze(
    obs: Observation,
    modality: Modality,
    gateway: LLMGateway,
    charts: Sequence[str] = (),
    profile: Optional[AgentProfile] = None,
    opts: RequestOptions = RequestOptions(),
    max_repairs: int = 2,
) -> AnalysisReport:
    req = build_analysis_prompt(obs, modality, charts, profile=profile, opts=opts)
    try:
        result = complete_json(gateway, req, ("output",), max_repairs=max_repairs)
    except GatewayError:
        logger.warning("analysis failed agent=%s date=%d", obs.agent_id, obs.date)
        return AnalysisReport.empty(obs.date, obs.agent_id)
    findings = split_findings(str(result.parsed["output"]))[:FINDINGS]
    if not findings:
        return AnalysisReport.empty(obs.date, obs.agent_id)
    findings += [NO_FINDING] * (FINDINGS - len(findings))
    return AnalysisReport(results=tuple(findings), date=obs.date, agent_id=obs.agent_id)


# ---------------------------------------------------------------------------
# Décision
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Decision:
    order: Order
    request: CompletionRequest
    raw_text: str = ""


def order_from_payload(payload: Dict, agent_id: str, date: int, iter: int) -> Order:
    """Order from ``{op, ticker, qty, price}``; anything unusable becomes a hold."""
    hold = Order.hold(agent_id, date, iter)
    op = str(payload.get("op", "")).strip().lower()
    if op not in ("buy", "sell"):
        return hold
    try:
        qty_raw = float(payload.get("qty", 0))
        price = float(payload.get("price", 0))
    except (TypeError, ValueError):
        return hold
    if not (math.isfinite(qty_raw) and qty_raw == int(qty_raw) and math.isfinite(price)):
        return hold
    try:
        return Order(
            agent_id=agent_id,
            op=Op(op),
            ticker=str(payload.get("ticker", "")).strip(),
            qty=int(qty_raw),
            price_deal=price,
            date=date,
            iter=iter,
        )
    except OrderError as exc:
        logger.info("unusable order turned into hold agent=%s error=%s", agent_id, exc)
        return hold


def decide_step(
    obs: Observation,
    report: AnalysisReport,
    strategy_text: str,
    gateway: LLMGateway,
    iter: int,
    iters: int = DEFAULT_ITERS,
    memory: Sequence[str] = (),
    cfg: Optional[MarketConfig] = None,
    profile: Optional[AgentProfile] = None,
    opts: RequestOptions = RequestOptions(),
    max_repairs: int = 2,
) -> Decision:
    cfg = cfg or MarketConfig()
    req = build_decision_prompt(
        obs, report.results, strategy_text, memory, iter, iters,
        cap_pct=cfg.daily_cap_pct, full_liquidation=cfg.allow_full_liquidation,
        profile=profile, opts=opts,
    )
    if report.failed:
        return Decision(Order.hold(obs.agent_id, obs.date, iter), req)
    try:
        result = complete_json(gateway, req, ("op",), max_repairs=max_repairs)
    except GatewayError:
        logger.warning("decision failed, holding agent=%s date=%d iter=%d", obs.agent_id, obs.date, iter)
        return Decision(Order.hold(obs.agent_id, obs.date, iter), req)
    order = order_from_payload(result.parsed, obs.agent_id, obs.date, iter)
    return Decision(order, req, result.raw_text)


def decide(
    obs: Observation,
    report: AnalysisReport,
    strategy_text: str,
    gateway: LLMGateway,
    iter: int,
    **kwargs,
) -> Order:
    return decide_step(obs, report, strategy_text, gateway, iter, **kwargs).order


@dataclass(frozen=True)
class ActionVerdict:
    order: Order
    ok: bool
    reason: Optional[RejectReason] = None


def validate_action(order: Order, account: AgentAccount, stocks: Stocks, cfg: MarketConfig) -> ActionVerdict:
    ok, reason = validate_against(order, account, stocks, cfg)
    return ActionVerdict(order=order, ok=ok, reason=reason)


# ---------------------------------------------------------------------------
# Rumeurs
# ---------------------------------------------------------------------------

def generate_gossip(
    obs: Observation,
    report: AnalysisReport,
    gateway: LLMGateway,
    profile: Optional[AgentProfile] = None,
    opts: RequestOptions = RequestOptions(),
) -> Optional[str]:
    """One chat post built from the agent's latest findings, or None on failure."""
    req = build_gossip_prompt(obs, report.results, profile=profile, opts=opts)
    try:
        result = complete_json(gateway, req, ("gossip",))
    except GatewayError:
        logger.warning("gossip skipped agent=%s date=%d", obs.agent_id, obs.date)
        return None
    text = " ".join(str(result.parsed["gossip"]).split())
    return text or None


# ---------------------------------------------------------------------------
# Agent LLM
# ---------------------------------------------------------------------------

ChartFn = Callable[[Observation], List[str]]


class LLMAgent:
    """One LLM trader: analysis once per day, one order per round, nightly reflection."""

    kind = "llm"

    def __init__(
        self,
        agent_id: str,
        gateway: LLMGateway,
        modality: Modality = Modality.TEXTUAL,
        strategy_text: str = "",
        iters: int = DEFAULT_ITERS,
        reflection: bool = True,
        profile: Optional[AgentProfile] = None,
        opts: RequestOptions = RequestOptions(),
        market_cfg: Optional[MarketConfig] = None,
        charts: Optional[ChartFn] = None,
        max_repairs: int = 2,
    ):
        if iters < 1:
            raise ArenaError("iters must be >= 1")
        self.agent_id = agent_id
        self.gateway = gateway
        self.modality = Modality(modality)
        self.iters = iters
        self.reflection = reflection
        self.profile = profile
        self.opts = opts
        self.market_cfg = market_cfg or MarketConfig()
        self.charts = charts
        self.max_repairs = max_repairs
        self.strategy = StrategyEntry(date=0, text=strategy_text)
        self.library = LongTermMemory()
        self.memory: Optional[ShortTermMemory] = None
        self.report: Optional[AnalysisReport] = None
        self.wealth_open: Optional[float] = None

    # --- journée ------------------------------------------------------------

    def open_day(self, date: int, wealth_open: float) -> None:
        self.memory = ShortTermMemory(date=date, budget=self.iters)
        self.report = None
        self.wealth_open = wealth_open
        if self.strategy.date != date:
            self.strategy = replace(self.strategy, date=date)

    def analyze(self, obs: Observation) -> AnalysisReport:
        charts: List[str] = []
        if self.modality.needs_charts:
            if self.charts is None:
                raise PromptError(f"{self.agent_id}: {self.modality.value} modality needs a chart source")
            charts = self.charts(obs)
        self.report = analyze(
            obs, self.modality, self.gateway, charts,
            profile=self.profile, opts=self.opts, max_repairs=self.max_repairs,
        )
        return self.report

    def decide(self, obs: Observation, iter: int) -> Decision:
        if self.memory is None or self.memory.date != obs.date:
            self.open_day(obs.date, obs.wealth)
        report = self.report or AnalysisReport.empty(obs.date, self.agent_id)
        decision = decide_step(
            obs, report, self.strategy.text, self.gateway, iter,
            iters=self.iters, memory=self.memory.lines(), cfg=self.market_cfg,
            profile=self.profile, opts=self.opts, max_repairs=self.max_repairs,
        )
        self.memory = record_step(self.memory, decision.request.text, decision.raw_text, date=obs.date)
        return decision

    def gossip(self, obs: Observation) -> Optional[str]:
        if self.report is None or self.report.failed:
            return None
        return generate_gossip(obs, self.report, self.gateway, profile=self.profile, opts=self.opts)

    def close_day(self, wealth_close: float, prices: Optional[Dict[str, float]] = None) -> Tuple[str, StrategyEntry]:
        """Evaluate the day and move to the next strategy.

        Returns the evaluation text and the scored entry of the day. Without
        reflection the strategy text is carried over and nothing is stored.
        """
        stm = self.memory or ShortTermMemory(date=self.strategy.date, budget=self.iters)
        wealth_open = self.wealth_open if self.wealth_open else wealth_close
        score = score_strategy(wealth_open, wealth_close)
        scored = replace(self.strategy, score=score)
        if not self.reflection:
            self.strategy = StrategyEntry(date=stm.date + 1, text=self.strategy.text)
            return "", scored
        evaluation = evaluate_day(
            stm, self.strategy, self.gateway, score / 100.0,
            wealth_open=wealth_open, wealth_close=wealth_close,
            agent_id=self.agent_id, profile=self.profile, opts=self.opts,
        )
        self.strategy = reflect(
            stm, evaluation, self.library, self.gateway, scored,
            agent_id=self.agent_id, prices=prices, profile=self.profile, opts=self.opts,
            max_repairs=self.max_repairs,
        )
        return evaluation, replace(scored, evaluation=evaluation)

    # --- adaptateur backtest -----------------------------------------------

    def decide_orders(self, obs: Observation, account: AgentAccount, iter: int = 0) -> List[Order]:
        """One analysis and one decision per bar; reflection runs when the bar changes."""
        if self.memory is not None and self.memory.date != obs.date:
            self.close_day(obs.wealth, {t: v.price for t, v in obs.tickers.items()})
        if self.memory is None or self.memory.date != obs.date:
            self.open_day(obs.date, obs.wealth)
            self.analyze(replace(obs, strategy_text=self.strategy.text))
        if len(self.memory.steps) >= self.iters:
            return [Order.hold(self.agent_id, obs.date, iter)]
        return [self.decide(obs, iter).order]

    def notify(self, record: TradeRecord) -> None:
        pass
