from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

from arena.errors import StrategyError
from arena.models import AgentAccount, Observation, Op, Order, StrategyParams, TradeRecord
from arena.strategies.indicators import Direction, Signal, macd_signal, sma_signal, zmr_signal

logger = logging.getLogger(__name__)


class Strategy(str, Enum):
    BUY_HOLD = "buy_hold"
    SMA = "sma"
    ZMR = "zmr"
    MACD = "macd"
    IDLE = "idle"


@dataclass
class PositionState:
    """Per-agent memory a rule strategy needs between days."""

    invested: bool = False
    # ticker -> date of entry
    entries: Dict[str, int] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Dimensionnement
# ---------------------------------------------------------------------------

def affordable_qty(budget: float, price: float) -> int:
    """Largest whole quantity with qty * price <= budget."""
    if price <= 0 or budget <= 0:
        return 0
    qty = int(math.floor(budget / price))
    while qty > 0 and qty * price > budget:
        qty -= 1
    return qty


def sellable_qty(held: int, full_liquidation: bool) -> int:
    if held <= 0:
        return 0
    return held if full_liquidation else held - 1


def _signal_for(strategy: Strategy, history, params: StrategyParams, age: Optional[int]) -> Signal:
    if strategy is Strategy.SMA:
        return sma_signal(history, params)
    if strategy is Strategy.MACD:
        return macd_signal(history, params)
    if strategy is Strategy.ZMR:
        if len(history) < params.zmr_window:
            return Signal.hold()
        return zmr_signal(history, params, position_age=age)
    return Signal.hold()


# ---------------------------------------------------------------------------
# Décision
# ---------------------------------------------------------------------------

def rule_agent_decide(
    strategy: Strategy,
    obs: Observation,
    account: AgentAccount,
    params: StrategyParams = StrategyParams(),
    state: Optional[PositionState] = None,
    full_liquidation: bool = False,
    iter: int = 0,
) -> List[Order]:
    """Orders for one decision, at most one per ticker, priced at the last close.

    Every order fits the cash and holdings of ``account`` as given.
    An empty decision is returned as a single hold order. Without ``state``
    the position is read off the account: buy_hold has invested once the
    first day is past or shares are held, and held tickers count as entered.
    """
    strategy = Strategy(strategy)
    if state is None:
        held = {t: obs.date for t, h in account.holdings.items() if h.qty > 0}
        state = PositionState(invested=obs.date > 0 or bool(held), entries=held)
    agent_id = account.agent_id
    orders: List[Order] = []

    def _deal(ticker: str) -> float:
        view = obs.tickers[ticker]
        return view.history[-1] if view.history else view.price

    def _buy(ticker: str, budget: float) -> None:
        deal = _deal(ticker)
        sizing_price = max(deal, obs.tickers[ticker].price)
        qty = affordable_qty(budget, sizing_price)
        if qty > 0:
            orders.append(Order(agent_id, Op.BUY, ticker, qty, deal, obs.date, iter))

    if strategy is Strategy.BUY_HOLD:
        if not state.invested:
            tickers = sorted(obs.tickers)
            budget = account.cash / len(tickers)
            for ticker in tickers:
                _buy(ticker, budget)
        return orders or [Order.hold(agent_id, obs.date, iter)]

    entries: List[str] = []
    for ticker in sorted(obs.tickers):
        view = obs.tickers[ticker]
        age = obs.date - state.entries[ticker] if ticker in state.entries else None
        try:
            signal = _signal_for(strategy, view.history, params, age)
        except StrategyError:
            logger.debug("signal unavailable agent=%s ticker=%s", agent_id, ticker)
            continue

        held = account.held(ticker)
        if signal.direction is Direction.EXIT:
            qty = sellable_qty(held, full_liquidation)
            if qty > 0:
                orders.append(Order(agent_id, Op.SELL, ticker, qty, _deal(ticker), obs.date, iter))
        elif signal.direction is Direction.LONG_ENTRY and ticker not in state.entries:
            entries.append(ticker)

    if entries:
        budget = account.cash / len(entries)
        for ticker in entries:
            _buy(ticker, budget)

    return orders or [Order.hold(agent_id, obs.date, iter)]


class RuleAgent:
    """Roster entry for a deterministic baseline. Acts once per day, on iteration 0."""

    kind = "rule"

    def __init__(self, agent_id: str, strategy: Strategy, params: Optional[StrategyParams] = None,
                 full_liquidation: bool = False):
        self.agent_id = agent_id
        self.strategy = Strategy(strategy)
        self.params = params or StrategyParams()
        self.full_liquidation = full_liquidation
        self.state = PositionState()

    def decide_orders(self, obs: Observation, account: AgentAccount, iter: int = 0) -> List[Order]:
        if iter > 0:
            return [Order.hold(self.agent_id, obs.date, iter)]
        # positions handed over at start count as entered today
        for ticker, h in account.holdings.items():
            if h.qty > 1 or (self.full_liquidation and h.qty > 0):
                self.state.entries.setdefault(ticker, obs.date)
        orders = rule_agent_decide(
            self.strategy, obs, account, self.params, self.state, self.full_liquidation, iter
        )
        if self.strategy is Strategy.BUY_HOLD:
            self.state.invested = True
        return orders

    def notify(self, record: TradeRecord) -> None:
        if not record.accepted:
            return
        order = record.order
        if order.op is Op.BUY:
            self.state.entries.setdefault(order.ticker, order.date)
        elif order.op is Op.SELL:
            self.state.entries.pop(order.ticker, None)
