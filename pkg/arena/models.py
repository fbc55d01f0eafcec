from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from arena.errors import DomainError, OrderError


# ---------- ENUMS ----------

class Op(str, Enum):
    BUY = "buy"
    SELL = "sell"
    HOLD = "hold"


class RejectReason(str, Enum):
    INSUFFICIENT_CASH = "insufficient_cash"
    INSUFFICIENT_SHARES = "insufficient_shares"
    INVALID_QUANTITY = "invalid_quantity"
    UNKNOWN_TICKER = "unknown_ticker"


class OrderPolicy(str, Enum):
    FIXED = "fixed"
    SEEDED_SHUFFLE = "seeded-shuffle"


class FlowKind(str, Enum):
    DIVIDEND = "dividend"
    FEE = "fee"


# ---------- STOCKS ----------

@dataclass
class StockState:
    ticker: str
    price_curr: float
    qty_total: float
    dps: float
    day_ref_price: float
    # closing prices, oldest first (config history + one entry per rolled day)
    history: List[float] = field(default_factory=list)
    # executed prices of the current day
    intraday: List[float] = field(default_factory=list)
    # daily (open, high, low, close) bars, one per rolled day
    bars: List[Tuple[float, float, float, float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.price_curr > 0:
            raise DomainError(f"{self.ticker}: price_curr must be > 0")
        if not self.qty_total > 0:
            raise DomainError(f"{self.ticker}: qty_total must be > 0")
        if not self.dps >= 0:
            raise DomainError(f"{self.ticker}: dps must be >= 0")
        if not self.day_ref_price > 0:
            raise DomainError(f"{self.ticker}: day_ref_price must be > 0")

    @property
    def change_pct(self) -> float:
        return (self.price_curr - self.day_ref_price) / self.day_ref_price * 100.0

    def intraday_stats(self) -> Tuple[float, float, float]:
        """(high, low, mean) of the day's executions, current price when idle."""
        if not self.intraday:
            return self.price_curr, self.price_curr, self.price_curr
        return max(self.intraday), min(self.intraday), math.fsum(self.intraday) / len(self.intraday)


# ---------- ORDERS ----------

@dataclass(frozen=True)
class Order:
    agent_id: str
    op: Op
    ticker: str
    qty: int
    price_deal: float
    date: int
    iter: int = 0

    def __post_init__(self):
        if not isinstance(self.op, Op):
            object.__setattr__(self, "op", Op(self.op))
        if self.qty < 0:
            raise OrderError("qty must be >= 0")
        if (self.qty == 0) != (self.op is Op.HOLD):
            raise OrderError("qty = 0 iff op = hold")
        if self.op is not Op.HOLD and not self.price_deal > 0:
            raise OrderError("price_deal must be > 0 for buy/sell")

    @classmethod
    def hold(cls, agent_id: str, date: int, iter: int = 0, ticker: str = "") -> "Order":
        return cls(agent_id=agent_id, op=Op.HOLD, ticker=ticker, qty=0, price_deal=0.0, date=date, iter=iter)


@dataclass(frozen=True)
class TradeRecord:
    order: Order
    executed_price: float
    accepted: bool
    reject_reason: Optional[RejectReason] = None
    price_after: float = 0.0

    @property
    def cash_delta(self) -> float:
        """Signed cash movement on the trading account (0 unless committed)."""
        if not self.accepted or self.order.op is Op.HOLD:
            return 0.0
        amount = self.executed_price * self.order.qty
        return -amount if self.order.op is Op.BUY else amount

    def to_event(self) -> Dict:
        o = self.order
        return {
            "date": o.date,
            "iter": o.iter,
            "agent_id": o.agent_id,
            "op": o.op.value,
            "ticker": o.ticker,
            "qty": o.qty,
            "price_deal": o.price_deal,
            "executed_price": self.executed_price,
            "accepted": self.accepted,
            "reason": self.reject_reason.value if self.reject_reason else None,
            "price_after": self.price_after,
            "cash_delta": self.cash_delta,
        }


# ---------- ACCOUNTS ----------

@dataclass
class Holding:
    qty: int
    cost_price: float


@dataclass(frozen=True)
class AgentProfile:
    name: str
    duration_years: int = 1
    profession: str = ""


@dataclass
class AgentAccount:
    agent_id: str
    cash: float
    holdings: Dict[str, Holding] = field(default_factory=dict)
    profile: Optional[AgentProfile] = None
    wealth_history: List[float] = field(default_factory=list)
    # set when a wealth fee could not be paid in full
    shortfall: bool = False

    def held(self, ticker: str) -> int:
        h = self.holdings.get(ticker)
        return h.qty if h else 0


@dataclass(frozen=True)
class CashFlow:
    agent_id: str
    kind: FlowKind
    amount: float
    day: int
    shortfall: bool = False

    def to_event(self) -> Dict:
        return {
            "date": self.day,
            "agent_id": self.agent_id,
            "amount": self.amount,
            "shortfall": self.shortfall,
        }


# ---------- MARKET CONFIG ----------

@dataclass(frozen=True)
class MarketConfig:
    fluctuation_const: float = 1.0
    daily_cap_pct: float = 0.10
    wealth_fee_rate: float = 0.001
    dividend_period_days: int = 1
    dividends_enabled: bool = True
    agent_order_policy: OrderPolicy = OrderPolicy.FIXED
    allow_full_liquidation: bool = False

    def __post_init__(self):
        if not isinstance(self.agent_order_policy, OrderPolicy):
            object.__setattr__(self, "agent_order_policy", OrderPolicy(self.agent_order_policy))
        if not self.fluctuation_const > 0:
            raise DomainError("fluctuation_const must be > 0")
        if not 0 < self.daily_cap_pct <= 1:
            raise DomainError("daily_cap_pct must be in (0, 1]")
        if not 0 <= self.wealth_fee_rate < 1:
            raise DomainError("wealth_fee_rate must be in [0, 1)")
        if self.dividend_period_days < 1:
            raise DomainError("dividend_period_days must be >= 1")


# ---------- OBSERVATIONS ----------

@dataclass(frozen=True)
class TickerView:
    ticker: str
    closes: Tuple[float, ...]  # last W closes
    history: Tuple[float, ...]  # every close known so far (indicator agents)
    dps: float
    price: float
    change_pct: float
    high: float
    low: float
    mean: float


@dataclass(frozen=True)
class HoldingView:
    ticker: str
    qty: int
    value: float
    gain_pct: float
    cost_price: float


@dataclass(frozen=True)
class Observation:
    agent_id: str
    date: int
    window: int
    tickers: Dict[str, TickerView]
    market_change_pct: float
    cash: float
    wealth: float
    gossip: Tuple[str, ...] = ()
    holdings: Tuple[HoldingView, ...] = ()
    strategy_text: str = ""

    def last_close(self, ticker: str) -> float:
        return self.tickers[ticker].closes[-1]


# ---------- STRATEGY PARAMS ----------

@dataclass(frozen=True)
class StrategyParams:
    sma_short: int = 5
    sma_long: int = 20
    zmr_window: int = 10
    zmr_k: float = 2.0
    zmr_hold: int = 5
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9

    def __post_init__(self):
        windows = (self.sma_short, self.sma_long, self.zmr_window, self.zmr_hold,
                   self.macd_fast, self.macd_slow, self.macd_signal)
        if any(w < 1 for w in windows):
            raise DomainError("all strategy windows must be >= 1")
        if self.sma_short >= self.sma_long:
            raise DomainError("sma_short must be < sma_long")
        if self.zmr_k < 0:
            raise DomainError("zmr_k must be >= 0")
