from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Protocol, Sequence

from arena.backtest.loader import OhlcvBar
from arena.backtest.metrics import Metrics, summarize, total_return
from arena.errors import BacktestError
from arena.models import (
    AgentAccount,
    Holding,
    HoldingView,
    Observation,
    Op,
    Order,
    RejectReason,
    TickerView,
    TradeRecord,
)

logger = logging.getLogger(__name__)

DEFAULT_CAPITAL = 100000.0


class BacktestAgent(Protocol):
    agent_id: str

    def decide_orders(self, obs: Observation, account: AgentAccount, iter: int = 0) -> List[Order]: ...

    def notify(self, record: TradeRecord) -> None: ...


@dataclass
class EquityCurve:
    dates: List[str] = field(default_factory=list)
    wealth: List[float] = field(default_factory=list)


@dataclass(frozen=True)
class TrendSummary:
    """Buy-and-hold return of each ticker over the evaluated period, in percent."""

    per_ticker: Dict[str, float]

    @property
    def avg(self) -> float:
        values = list(self.per_ticker.values())
        return math.fsum(values) / len(values)

    @property
    def min(self) -> float:
        return min(self.per_ticker.values())

    @property
    def max(self) -> float:
        return max(self.per_ticker.values())

    def to_dict(self) -> Dict[str, object]:
        return {"avg": self.avg, "min": self.min, "max": self.max, "per_ticker": dict(self.per_ticker)}


@dataclass
class BacktestReport:
    agent_id: str
    window: int
    metrics: Metrics
    curve: EquityCurve
    trend: TrendSummary
    trades: List[TradeRecord] = field(default_factory=list)
    config: Dict[str, object] = field(default_factory=dict)

    @property
    def tr_pct(self) -> float:
        return self.metrics.tr_pct

    @property
    def mean_pct(self) -> float:
        return self.metrics.mean_pct

    @property
    def std_pct(self) -> float:
        return self.metrics.std_pct

    @property
    def wr_pct(self) -> float:
        return self.metrics.wr_pct

    @property
    def sr(self) -> float:
        return self.metrics.sr

    @property
    def delta_pct(self) -> float:
        """Gain over the equal-weight average ticker trend."""
        return self.metrics.tr_pct - self.trend.avg

    def to_dict(self) -> Dict[str, object]:
        return {
            "agent_id": self.agent_id,
            "window": self.window,
            **self.metrics.to_dict(),
            "delta_pct": self.delta_pct,
            "trend": self.trend.to_dict(),
            "curve": {"dates": list(self.curve.dates), "wealth": list(self.curve.wealth)},
            "config": dict(self.config),
        }


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def align_bars(bars: Mapping[str, Sequence[OhlcvBar]]) -> Dict[str, List[OhlcvBar]]:
    """Keep only dates every ticker has."""
    if not bars:
        raise BacktestError("no tickers to backtest")
    common = None
    for series in bars.values():
        dates = {b.date for b in series}
        common = dates if common is None else common & dates
    out = {t: [b for b in series if b.date in common] for t, series in bars.items()}
    dropped = max(len(s) for s in bars.values()) - len(common)
    if dropped:
        logger.warning("dropped dates missing from some tickers count=%d", dropped)
    return out


def _fill(order: Order, account: AgentAccount, price: float) -> TradeRecord:
    """Fill at ``price`` with no impact and no cap; full liquidation allowed."""
    if order.op is Op.HOLD:
        return TradeRecord(order=order, executed_price=price, accepted=True, price_after=price)
    amount = price * order.qty
    if order.op is Op.BUY:
        if amount > account.cash:
            return TradeRecord(order, price, False, RejectReason.INSUFFICIENT_CASH, price)
        account.cash -= amount
        h = account.holdings.get(order.ticker)
        if h is None:
            account.holdings[order.ticker] = Holding(qty=order.qty, cost_price=price)
        else:
            new_qty = h.qty + order.qty
            h.cost_price = (h.qty * h.cost_price + order.qty * price) / new_qty
            h.qty = new_qty
    else:
        if account.held(order.ticker) < order.qty:
            return TradeRecord(order, price, False, RejectReason.INSUFFICIENT_SHARES, price)
        account.cash += amount
        h = account.holdings[order.ticker]
        h.qty -= order.qty
        if h.qty == 0:
            del account.holdings[order.ticker]
    return TradeRecord(order=order, executed_price=price, accepted=True, price_after=price)


def _wealth(account: AgentAccount, closes: Mapping[str, float]) -> float:
    return math.fsum([account.cash, *(h.qty * closes[t] for t, h in account.holdings.items())])


def build_observation(
    bars: Mapping[str, Sequence[OhlcvBar]],
    t: int,
    window: int,
    account: AgentAccount,
    gossip: Sequence[str] = (),
    strategy_text: str = "",
) -> Observation:
    """Observation for day ``t``: closes up to and including ``t``."""
    tickers: Dict[str, TickerView] = {}
    closes: Dict[str, float] = {}
    for ticker, series in bars.items():
        bar = series[t]
        history = tuple(b.close for b in series[: t + 1])
        prev = series[t - 1].close if t > 0 else bar.open
        closes[ticker] = bar.close
        tickers[ticker] = TickerView(
            ticker=ticker,
            closes=history[-window:],
            history=history,
            dps=0.0,
            price=bar.close,
            change_pct=(bar.close - prev) / prev * 100.0,
            high=bar.high,
            low=bar.low,
            mean=(bar.high + bar.low + bar.close) / 3.0,
        )
    holdings = tuple(
        HoldingView(
            ticker=tk,
            qty=h.qty,
            value=h.qty * closes[tk],
            gain_pct=(closes[tk] - h.cost_price) / h.cost_price * 100.0,
            cost_price=h.cost_price,
        )
        for tk, h in account.holdings.items()
    )
    changes = [v.change_pct for v in tickers.values()]
    return Observation(
        agent_id=account.agent_id,
        date=t,
        window=window,
        tickers=tickers,
        market_change_pct=math.fsum(changes) / len(changes),
        cash=account.cash,
        wealth=_wealth(account, closes),
        gossip=tuple(gossip),
        holdings=holdings,
        strategy_text=strategy_text,
    )


# ---------------------------------------------------------------------------
# Boucle
# ---------------------------------------------------------------------------

def run_backtest(
    bars: Mapping[str, Sequence[OhlcvBar]],
    agent: BacktestAgent,
    window: int,
    capital: float = DEFAULT_CAPITAL,
    start: Optional[int] = None,
    config: Optional[Dict[str, object]] = None,
) -> BacktestReport:
    """Exogenous-price replay: one decision per bar, filled at that bar's close.

    ``wealth[0]`` is the capital on the bar before the first decision.
    """
    if window < 1:
        raise BacktestError("window must be >= 1")
    if not capital > 0:
        raise BacktestError("capital must be > 0")
    series = align_bars(bars)
    n = min(len(s) for s in series.values())
    start = window if start is None else start
    if start < window:
        raise BacktestError(f"start {start} leaves fewer than {window} closes in the first observation")
    if n < start + 1:
        raise BacktestError(f"need at least {start + 1} bars per ticker, got {n}")

    tickers = list(series)
    dates = [b.date for b in series[tickers[0]]]
    account = AgentAccount(agent_id=agent.agent_id, cash=float(capital))
    curve = EquityCurve(dates=[dates[start - 1].isoformat()], wealth=[float(capital)])
    trades: List[TradeRecord] = []

    for t in range(start, n):
        obs = build_observation(series, t, window, account)
        closes = {tk: series[tk][t].close for tk in tickers}
        try:
            orders = agent.decide_orders(obs, account, 0)
        except Exception:
            logger.exception("agent failed, holding agent=%s day=%d", agent.agent_id, t)
            orders = [Order.hold(agent.agent_id, t)]
        for order in orders:
            if order.op is not Op.HOLD and order.ticker not in closes:
                record = TradeRecord(order, 0.0, False, RejectReason.UNKNOWN_TICKER, 0.0)
            else:
                record = _fill(order, account, closes.get(order.ticker, 0.0))
            agent.notify(record)
            if order.op is not Op.HOLD:
                trades.append(record)
        curve.dates.append(dates[t].isoformat())
        curve.wealth.append(_wealth(account, closes))

    trend = TrendSummary(
        per_ticker={
            tk: total_return(series[tk][start - 1].close, series[tk][n - 1].close) * 100.0 for tk in tickers
        }
    )
    report = BacktestReport(
        agent_id=agent.agent_id,
        window=window,
        metrics=summarize(curve.wealth),
        curve=curve,
        trend=trend,
        trades=trades,
        config={"capital": capital, "window": window, "start": start, **(config or {})},
    )
    logger.info(
        "backtest done agent=%s window=%d tr=%.4f%% wr=%.2f%%",
        agent.agent_id, window, report.tr_pct, report.wr_pct,
    )
    return report
