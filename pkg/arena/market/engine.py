from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from arena.errors import DomainError, MarketError, UnknownTickerError
from arena.market.ledger import Ledger
from arena.models import (
    AgentAccount,
    CashFlow,
    FlowKind,
    Holding,
    HoldingView,
    MarketConfig,
    Observation,
    Op,
    Order,
    OrderPolicy,
    RejectReason,
    StockState,
    TickerView,
    TradeRecord,
)

logger = logging.getLogger(__name__)

Stocks = Union[Mapping[str, StockState], Iterable[StockState]]


def _index(stocks: Stocks) -> Dict[str, StockState]:
    if isinstance(stocks, Mapping):
        return dict(stocks)
    return {s.ticker: s for s in stocks}


# ---------------------------------------------------------------------------
# Formules de prix
# ---------------------------------------------------------------------------

def apply_price_impact(price_curr: float, price_deal: float, qty: float, F: float, qty_total: float) -> float:
    """Quantity-weighted move of the quoted price toward the deal price.

    (price_deal*qty*F + price_curr*qty_total) / (qty*F + qty_total)
    """
    if not price_curr > 0 or not price_deal > 0:
        raise DomainError("prices must be > 0")
    if not qty_total > 0:
        raise DomainError("qty_total must be > 0")
    if not F > 0:
        raise DomainError("F must be > 0")
    if qty < 0:
        raise DomainError("qty must be >= 0")
    if qty == 0:
        return price_curr

    weight = qty * F
    value = (price_deal * weight + price_curr * qty_total) / (weight + qty_total)
    # keep float rounding inside the closed interval of the two quotes
    lo, hi = min(price_curr, price_deal), max(price_curr, price_deal)
    return min(max(value, lo), hi)


def clamp_to_daily_cap(candidate: float, day_ref: float, cap_pct: float) -> float:
    if not day_ref > 0:
        raise DomainError("day_ref must be > 0")
    if not 0 < cap_pct <= 1:
        raise DomainError("cap_pct must be in (0, 1]")
    lo = day_ref * (1.0 - cap_pct)
    hi = day_ref * (1.0 + cap_pct)
    return min(max(candidate, lo), hi)


# ---------------------------------------------------------------------------
# Exécution d'ordre (Algorithm 1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Assessment:
    accepted: bool
    executed_price: float
    reason: Optional[RejectReason] = None


def assess_order(order: Order, account: AgentAccount, stock: StockState, cfg: MarketConfig) -> Assessment:
    """Accept/reject verdict for ``order`` against the current state. Never mutates."""
    if order.ticker != stock.ticker and order.op is not Op.HOLD:
        raise UnknownTickerError(order.ticker)
    if order.op is Op.HOLD:
        return Assessment(True, stock.price_curr)
    if order.qty <= 0:
        return Assessment(False, stock.price_curr, RejectReason.INVALID_QUANTITY)

    candidate = apply_price_impact(stock.price_curr, order.price_deal, order.qty, cfg.fluctuation_const, stock.qty_total)
    price = clamp_to_daily_cap(candidate, stock.day_ref_price, cfg.daily_cap_pct)

    if order.op is Op.BUY:
        if price * order.qty > account.cash:
            return Assessment(False, price, RejectReason.INSUFFICIENT_CASH)
        return Assessment(True, price)

    remainder = account.held(order.ticker) - order.qty
    ok = remainder >= 0 if cfg.allow_full_liquidation else remainder > 0
    if not ok:
        return Assessment(False, price, RejectReason.INSUFFICIENT_SHARES)
    return Assessment(True, price)


def execute_order(order: Order, account: AgentAccount, stock: StockState, cfg: MarketConfig) -> TradeRecord:
    verdict = assess_order(order, account, stock, cfg)
    if order.op is Op.HOLD:
        return TradeRecord(order=order, executed_price=stock.price_curr, accepted=True, price_after=stock.price_curr)
    if not verdict.accepted:
        return TradeRecord(
            order=order,
            executed_price=verdict.executed_price,
            accepted=False,
            reject_reason=verdict.reason,
            price_after=stock.price_curr,
        )

    price = verdict.executed_price
    amount = price * order.qty
    if order.op is Op.BUY:
        account.cash -= amount
        h = account.holdings.get(order.ticker)
        if h is None:
            account.holdings[order.ticker] = Holding(qty=order.qty, cost_price=price)
        else:
            new_qty = h.qty + order.qty
            h.cost_price = (h.qty * h.cost_price + order.qty * price) / new_qty
            h.qty = new_qty
    else:
        account.cash += amount
        h = account.holdings[order.ticker]
        h.qty -= order.qty
        if h.qty == 0:
            del account.holdings[order.ticker]

    stock.price_curr = price
    stock.intraday.append(price)
    return TradeRecord(order=order, executed_price=price, accepted=True, price_after=price)


# ---------------------------------------------------------------------------
# Flux de trésorerie : dividendes, frais
# ---------------------------------------------------------------------------

def pay_dividends(accounts: Sequence[AgentAccount], stocks: Stocks, day: int, cfg: MarketConfig) -> List[CashFlow]:
    if day < 0:
        raise DomainError("day must be >= 0")
    if not cfg.dividends_enabled or day % cfg.dividend_period_days != 0:
        return []
    book = _index(stocks)
    flows: List[CashFlow] = []
    for account in accounts:
        legs = []
        for ticker, h in account.holdings.items():
            if ticker not in book:
                raise UnknownTickerError(ticker)
            legs.append(h.qty * book[ticker].dps)
        amount = math.fsum(legs)
        if amount <= 0:
            continue
        account.cash += amount
        flows.append(CashFlow(agent_id=account.agent_id, kind=FlowKind.DIVIDEND, amount=amount, day=day))
    return flows


def charge_wealth_fee(accounts: Sequence[AgentAccount], stocks: Stocks, cfg: MarketConfig, day: int = 0) -> List[CashFlow]:
    book = _index(stocks)
    flows: List[CashFlow] = []
    for account in accounts:
        fee = cfg.wealth_fee_rate * mark_to_market(account, book)
        if fee <= 0:
            continue
        shortfall = fee > account.cash
        paid = account.cash if shortfall else fee
        account.cash -= paid
        if shortfall:
            account.cash = 0.0
            account.shortfall = True
            logger.warning("wealth fee shortfall agent=%s due=%.2f paid=%.2f", account.agent_id, fee, paid)
        flows.append(CashFlow(agent_id=account.agent_id, kind=FlowKind.FEE, amount=paid, day=day, shortfall=shortfall))
    return flows


def apply_cash_flow(account: AgentAccount, flow: CashFlow) -> None:
    if flow.kind is FlowKind.DIVIDEND:
        account.cash += flow.amount
    else:
        account.cash -= flow.amount
        if flow.shortfall:
            account.cash = 0.0
            account.shortfall = True


def mark_to_market(account: AgentAccount, stocks: Stocks) -> float:
    book = _index(stocks)
    legs = [account.cash]
    for ticker, h in account.holdings.items():
        if ticker not in book:
            raise UnknownTickerError(ticker)
        legs.append(h.qty * book[ticker].price_curr)
    return math.fsum(legs)


def roll_day(stocks: Stocks) -> None:
    for stock in _index(stocks).values():
        open_ = stock.day_ref_price
        close = stock.price_curr
        high = max([open_, close, *stock.intraday])
        low = min([open_, close, *stock.intraday])
        stock.bars.append((open_, high, low, close))
        stock.day_ref_price = close
        stock.history.append(close)
        stock.intraday.clear()


# ---------------------------------------------------------------------------
# Agrégat Market
# ---------------------------------------------------------------------------

class Market:
    """Stocks, accounts and ledger of one arena run. Single writer."""

    def __init__(self, stocks: Iterable[StockState], accounts: Iterable[AgentAccount], cfg: MarketConfig, seed: int = 0):
        self.stocks: Dict[str, StockState] = {s.ticker: s for s in stocks}
        self.accounts: Dict[str, AgentAccount] = {a.agent_id: a for a in accounts}
        if not self.stocks:
            raise MarketError("market needs at least one stock")
        if not self.accounts:
            raise MarketError("market needs at least one account")
        self.cfg = cfg
        self.seed = seed
        self.day = 0
        self.ledger = Ledger()
        for account in self.accounts.values():
            if account.cash < 0:
                raise DomainError(f"{account.agent_id}: initial cash must be >= 0")
            self.ledger.open_account(account.cash)
            account.wealth_history.append(mark_to_market(account, self.stocks))

    # --- lecture ------------------------------------------------------------

    def stock(self, ticker: str) -> StockState:
        try:
            return self.stocks[ticker]
        except KeyError:
            raise UnknownTickerError(ticker) from None

    def account(self, agent_id: str) -> AgentAccount:
        try:
            return self.accounts[agent_id]
        except KeyError:
            raise MarketError(f"unknown agent: {agent_id!r}") from None

    def wealth(self, agent_id: str) -> float:
        return mark_to_market(self.account(agent_id), self.stocks)

    def market_change_pct(self) -> float:
        """Equal-weight index change against the previous close."""
        changes = [s.change_pct for s in self.stocks.values()]
        return math.fsum(changes) / len(changes)

    def roster(self, day: int, iter: int) -> List[str]:
        ids = list(self.accounts)
        if self.cfg.agent_order_policy is OrderPolicy.SEEDED_SHUFFLE:
            random.Random(f"{self.seed}:{day}:{iter}").shuffle(ids)
        return ids

    def observe(
        self,
        agent_id: str,
        window: int,
        gossip: Sequence[str] = (),
        strategy_text: str = "",
    ) -> Observation:
        account = self.account(agent_id)
        tickers: Dict[str, TickerView] = {}
        for ticker, s in self.stocks.items():
            high, low, mean = s.intraday_stats()
            tickers[ticker] = TickerView(
                ticker=ticker,
                closes=tuple(s.history[-window:]),
                history=tuple(s.history),
                dps=s.dps,
                price=s.price_curr,
                change_pct=s.change_pct,
                high=high,
                low=low,
                mean=mean,
            )
        holdings = tuple(
            HoldingView(
                ticker=t,
                qty=h.qty,
                value=h.qty * self.stocks[t].price_curr,
                gain_pct=(self.stocks[t].price_curr - h.cost_price) / h.cost_price * 100.0,
                cost_price=h.cost_price,
            )
            for t, h in account.holdings.items()
        )
        return Observation(
            agent_id=agent_id,
            date=self.day,
            window=window,
            tickers=tickers,
            market_change_pct=self.market_change_pct(),
            cash=account.cash,
            wealth=mark_to_market(account, self.stocks),
            gossip=tuple(gossip),
            holdings=holdings,
            strategy_text=strategy_text,
        )

    # --- écriture -----------------------------------------------------------

    def submit(self, order: Order) -> TradeRecord:
        account = self.account(order.agent_id)
        if order.op is Op.HOLD:
            price = self.stocks[order.ticker].price_curr if order.ticker in self.stocks else 0.0
            return TradeRecord(order=order, executed_price=price, accepted=True, price_after=price)
        if order.ticker not in self.stocks:
            logger.info("order rejected agent=%s reason=unknown_ticker ticker=%s", order.agent_id, order.ticker)
            return TradeRecord(
                order=order, executed_price=0.0, accepted=False, reject_reason=RejectReason.UNKNOWN_TICKER
            )
        record = execute_order(order, account, self.stocks[order.ticker], self.cfg)
        if record.accepted:
            self.ledger.record_trade(record)
        else:
            logger.info(
                "order rejected agent=%s op=%s ticker=%s qty=%s reason=%s",
                order.agent_id, order.op.value, order.ticker, order.qty, record.reject_reason.value,
            )
        return record

    def pay_dividends(self, day: Optional[int] = None) -> List[CashFlow]:
        flows = pay_dividends(list(self.accounts.values()), self.stocks, self.day if day is None else day, self.cfg)
        for flow in flows:
            self.ledger.record_flow(flow)
        return flows

    def charge_wealth_fee(self) -> List[CashFlow]:
        flows = charge_wealth_fee(list(self.accounts.values()), self.stocks, self.cfg, day=self.day)
        for flow in flows:
            self.ledger.record_flow(flow)
        return flows

    def apply_flow(self, flow: CashFlow) -> None:
        apply_cash_flow(self.account(flow.agent_id), flow)
        self.ledger.record_flow(flow)

    def close_day(self) -> Dict[str, float]:
        """Roll every stock, record end-of-day wealth, advance the date. Returns the closes."""
        roll_day(self.stocks)
        for account in self.accounts.values():
            account.wealth_history.append(mark_to_market(account, self.stocks))
        self.day += 1
        return {t: s.price_curr for t, s in self.stocks.items()}

    def audit(self, abs_tol: float = 1e-6) -> float:
        return self.ledger.audit(self.accounts.values(), abs_tol=abs_tol)

    def total_cash(self) -> float:
        return math.fsum(a.cash for a in self.accounts.values())

    def snapshot(self) -> Dict:
        return {
            "day": self.day,
            "stocks": {
                t: {
                    "price_curr": s.price_curr,
                    "qty_total": s.qty_total,
                    "dps": s.dps,
                    "day_ref_price": s.day_ref_price,
                    "history": list(s.history),
                }
                for t, s in self.stocks.items()
            },
            "accounts": {
                a.agent_id: {
                    "cash": a.cash,
                    "holdings": {t: {"qty": h.qty, "cost_price": h.cost_price} for t, h in sorted(a.holdings.items())},
                    "shortfall": a.shortfall,
                    "wealth_history": list(a.wealth_history),
                }
                for a in self.accounts.values()
            },
        }


def validate_against(order: Order, account: AgentAccount, stocks: Stocks, cfg: MarketConfig) -> Tuple[bool, Optional[RejectReason]]:
    """Verdict without mutation; unknown ticker is a rejection here, not an error."""
    book = _index(stocks)
    if order.op is Op.HOLD:
        return True, None
    if order.ticker not in book:
        return False, RejectReason.UNKNOWN_TICKER
    verdict = assess_order(order, account, book[order.ticker], cfg)
    return verdict.accepted, verdict.reason
