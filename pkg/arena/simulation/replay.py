from __future__ import annotations

import logging
from typing import Dict, Union

from arena import create_market
from arena.errors import ConfigError, ConservationError, MarketError, OrderError, ReplayError
from arena.market.engine import Market, execute_order
from arena.models import CashFlow, FlowKind, Op, Order
from arena.runconfig import parse_run_config
from arena.simulation.eventlog import EventLog

logger = logging.getLogger(__name__)


def _order(rec: Dict, index: int) -> Order:
    try:
        return Order(
            agent_id=rec["agent_id"],
            op=Op(rec["op"]),
            ticker=rec["ticker"],
            qty=int(rec["qty"]),
            price_deal=float(rec["price_deal"]),
            date=int(rec["date"]),
            iter=int(rec.get("iter", 0)),
        )
    except (KeyError, TypeError, ValueError, OrderError) as exc:
        raise ReplayError(f"malformed trade: {exc}", index=index) from exc


def _flow(rec: Dict, kind: FlowKind, index: int) -> CashFlow:
    try:
        return CashFlow(
            agent_id=rec["agent_id"],
            kind=kind,
            amount=float(rec["amount"]),
            day=int(rec["date"]),
            shortfall=bool(rec.get("shortfall", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ReplayError(f"malformed {kind.value}: {exc}", index=index) from exc


def _apply_trade(market: Market, rec: Dict, index: int) -> None:
    order = _order(rec, index)
    if order.op is Op.HOLD or not rec.get("accepted"):
        return
    try:
        account = market.account(order.agent_id)
        stock = market.stock(order.ticker)
    except MarketError as exc:
        raise ReplayError(str(exc), index=index) from exc
    record = execute_order(order, account, stock, market.cfg)
    if not record.accepted:
        raise ReplayError(
            f"logged fill of {order.agent_id} {order.op.value} {order.qty} {order.ticker} is rejected on replay "
            f"({record.reject_reason.value})",
            index=index,
        )
    # the ledger takes the logged amount; the account moves by the re-executed one
    market.ledger.record_cash_delta(order.op, float(rec.get("cash_delta", record.cash_delta)))
    try:
        market.audit()
    except ConservationError as exc:
        raise ConservationError(f"record {index}: {exc}") from exc


def replay(log: Union[EventLog, str], verify: bool = True) -> Market:
    """Rebuild the market from the log header and every committed event.

    A log cut short gives the state as of its last complete record. With
    ``verify`` the rebuilt closes and final snapshot must equal the logged ones.
    """
    if isinstance(log, str):
        log = EventLog.load(log)
    try:
        cfg = parse_run_config(log.config)
    except ConfigError as exc:
        raise ReplayError(f"header config: {exc}", index=0) from exc
    market = create_market(cfg)

    for index, rec in enumerate(log.records):
        kind = rec["type"]
        if kind == "trade":
            _apply_trade(market, rec, index)
        elif kind in ("dividend", "fee"):
            flow = _flow(rec, FlowKind(kind), index)
            try:
                market.apply_flow(flow)
            except MarketError as exc:
                raise ReplayError(str(exc), index=index) from exc
        elif kind == "roll_day":
            if rec.get("date") != market.day:
                raise ReplayError(f"roll of day {rec.get('date')} while replaying day {market.day}", index=index)
            closes = market.close_day()
            if verify and closes != rec.get("closes"):
                raise ReplayError("replayed closes differ from the logged ones", index=index)
            market.audit()
        elif kind == "final" and verify:
            if market.snapshot() != rec.get("state"):
                raise ReplayError("replayed state differs from the logged final state", index=index)
    logger.info("replay done records=%d day=%d", len(log.records), market.day)
    return market


def final_state(log: Union[EventLog, str]) -> Dict:
    return replay(log).snapshot()
