from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable

from arena.errors import ConservationError
from arena.models import AgentAccount, CashFlow, FlowKind, Op, TradeRecord

logger = logging.getLogger(__name__)


@dataclass
class Ledger:
    """Running totals of every cash movement the market performs.

    Identity checked by ``audit``:
        sum(cash) = initial - buys + sells + dividends - fees
    """

    initial_cash: float = 0.0
    buys: float = 0.0
    sells: float = 0.0
    dividends: float = 0.0
    fees: float = 0.0

    def open_account(self, cash: float) -> None:
        self.initial_cash += cash

    def record_trade(self, record: TradeRecord) -> None:
        if not record.accepted:
            return
        if record.order.op is Op.BUY:
            self.buys += -record.cash_delta
        elif record.order.op is Op.SELL:
            self.sells += record.cash_delta

    def record_cash_delta(self, op: Op, cash_delta: float) -> None:
        # replay path: the event log carries the signed amount only
        if op is Op.BUY:
            self.buys += -cash_delta
        elif op is Op.SELL:
            self.sells += cash_delta

    def record_flow(self, flow: CashFlow) -> None:
        if flow.kind is FlowKind.DIVIDEND:
            self.dividends += flow.amount
        else:
            self.fees += flow.amount

    def expected_cash(self) -> float:
        return math.fsum([self.initial_cash, -self.buys, self.sells, self.dividends, -self.fees])

    def to_dict(self) -> Dict[str, float]:
        return {
            "initial_cash": self.initial_cash,
            "buys": self.buys,
            "sells": self.sells,
            "dividends": self.dividends,
            "fees": self.fees,
        }

    def audit(self, accounts: Iterable[AgentAccount], abs_tol: float = 1e-6, rel_tol: float = 0.0) -> float:
        """Raise ConservationError when the cash identity breaks. Returns the actual total."""
        actual = math.fsum(a.cash for a in accounts)
        expected = self.expected_cash()
        if not math.isclose(actual, expected, rel_tol=rel_tol, abs_tol=abs_tol):
            logger.error("ledger mismatch actual=%.6f expected=%.6f", actual, expected)
            raise ConservationError(
                f"cash ledger identity violated: sum(cash)={actual:.6f} expected={expected:.6f} "
                f"(initial={self.initial_cash:.6f} buys={self.buys:.6f} sells={self.sells:.6f} "
                f"dividends={self.dividends:.6f} fees={self.fees:.6f})"
            )
        return actual
