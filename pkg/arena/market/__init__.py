from arena.market.engine import (
    Market,
    apply_cash_flow,
    apply_price_impact,
    charge_wealth_fee,
    clamp_to_daily_cap,
    execute_order,
    mark_to_market,
    pay_dividends,
    roll_day,
)
from arena.market.ledger import Ledger

__all__ = [
    "Ledger",
    "Market",
    "apply_cash_flow",
    "apply_price_impact",
    "charge_wealth_fee",
    "clamp_to_daily_cap",
    "execute_order",
    "mark_to_market",
    "pay_dividends",
    "roll_day",
]
