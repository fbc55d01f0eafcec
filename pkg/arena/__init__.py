from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from arena.market.engine import Market
    from arena.runconfig import RunConfig

__version__ = "1.0.0"

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    from config import Config

    name = (level or Config.LOG_LEVEL or "INFO").upper()
    logging.basicConfig(level=getattr(logging, name, logging.INFO), format=LOG_FORMAT, force=True)


def create_market(cfg: "RunConfig") -> "Market":
    """Build the initial market (stocks, accounts, ledger) from a run config."""
    from arena.market.engine import Market
    from arena.models import AgentAccount, AgentProfile, Holding, StockState

    stocks = []
    for spec in cfg.stocks:
        history = list(spec.history)
        last = history[-1]
        stocks.append(
            StockState(
                ticker=spec.ticker,
                price_curr=last,
                qty_total=spec.qty_total,
                dps=spec.dps,
                day_ref_price=last,
                history=history,
            )
        )

    accounts = []
    for agent in cfg.agents:
        holdings = {
            ticker: Holding(qty=h.qty, cost_price=h.cost_price)
            for ticker, h in sorted(agent.holdings.items())
            if h.qty > 0
        }
        accounts.append(
            AgentAccount(
                agent_id=agent.name,
                cash=agent.capital,
                holdings=holdings,
                profile=AgentProfile(
                    name=agent.name,
                    duration_years=agent.duration_years,
                    profession=agent.profession,
                ),
            )
        )

    return Market(stocks=stocks, accounts=accounts, cfg=cfg.market.to_market_config(), seed=cfg.seed)
