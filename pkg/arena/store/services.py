from __future__ import annotations

import json
import logging
from typing import Dict, Optional, Union

from sqlalchemy import create_engine, select
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session

from arena.errors import ExportError
from arena.extensions import Base
from arena.simulation.eventlog import EventLog
from arena.store.models import ChatRow, RunRow, StrategyRow, TradeRow, WealthRow

logger = logging.getLogger(__name__)


def _engine(url: Optional[str]):
    if url is None:
        from config import Config

        url = Config.DATABASE_URL
    return create_engine(url, future=True)


def export_log(log: Union[EventLog, str], url: Optional[str] = None, replace: bool = True) -> Dict[str, int]:
    """Write a run's trades, strategies, daily wealth and chat into a relational store.

    An existing run with the same ``run_id`` is replaced unless ``replace`` is false.
    Returns the number of rows written per table.
    """
    if isinstance(log, str):
        log = EventLog.load(log)
    engine = _engine(url)
    Base.metadata.create_all(engine)
    run_id = log.header.get("run_id", "run")
    counts = {"trade": 0, "strategy": 0, "wealth": 0, "chat": 0}

    try:
        with Session(engine) as session, session.begin():
            existing = session.scalars(select(RunRow).where(RunRow.run_id == run_id)).first()
            if existing is not None:
                if not replace:
                    raise ExportError(f"run {run_id!r} already exported")
                session.delete(existing)
                session.flush()

            config = log.config
            run = RunRow(
                run_id=run_id,
                version=str(log.header.get("version", "")),
                seed=int(config.get("seed", 0)),
                days=len(log.of_type("roll_day")),
                config_json=json.dumps(config, sort_keys=True),
            )
            session.add(run)

            for rec in log.records:
                kind = rec["type"]
                if kind == "trade":
                    run.trades.append(TradeRow(
                        seq=rec["seq"], date=rec["date"], iter=rec.get("iter", 0), agent_id=rec["agent_id"],
                        op=rec["op"], ticker=rec["ticker"], qty=rec["qty"], price_deal=rec["price_deal"],
                        executed_price=rec["executed_price"], accepted=rec["accepted"], reason=rec.get("reason"),
                        price_after=rec.get("price_after"), cash_delta=rec.get("cash_delta", 0.0),
                    ))
                elif kind == "strategy":
                    run.strategies.append(StrategyRow(
                        date=rec["date"], agent_id=rec["agent_id"], score=rec.get("score"),
                        text=rec.get("text", ""), next_text=rec.get("next_text", ""),
                    ))
                elif kind == "metric":
                    run.wealth.append(WealthRow(
                        date=rec["date"], agent_id=rec["agent_id"], wealth=rec["wealth"],
                        cash=rec["cash"], daily_return=rec.get("daily_return", 0.0),
                    ))
                elif kind == "chat":
                    run.messages.append(ChatRow(
                        date=rec["date"], author_id=rec["author_id"], text=rec["text"],
                        visible_from=rec["visible_from"],
                    ))
                else:
                    continue
                counts[kind if kind != "metric" else "wealth"] += 1
    except SQLAlchemyError as exc:
        logger.error("export failed run=%s error=%s", run_id, exc)
        raise ExportError(f"export of run {run_id!r} failed: {exc}") from exc
    finally:
        engine.dispose()

    logger.info("run exported run=%s trades=%d strategies=%d", run_id, counts["trade"], counts["strategy"])
    return counts
