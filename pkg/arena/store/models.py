from sqlalchemy import Boolean, Column, Float, ForeignKey, Integer, String, Text, UniqueConstraint
from sqlalchemy.orm import backref, relationship

from arena.extensions import Base


# ---------- RUNS ----------
class RunRow(Base):
    __tablename__ = "run"

    id = Column(Integer, primary_key=True)
    run_id = Column(String(120), unique=True, nullable=False, index=True)
    version = Column(String(20), nullable=False)
    seed = Column(Integer, nullable=False, default=0)
    days = Column(Integer, nullable=False, default=0)
    # config echo from the log header, as JSON text
    config_json = Column(Text, nullable=False)


# ---------- TRADES ----------
class TradeRow(Base):
    __tablename__ = "trade"

    id = Column(Integer, primary_key=True)
    run_pk = Column(Integer, ForeignKey("run.id", ondelete="CASCADE"), nullable=False, index=True)
    seq = Column(Integer, nullable=False)
    date = Column(Integer, nullable=False)
    iter = Column(Integer, nullable=False, default=0)
    agent_id = Column(String(80), nullable=False, index=True)
    op = Column(String(8), nullable=False)
    ticker = Column(String(20), nullable=False)
    qty = Column(Integer, nullable=False)
    price_deal = Column(Float, nullable=False)
    executed_price = Column(Float, nullable=False)
    accepted = Column(Boolean, nullable=False)
    reason = Column(String(40), nullable=True)
    price_after = Column(Float, nullable=True)
    cash_delta = Column(Float, nullable=False, default=0.0)

    run = relationship("RunRow", backref=backref("trades", cascade="all, delete-orphan"))


# ---------- STRATEGIES ----------
class StrategyRow(Base):
    __tablename__ = "strategy"

    id = Column(Integer, primary_key=True)
    run_pk = Column(Integer, ForeignKey("run.id", ondelete="CASCADE"), nullable=False, index=True)
    date = Column(Integer, nullable=False)
    agent_id = Column(String(80), nullable=False)
    score = Column(Float, nullable=True)
    text = Column(Text, nullable=False, default="")
    next_text = Column(Text, nullable=False, default="")

    run = relationship("RunRow", backref=backref("strategies", cascade="all, delete-orphan"))


# ---------- DAILY WEALTH ----------
class WealthRow(Base):
    __tablename__ = "wealth"
    __table_args__ = (UniqueConstraint("run_pk", "date", "agent_id", name="uq_wealth_day"),)

    id = Column(Integer, primary_key=True)
    run_pk = Column(Integer, ForeignKey("run.id", ondelete="CASCADE"), nullable=False, index=True)
    date = Column(Integer, nullable=False)
    agent_id = Column(String(80), nullable=False)
    wealth = Column(Float, nullable=False)
    cash = Column(Float, nullable=False)
    daily_return = Column(Float, nullable=False, default=0.0)

    run = relationship("RunRow", backref=backref("wealth", cascade="all, delete-orphan"))


# ---------- CHAT ----------
class ChatRow(Base):
    __tablename__ = "chat"

    id = Column(Integer, primary_key=True)
    run_pk = Column(Integer, ForeignKey("run.id", ondelete="CASCADE"), nullable=False, index=True)
    date = Column(Integer, nullable=False)
    author_id = Column(String(80), nullable=False)
    text = Column(Text, nullable=False)
    visible_from = Column(Integer, nullable=False)

    run = relationship("RunRow", backref=backref("messages", cascade="all, delete-orphan"))
