from __future__ import annotations

import datetime as dt
import logging
import os
import sys
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from arena.agents.prompts import Modality
from arena.errors import ConfigError, DomainError
from arena.models import MarketConfig, OrderPolicy, StrategyParams
from arena.strategies.services import Strategy

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

logger = logging.getLogger(__name__)


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ---------------------------------------------------------------------------
# Marché
# ---------------------------------------------------------------------------

class StockSpec(_Model):
    ticker: str = Field(min_length=1)
    dps: float = Field(default=0.0, ge=0)
    # historical closes, oldest first; the last one is the opening price
    history: List[float] = Field(min_length=1)
    qty_total: float = Field(gt=0)

    @field_validator("history")
    @classmethod
    def _positive_prices(cls, v: List[float]) -> List[float]:
        if any(not p > 0 for p in v):
            raise ValueError("closing prices must be > 0")
        return v


class MarketSettings(_Model):
    fluctuation_const: float = 1.0
    daily_cap_pct: float = 0.10
    wealth_fee_rate: float = 0.001
    fees_enabled: bool = True
    dividend_period_days: int = 1
    dividends_enabled: bool = True
    order_policy: OrderPolicy = OrderPolicy.FIXED
    allow_full_liquidation: bool = False

    def to_market_config(self) -> MarketConfig:
        return MarketConfig(
            fluctuation_const=self.fluctuation_const,
            daily_cap_pct=self.daily_cap_pct,
            wealth_fee_rate=self.wealth_fee_rate if self.fees_enabled else 0.0,
            dividend_period_days=self.dividend_period_days,
            dividends_enabled=self.dividends_enabled,
            agent_order_policy=self.order_policy,
            allow_full_liquidation=self.allow_full_liquidation,
        )

    @model_validator(mode="after")
    def _check(self) -> "MarketSettings":
        try:
            self.to_market_config()
        except DomainError as exc:
            raise ValueError(str(exc)) from exc
        return self


# ---------------------------------------------------------------------------
# Agents
# ---------------------------------------------------------------------------

class HoldingSpec(_Model):
    qty: int = Field(ge=0)
    cost_price: float = Field(gt=0)


class ParamsSpec(_Model):
    sma_short: int = 5
    sma_long: int = 20
    zmr_window: int = 10
    zmr_k: float = 2.0
    zmr_hold: int = 5
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9

    def to_params(self) -> StrategyParams:
        return StrategyParams(**self.model_dump())

    @model_validator(mode="after")
    def _check(self) -> "ParamsSpec":
        try:
            self.to_params()
        except DomainError as exc:
            raise ValueError(str(exc)) from exc
        return self


class AgentSpec(_Model):
    name: str = Field(min_length=1)
    backend: Literal["rule", "llm", "stub"] = "stub"
    strategy: Optional[Strategy] = None
    params: ParamsSpec = ParamsSpec()
    modality: Modality = Modality.TEXTUAL
    reflection: bool = True
    strategy_text: str = ""
    capital: float = Field(default=100_000.0, ge=0)
    duration_years: int = Field(default=1, ge=0)
    profession: str = ""
    holdings: Dict[str, HoldingSpec] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check(self) -> "AgentSpec":
        if self.backend == "rule" and self.strategy is None:
            raise ValueError(f"rule agent {self.name!r} needs a strategy")
        if self.backend != "rule" and self.strategy is not None:
            raise ValueError(f"agent {self.name!r}: strategy applies to rule agents only")
        return self

    @property
    def is_llm(self) -> bool:
        return self.backend != "rule"


# ---------------------------------------------------------------------------
# Réglages annexes
# ---------------------------------------------------------------------------

class ChatSettings(_Model):
    enabled: bool = True
    fetch_limit: int = Field(default=5, ge=0)
    seed_gossip: List[str] = Field(default_factory=list)


class ChartSettings(_Model):
    width: int = Field(default=640, ge=64)
    height: int = Field(default=480, ge=64)
    ticker_kinds: List[Literal["line", "candlestick"]] = Field(default_factory=lambda: ["line"])


class LLMSettings(_Model):
    # None => Config.LLM_MODEL
    model: Optional[str] = None
    temperature: float = Field(default=0.7, ge=0)
    max_tokens: int = Field(default=1024, ge=1)
    max_repairs: int = Field(default=2, ge=0)
    workers: int = Field(default=4, ge=1)


class BacktestSettings(_Model):
    data_dir: Optional[str] = None
    tickers: List[str] = Field(default_factory=list)
    columns: Dict[str, str] = Field(default_factory=dict)
    capital: float = Field(default=100_000.0, gt=0)
    window: int = Field(default=10, ge=1)
    windows: List[int] = Field(default_factory=lambda: [5, 10, 15, 20])
    modalities: List[Modality] = Field(default_factory=lambda: [Modality.TEXTUAL])
    train_start: Optional[dt.date] = None
    train_end: Optional[dt.date] = None
    test_start: Optional[dt.date] = None
    test_end: Optional[dt.date] = None
    tune: bool = False
    workers: int = Field(default=4, ge=1)

    @field_validator("windows")
    @classmethod
    def _windows(cls, v: List[int]) -> List[int]:
        if not v or any(w < 1 for w in v):
            raise ValueError("windows must be a non-empty list of positive integers")
        return v

    @model_validator(mode="after")
    def _periods(self) -> "BacktestSettings":
        for a, b in (("train_start", "train_end"), ("test_start", "test_end")):
            lo, hi = getattr(self, a), getattr(self, b)
            if lo is not None and hi is not None and lo > hi:
                raise ValueError(f"{a} must not be after {b}")
        return self


# ---------------------------------------------------------------------------
# Run
# ---------------------------------------------------------------------------

class RunConfig(_Model):
    run_id: str = "run"
    seed: int = 0
    days: int = Field(default=5, ge=1)
    iters: int = Field(default=3, ge=1)
    window: int = Field(default=10, ge=1)
    mode: Literal["arena", "backtest"] = "arena"
    output_dir: Optional[str] = None
    agents: List[AgentSpec] = Field(min_length=1)
    stocks: List[StockSpec] = Field(default_factory=list)
    market: MarketSettings = MarketSettings()
    chat: ChatSettings = ChatSettings()
    charts: ChartSettings = ChartSettings()
    llm: LLMSettings = LLMSettings()
    backtest: BacktestSettings = BacktestSettings()

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        names = [a.name for a in self.agents]
        if len(set(names)) != len(names):
            raise ValueError("agent names must be unique")
        if self.mode == "arena":
            if not self.stocks:
                raise ValueError("an arena run needs at least one stock")
            tickers = [s.ticker for s in self.stocks]
            if len(set(tickers)) != len(tickers):
                raise ValueError("tickers must be unique")
            for a in self.agents:
                unknown = sorted(set(a.holdings) - set(tickers))
                if unknown:
                    raise ValueError(f"agent {a.name!r} holds unknown tickers {unknown}")
        return self

    @property
    def tickers(self) -> List[str]:
        return [s.ticker for s in self.stocks]

    def run_dir(self, base: Optional[str] = None) -> str:
        from config import Config

        return os.path.join(base or self.output_dir or Config.RUNS_DIR, self.run_id)

    def echo(self) -> Dict:
        """JSON-safe dump written in the event log header."""
        return self.model_dump(mode="json")


def parse_run_config(data: Dict, base_dir: Optional[str] = None) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid run config: {exc}") from exc
    if base_dir and cfg.backtest.data_dir and not os.path.isabs(cfg.backtest.data_dir):
        backtest = cfg.backtest.model_copy(update={"data_dir": os.path.join(base_dir, cfg.backtest.data_dir)})
        cfg = cfg.model_copy(update={"backtest": backtest})
    return cfg


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    cfg = parse_run_config(data, base_dir=os.path.dirname(os.path.abspath(path)))
    logger.info("run config loaded path=%s agents=%d stocks=%d days=%d", path, len(cfg.agents), len(cfg.stocks), cfg.days)
    return cfg
