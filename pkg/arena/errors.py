from __future__ import annotations

from typing import Optional


class ArenaError(Exception):
    """Base class for every error raised by the arena package."""


class ConfigError(ArenaError):
    """Invalid or missing run configuration (CLI exit code 1)."""


# ---------------------------------------------------------------------------
# Market
# ---------------------------------------------------------------------------

class MarketError(ArenaError):
    pass


class DomainError(MarketError, ValueError):
    """A numeric input outside the domain of a market formula."""


class UnknownTickerError(MarketError, KeyError):
    def __init__(self, ticker: str):
        super().__init__(ticker)
        self.ticker = ticker

    def __str__(self) -> str:
        return f"unknown ticker: {self.ticker!r}"


class ConservationError(MarketError):
    """The cash ledger identity does not hold."""


class OrderError(ArenaError, ValueError):
    pass


# ---------------------------------------------------------------------------
# Strategies / agents / memory
# ---------------------------------------------------------------------------

class StrategyError(ArenaError, ValueError):
    pass


class PromptError(ArenaError):
    pass


class MemoryBudgetError(ArenaError):
    pass


class ReflectionError(ArenaError, ValueError):
    """Misuse of the step memory or the strategy library."""


class ChatError(ArenaError, ValueError):
    pass


# ---------------------------------------------------------------------------
# LLM gateway
# ---------------------------------------------------------------------------

class GatewayError(ArenaError):
    pass


class TransportError(GatewayError):
    pass


class GatewayTimeout(GatewayError):
    pass


class ApiError(GatewayError):
    def __init__(self, status: int, message: str = ""):
        super().__init__(f"HTTP {status}: {message}" if message else f"HTTP {status}")
        self.status = status


class JsonOutputError(GatewayError, ValueError):
    pass


# ---------------------------------------------------------------------------
# Charts / data / backtest / replay
# ---------------------------------------------------------------------------

class ChartError(ArenaError):
    pass


class ChartDataError(ChartError, ValueError):
    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class DataError(ArenaError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class BacktestError(ArenaError):
    pass


class ReplayError(ArenaError):
    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(f"record {index}: {message}" if index is not None else message)
        self.index = index


class ExportError(ArenaError):
    """Relational export of a run failed."""
