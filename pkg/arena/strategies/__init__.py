from arena.strategies.indicators import Direction, MacdResult, Signal, ema, macd, sma, zmr_signal
from arena.strategies.services import PositionState, RuleAgent, Strategy, rule_agent_decide

__all__ = [
    "Direction",
    "MacdResult",
    "PositionState",
    "RuleAgent",
    "Signal",
    "Strategy",
    "ema",
    "macd",
    "rule_agent_decide",
    "sma",
    "zmr_signal",
]
