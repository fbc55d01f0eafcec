from arena.memory.services import (
    DIGEST_CAP,
    Exemplars,
    LongTermMemory,
    MemoryStep,
    MemoryStore,
    ShortTermMemory,
    StrategyEntry,
    digest_step,
    evaluate_day,
    record_step,
    reflect,
    score_strategy,
    select_exemplars,
)

__all__ = [
    "DIGEST_CAP",
    "Exemplars",
    "LongTermMemory",
    "MemoryStep",
    "MemoryStore",
    "ShortTermMemory",
    "StrategyEntry",
    "digest_step",
    "evaluate_day",
    "record_step",
    "reflect",
    "score_strategy",
    "select_exemplars",
]
