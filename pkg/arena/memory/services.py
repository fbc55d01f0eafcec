from __future__ import annotations

import json
import logging
import math
import os
import re
import shutil
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from arena.errors import GatewayError, JsonOutputError, MemoryBudgetError, ReflectionError
from arena.llm.gateway import LLMGateway, complete_json, parse_json_output

logger = logging.getLogger(__name__)

DIGEST_CAP = 512
EXEMPLARS = 5


# ---------------------------------------------------------------------------
# Mémoire court terme (une journée)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MemoryStep:
    date: int
    iter: int
    input_digest: str
    output_digest: str

    def line(self) -> str:
        return f"[round {self.iter + 1}] {self.input_digest} -> {self.output_digest}"


@dataclass(frozen=True)
class ShortTermMemory:
    date: int
    budget: int
    steps: Tuple[MemoryStep, ...] = ()

    def lines(self) -> List[str]:
        return [s.line() for s in self.steps]


Digester = Callable[[str, str], Tuple[str, str]]

_PRICE = re.compile(r"- (\S+): current price ([0-9.]+)")
_CASH = re.compile(r"Available cash: ([0-9.]+)")
_ORDER_KEYS = ("op", "ticker", "qty", "price")


def _cap(text: str, limit: int) -> str:
    text = " ".join(text.split())
    return text if len(text) <= limit else text[: limit - 3] + "..."


def digest_step(input_text: str, output_text: str) -> Tuple[str, str]:
    """Key facts of one prompt/answer pair, each side capped at DIGEST_CAP chars."""
    facts = []
    m = _CASH.search(input_text or "")
    if m:
        facts.append(f"cash={m.group(1)}")
    facts.extend(f"{t}={p}" for t, p in _PRICE.findall(input_text or ""))
    input_digest = _cap(" ".join(facts) if facts else (input_text or ""), DIGEST_CAP)

    try:
        payload = parse_json_output(output_text or "", ("op",))
        fields = [f"{k}={payload[k]}" for k in _ORDER_KEYS if k in payload and payload[k] not in ("", None)]
        rest = {k: v for k, v in payload.items() if k not in _ORDER_KEYS}
        rationale = " ".join(str(v) for v in rest.values())
        output_digest = " ".join(fields) + (f" | {rationale}" if rationale else "")
    except JsonOutputError:
        output_digest = output_text or ""
    return input_digest, _cap(output_digest, DIGEST_CAP)


def record_step(
    stm: ShortTermMemory,
    input_text: str,
    output_text: str,
    digester: Digester = digest_step,
    date: Optional[int] = None,
) -> ShortTermMemory:
    if date is not None and date != stm.date:
        raise ReflectionError(f"memory of day {stm.date} cannot record a step of day {date}")
    if len(stm.steps) >= stm.budget:
        raise MemoryBudgetError(f"day {stm.date} already holds {stm.budget} steps")
    in_digest, out_digest = digester(input_text, output_text)
    step = MemoryStep(date=stm.date, iter=len(stm.steps), input_digest=in_digest, output_digest=out_digest)
    return replace(stm, steps=stm.steps + (step,))


# ---------------------------------------------------------------------------
# Mémoire long terme (bibliothèque de stratégies)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StrategyEntry:
    date: int
    text: str
    # None while the strategy is still being traded
    score: Optional[float] = None
    evaluation: str = ""

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class LongTermMemory:
    _entries: List[StrategyEntry] = field(default_factory=list)

    @property
    def entries(self) -> Tuple[StrategyEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def append(self, entry: StrategyEntry) -> None:
        if entry.score is None or not math.isfinite(entry.score):
            raise ReflectionError(f"strategy of day {entry.date} needs a finite score")
        if self._entries and entry.date <= self._entries[-1].date:
            raise ReflectionError(
                f"library dates must increase: {entry.date} after {self._entries[-1].date}"
            )
        self._entries.append(entry)


def score_strategy(wealth_open: float, wealth_close: float) -> float:
    if not wealth_open > 0:
        raise ReflectionError("opening wealth must be > 0")
    return (wealth_close - wealth_open) / wealth_open * 100.0


@dataclass(frozen=True)
class Exemplars:
    top: Tuple[StrategyEntry, ...]
    bottom: Tuple[StrategyEntry, ...]


def select_exemplars(library: LongTermMemory, k: int = EXEMPLARS) -> Exemplars:
    """Best and worst scored strategies; equal scores favour the later date.

    The two sets are disjoint unless the library holds a single entry.
    """
    entries = list(library.entries)
    n = len(entries)
    if n == 0:
        return Exemplars((), ())
    if n == 1:
        return Exemplars((entries[0],), (entries[0],))

    best_first = sorted(entries, key=lambda e: (-e.score, -e.date))
    worst_first = sorted(entries, key=lambda e: (e.score, -e.date))
    n_bottom = min(k, n // 2)
    bottom = worst_first[:n_bottom]
    taken = {e.date for e in bottom}
    top = [e for e in best_first if e.date not in taken][: min(k, n - n_bottom)]
    return Exemplars(tuple(top), tuple(bottom))


# ---------------------------------------------------------------------------
# Évaluation et réflexion
# ---------------------------------------------------------------------------

def fallback_evaluation(date: int, account_pnl: float) -> str:
    return f"Day {date}: wealth return {account_pnl * 100.0:+.2f}%"


def evaluate_day(
    stm: ShortTermMemory,
    strategy: StrategyEntry,
    gateway: Optional[LLMGateway],
    account_pnl: float,
    wealth_open: float = 0.0,
    wealth_close: float = 0.0,
    agent_id: str = "",
    profile=None,
    opts=None,
) -> str:
    """Evaluation text for the closed day; numeric summary when the gateway fails."""
    from arena.agents.prompts import RequestOptions, build_evaluation_prompt

    if gateway is None:
        return fallback_evaluation(stm.date, account_pnl)
    if wealth_open <= 0:
        wealth_open = 1.0
        wealth_close = 1.0 + account_pnl
    req = build_evaluation_prompt(
        agent_id, stm.date, stm.lines(), strategy.text, wealth_open, wealth_close,
        profile=profile, opts=opts or RequestOptions(),
    )
    try:
        text = gateway.complete(req).raw_text.strip()
    except GatewayError:
        logger.warning("evaluation fallback agent=%s date=%d", agent_id, stm.date)
        return fallback_evaluation(stm.date, account_pnl)
    return text or fallback_evaluation(stm.date, account_pnl)


def reflect(
    stm: ShortTermMemory,
    evaluation: str,
    library: LongTermMemory,
    gateway: Optional[LLMGateway],
    current: StrategyEntry,
    agent_id: str = "",
    prices: Optional[Dict[str, float]] = None,
    profile=None,
    opts=None,
    max_repairs: int = 2,
) -> StrategyEntry:
    """Store today's scored strategy, then ask for tomorrow's.

    ``current`` must carry its score. On gateway failure the strategy text
    is carried forward unchanged.
    """
    from arena.agents.prompts import RequestOptions, build_reflection_prompt

    scored = replace(current, evaluation=evaluation)
    library.append(scored)
    exemplars = select_exemplars(library)
    next_text = current.text
    if gateway is not None:
        req = build_reflection_prompt(
            agent_id, stm.lines(), evaluation, current.text, exemplars.top, exemplars.bottom,
            prices=prices, profile=profile, opts=opts or RequestOptions(),
        )
        try:
            result = complete_json(gateway, req, ("strategy",), max_repairs=max_repairs)
            text = str(result.parsed["strategy"]).strip()
            if text:
                next_text = text
        except GatewayError:
            logger.warning("reflection carried forward agent=%s date=%d", agent_id, stm.date)
    return StrategyEntry(date=current.date + 1, text=next_text)


# ---------------------------------------------------------------------------
# Persistance JSONL
# ---------------------------------------------------------------------------

class MemoryStore:
    """``{root}/memory/{agent}.jsonl`` and ``{root}/library/{agent}.jsonl``."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(os.path.join(root, "memory"), exist_ok=True)
        os.makedirs(os.path.join(root, "library"), exist_ok=True)

    def reset(self) -> None:
        """Start from empty memory and library files (a rerun into the same directory)."""
        for kind in ("memory", "library"):
            path = os.path.join(self.root, kind)
            shutil.rmtree(path, ignore_errors=True)
            os.makedirs(path, exist_ok=True)

    def _path(self, kind: str, agent_id: str) -> str:
        return os.path.join(self.root, kind, f"{agent_id}.jsonl")

    def flush_day(self, agent_id: str, stm: ShortTermMemory) -> None:
        with open(self._path("memory", agent_id), "a", encoding="utf-8") as f:
            for step in stm.steps:
                f.write(json.dumps(asdict(step), sort_keys=True) + "\n")

    def append_entry(self, agent_id: str, entry: StrategyEntry) -> None:
        with open(self._path("library", agent_id), "a", encoding="utf-8") as f:
            f.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")

    def load_steps(self, agent_id: str) -> List[MemoryStep]:
        return [MemoryStep(**row) for row in self._read(self._path("memory", agent_id))]

    def load_library(self, agent_id: str) -> LongTermMemory:
        library = LongTermMemory()
        for row in self._read(self._path("library", agent_id)):
            library.append(StrategyEntry(**row))
        return library

    @staticmethod
    def _read(path: str) -> Sequence[Dict]:
        if not os.path.exists(path):
            return []
        with open(path, encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
