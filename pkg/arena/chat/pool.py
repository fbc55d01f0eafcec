from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

from arena.errors import ChatError

logger = logging.getLogger(__name__)

DEFAULT_FETCH_LIMIT = 5
SEED_AUTHOR = "seed"


@dataclass(frozen=True)
class ChatMessage:
    date: int
    author_id: str
    text: str
    visible_from: Optional[int] = None

    def __post_init__(self):
        if self.visible_from is None:
            object.__setattr__(self, "visible_from", self.date + 1)
        if not (self.text or "").strip():
            raise ChatError("gossip text must not be empty")
        if self.visible_from <= self.date:
            raise ChatError("a message is never visible on the day it is posted")

    def to_event(self) -> dict:
        return {
            "date": self.date,
            "author_id": self.author_id,
            "text": self.text,
            "visible_from": self.visible_from,
        }


@dataclass
class ChatPool:
    """Shared gossip board. Writes happen at day boundaries; reads may overlap."""

    today: int = 0
    _messages: List[ChatMessage] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def open_day(self, date: int) -> None:
        self.today = date

    def post(self, msg: ChatMessage) -> None:
        if msg.date != self.today:
            raise ChatError(f"message dated {msg.date} posted on day {self.today}")
        with self._lock:
            self._messages.append(msg)

    def seed(self, texts: Iterable[str], author_id: str = SEED_AUTHOR) -> List[ChatMessage]:
        """Gossip available from day 0, before any agent has analysed anything."""
        seeded = [ChatMessage(date=-1, author_id=author_id, text=t, visible_from=0) for t in texts if t.strip()]
        with self._lock:
            self._messages.extend(seeded)
        return seeded

    def fetch(self, date: int, limit: int = DEFAULT_FETCH_LIMIT) -> List[ChatMessage]:
        with self._lock:
            indexed = list(enumerate(self._messages))
        eligible = [(i, m) for i, m in indexed if m.visible_from <= date and m.date < date]
        eligible.sort(key=lambda im: (im[1].date, im[0]), reverse=True)
        return [m for _, m in eligible[: max(0, limit)]]

    @property
    def messages(self) -> List[ChatMessage]:
        with self._lock:
            return list(self._messages)


def post(pool: ChatPool, msg: ChatMessage) -> None:
    pool.post(msg)


def fetch(pool: ChatPool, date: int, limit: int = DEFAULT_FETCH_LIMIT) -> List[ChatMessage]:
    return pool.fetch(date, limit)
