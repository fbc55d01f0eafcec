from __future__ import annotations

import hashlib
import json
import logging
import random
import re
import threading
from typing import Callable, Dict, List, Optional, Sequence

from arena.errors import TransportError
from arena.llm.gateway import CompletionRequest, GatewayConfig

logger = logging.getLogger(__name__)

Responder = Callable[[CompletionRequest], str]


class StubBackend:
    """Offline backend: a responder function or a scripted list of replies.

    ``failures`` injected transport errors are raised before the first reply.
    The last scripted reply repeats once the script runs out.
    """

    accepts_images = True

    def __init__(
        self,
        responder: Optional[Responder] = None,
        replies: Optional[Sequence[str]] = None,
        failures: int = 0,
    ):
        if responder is None and not replies:
            raise ValueError("StubBackend needs a responder or a non-empty reply list")
        self._responder = responder
        self._replies = list(replies or [])
        self._failures = failures
        self._lock = threading.Lock()
        self.calls: List[CompletionRequest] = []

    def send(self, req: CompletionRequest, cfg: GatewayConfig) -> str:
        with self._lock:
            self.calls.append(req)
            if self._failures > 0:
                self._failures -= 1
                raise TransportError("injected stub failure")
            if self._replies:
                return self._replies.pop(0) if len(self._replies) > 1 else self._replies[0]
        return self._responder(req)


# ---------------------------------------------------------------------------
# Répondeur déterministe pour l'arène
# ---------------------------------------------------------------------------

_PRICE_LINE = re.compile(r"^\s*- (\S+): current price ([0-9]+(?:\.[0-9]+)?)", re.M)
_CASH_LINE = re.compile(r"Available cash: ([0-9]+(?:\.[0-9]+)?)")
_HOLDING_LINE = re.compile(r"Holding (\S+): ([0-9]+) shares")
_TICKER_BLOCK = re.compile(r"^\s*- (\S+):\s*$", re.M)

_FINDINGS = (
    "{t} has been trending {dir} over the observed window, which matters for a profit-seeking strategy",
    "the dividend of {t} cushions holding costs and favours keeping a position",
    "gossip about {t} is unverified; position sizes should stay moderate",
    "intraday range of {t} is narrow, so quoted prices close to the current price are likely to fill",
    "market-wide change is small; relative moves between stocks matter more than the index",
    "existing holdings in {t} carry an unrealised {pl}, which shapes whether to add or trim",
)

_STRATEGIES = (
    "buy dips in {t} and take profit after a 3% rise",
    "keep at least 30% cash and add to {t} only when it falls below its recent mean",
    "favour high-dividend stocks such as {t} and avoid chasing rallies",
    "trim positions that gained more than 5% and rotate into {t}",
    "hold current positions and trade {t} in small lots around the current price",
)

_GOSSIP = (
    "Rumour has it that a large fund is quietly accumulating {t}.",
    "Traders whisper that {t} may cut its dividend soon.",
    "Analysts call {t} a safe harbour with steady payouts.",
    "Word is that a merger involving {t} is being negotiated.",
)


class ArenaStubResponder:
    """Replies derived from a hash of (seed, purpose, agent, prompt text).

    Decision replies read prices, cash and holdings back from the prompt so
    that most orders are plausible; some are deliberately out of reach.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _rng(self, req: CompletionRequest) -> random.Random:
        tag = f"{self.seed}|{req.purpose}|{req.agent_id}|{req.repair}|{req.text}"
        return random.Random(int(hashlib.sha256(tag.encode("utf-8")).hexdigest()[:16], 16))

    def __call__(self, req: CompletionRequest) -> str:
        rng = self._rng(req)
        handler = getattr(self, f"_{req.purpose}", None)
        if handler is None:
            return json.dumps({"output": "nothing to report"})
        return handler(req, rng)

    # --- par usage ----------------------------------------------------------

    @staticmethod
    def _tickers(text: str) -> List[str]:
        found = [m.group(1) for m in _PRICE_LINE.finditer(text)] or _TICKER_BLOCK.findall(text)
        return sorted(set(found)) or ["the market"]

    def _analysis(self, req: CompletionRequest, rng: random.Random) -> str:
        tickers = self._tickers(req.text)
        count = rng.choice((3, 3, 3, 4))
        findings = []
        for template in rng.sample(_FINDINGS, count):
            findings.append(
                template.format(t=rng.choice(tickers), dir=rng.choice(("up", "down")), pl=rng.choice(("gain", "loss")))
            )
        body = "The analysis results: " + "\n".join(f"- {f}" for f in findings)
        return json.dumps({"output": body})

    def _decision(self, req: CompletionRequest, rng: random.Random) -> str:
        text = req.text
        prices: Dict[str, float] = {t: float(p) for t, p in _PRICE_LINE.findall(text)}
        m = _CASH_LINE.search(text)
        cash = float(m.group(1)) if m else 0.0
        held: Dict[str, int] = {t: int(q) for t, q in _HOLDING_LINE.findall(text)}
        if not prices:
            return json.dumps({"op": "hold", "ticker": "", "qty": 0, "price": 0})

        roll = rng.random()
        sellable = sorted(t for t, q in held.items() if q > 1 and t in prices)
        if roll < 0.45:
            ticker = rng.choice(sorted(prices))
            price = round(prices[ticker] * (1 + rng.uniform(-0.01, 0.03)), 2)
            budget = cash * rng.uniform(0.05, 0.4)
            qty = max(1, int(budget // price)) if price > 0 else 1
            return json.dumps({"op": "buy", "ticker": ticker, "qty": qty, "price": price})
        if roll < 0.8 and sellable:
            ticker = rng.choice(sellable)
            price = round(prices[ticker] * (1 + rng.uniform(-0.03, 0.01)), 2)
            qty = rng.randint(1, held[ticker] - 1)
            return json.dumps({"op": "sell", "ticker": ticker, "qty": qty, "price": price})
        return json.dumps({"op": "hold", "ticker": "", "qty": 0, "price": 0})

    def _evaluation(self, req: CompletionRequest, rng: random.Random) -> str:
        verdict = rng.choice(("worked", "partly worked", "did not work"))
        focus = rng.choice(("entry prices", "position sizes", "cash reserve", "timing"))
        return f"The strategy {verdict} today; the main lever was {focus}."

    def _reflection(self, req: CompletionRequest, rng: random.Random) -> str:
        tickers = self._tickers(req.text)
        strategy = rng.choice(_STRATEGIES).format(t=rng.choice(tickers))
        return json.dumps({"strategy": strategy})

    def _gossip(self, req: CompletionRequest, rng: random.Random) -> str:
        tickers = self._tickers(req.text)
        return json.dumps({"gossip": rng.choice(_GOSSIP).format(t=rng.choice(tickers))})
