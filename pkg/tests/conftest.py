import copy
import datetime
import os
import tempfile

# config.py creates its data directory on import
os.environ.setdefault("ARENA_DATA_DIR", tempfile.mkdtemp(prefix="arena-tests-"))

from arena.backtest.loader import OhlcvBar
from arena.llm.gateway import GatewayConfig, LLMGateway
from arena.llm.stub import StubBackend
from arena.runconfig import parse_run_config

NAMES = ("Amy", "Bruce", "Charles", "David", "Ella", "Frank", "Grace", "Hank", "Ivy")
PROFESSIONS = (
    "AI Researcher", "Lawyer", "Doctor", "Engineer", "Teacher",
    "Entrepreneur", "Accountant", "Architect", "Marketing Manager",
)
DURATIONS = (1, 2, 1, 3, 2, 5, 4, 2, 3)

STOCKS = [
    {"ticker": "A", "dps": 22, "qty_total": 1200,
     "history": [454.17, 452.30, 450.95, 451.80, 449.20, 448.75, 447.90, 446.60, 446.10, 445.60]},
    {"ticker": "B", "dps": 23, "qty_total": 1000,
     "history": [354.17, 366.40, 379.05, 390.80, 402.25, 415.60, 428.10, 440.30, 453.40, 465.80]},
    {"ticker": "C", "dps": 25, "qty_total": 1600,
     "history": [500.47, 493.80, 487.15, 480.60, 473.90, 467.20, 460.55, 453.90, 447.25, 440.60]},
]


def arena_data(days=5, iters=3, seed=7, agents=None, **market):
    """Nine stub agents and three stocks; overrides go into ``[market]``."""
    if agents is None:
        agents = [
            {"name": n, "backend": "stub", "profession": p, "duration_years": d}
            for n, p, d in zip(NAMES, PROFESSIONS, DURATIONS)
        ]
    return {
        "run_id": "test-run",
        "seed": seed,
        "days": days,
        "iters": iters,
        "window": 10,
        "agents": agents,
        "stocks": copy.deepcopy(STOCKS),
        "market": market,
        "llm": {"workers": 4},
    }


def make_config(**kwargs):
    return parse_run_config(arena_data(**kwargs))


def scripted_gateway(replies=None, responder=None, failures=0, max_attempts=3):
    backend = StubBackend(responder=responder, replies=replies, failures=failures)
    cfg = GatewayConfig(model="stub", max_attempts=max_attempts, backoff_base=0.0, backoff_max=0.0)
    return LLMGateway(cfg, backend, sleep=lambda _s: None)


def make_bars(closes, start=datetime.date(2024, 1, 2)):
    """Daily bars from closes: open = previous close, high/low hug the body."""
    bars = []
    prev = closes[0]
    for i, c in enumerate(closes):
        o = prev
        bars.append(OhlcvBar(
            date=start + datetime.timedelta(days=i),
            open=o, high=max(o, c) + 0.5, low=min(o, c) - 0.5, close=c, volume=1000.0,
        ))
        prev = c
    return bars
