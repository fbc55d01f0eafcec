from __future__ import annotations

import os

from jinja2 import Environment, FileSystemLoader, StrictUndefined
from sqlalchemy.orm import DeclarativeBase


# ---------------------------------------------------------------------------
# Prompts : un seul environnement Jinja, templates dans arena/agents/templates
# ---------------------------------------------------------------------------

def _money(value) -> str:
    return f"{float(value):.2f}"


def _pct(value) -> str:
    return f"{float(value):.2f}%"


def _signed_pct(value) -> str:
    return f"{float(value):+.2f}%"


TEMPLATES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "agents", "templates")

prompt_env = Environment(
    loader=FileSystemLoader(TEMPLATES_DIR),
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
    autoescape=False,
)
prompt_env.filters["money"] = _money
prompt_env.filters["pct"] = _pct
prompt_env.filters["signed_pct"] = _signed_pct


# ---------------------------------------------------------------------------
# Export relationnel
# ---------------------------------------------------------------------------

class Base(DeclarativeBase):
    pass
