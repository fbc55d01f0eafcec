from __future__ import annotations

import os
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Union

from arena.errors import PromptError
from arena.extensions import prompt_env
from arena.llm.gateway import CompletionRequest, ImagePart, Part, TextPart
from arena.models import AgentProfile, Observation


class Modality(str, Enum):
    TEXTUAL = "textual"
    VISUAL = "visual"
    COMBINED = "combined"

    @property
    def needs_charts(self) -> bool:
        return self is not Modality.TEXTUAL


@dataclass(frozen=True)
class RequestOptions:
    model: str = "stub"
    temperature: float = 0.7
    max_tokens: int = 1024
    seed: Optional[int] = None


_CHART_MARKER = re.compile(r"^\[\[chart:(\d+)\]\]\n?", re.M)

_KIND_CAPTIONS = {
    "line": "Price",
    "candlestick": "K-line",
    "holdings_bar": "Buy & Sell Assets",
    "trade_scatter": "Trading Record",
}


def chart_caption(path: str) -> str:
    """``A_line.png`` -> ``Stock A Price``; agent panels, with or without an owner prefix, get their label."""
    stem = os.path.splitext(os.path.basename(path))[0]
    for kind, label in _KIND_CAPTIONS.items():
        suffix = "_" + kind
        if stem == kind and kind not in ("line", "candlestick"):
            return label
        if stem.endswith(suffix):
            owner = stem[: -len(suffix)]
            if kind in ("line", "candlestick"):
                return f"Stock {owner} {label}"
            return label
    return stem


def system_prompt(profile: Optional[AgentProfile], agent_id: str = "") -> str:
    profile = profile or AgentProfile(name=agent_id or "a trader")
    return prompt_env.get_template("system.j2").render(
        name=profile.name,
        profession=profile.profession,
        duration_years=profile.duration_years,
    ).strip()


def _ticker_rows(obs: Observation) -> List[Dict[str, Any]]:
    return [
        {
            "ticker": t,
            "closes": list(v.closes),
            "dps": v.dps,
            "price": v.price,
            "change_pct": v.change_pct,
            "high": v.high,
            "low": v.low,
            "mean": v.mean,
        }
        for t, v in obs.tickers.items()
    ]


def _holding_rows(obs: Observation) -> List[Dict[str, Any]]:
    rows = []
    for h in obs.holdings:
        view = obs.tickers.get(h.ticker)
        rows.append(
            {
                "ticker": h.ticker,
                "qty": h.qty,
                "value": h.value,
                "gain_pct": h.gain_pct,
                "cost_price": h.cost_price,
                "closes": list(view.closes) if view else [],
                "price": view.price if view else 0.0,
                "change_pct": view.change_pct if view else 0.0,
            }
        )
    return rows


def _request(system: str, parts: Sequence[Part], purpose: str, agent_id: str, opts: RequestOptions) -> CompletionRequest:
    return CompletionRequest(
        model=opts.model,
        system=system,
        user_parts=tuple(parts),
        temperature=opts.temperature,
        max_tokens=opts.max_tokens,
        seed=opts.seed,
        purpose=purpose,
        agent_id=agent_id,
    )


def _split_on_charts(text: str, charts: Sequence[ImagePart]) -> List[Part]:
    parts: List[Part] = []
    pos = 0
    letters = "abcdefghijklmnopqrstuvwxyz"
    for m in _CHART_MARKER.finditer(text):
        if m.start() > pos:
            parts.append(TextPart(text[pos:m.start()]))
        i = int(m.group(1))
        chart = charts[i]
        parts.append(chart)
        parts.append(TextPart(f"  ({letters[i % 26]}) {chart.caption}\n"))
        pos = m.end()
    if pos < len(text):
        parts.append(TextPart(text[pos:]))
    return parts


# ---------------------------------------------------------------------------
# Analyse
# ---------------------------------------------------------------------------

def build_analysis_prompt(
    obs: Observation,
    modality: Modality,
    charts: Sequence[Union[str, ImagePart]] = (),
    profile: Optional[AgentProfile] = None,
    opts: RequestOptions = RequestOptions(),
) -> CompletionRequest:
    modality = Modality(modality)
    images: List[ImagePart] = []
    if modality.needs_charts:
        if not charts:
            raise PromptError(f"{modality.value} prompt needs chart images")
        for c in charts:
            image = c if isinstance(c, ImagePart) else ImagePart(path=c, caption=chart_caption(c))
            if not os.path.isfile(image.path):
                raise PromptError(f"missing chart file: {image.path}")
            images.append(image)

    text = prompt_env.get_template("analysis.j2").render(
        window=obs.window,
        show_numbers=modality is not Modality.VISUAL,
        tickers=_ticker_rows(obs),
        charts=[i.caption for i in images],
        market_change=obs.market_change_pct,
        gossip=list(obs.gossip),
        wealth=obs.wealth,
        cash=obs.cash,
        holdings=_holding_rows(obs),
        strategy_text=obs.strategy_text,
    )
    return _request(system_prompt(profile, obs.agent_id), _split_on_charts(text, images), "analysis", obs.agent_id, opts)


# ---------------------------------------------------------------------------
# Décision, évaluation, réflexion, rumeurs
# ---------------------------------------------------------------------------

def build_decision_prompt(
    obs: Observation,
    findings: Sequence[str],
    strategy_text: str,
    memory: Sequence[str],
    iter: int,
    iters: int,
    cap_pct: float = 0.10,
    full_liquidation: bool = False,
    profile: Optional[AgentProfile] = None,
    opts: RequestOptions = RequestOptions(),
) -> CompletionRequest:
    if not 0 <= iter < iters:
        raise PromptError(f"round {iter} outside the {iters} rounds of the day")
    text = prompt_env.get_template("decision.j2").render(
        date=obs.date,
        iter=iter,
        iters=iters,
        cap_pct=cap_pct * 100.0,
        full_liquidation=full_liquidation,
        tickers=_ticker_rows(obs),
        cash=obs.cash,
        holdings=_holding_rows(obs),
        findings=list(findings),
        memory=list(memory),
        strategy_text=strategy_text,
    )
    return _request(system_prompt(profile, obs.agent_id), [TextPart(text)], "decision", obs.agent_id, opts)


def build_evaluation_prompt(
    agent_id: str,
    date: int,
    memory: Sequence[str],
    strategy_text: str,
    wealth_open: float,
    wealth_close: float,
    profile: Optional[AgentProfile] = None,
    opts: RequestOptions = RequestOptions(),
) -> CompletionRequest:
    day_return = (wealth_close - wealth_open) / wealth_open * 100.0 if wealth_open > 0 else 0.0
    text = prompt_env.get_template("evaluation.j2").render(
        date=date,
        wealth_open=wealth_open,
        wealth_close=wealth_close,
        day_return=day_return,
        memory=list(memory),
        strategy_text=strategy_text,
    )
    return _request(system_prompt(profile, agent_id), [TextPart(text)], "evaluation", agent_id, opts)


def build_reflection_prompt(
    agent_id: str,
    memory: Sequence[str],
    evaluation: str,
    strategy_text: str,
    top: Sequence[Any],
    bottom: Sequence[Any],
    prices: Optional[Dict[str, float]] = None,
    profile: Optional[AgentProfile] = None,
    opts: RequestOptions = RequestOptions(),
) -> CompletionRequest:
    text = prompt_env.get_template("reflection.j2").render(
        tickers=[{"ticker": t, "price": p} for t, p in (prices or {}).items()],
        memory=list(memory),
        evaluation=evaluation,
        strategy_text=strategy_text,
        top=list(top),
        bottom=list(bottom),
    )
    return _request(system_prompt(profile, agent_id), [TextPart(text)], "reflection", agent_id, opts)


def build_gossip_prompt(
    obs: Observation,
    findings: Sequence[str],
    profile: Optional[AgentProfile] = None,
    opts: RequestOptions = RequestOptions(),
) -> CompletionRequest:
    text = prompt_env.get_template("gossip.j2").render(
        tickers=_ticker_rows(obs),
        findings=list(findings),
    )
    return _request(system_prompt(profile, obs.agent_id), [TextPart(text)], "gossip", obs.agent_id, opts)
