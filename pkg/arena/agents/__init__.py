from arena.agents.pipeline import (
    ActionVerdict,
    AnalysisReport,
    LLMAgent,
    analyze,
    decide,
    generate_gossip,
    validate_action,
)
from arena.agents.prompts import Modality, RequestOptions, build_analysis_prompt, build_decision_prompt

__all__ = [
    "ActionVerdict",
    "AnalysisReport",
    "LLMAgent",
    "Modality",
    "RequestOptions",
    "analyze",
    "build_analysis_prompt",
    "build_decision_prompt",
    "decide",
    "generate_gossip",
    "validate_action",
]
