from arena.llm.gateway import (
    CompletionRequest,
    CompletionResult,
    GatewayConfig,
    HttpBackend,
    ImagePart,
    LLMGateway,
    TextPart,
    complete,
    complete_json,
    parse_json_output,
)
from arena.llm.stub import ArenaStubResponder, StubBackend

__all__ = [
    "ArenaStubResponder",
    "CompletionRequest",
    "CompletionResult",
    "GatewayConfig",
    "HttpBackend",
    "ImagePart",
    "LLMGateway",
    "StubBackend",
    "TextPart",
    "complete",
    "complete_json",
    "parse_json_output",
]
