"""Composed image search: exact retrieval, prompt parsing and the toy trainer."""

from ._core import (
    Error,
    Index,
    ParseError,
    SyntaxMode,
    build_query_text,
    cosine_distance,
    estimate_tokens,
    format_tool_call,
    normalize,
    parse_llm_output,
    parse_query_text,
    recall_at_k,
    run_scripted_chat,
    train_toy,
)

__all__ = [
    "Error",
    "Index",
    "ParseError",
    "SyntaxMode",
    "build_query_text",
    "cosine_distance",
    "estimate_tokens",
    "format_tool_call",
    "normalize",
    "parse_llm_output",
    "parse_query_text",
    "recall_at_k",
    "run_scripted_chat",
    "train_toy",
]
