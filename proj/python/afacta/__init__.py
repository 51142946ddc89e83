"""Factual-claim annotation pipeline (Python bindings to the C++ core)."""

from ._core import (
    CacheMissError,
    ConfigError,
    DataError,
    DomainError,
    Error,
    ParseError,
    TransportError,
    ValidationError,
    accuracy,
    aggregate,
    annotate_replay,
    cohen_kappa,
    fisher_aggregate,
    majority_vote,
    parse_fact_extraction,
    parse_judge,
    parse_sc_cot,
    parse_yes_no,
    read_annotations,
    render_prompts,
    sha256_hex,
    split_tiers,
    two_sample_t,
)

__all__ = [
    "CacheMissError",
    "ConfigError",
    "DataError",
    "DomainError",
    "Error",
    "ParseError",
    "TransportError",
    "ValidationError",
    "accuracy",
    "aggregate",
    "annotate_replay",
    "cohen_kappa",
    "fisher_aggregate",
    "majority_vote",
    "parse_fact_extraction",
    "parse_judge",
    "parse_sc_cot",
    "parse_yes_no",
    "read_annotations",
    "render_prompts",
    "sha256_hex",
    "split_tiers",
    "two_sample_t",
]
