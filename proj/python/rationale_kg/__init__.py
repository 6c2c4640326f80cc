"""Python bindings for the commit-message rationale pipeline."""

from ._core import (
    Graph,
    RationaleError,
    TransportError,
    classify,
    contradiction,
    extract,
    fleiss_kappa,
    is_missing_entity,
    pair_count,
    run_cli,
    similarity,
    split_sentences,
    unanimous_agreement,
)

__all__ = [
    "Graph",
    "RationaleError",
    "TransportError",
    "classify",
    "contradiction",
    "extract",
    "fleiss_kappa",
    "is_missing_entity",
    "pair_count",
    "run_cli",
    "similarity",
    "split_sentences",
    "unanimous_agreement",
]
