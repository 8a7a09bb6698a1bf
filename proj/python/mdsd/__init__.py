"""Optimal acceptance rates and verifiers for multi-draft speculative sampling."""

from ._core import (
    MdsdError,
    alpha_exact,
    alpha_greedy_closed,
    alpha_single_draft,
    alpha_star,
    estimate_alpha,
    evaluate_position,
    kseq_solve,
    rrs_w_rate,
    scan,
    softmax,
)

__all__ = [
    "MdsdError",
    "alpha_exact",
    "alpha_greedy_closed",
    "alpha_single_draft",
    "alpha_star",
    "estimate_alpha",
    "evaluate_position",
    "kseq_solve",
    "rrs_w_rate",
    "scan",
    "softmax",
]
