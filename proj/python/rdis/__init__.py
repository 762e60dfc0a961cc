"""Recursive decomposition optimizer: problem construction, evaluation and runs."""

from ._core import (
    ConfigError,
    EvaluationError,
    ObjectiveFunction,
    ParseError,
    Problem,
    load_problem,
    make_bundle,
    make_lj_chain,
    make_sinusoid,
    minimize,
    parse_problem,
    run,
)

__all__ = [
    "ConfigError",
    "EvaluationError",
    "ObjectiveFunction",
    "ParseError",
    "Problem",
    "load_problem",
    "make_bundle",
    "make_lj_chain",
    "make_sinusoid",
    "minimize",
    "parse_problem",
    "run",
]
