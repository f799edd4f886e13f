"""Exact simulation, couplings and limit-law checks for Lambda-coalescents."""
from .measure import FiniteMeasure, functionals, integrate, lambda_rate, parse_measure, total_rate
from .partition import LabeledPartition, merge, refines, restrict_by_smallest
from .ratetable import RateTable, build_rate_table
from .simulator import CoalescentPath, ReplicateSummary, simulate, simulate_counts, summarize

__all__ = [
    "CoalescentPath",
    "FiniteMeasure",
    "LabeledPartition",
    "RateTable",
    "ReplicateSummary",
    "build_rate_table",
    "functionals",
    "integrate",
    "lambda_rate",
    "merge",
    "parse_measure",
    "refines",
    "restrict_by_smallest",
    "simulate",
    "simulate_counts",
    "summarize",
    "total_rate",
]
