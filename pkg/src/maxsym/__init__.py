"""Exact generation and verification of linear ODEs of maximal symmetry."""
from maxsym.diffalg import (
    DiffPoly,
    Indeterminate,
    RewriteRule,
    build_rule_table,
    coefficient_of,
    evaluate,
    parse_text,
    reduce_fixpoint,
    total_derivative,
    var,
)

__version__ = "0.1.0"
