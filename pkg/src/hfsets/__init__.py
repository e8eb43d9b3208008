"""Hereditarily finite sets, Mostowski collapse, bounded-formula absoluteness."""

from .kernel import (
    ELEMENT_BUDGET,
    STAGE_CAP,
    CapacityError,
    HFSet,
    SetLiteralError,
    SetStore,
    ackermann_code,
    ackermann_decode,
    default_store,
    difference,
    empty,
    format_set,
    intersection,
    is_subset,
    is_transitive,
    kuratowski_pair,
    make_set,
    numeral,
    parse_set,
    powerset,
    rank,
    transitive_closure,
    union,
    v_stage,
)

__version__ = "0.1.0"
