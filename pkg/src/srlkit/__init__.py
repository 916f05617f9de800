"""Uniform semantic role labeling: span and dependency styles, one engine."""

from .data import (
    DEP,
    NULL_ROLE,
    SPAN,
    RoleInventory,
    Sentence,
    Span,
    SrlGraph,
    SrlTuple,
    enumerate_arguments,
    enumerate_predicates,
)

__all__ = [
    "DEP",
    "NULL_ROLE",
    "SPAN",
    "RoleInventory",
    "Sentence",
    "Span",
    "SrlGraph",
    "SrlTuple",
    "enumerate_arguments",
    "enumerate_predicates",
]

__version__ = "0.1.0"
