"""Negative normal form.

Strong negation is pushed inward in one structural pass using the
strong-equivalence axioms read left to right:

    ~~A => A              ~(A -> B) => A & ~B
    ~(A | B) => ~A & ~B   ~(A & B) => ~A | ~B
    ~[]A => <>~A          ~<>A => []~A
    ~forall x A => exists x ~A
    ~exists x A => forall x ~A

``~P(...)`` and ``~_|_`` are normal. The system is orthogonal, so the order in
which redexes are contracted does not matter.
"""

from __future__ import annotations

from .syntax import (
    And,
    Atom,
    Bottom,
    Box,
    Diamond,
    Exists,
    Forall,
    Formula,
    Imp,
    Or,
    StrongNeg,
    children,
    rebuild,
    subformulas,
)


def is_nnf(f: Formula) -> bool:
    """True iff every strong negation wraps an atom or ``_|_``."""

    return all(
        isinstance(sub.body, (Atom, Bottom)) for sub in subformulas(f) if isinstance(sub, StrongNeg)
    )


def to_nnf(f: Formula) -> Formula:
    match f:
        case StrongNeg(body):
            return _negated(body)
        case Atom() | Bottom():
            return f
    return rebuild(f, tuple(to_nnf(part) for part in children(f)))


def _negated(f: Formula) -> Formula:
    """Normal form of ``~f``."""

    match f:
        case Atom() | Bottom():
            return StrongNeg(f)
        case StrongNeg(body):
            return to_nnf(body)
        case Imp(left, right):
            return And(to_nnf(left), _negated(right))
        case Or(left, right):
            return And(_negated(left), _negated(right))
        case And(left, right):
            return Or(_negated(left), _negated(right))
        case Box(body):
            return Diamond(_negated(body))
        case Diamond(body):
            return Box(_negated(body))
        case Forall(var, body):
            return Exists(var, _negated(body))
        case Exists(var, body):
            return Forall(var, _negated(body))
    raise TypeError(f"not a formula: {f!r}")


__all__ = ["is_nnf", "to_nnf"]
