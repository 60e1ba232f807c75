"""Signatures, terms, formulas and substitution.

Formulas are frozen dataclasses with structural equality. Only ten
constructors exist; classical negation, ``<->`` and ``<=>`` are built from
them by :func:`neg`, :func:`iff` and :func:`strong_iff`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, Mapping, Tuple, Union

from .errors import ArityError, CaptureError, NotASubformula, UnknownSymbol

# ---------------------------------------------------------------------------
# Signatures and terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    """Predicate arities and constant names. There are no function symbols."""

    predicates: Mapping[str, int] = field(default_factory=dict)
    constants: FrozenSet[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "predicates", dict(sorted(self.predicates.items())))
        object.__setattr__(self, "constants", frozenset(self.constants))
        for name, arity in self.predicates.items():
            if not name:
                raise UnknownSymbol("predicate names must be non-empty")
            if not isinstance(arity, int) or isinstance(arity, bool) or arity < 0:
                raise ArityError(f"predicate {name!r} has invalid arity {arity!r}")
        for name in self.constants:
            if not name:
                raise UnknownSymbol("constant names must be non-empty")
        clash = sorted(set(self.predicates) & self.constants)
        if clash:
            raise UnknownSymbol(f"names declared both as predicate and constant: {', '.join(clash)}")

    def __hash__(self) -> int:
        return hash((tuple(self.predicates.items()), self.constants))

    def arity(self, predicate: str) -> int:
        try:
            return self.predicates[predicate]
        except KeyError:
            raise UnknownSymbol(f"undeclared predicate {predicate!r}") from None

    def merge(self, other: "Signature") -> "Signature":
        """Union of two signatures; shared predicates must agree on arity."""

        predicates = dict(self.predicates)
        for name, arity in other.predicates.items():
            if predicates.get(name, arity) != arity:
                raise ArityError(f"predicate {name!r} declared with arities {predicates[name]} and {arity}")
            predicates[name] = arity
        return Signature(predicates, self.constants | other.constants)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Var, Const]

# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Formula:
    """Common base of the ten formula constructors."""

    def __str__(self) -> str:
        from .frontend import print_formula

        return print_formula(self)


@dataclass(frozen=True)
class Atom(Formula):
    predicate: str
    args: Tuple[Term, ...] = ()


@dataclass(frozen=True)
class Bottom(Formula):
    pass


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Imp(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class StrongNeg(Formula):
    body: Formula


@dataclass(frozen=True)
class Box(Formula):
    body: Formula


@dataclass(frozen=True)
class Diamond(Formula):
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


BOTTOM = Bottom()

Binary = (And, Or, Imp)
Unary = (StrongNeg, Box, Diamond)
Quantifier = (Forall, Exists)


def neg(f: Formula) -> Formula:
    """Classical negation ``f -> _|_``."""

    return Imp(f, BOTTOM)


def iff(left: Formula, right: Formula) -> Formula:
    return And(Imp(left, right), Imp(right, left))


def strong_iff(left: Formula, right: Formula) -> Formula:
    """Strong equivalence: equivalence of the formulas and of their strong negations."""

    return And(iff(left, right), iff(StrongNeg(left), StrongNeg(right)))


def atom(predicate: str, *args: Term) -> Atom:
    return Atom(predicate, tuple(args))


def children(f: Formula) -> Tuple[Formula, ...]:
    match f:
        case And(l, r) | Or(l, r) | Imp(l, r):
            return (l, r)
        case StrongNeg(b) | Box(b) | Diamond(b) | Forall(_, b) | Exists(_, b):
            return (b,)
    return ()


def rebuild(f: Formula, parts: Tuple[Formula, ...]) -> Formula:
    """Return ``f`` with its immediate subformulas replaced by ``parts``."""

    match f:
        case And():
            return And(parts[0], parts[1])
        case Or():
            return Or(parts[0], parts[1])
        case Imp():
            return Imp(parts[0], parts[1])
        case StrongNeg():
            return StrongNeg(parts[0])
        case Box():
            return Box(parts[0])
        case Diamond():
            return Diamond(parts[0])
        case Forall(v, _):
            return Forall(v, parts[0])
        case Exists(v, _):
            return Exists(v, parts[0])
    return f


def subformulas(f: Formula) -> Iterator[Formula]:
    """Pre-order traversal of all subformula occurrences."""

    stack = [f]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(children(current)))


def size(f: Formula) -> int:
    """Number of nodes (atoms and ``_|_`` count one each)."""

    return sum(1 for _ in subformulas(f))


def depth(f: Formula) -> int:
    parts = children(f)
    return 0 if not parts else 1 + max(depth(part) for part in parts)


def is_modal_free(f: Formula) -> bool:
    return not any(isinstance(sub, (Box, Diamond)) for sub in subformulas(f))


# ---------------------------------------------------------------------------
# Free variables and well-formedness
# ---------------------------------------------------------------------------


def term_vars(terms: Iterable[Term]) -> FrozenSet[str]:
    return frozenset(t.name for t in terms if isinstance(t, Var))


def free_vars(f: Formula) -> FrozenSet[str]:
    match f:
        case Atom(_, args):
            return term_vars(args)
        case Forall(v, body) | Exists(v, body):
            return free_vars(body) - {v}
    result: FrozenSet[str] = frozenset()
    for part in children(f):
        result |= free_vars(part)
    return result


def is_sentence(f: Formula) -> bool:
    return not free_vars(f)


def constants_of(f: Formula) -> FrozenSet[str]:
    return frozenset(
        t.name for sub in subformulas(f) if isinstance(sub, Atom) for t in sub.args if isinstance(t, Const)
    )


def check_formula(f: Formula, sig: Signature) -> Formula:
    """Validate predicates, arities and constants of ``f`` against ``sig``."""

    for sub in subformulas(f):
        if isinstance(sub, Atom):
            arity = sig.arity(sub.predicate)
            if len(sub.args) != arity:
                raise ArityError(
                    f"predicate {sub.predicate!r} expects {arity} argument(s), got {len(sub.args)}"
                )
            for term in sub.args:
                if isinstance(term, Const) and term.name not in sig.constants:
                    raise UnknownSymbol(f"undeclared constant {term.name!r}")
                if isinstance(term, Var) and (term.name in sig.constants or term.name in sig.predicates):
                    raise UnknownSymbol(f"variable {term.name!r} clashes with a declared symbol")
        elif isinstance(sub, Quantifier) and (sub.var in sig.constants or sub.var in sig.predicates):
            raise UnknownSymbol(f"bound variable {sub.var!r} clashes with a declared symbol")
    return f


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Substitution:
    """Map from variables to terms, identity outside a finite support."""

    pairs: Tuple[Tuple[str, Term], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[str, Term]) -> "Substitution":
        return cls(tuple(sorted((x, t) for x, t in mapping.items() if t != Var(x))))

    @property
    def support(self) -> FrozenSet[str]:
        return frozenset(x for x, _ in self.pairs)

    @property
    def basic(self) -> bool:
        """True iff every assigned term is a constant."""

        return all(isinstance(t, Const) for _, t in self.pairs)

    def as_dict(self) -> Dict[str, Term]:
        return dict(self.pairs)

    def __call__(self, name: str) -> Term:
        for x, t in self.pairs:
            if x == name:
                return t
        return Var(name)


def is_free_for(t: Term, x: str, f: Formula) -> bool:
    """True iff no free ``x`` in ``f`` sits under a binder of a variable of ``t``."""

    if isinstance(t, Const) or t == Var(x):
        return True
    return _free_for(t.name, x, f)


def _free_for(y: str, x: str, f: Formula) -> bool:
    match f:
        case Atom() | Bottom():
            return True
        case Forall(v, body) | Exists(v, body):
            if v == x:
                return True
            if v == y and x in free_vars(body):
                return False
            return _free_for(y, x, body)
    return all(_free_for(y, x, part) for part in children(f))


def _replace_terms(f: Formula, mapping: Mapping[str, Term]) -> Formula:
    if not mapping:
        return f
    match f:
        case Atom(p, args):
            return Atom(p, tuple(mapping.get(t.name, t) if isinstance(t, Var) else t for t in args))
        case Bottom():
            return f
        case Forall(v, body) | Exists(v, body):
            inner = {k: t for k, t in mapping.items() if k != v}
            return rebuild(f, (_replace_terms(body, inner),))
    return rebuild(f, tuple(_replace_terms(part, mapping) for part in children(f)))


def apply_substitution(f: Formula, s: Substitution) -> Formula:
    """Simultaneously replace the free variables of ``f`` according to ``s``."""

    free = free_vars(f)
    for x, t in s.pairs:
        if x in free and not is_free_for(t, x, f):
            raise CaptureError(f"{t} is not free for {x} in {f}")
    return _replace_terms(f, {x: t for x, t in s.pairs if x in free})


def substitute_var(f: Formula, x: str, t: Term) -> Formula:
    """``f(x/t)``: replace the free occurrences of ``x`` by ``t``."""

    if not is_free_for(t, x, f):
        raise CaptureError(f"{t} is not free for {x} in {f}")
    return _replace_terms(f, {x: t})


# ---------------------------------------------------------------------------
# Subformula replacement
# ---------------------------------------------------------------------------


def occurrences(theta: Formula, phi: Formula) -> int:
    """Number of occurrences of ``phi`` in ``theta`` (occurrences never nest)."""

    return sum(1 for sub in subformulas(theta) if sub == phi)


def replace_subformula(
    theta: Formula,
    phi: Formula,
    psi: Formula,
    positions: Iterable[int] | None = None,
) -> Formula:
    """``theta(phi/psi)``.

    ``positions`` selects occurrences by their 0-based index in pre-order;
    ``None`` replaces all of them. Matching is syntactic identity.
    """

    total = occurrences(theta, phi)
    if total == 0:
        raise NotASubformula(f"{phi} does not occur in {theta}")
    if positions is None:
        selected = frozenset(range(total))
    else:
        selected = frozenset(positions)
        bad = sorted(p for p in selected if not 0 <= p < total)
        if bad:
            raise NotASubformula(
                f"{phi} occurs {total} time(s) in {theta}; invalid position(s) {', '.join(map(str, bad))}"
            )

    counter = 0

    def walk(node: Formula) -> Formula:
        nonlocal counter
        if node == phi:
            index = counter
            counter += 1
            return psi if index in selected else node
        parts = children(node)
        if not parts:
            return node
        return rebuild(node, tuple(walk(part) for part in parts))

    return walk(theta)


__all__ = [
    "And",
    "Atom",
    "BOTTOM",
    "Bottom",
    "Box",
    "Const",
    "Diamond",
    "Exists",
    "Forall",
    "Formula",
    "Imp",
    "Or",
    "Signature",
    "StrongNeg",
    "Substitution",
    "Term",
    "Var",
    "apply_substitution",
    "atom",
    "check_formula",
    "children",
    "constants_of",
    "depth",
    "free_vars",
    "iff",
    "is_free_for",
    "is_modal_free",
    "is_sentence",
    "neg",
    "occurrences",
    "rebuild",
    "replace_subformula",
    "size",
    "strong_iff",
    "subformulas",
    "substitute_var",
]
