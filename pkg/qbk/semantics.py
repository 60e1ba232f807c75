"""Kripke models with twin structures, forcing, and bounded countermodel search.

A model is a frame ``(W, R)`` with, at every world ``w``, a non-empty domain
``A_w``, a constant interpretation and two extensions per predicate: the
tuples for which the atom is verified (``positive``) and falsified
(``negative``). Domains expand and constants are rigid along ``R``.

Evaluation uses environments instead of naming individuals in the language:
forcing ``F`` under ``{x: a}`` is forcing the sentence ``F(x/a)`` over the
signature extended with a constant for ``a``. Modal clauses evaluate the body
at the successor world.
"""

from __future__ import annotations

import enum
import itertools
import random
from collections import deque
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import (
    Any,
    Deque,
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

from .config import SearchLimits
from .errors import (
    BoundsTooLarge,
    IndividualOutOfDomain,
    InvariantViolation,
    NotASentence,
    QBKError,
    UnboundVariable,
)
from .observability import get_logger, metrics
from .syntax import (
    And,
    Atom,
    Bottom,
    Box,
    Const,
    Diamond,
    Exists,
    Forall,
    Formula,
    Imp,
    Or,
    Signature,
    StrongNeg,
    Term,
    check_formula,
    constants_of,
    free_vars,
)

logger = get_logger(__name__)

GroundTuple = Tuple[str, ...]
Extension = Mapping[str, Mapping[str, FrozenSet[GroundTuple]]]
Environment = Mapping[str, str]


class Polarity(str, enum.Enum):
    POS = "+"
    NEG = "-"

    def flip(self) -> "Polarity":
        return Polarity.NEG if self is Polarity.POS else Polarity.POS


class Condition(str, enum.Enum):
    ATOM_COMPLETE = "AtomComplete"
    ATOM_CONSISTENT = "AtomConsistent"
    CONSTANT_DOMAIN = "ConstantDomain"
    REFLEXIVE = "Reflexive"
    TRANSITIVE = "Transitive"
    HEREDITARY = "Hereditary"


_S4 = frozenset({Condition.REFLEXIVE, Condition.TRANSITIVE})
_N4 = _S4 | {Condition.HEREDITARY}

PRESETS: Dict[str, FrozenSet[Condition]] = {
    "QBK": frozenset(),
    "QBKo": frozenset({Condition.ATOM_COMPLETE}),
    "QB3K": frozenset({Condition.ATOM_CONSISTENT}),
    "QB3Ko": frozenset({Condition.ATOM_COMPLETE, Condition.ATOM_CONSISTENT}),
    "QBT": frozenset({Condition.REFLEXIVE}),
    "QBK4": frozenset({Condition.TRANSITIVE}),
    "QBS4": _S4,
    "QB3S4": _S4 | {Condition.ATOM_CONSISTENT},
    "QBKsharp": frozenset({Condition.CONSTANT_DOMAIN}),
    "QN4bot": _N4,
    "QN3": _N4 | {Condition.ATOM_CONSISTENT},
}

PRESET_ALIASES: Dict[str, str] = {
    "QBK°": "QBKo",
    "QB3K°": "QB3Ko",
    "QBK♯": "QBKsharp",
    "QBK#": "QBKsharp",
    "QN4⊥": "QN4bot",
}


@dataclass(frozen=True)
class ModelClass:
    """A set of side conditions a model must satisfy."""

    conditions: FrozenSet[Condition] = frozenset()
    name: str = ""

    @classmethod
    def preset(cls, name: str) -> "ModelClass":
        key = PRESET_ALIASES.get(name, name)
        try:
            return cls(PRESETS[key], key)
        except KeyError:
            known = ", ".join(sorted(PRESETS))
            raise QBKError(f"unknown model class {name!r}", details=[f"known classes: {known}"]) from None

    @classmethod
    def of(cls, *conditions: Condition | str) -> "ModelClass":
        flags = frozenset(Condition(c) for c in conditions)
        name = next((key for key, value in PRESETS.items() if value == flags), "")
        return cls(flags, name)

    def __contains__(self, condition: object) -> bool:
        return condition in self.conditions

    def __or__(self, other: "ModelClass") -> "ModelClass":
        return ModelClass.of(*(self.conditions | other.conditions))

    def __str__(self) -> str:
        if self.name:
            return self.name
        return "{" + ", ".join(sorted(c.value for c in self.conditions)) + "}"


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=True)
class KripkeModel:
    signature: Signature
    worlds: Tuple[str, ...]
    access: FrozenSet[Tuple[str, str]]
    domains: Mapping[str, FrozenSet[str]]
    const_interp: Mapping[str, Mapping[str, str]]
    positive: Extension
    negative: Extension

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def create(
        cls,
        *,
        signature: Signature,
        worlds: Sequence[str],
        access: Iterable[Tuple[str, str]],
        domains: Mapping[str, Iterable[str]],
        const_interp: Mapping[str, Mapping[str, str]] | None = None,
        positive: Mapping[str, Mapping[str, Iterable[Sequence[str]]]] | None = None,
        negative: Mapping[str, Mapping[str, Iterable[Sequence[str]]]] | None = None,
    ) -> "KripkeModel":
        """Normalise the inputs and check every structural invariant."""

        world_tuple = tuple(worlds)
        if not world_tuple:
            raise InvariantViolation("non-empty-worlds", "a model needs at least one world")
        if len(set(world_tuple)) != len(world_tuple):
            raise InvariantViolation("distinct-worlds", "world identifiers must be distinct")
        known = set(world_tuple)

        access_set = frozenset((u, v) for u, v in access)
        for u, v in sorted(access_set):
            if u not in known or v not in known:
                raise InvariantViolation("access-worlds", f"access pair ({u}, {v}) names an unknown world")

        _check_keys("domains", domains, known)
        domain_map: Dict[str, FrozenSet[str]] = {}
        for w in world_tuple:
            if w not in domains:
                raise InvariantViolation("domains", f"world {w} has no domain")
            values = frozenset(domains[w])
            if not values:
                raise InvariantViolation("non-empty-domain", f"domain of world {w} is empty")
            domain_map[w] = values
        for u, v in sorted(access_set):
            if not domain_map[u] <= domain_map[v]:
                missing = ", ".join(sorted(domain_map[u] - domain_map[v]))
                raise InvariantViolation(
                    "domain-inclusion", f"{u} R {v} but A_{u} is not a subset of A_{v} (missing {missing})"
                )

        const_interp = const_interp or {}
        _check_keys("const_interp", const_interp, known)
        interp: Dict[str, Dict[str, str]] = {}
        for w in world_tuple:
            given = dict(const_interp.get(w, {}))
            unknown = sorted(set(given) - signature.constants)
            if unknown:
                raise InvariantViolation("constant-interpretation", f"world {w} interprets undeclared {unknown[0]!r}")
            for c in sorted(signature.constants):
                if c not in given:
                    raise InvariantViolation("constant-interpretation", f"constant {c!r} is uninterpreted at {w}")
                if given[c] not in domain_map[w]:
                    raise InvariantViolation(
                        "constant-interpretation", f"{c!r} denotes {given[c]!r} outside the domain of {w}"
                    )
            interp[w] = dict(sorted(given.items()))
        for u, v in sorted(access_set):
            for c in sorted(signature.constants):
                if interp[u][c] != interp[v][c]:
                    raise InvariantViolation(
                        "rigid-constants", f"{u} R {v} but {c!r} denotes {interp[u][c]} and {interp[v][c]}"
                    )

        pos = _normalise_extension("positive", positive or {}, signature, world_tuple, domain_map)
        neg = _normalise_extension("negative", negative or {}, signature, world_tuple, domain_map)
        return cls(signature, world_tuple, access_set, domain_map, interp, pos, neg)

    @cached_property
    def successors(self) -> Dict[str, Tuple[str, ...]]:
        order = {w: i for i, w in enumerate(self.worlds)}
        result: Dict[str, List[str]] = {w: [] for w in self.worlds}
        for u, v in self.access:
            result[u].append(v)
        return {w: tuple(sorted(vs, key=order.__getitem__)) for w, vs in result.items()}

    @cached_property
    def sorted_domains(self) -> Dict[str, Tuple[str, ...]]:
        return {w: tuple(sorted(self.domains[w])) for w in self.worlds}

    @cached_property
    def reachable(self) -> Dict[str, FrozenSet[str]]:
        """Reflexive-transitive closure of the access relation."""

        closure: Dict[str, FrozenSet[str]] = {}
        for w in self.worlds:
            seen = {w}
            queue = deque([w])
            while queue:
                for v in self.successors[queue.popleft()]:
                    if v not in seen:
                        seen.add(v)
                        queue.append(v)
            closure[w] = frozenset(seen)
        return closure

    def ground_tuples(self, w: str, predicate: str) -> Iterator[GroundTuple]:
        return itertools.product(self.sorted_domains[w], repeat=self.signature.predicates[predicate])


def _check_keys(name: str, mapping: Mapping[str, Any], known: set[str]) -> None:
    extra = sorted(set(mapping) - known)
    if extra:
        raise InvariantViolation(name, f"mentions unknown world {extra[0]!r}")


def _normalise_extension(
    name: str,
    raw: Mapping[str, Mapping[str, Iterable[Sequence[str]]]],
    signature: Signature,
    worlds: Tuple[str, ...],
    domains: Mapping[str, FrozenSet[str]],
) -> Dict[str, Dict[str, FrozenSet[GroundTuple]]]:
    _check_keys(name, raw, set(worlds))
    result: Dict[str, Dict[str, FrozenSet[GroundTuple]]] = {}
    for w in worlds:
        given = raw.get(w, {})
        unknown = sorted(set(given) - set(signature.predicates))
        if unknown:
            raise InvariantViolation("declared-predicates", f"{name} extension at {w} uses undeclared {unknown[0]!r}")
        table: Dict[str, FrozenSet[GroundTuple]] = {}
        for predicate, arity in signature.predicates.items():
            rows = frozenset(tuple(row) for row in given.get(predicate, ()))
            for row in sorted(rows):
                if len(row) != arity:
                    raise InvariantViolation(
                        "extension-arity", f"{name} tuple {list(row)} of {predicate!r} at {w} has arity {len(row)}"
                    )
                outside = [a for a in row if a not in domains[w]]
                if outside:
                    raise InvariantViolation(
                        "extension-domain", f"{name} tuple {list(row)} of {predicate!r} at {w} leaves the domain"
                    )
            table[predicate] = rows
        result[w] = table
    return result


# ---------------------------------------------------------------------------
# Forcing
# ---------------------------------------------------------------------------


class Evaluator:
    """Verification and falsification over one model.

    ``individuals`` and ``atom_holds`` are the only places the model's
    individuals are consulted.
    """

    def __init__(self, model: KripkeModel):
        self.model = model
        self._successors = model.successors
        self._domains = model.sorted_domains

    def individuals(self, w: str) -> Tuple[str, ...]:
        return self._domains[w]

    def atom_holds(self, w: str, predicate: str, row: GroundTuple, positive: bool) -> bool:
        table = self.model.positive if positive else self.model.negative
        return row in table[w][predicate]

    def value(self, w: str, term: Term, env: Environment) -> str:
        if isinstance(term, Const):
            return self.model.const_interp[w][term.name]
        try:
            return env[term.name]
        except KeyError:
            raise UnboundVariable(f"variable {term.name!r} has no value") from None

    def force(self, w: str, f: Formula, positive: bool, env: Environment) -> bool:
        match f:
            case Atom(predicate, args):
                row = tuple(self.value(w, t, env) for t in args)
                return self.atom_holds(w, predicate, row, positive)
            case Bottom():
                return not positive
            case StrongNeg(body):
                return self.force(w, body, not positive, env)
            case And(left, right):
                if positive:
                    return self.force(w, left, True, env) and self.force(w, right, True, env)
                return self.force(w, left, False, env) or self.force(w, right, False, env)
            case Or(left, right):
                if positive:
                    return self.force(w, left, True, env) or self.force(w, right, True, env)
                return self.force(w, left, False, env) and self.force(w, right, False, env)
            case Imp(left, right):
                if positive:
                    return not self.force(w, left, True, env) or self.force(w, right, True, env)
                return self.force(w, left, True, env) and self.force(w, right, False, env)
            case Box(body):
                if positive:
                    return all(self.force(u, body, True, env) for u in self._successors[w])
                return any(self.force(u, body, False, env) for u in self._successors[w])
            case Diamond(body):
                if positive:
                    return any(self.force(u, body, True, env) for u in self._successors[w])
                return all(self.force(u, body, False, env) for u in self._successors[w])
            case Forall(var, body):
                if positive:
                    return all(self.force(w, body, True, {**env, var: a}) for a in self.individuals(w))
                return any(self.force(w, body, False, {**env, var: a}) for a in self.individuals(w))
            case Exists(var, body):
                if positive:
                    return any(self.force(w, body, True, {**env, var: a}) for a in self.individuals(w))
                return all(self.force(w, body, False, {**env, var: a}) for a in self.individuals(w))
        raise TypeError(f"not a formula: {f!r}")


def check_environment(m: KripkeModel, w: str, f: Formula, env: Environment) -> None:
    """Reject unknown worlds, symbols outside the model signature and bad assignments."""

    if w not in m.domains:
        raise QBKError(f"unknown world {w!r}")
    check_formula(f, m.signature)
    for x in sorted(free_vars(f)):
        if x not in env:
            raise UnboundVariable(f"free variable {x!r} of {f} has no value")
        if env[x] not in m.domains[w]:
            raise IndividualOutOfDomain(f"{x} = {env[x]!r} is not in the domain of {w}")


def evaluate(
    m: KripkeModel,
    w: str,
    f: Formula,
    polarity: Polarity | str = Polarity.POS,
    env: Environment | None = None,
) -> bool:
    """``M, w |=+ f`` or ``M, w |=- f`` under ``env``."""

    env = dict(env or {})
    check_environment(m, w, f, env)
    return Evaluator(m).force(w, f, Polarity(polarity) is Polarity.POS, env)


def environments(m: KripkeModel, w: str, variables: Sequence[str]) -> Iterator[Dict[str, str]]:
    """Every assignment of ``variables`` into the domain of ``w``, in order."""

    for values in itertools.product(m.sorted_domains[w], repeat=len(variables)):
        yield dict(zip(variables, values))


@dataclass(frozen=True)
class Witness:
    world: str
    substitution: Tuple[Tuple[str, str], ...] = ()

    def as_dict(self) -> Dict[str, Any]:
        return {"world": self.world, "substitution": dict(self.substitution)}


def check_consequence_on_model(
    m: KripkeModel, gamma: Sequence[Formula], delta: Sequence[Formula]
) -> Optional[Witness]:
    """A world verifying all of ``gamma`` where no instance of ``delta`` is verified."""

    for g in gamma:
        if free_vars(g):
            raise NotASentence(f"hypothesis {g} is not closed")
    for formula in (*gamma, *delta):
        check_formula(formula, m.signature)
    variables = sorted(set().union(*(free_vars(d) for d in delta)))
    evaluator = Evaluator(m)
    for w in m.worlds:
        if not all(evaluator.force(w, g, True, {}) for g in gamma):
            continue
        for env in environments(m, w, variables):
            if not any(evaluator.force(w, d, True, env) for d in delta):
                return Witness(w, tuple(sorted(env.items())))
    return None


def strong_equivalence_witness(
    m: KripkeModel, f: Formula, g: Formula
) -> Optional[Tuple[str, Dict[str, str], Polarity]]:
    """A point where ``f`` and ``g`` disagree in either polarity, if any."""

    check_formula(f, m.signature)
    check_formula(g, m.signature)
    variables = sorted(free_vars(f) | free_vars(g))
    evaluator = Evaluator(m)
    for w in m.worlds:
        for env in environments(m, w, variables):
            for polarity in Polarity:
                positive = polarity is Polarity.POS
                if evaluator.force(w, f, positive, env) != evaluator.force(w, g, positive, env):
                    return w, env, polarity
    return None


# ---------------------------------------------------------------------------
# Model classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    model_class: ModelClass
    violations: Tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def _ground_atom(predicate: str, row: GroundTuple) -> str:
    return predicate if not row else f"{predicate}({', '.join(row)})"


def validate_model(m: KripkeModel, cls: ModelClass) -> ValidationReport:
    violations: List[str] = []
    if Condition.ATOM_COMPLETE in cls or Condition.ATOM_CONSISTENT in cls:
        for w in m.worlds:
            for predicate in m.signature.predicates:
                pos, neg = m.positive[w][predicate], m.negative[w][predicate]
                if Condition.ATOM_COMPLETE in cls:
                    for row in m.ground_tuples(w, predicate):
                        if row not in pos and row not in neg:
                            violations.append(
                                f"AtomComplete: {_ground_atom(predicate, row)} is neither verified nor falsified at {w}"
                            )
                if Condition.ATOM_CONSISTENT in cls:
                    for row in sorted(pos & neg):
                        violations.append(
                            f"AtomConsistent: {_ground_atom(predicate, row)} is both verified and falsified at {w}"
                        )
    if Condition.CONSTANT_DOMAIN in cls:
        first = m.worlds[0]
        for w in m.worlds[1:]:
            if m.domains[w] != m.domains[first]:
                violations.append(f"ConstantDomain: domains of {first} and {w} differ")
    if Condition.REFLEXIVE in cls:
        for w in m.worlds:
            if (w, w) not in m.access:
                violations.append(f"Reflexive: {w} does not see itself")
    if Condition.TRANSITIVE in cls:
        for u, v in sorted(m.access):
            for t in m.successors[v]:
                if (u, t) not in m.access:
                    violations.append(f"Transitive: {u} R {v} and {v} R {t} but not {u} R {t}")
    if Condition.HEREDITARY in cls:
        for u, v in sorted(m.access):
            for predicate in m.signature.predicates:
                for label, table in (("verified", m.positive), ("falsified", m.negative)):
                    lost = sorted(table[u][predicate] - table[v][predicate])
                    for row in lost:
                        violations.append(
                            f"Hereditary: {_ground_atom(predicate, row)} is {label} at {u} but not at {v}"
                        )
    return ValidationReport(cls, tuple(violations))


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------

_NEITHER, _VERIFIED, _FALSIFIED, _BOTH = range(4)


def _statuses(cls: ModelClass) -> Tuple[int, ...]:
    allowed = [_NEITHER, _VERIFIED, _FALSIFIED, _BOTH]
    if Condition.ATOM_COMPLETE in cls:
        allowed.remove(_NEITHER)
    if Condition.ATOM_CONSISTENT in cls:
        allowed.remove(_BOTH)
    return tuple(allowed)


def _frame_ok(n: int, pairs: FrozenSet[Tuple[int, int]], cls: ModelClass) -> bool:
    if Condition.REFLEXIVE in cls and any((i, i) not in pairs for i in range(n)):
        return False
    if Condition.TRANSITIVE in cls:
        for i, j in pairs:
            for k in range(n):
                if (j, k) in pairs and (i, k) not in pairs:
                    return False
    return True


@lru_cache(maxsize=None)
def _frames(n: int, reflexive: bool, transitive: bool) -> Tuple[FrozenSet[Tuple[int, int]], ...]:
    cls = ModelClass.of(
        *([Condition.REFLEXIVE] if reflexive else []),
        *([Condition.TRANSITIVE] if transitive else []),
    )
    cells = [(i, j) for i in range(n) for j in range(n)]
    result = []
    for mask in range(1 << len(cells)):
        pairs = frozenset(cell for bit, cell in enumerate(cells) if mask >> bit & 1)
        if _frame_ok(n, pairs, cls):
            result.append(pairs)
    return tuple(result)


def frames(n: int, cls: ModelClass) -> Tuple[FrozenSet[Tuple[int, int]], ...]:
    """All access relations on ``n`` worlds allowed by the class, in mask order."""

    return _frames(n, Condition.REFLEXIVE in cls, Condition.TRANSITIVE in cls)


def _individuals(k: int) -> Tuple[str, ...]:
    return tuple(f"d{i}" for i in range(k))


def _domain_choices(max_domain: int) -> List[FrozenSet[str]]:
    pool = _individuals(max_domain)
    return [
        frozenset(combo)
        for size in range(1, max_domain + 1)
        for combo in itertools.combinations(pool, size)
    ]


def _is_prefix(values: FrozenSet[str]) -> bool:
    return values == frozenset(_individuals(len(values)))


def _domain_assignments(
    n: int, pairs: FrozenSet[Tuple[int, int]], max_domain: int, cls: ModelClass
) -> Iterator[Tuple[FrozenSet[str], ...]]:
    if Condition.CONSTANT_DOMAIN in cls:
        for size in range(1, max_domain + 1):
            yield (frozenset(_individuals(size)),) * n
        return
    choices = _domain_choices(max_domain)
    for assignment in itertools.product(choices, repeat=n):
        if not _is_prefix(frozenset().union(*assignment)):
            continue
        if all(assignment[i] <= assignment[j] for i, j in pairs):
            yield assignment


def _ground_atoms(sig: Signature, domain: FrozenSet[str]) -> Tuple[Tuple[str, GroundTuple], ...]:
    ordered = tuple(sorted(domain))
    return tuple(
        (predicate, row)
        for predicate, arity in sig.predicates.items()
        for row in itertools.product(ordered, repeat=arity)
    )


def _local_count(sig: Signature, domain: FrozenSet[str], statuses: int) -> int:
    return len(domain) ** len(sig.constants) * statuses ** len(_ground_atoms(sig, domain))


def estimate_model_count(sig: Signature, limits: SearchLimits, cls: ModelClass) -> int:
    """Upper bound on the number of models :func:`enumerate_models` yields.

    Raises :class:`BoundsTooLarge` as soon as the running bound passes the cap.
    Up to four worlds the frames are counted exactly; beyond that every
    relation counts as a frame and every domain choice as allowed, which
    overestimates but keeps the estimate cheap.
    """

    statuses = len(_statuses(cls))
    cap = limits.max_models
    per_world = sum(_local_count(sig, domain, statuses) for domain in _domain_choices(limits.max_domain))
    total = 0
    for n in range(1, limits.max_worlds + 1):
        if n > 4:
            total += 2 ** (n * n) * per_world**n
            if total > cap:
                raise BoundsTooLarge(total, cap)
            continue
        for pairs in frames(n, cls):
            for assignment in _domain_assignments(n, pairs, limits.max_domain, cls):
                product = 1
                for domain in assignment:
                    product *= _local_count(sig, domain, statuses)
                total += product
                if total > cap:
                    raise BoundsTooLarge(total, cap)
    return total


def _local_structures(
    sig: Signature, domain: FrozenSet[str], statuses: Tuple[int, ...]
) -> List[Tuple[Tuple[str, ...], Tuple[int, ...]]]:
    ordered = tuple(sorted(domain))
    constants = sorted(sig.constants)
    atoms = _ground_atoms(sig, domain)
    return [
        (values, status)
        for values in itertools.product(ordered, repeat=len(constants))
        for status in itertools.product(statuses, repeat=len(atoms))
    ]


def _compatible(
    earlier: Tuple[Tuple[str, ...], Tuple[int, ...]],
    later: Tuple[Tuple[str, ...], Tuple[int, ...]],
    earlier_atoms: Tuple[Tuple[str, GroundTuple], ...],
    later_index: Mapping[Tuple[str, GroundTuple], int],
    hereditary: bool,
) -> bool:
    if earlier[0] != later[0]:
        return False
    if hereditary:
        for position, ground in enumerate(earlier_atoms):
            before = earlier[1][position]
            after = later[1][later_index[ground]]
            if before & ~after:
                return False
    return True


def enumerate_models(sig: Signature, limits: SearchLimits, cls: ModelClass) -> Iterator[KripkeModel]:
    """Every model over ``sig`` within ``limits`` satisfying ``cls``.

    Worlds are named ``w0, w1, ...`` and individuals ``d0, d1, ...``; the union
    of all domains is always an initial segment of the individuals. Models are
    not quotiented by isomorphism.
    """

    estimate_model_count(sig, limits, cls)
    statuses = _statuses(cls)
    hereditary = Condition.HEREDITARY in cls
    local_cache: Dict[FrozenSet[str], List[Tuple[Tuple[str, ...], Tuple[int, ...]]]] = {}
    atoms_cache: Dict[FrozenSet[str], Tuple[Tuple[str, GroundTuple], ...]] = {}
    index_cache: Dict[FrozenSet[str], Dict[Tuple[str, GroundTuple], int]] = {}

    for n in range(1, limits.max_worlds + 1):
        names = tuple(f"w{i}" for i in range(n))
        for pairs in frames(n, cls):
            access = frozenset((names[i], names[j]) for i, j in pairs)
            constraints = [
                [i for i in range(j) if (i, j) in pairs or (j, i) in pairs]
                for j in range(n)
            ]
            for assignment in _domain_assignments(n, pairs, limits.max_domain, cls):
                for domain in assignment:
                    if domain not in local_cache:
                        local_cache[domain] = _local_structures(sig, domain, statuses)
                        atoms_cache[domain] = _ground_atoms(sig, domain)
                        index_cache[domain] = {g: k for k, g in enumerate(atoms_cache[domain])}
                chosen: List[Tuple[Tuple[str, ...], Tuple[int, ...]]] = []

                def extend(j: int) -> Iterator[KripkeModel]:
                    if j == n:
                        yield _assemble(sig, names, access, assignment, chosen, atoms_cache)
                        return
                    domain = assignment[j]
                    for local in local_cache[domain]:
                        ok = True
                        for i in constraints[j]:
                            if (i, j) in pairs and not _compatible(
                                chosen[i], local, atoms_cache[assignment[i]], index_cache[domain], hereditary
                            ):
                                ok = False
                                break
                            if (j, i) in pairs and not _compatible(
                                local, chosen[i], atoms_cache[domain], index_cache[assignment[i]], hereditary
                            ):
                                ok = False
                                break
                        if not ok:
                            continue
                        chosen.append(local)
                        yield from extend(j + 1)
                        chosen.pop()

                yield from extend(0)


def _assemble(
    sig: Signature,
    names: Tuple[str, ...],
    access: FrozenSet[Tuple[str, str]],
    assignment: Tuple[FrozenSet[str], ...],
    chosen: Sequence[Tuple[Tuple[str, ...], Tuple[int, ...]]],
    atoms_cache: Mapping[FrozenSet[str], Tuple[Tuple[str, GroundTuple], ...]],
) -> KripkeModel:
    constants = sorted(sig.constants)
    domains: Dict[str, FrozenSet[str]] = {}
    interp: Dict[str, Dict[str, str]] = {}
    positive: Dict[str, Dict[str, FrozenSet[GroundTuple]]] = {}
    negative: Dict[str, Dict[str, FrozenSet[GroundTuple]]] = {}
    for index, w in enumerate(names):
        domain = assignment[index]
        values, status = chosen[index]
        domains[w] = domain
        interp[w] = dict(zip(constants, values))
        pos: Dict[str, set[GroundTuple]] = {p: set() for p in sig.predicates}
        neg: Dict[str, set[GroundTuple]] = {p: set() for p in sig.predicates}
        for (predicate, row), flag in zip(atoms_cache[domain], status):
            if flag & _VERIFIED:
                pos[predicate].add(row)
            if flag & _FALSIFIED:
                neg[predicate].add(row)
        positive[w] = {p: frozenset(rows) for p, rows in pos.items()}
        negative[w] = {p: frozenset(rows) for p, rows in neg.items()}
    return KripkeModel(sig, names, access, domains, interp, positive, negative)


# ---------------------------------------------------------------------------
# Random models
# ---------------------------------------------------------------------------


def _closure(n: int, pairs: set[Tuple[int, int]], cls: ModelClass) -> set[Tuple[int, int]]:
    if Condition.REFLEXIVE in cls:
        pairs |= {(i, i) for i in range(n)}
    if Condition.TRANSITIVE in cls:
        changed = True
        while changed:
            changed = False
            for i, j in list(pairs):
                for k in range(n):
                    if (j, k) in pairs and (i, k) not in pairs:
                        pairs.add((i, k))
                        changed = True
    return pairs


def _random_model(sig: Signature, limits: SearchLimits, cls: ModelClass, rng: random.Random) -> KripkeModel:
    n = rng.randint(1, limits.max_worlds)
    names = tuple(f"w{i}" for i in range(n))
    pairs = _closure(n, {(i, j) for i in range(n) for j in range(n) if rng.random() < 0.4}, cls)
    pool = _individuals(limits.max_domain)

    if Condition.CONSTANT_DOMAIN in cls:
        shared = frozenset(pool[: rng.randint(1, limits.max_domain)])
        domain_sets = [set(shared) for _ in range(n)]
    else:
        domain_sets = [set(rng.sample(pool, rng.randint(1, len(pool)))) for _ in range(n)]
        changed = True
        while changed:
            changed = False
            for i, j in pairs:
                if not domain_sets[i] <= domain_sets[j]:
                    domain_sets[j] |= domain_sets[i]
                    changed = True

    # Constants are rigid on every connected component of the frame.
    component = list(range(n))

    def find(i: int) -> int:
        while component[i] != i:
            component[i] = component[component[i]]
            i = component[i]
        return i

    for i, j in pairs:
        component[find(i)] = find(j)
    interp: Dict[str, Dict[str, str]] = {w: {} for w in names}
    for c in sorted(sig.constants):
        for root in sorted({find(i) for i in range(n)}):
            members = [i for i in range(n) if find(i) == root]
            value = rng.choice(sorted(domain_sets[members[0]]))
            for i in members:
                domain_sets[i].add(value)
                interp[names[i]][c] = value

    domains = {names[i]: frozenset(domain_sets[i]) for i in range(n)}
    access = frozenset((names[i], names[j]) for i, j in pairs)
    positive: Dict[str, Dict[str, set[GroundTuple]]] = {w: {p: set() for p in sig.predicates} for w in names}
    negative: Dict[str, Dict[str, set[GroundTuple]]] = {w: {p: set() for p in sig.predicates} for w in names}
    statuses = _statuses(cls)

    if Condition.HEREDITARY in cls:
        reach = {i: {i} for i in range(n)}
        for i in range(n):
            queue = deque([i])
            while queue:
                u = queue.popleft()
                for a, b in pairs:
                    if a == u and b not in reach[i]:
                        reach[i].add(b)
                        queue.append(b)
        for predicate, arity in sig.predicates.items():
            for row in itertools.product(pool, repeat=arity):
                holders = [i for i in range(n) if set(row) <= domain_sets[i]]
                verified: set[int] = set()
                for i in holders:
                    if rng.random() < 0.35:
                        verified |= reach[i]
                falsified: set[int] = set()
                for i in holders:
                    if Condition.ATOM_CONSISTENT in cls and reach[i] & verified:
                        continue
                    if rng.random() < 0.35:
                        falsified |= reach[i]
                for i in verified:
                    positive[names[i]][predicate].add(row)
                for i in falsified:
                    negative[names[i]][predicate].add(row)
    else:
        for w in names:
            for predicate, row in _ground_atoms(sig, domains[w]):
                flag = rng.choice(statuses)
                if flag & _VERIFIED:
                    positive[w][predicate].add(row)
                if flag & _FALSIFIED:
                    negative[w][predicate].add(row)

    return KripkeModel(
        sig,
        names,
        access,
        domains,
        interp,
        {w: {p: frozenset(rows) for p, rows in table.items()} for w, table in positive.items()},
        {w: {p: frozenset(rows) for p, rows in table.items()} for w, table in negative.items()},
    )


def sample_models(
    sig: Signature,
    limits: SearchLimits,
    cls: ModelClass,
    rng: random.Random,
    count: int,
) -> List[KripkeModel]:
    """``count`` random models of ``cls`` within ``limits``."""

    models: List[KripkeModel] = []
    attempts = 0
    while len(models) < count:
        attempts += 1
        if attempts > 1000 * max(count, 1):
            raise QBKError(f"could not sample models of class {cls}")
        candidate = _random_model(sig, limits, cls, rng)
        if validate_model(candidate, cls).ok:
            models.append(candidate)
    return models


# ---------------------------------------------------------------------------
# Countermodel search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Countermodel:
    model: KripkeModel
    witness: Witness
    index: int = field(default=0, compare=False)


def _check_batch(
    batch: Sequence[KripkeModel], gamma: Sequence[Formula], delta: Sequence[Formula]
) -> Optional[Tuple[int, Witness]]:
    for offset, model in enumerate(batch):
        witness = check_consequence_on_model(model, gamma, delta)
        if witness is not None:
            return offset, witness
    return None


def _batches(models: Iterator[KripkeModel], size: int) -> Iterator[List[KripkeModel]]:
    while True:
        batch = list(itertools.islice(models, size))
        if not batch:
            return
        yield batch


def search_countermodel(
    gamma: Sequence[Formula],
    delta: Sequence[Formula],
    limits: SearchLimits,
    cls: ModelClass,
    sig: Signature | None = None,
    *,
    batch_size: int = 256,
) -> Optional[Countermodel]:
    """First model in enumeration order refuting ``gamma |= delta``.

    ``None`` only means that no countermodel exists within the bounds. With
    several workers, batches are checked in parallel but scanned in order, so
    the answer never depends on ``limits.workers``.
    """

    from .frontend import infer_signature

    for g in gamma:
        if free_vars(g):
            raise NotASentence(f"hypothesis {g} is not closed")
    signature = sig if sig is not None else Signature()
    everything: Formula = Bottom()
    for f in (*gamma, *delta):
        everything = Or(everything, f)
    signature = signature.merge(infer_signature(everything, signature.constants | constants_of(everything)))

    logger.info(
        "countermodel search started",
        extra={"class": str(cls), "max_worlds": limits.max_worlds, "max_domain": limits.max_domain},
    )
    models = enumerate_models(signature, limits, cls)
    seen = 0
    result: Optional[Countermodel] = None

    if limits.workers == 1:
        for model in models:
            seen += 1
            witness = check_consequence_on_model(model, gamma, delta)
            if witness is not None:
                result = Countermodel(model, witness, seen - 1)
                break
    else:
        with ProcessPoolExecutor(max_workers=limits.workers) as pool:
            pending: Deque[Tuple[List[KripkeModel], Future[Optional[Tuple[int, Witness]]]]] = deque()
            batches = _batches(models, batch_size)
            exhausted = False
            while True:
                while not exhausted and len(pending) < limits.workers * 2:
                    batch = next(batches, None)
                    if batch is None:
                        exhausted = True
                        break
                    pending.append((batch, pool.submit(_check_batch, batch, tuple(gamma), tuple(delta))))
                if not pending:
                    break
                batch, future = pending.popleft()
                found = future.result()
                if found is not None:
                    offset, witness = found
                    result = Countermodel(batch[offset], witness, seen + offset)
                    seen += offset + 1
                    for _, other in pending:
                        other.cancel()
                    break
                seen += len(batch)

    metrics.increment("models_enumerated", seen)
    if result is not None:
        metrics.increment("countermodels_found")
    logger.info(
        "countermodel search finished",
        extra={"models_checked": seen, "found": result is not None},
    )
    return result


__all__ = [
    "Condition",
    "Countermodel",
    "Environment",
    "Evaluator",
    "KripkeModel",
    "ModelClass",
    "PRESETS",
    "Polarity",
    "ValidationReport",
    "Witness",
    "check_consequence_on_model",
    "check_environment",
    "enumerate_models",
    "environments",
    "estimate_model_count",
    "evaluate",
    "frames",
    "sample_models",
    "search_countermodel",
    "strong_equivalence_witness",
    "validate_model",
]
