"""Nelson logics and their embedding into the S4 extensions of QBK.

Nelson models have the same shape as QBS4 models whose extensions are
hereditary along the preorder (class ``QN4bot``; ``QN3`` adds consistency).
The forcing clauses are not the QBK ones:

    w |=+ A -> B      for every v >= w: v |=+ A implies v |=+ B
    w |=+ forall x A  for every v >= w and a in A_v: v |=+ A[a]
    w |=+ exists x A  for some a in A_w: w |=+ A[a]
    w |=- A -> B      w |=+ A and w |=- B
    w |=- forall x A  for some a in A_w: w |=- A[a]
    w |=- exists x A  for every v >= w and a in A_v: v |=- A[a]

Conjunction, disjunction, ``~`` and ``_|_`` behave as in QBK. These clauses
keep every formula hereditary and make ``derived_model(m), w |=+ f`` agree
with ``m, w |=+ tau(f)`` for NNF sentences.

``tau_prime`` is the classical-negation variant of the embedding. It is
not faithful; :func:`unfaithful_translation_fixture` packages the one-point
model that shows it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import ClassViolation, NotASentence, NotNelson, NotNNF
from .observability import get_logger
from .semantics import (
    Environment,
    Evaluator,
    KripkeModel,
    ModelClass,
    Polarity,
    Witness,
    check_environment,
    environments,
    validate_model,
)
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
    Var,
    free_vars,
    is_modal_free,
    neg,
)
from .transform import is_nnf

logger = get_logger(__name__)

NELSON_CLASS = "QN4bot"
EXPLOSIVE_NELSON_CLASS = "QN3"


def check_nelson(f: Formula) -> Formula:
    """Return ``f`` if it belongs to the modality-free Nelson language."""

    if not is_modal_free(f):
        raise NotNelson(f"{f} contains a modal operator")
    return f


# ---------------------------------------------------------------------------
# Translations
# ---------------------------------------------------------------------------


def tau(f: Formula) -> Formula:
    """Embedding of an NNF Nelson formula into QBS4."""

    check_nelson(f)
    if not is_nnf(f):
        raise NotNNF(f"{f} is not in negative normal form")
    return _tau(f)


def _tau(f: Formula) -> Formula:
    match f:
        case Atom():
            return Box(f)
        case StrongNeg(Atom() as body):
            return StrongNeg(Diamond(body))
        case StrongNeg(Bottom()) | Bottom():
            return f
        case And(left, right):
            return And(_tau(left), _tau(right))
        case Or(left, right):
            return Or(_tau(left), _tau(right))
        case Imp(left, right):
            return Box(Imp(_tau(left), _tau(right)))
        case Forall(var, body):
            return Box(Forall(var, _tau(body)))
        case Exists(var, body):
            return Exists(var, _tau(body))
    raise NotNNF(f"{f} is not in negative normal form")


def _direct(f: Formula, negated_atom: Callable[[Formula], Formula]) -> Formula:
    match f:
        case Atom():
            return Box(f)
        case Bottom():
            return f
        case And(left, right):
            return And(_direct(left, negated_atom), _direct(right, negated_atom))
        case Or(left, right):
            return Or(_direct(left, negated_atom), _direct(right, negated_atom))
        case Imp(left, right):
            return Box(Imp(_direct(left, negated_atom), _direct(right, negated_atom)))
        case Forall(var, body):
            return Box(Forall(var, _direct(body, negated_atom)))
        case Exists(var, body):
            return Exists(var, _direct(body, negated_atom))
        case StrongNeg(body):
            return _direct_negated(body, negated_atom)
    raise NotNelson(f"{f} contains a modal operator")


def _direct_negated(f: Formula, negated_atom: Callable[[Formula], Formula]) -> Formula:
    """Translation of ``~f``."""

    match f:
        case Atom() | Bottom():
            return negated_atom(f)
        case StrongNeg(body):
            return _direct(body, negated_atom)
        case Imp(left, right):
            return And(_direct(left, negated_atom), _direct_negated(right, negated_atom))
        case And(left, right):
            return Or(_direct_negated(left, negated_atom), _direct_negated(right, negated_atom))
        case Or(left, right):
            return And(_direct_negated(left, negated_atom), _direct_negated(right, negated_atom))
        case Forall(var, body):
            return Exists(var, _direct_negated(body, negated_atom))
        case Exists(var, body):
            return Box(Forall(var, _direct_negated(body, negated_atom)))
    raise NotNelson(f"{f} contains a modal operator")


def _strong_atom(f: Formula) -> Formula:
    return StrongNeg(f) if isinstance(f, Bottom) else StrongNeg(Diamond(f))


def _classical_atom(f: Formula) -> Formula:
    return Box(neg(f))


def tau_tilde(f: Formula) -> Formula:
    """Direct form of :func:`tau` on arbitrary Nelson formulas.

    Equal to ``tau(to_nnf(f))`` for every Nelson formula ``f``.
    """

    return _direct(check_nelson(f), _strong_atom)


def tau_prime(f: Formula) -> Formula:
    """Classical-negation variant: ``~P`` becomes ``[]!P``. Not faithful."""

    return _direct(check_nelson(f), _classical_atom)


TRANSLATIONS = {"tau": tau, "tau-tilde": tau_tilde, "tau-prime": tau_prime}

# ---------------------------------------------------------------------------
# Nelson forcing
# ---------------------------------------------------------------------------


class NelsonEvaluator(Evaluator):
    """Forcing over a preorder with hereditary extensions."""

    def _upward(self, w: str) -> Tuple[str, ...]:
        return self._successors[w]

    def force(self, w: str, f: Formula, positive: bool, env: Environment) -> bool:
        match f:
            case Imp(left, right):
                if positive:
                    return all(
                        not self.force(v, left, True, env) or self.force(v, right, True, env) for v in self._upward(w)
                    )
                return self.force(w, left, True, env) and self.force(w, right, False, env)
            case Forall(var, body):
                if positive:
                    return all(
                        self.force(v, body, True, {**env, var: a}) for v in self._upward(w) for a in self.individuals(v)
                    )
                return any(self.force(w, body, False, {**env, var: a}) for a in self.individuals(w))
            case Exists(var, body):
                if positive:
                    return any(self.force(w, body, True, {**env, var: a}) for a in self.individuals(w))
                return all(
                    self.force(v, body, False, {**env, var: a}) for v in self._upward(w) for a in self.individuals(v)
                )
            case Box() | Diamond():
                raise NotNelson(f"{f} contains a modal operator")
        return super().force(w, f, positive, env)


def _require_class(m: KripkeModel, name: str) -> None:
    report = validate_model(m, ModelClass.preset(name))
    if not report.ok:
        raise ClassViolation(f"model is not of class {name}", violations=list(report.violations))


def nelson_evaluate(
    m: KripkeModel,
    w: str,
    f: Formula,
    polarity: Polarity | str = Polarity.POS,
    env: Mapping[str, str] | None = None,
) -> bool:
    """Nelson verification (``+``) or falsification (``-``) of ``f`` at ``w``."""

    check_nelson(f)
    _require_class(m, NELSON_CLASS)
    assignment = dict(env or {})
    check_environment(m, w, f, assignment)
    return NelsonEvaluator(m).force(w, f, Polarity(polarity) is Polarity.POS, assignment)


def nelson_consequence_witness(
    m: KripkeModel, gamma: Sequence[Formula], conclusion: Formula
) -> Optional[Witness]:
    """A world Nelson-verifying ``gamma`` where an instance of ``conclusion`` is not verified."""

    for g in gamma:
        check_nelson(g)
        if free_vars(g):
            raise NotASentence(f"hypothesis {g} is not closed")
    check_nelson(conclusion)
    _require_class(m, NELSON_CLASS)
    evaluator = NelsonEvaluator(m)
    variables = sorted(free_vars(conclusion))
    for w in m.worlds:
        if not all(evaluator.force(w, g, True, {}) for g in gamma):
            continue
        for assignment in environments(m, w, variables):
            if not evaluator.force(w, conclusion, True, assignment):
                return Witness(w, tuple(sorted(assignment.items())))
    return None


# ---------------------------------------------------------------------------
# Derived models
# ---------------------------------------------------------------------------


def derived_model(m: KripkeModel) -> KripkeModel:
    """Nelson model of a QBS4 model.

    ``P`` is verified at ``w`` where ``[]P`` is verified in ``m`` and
    falsified where ``<>P`` is falsified in ``m``. Frame, domains and
    constants are unchanged.
    """

    _require_class(m, "QBS4")
    evaluator = Evaluator(m)
    positive: Dict[str, Dict[str, List[Tuple[str, ...]]]] = {}
    negative: Dict[str, Dict[str, List[Tuple[str, ...]]]] = {}
    for w in m.worlds:
        positive[w], negative[w] = {}, {}
        for predicate, arity in m.signature.predicates.items():
            variables = tuple(f"x{i}" for i in range(arity))
            ground = Atom(predicate, tuple(Var(x) for x in variables))
            verified: List[Tuple[str, ...]] = []
            falsified: List[Tuple[str, ...]] = []
            for row in itertools.product(m.sorted_domains[w], repeat=arity):
                assignment = dict(zip(variables, row))
                if evaluator.force(w, Box(ground), True, assignment):
                    verified.append(row)
                if evaluator.force(w, Diamond(ground), False, assignment):
                    falsified.append(row)
            positive[w][predicate], negative[w][predicate] = verified, falsified
    logger.debug("derived model computed", extra={"worlds": len(m.worlds)})
    return KripkeModel.create(
        signature=m.signature,
        worlds=m.worlds,
        access=m.access,
        domains=m.domains,
        const_interp=m.const_interp,
        positive=positive,
        negative=negative,
    )


# ---------------------------------------------------------------------------
# Unfaithful translation fixture
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Expectations:
    world: str
    nelson_verified: bool
    tau_verified: bool
    tau_prime_verified: bool
    # Class over which tau_prime(formula) has no bounded countermodel.
    tau_prime_valid_in: str


@dataclass(frozen=True)
class UnfaithfulTranslationFixture:
    model: KripkeModel
    formula: Formula
    expectations: Expectations


def unfaithful_translation_fixture() -> UnfaithfulTranslationFixture:
    """One reflexive point where ``p`` is neither verified nor falsified.

    ``(p -> ~p) -> ~p`` is not Nelson-verified there and neither is its
    ``tau`` translation, while its ``tau_prime`` translation is verified.
    """

    from .fixtures import load_fixture_model

    p = Atom("p")
    formula = Imp(Imp(p, StrongNeg(p)), StrongNeg(p))
    expectations = Expectations(
        world="x",
        nelson_verified=False,
        tau_verified=False,
        tau_prime_verified=True,
        tau_prime_valid_in=NELSON_CLASS,
    )
    return UnfaithfulTranslationFixture(load_fixture_model("one_point_gap.json"), formula, expectations)


__all__ = [
    "EXPLOSIVE_NELSON_CLASS",
    "Expectations",
    "NELSON_CLASS",
    "NelsonEvaluator",
    "TRANSLATIONS",
    "UnfaithfulTranslationFixture",
    "check_nelson",
    "derived_model",
    "nelson_consequence_witness",
    "nelson_evaluate",
    "tau",
    "tau_prime",
    "tau_tilde",
    "unfaithful_translation_fixture",
]
