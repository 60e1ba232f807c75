"""Hilbert calculus: axiom schemes, derivations and the proof checker.

Schemes are stored as formula patterns over metavariables ``A``, ``B``, ``C``
(written Φ, Ψ, Θ in diagnostics) and quantifier-variable metavariables
``?x``. Equivalences in schemes are expanded to their definitions before
matching, so an ``<->`` scheme matches the full conjunction; the two
implications are also available as ``<ID>.lr`` / ``<ID>.rl``.

Besides the primitive rules the checker accepts ``taut`` and ``tc`` lines
(tautologies and tautological consequences of the {->, &, |, _|_} skeleton)
and ``lemma`` lines citing a stored theorem-mode derivation. Both are derived
rules of the base calculus.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import InvariantViolation, NotApplicable, QBKError
from .observability import get_logger, metrics
from .semantics import Condition, ModelClass
from .syntax import (
    BOTTOM,
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
    Signature,
    StrongNeg,
    Term,
    Var,
    children,
    free_vars,
    iff,
    is_free_for,
    neg,
    strong_iff,
    substitute_var,
)

logger = get_logger(__name__)

# ---------------------------------------------------------------------------
# Patterns
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Meta(Formula):
    """Formula metavariable; only ever appears inside scheme patterns."""

    name: str


A, B, C = Meta("A"), Meta("B"), Meta("C")
X = "?x"

_DISPLAY = {"A": "Φ", "B": "Ψ", "C": "Θ", X: "x"}


def _match(pattern: Formula, f: Formula, bindings: Dict[str, Any]) -> bool:
    if isinstance(pattern, Meta):
        if pattern.name in bindings:
            return bindings[pattern.name] == f
        bindings[pattern.name] = f
        return True
    if type(pattern) is not type(f):
        return False
    match pattern:
        case Atom():
            return pattern == f
        case Bottom():
            return True
        case Forall(var, body) | Exists(var, body):
            assert isinstance(f, (Forall, Exists))
            if var.startswith("?"):
                if bindings.setdefault(var, f.var) != f.var:
                    return False
            elif var != f.var:
                return False
            return _match(body, f.body, bindings)
    return all(_match(p, g, bindings) for p, g in zip(children(pattern), children(f)))


def _fill(pattern: Formula, bindings: Mapping[str, Any]) -> Formula:
    match pattern:
        case Meta(name):
            return bindings[name]
        case Forall(var, body):
            return Forall(bindings.get(var, var), _fill(body, bindings))
        case Exists(var, body):
            return Exists(bindings.get(var, var), _fill(body, bindings))
        case Atom() | Bottom():
            return pattern
        case And(l, r):
            return And(_fill(l, bindings), _fill(r, bindings))
        case Or(l, r):
            return Or(_fill(l, bindings), _fill(r, bindings))
        case Imp(l, r):
            return Imp(_fill(l, bindings), _fill(r, bindings))
        case StrongNeg(b):
            return StrongNeg(_fill(b, bindings))
        case Box(b):
            return Box(_fill(b, bindings))
        case Diamond(b):
            return Diamond(_fill(b, bindings))
    raise TypeError(f"not a pattern: {pattern!r}")


# ---------------------------------------------------------------------------
# Schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Instantiation:
    """A witness that a formula is an instance of a scheme."""

    scheme: str
    bindings: Tuple[Tuple[str, Any], ...]

    def as_dict(self) -> Dict[str, Any]:
        return dict(self.bindings)

    def describe(self) -> str:
        parts = []
        for key, value in self.bindings:
            parts.append(f"{_DISPLAY.get(key, key)} := {value}")
        return f"{self.scheme} with " + ", ".join(parts) if parts else self.scheme


Matcher = Callable[[Formula], Optional[Dict[str, Any]]]


@dataclass(frozen=True)
class Scheme:
    id: str
    text: str
    pattern: Optional[Formula] = None
    matcher: Optional[Matcher] = field(default=None, compare=False)
    extension: bool = False
    derived: bool = False

    def match(self, f: Formula) -> Optional[Dict[str, Any]]:
        if self.matcher is not None:
            return self.matcher(f)
        bindings: Dict[str, Any] = {}
        assert self.pattern is not None
        return bindings if _match(self.pattern, f, bindings) else None


def _term_slots(f: Formula, bound: FrozenSet[str] = frozenset()) -> Iterable[Tuple[Term, FrozenSet[str]]]:
    match f:
        case Atom(_, args):
            for term in args:
                yield term, bound
            return
        case Forall(var, body) | Exists(var, body):
            yield from _term_slots(body, bound | {var})
            return
    for part in children(f):
        yield from _term_slots(part, bound)


def _instance_term(phi: Formula, x: str, target: Formula) -> Optional[Term]:
    """The ``t`` with ``phi(x/t) == target`` and ``t`` free for ``x``, if any."""

    candidate: Term = Var(x)
    for (term, bound), (other, _) in zip(_term_slots(phi), _term_slots(target)):
        if term == Var(x) and x not in bound:
            candidate = other
            break
    if not is_free_for(candidate, x, phi):
        return None
    return candidate if substitute_var(phi, x, candidate) == target else None


def _match_q1(f: Formula) -> Optional[Dict[str, Any]]:
    if isinstance(f, Imp) and isinstance(f.left, Forall):
        x, phi = f.left.var, f.left.body
        t = _instance_term(phi, x, f.right)
        if t is not None:
            return {"A": phi, X: x, "t": t}
    return None


def _match_q2(f: Formula) -> Optional[Dict[str, Any]]:
    if isinstance(f, Imp) and isinstance(f.right, Exists):
        x, phi = f.right.var, f.right.body
        t = _instance_term(phi, x, f.left)
        if t is not None:
            return {"A": phi, X: x, "t": t}
    return None


_BASE: List[Tuple[str, str, Formula | Matcher]] = [
    ("I1", "Φ -> (Ψ -> Φ)", Imp(A, Imp(B, A))),
    ("I2", "(Φ -> (Ψ -> Θ)) -> ((Φ -> Ψ) -> (Φ -> Θ))", Imp(Imp(A, Imp(B, C)), Imp(Imp(A, B), Imp(A, C)))),
    ("C1", "Φ & Ψ -> Φ", Imp(And(A, B), A)),
    ("C2", "Φ & Ψ -> Ψ", Imp(And(A, B), B)),
    ("C3", "Φ -> (Ψ -> Φ & Ψ)", Imp(A, Imp(B, And(A, B)))),
    ("D1", "Φ -> Φ | Ψ", Imp(A, Or(A, B))),
    ("D2", "Ψ -> Φ | Ψ", Imp(B, Or(A, B))),
    ("D3", "(Φ -> Θ) -> ((Ψ -> Θ) -> (Φ | Ψ -> Θ))", Imp(Imp(A, C), Imp(Imp(B, C), Imp(Or(A, B), C)))),
    ("N1", "Φ | !Φ", Or(A, neg(A))),
    ("N2", "_|_ -> Φ", Imp(BOTTOM, A)),
    ("SN1", "~~Φ <-> Φ", iff(StrongNeg(StrongNeg(A)), A)),
    ("SN2", "~(Φ -> Ψ) <-> Φ & ~Ψ", iff(StrongNeg(Imp(A, B)), And(A, StrongNeg(B)))),
    ("SN3", "~(Φ | Ψ) <-> ~Φ & ~Ψ", iff(StrongNeg(Or(A, B)), And(StrongNeg(A), StrongNeg(B)))),
    ("SN4", "~(Φ & Ψ) <-> ~Φ | ~Ψ", iff(StrongNeg(And(A, B)), Or(StrongNeg(A), StrongNeg(B)))),
    ("SN5", "~_|_", StrongNeg(BOTTOM)),
    ("K1", "[]Φ & []Ψ -> [](Φ & Ψ)", Imp(And(Box(A), Box(B)), Box(And(A, B)))),
    ("K2", "[](Φ -> Φ)", Box(Imp(A, A))),
    ("M1", "![]Φ <-> <>!Φ", iff(neg(Box(A)), Diamond(neg(A)))),
    ("M2", "!<>Φ <-> []!Φ", iff(neg(Diamond(A)), Box(neg(A)))),
    ("M3", "[]Φ <=> ~<>~Φ", strong_iff(Box(A), StrongNeg(Diamond(StrongNeg(A))))),
    ("M4", "<>Φ <=> ~[]~Φ", strong_iff(Diamond(A), StrongNeg(Box(StrongNeg(A))))),
    ("Q1", "forall x . Φ -> Φ(x/t), t free for x in Φ", _match_q1),
    ("Q2", "Φ(x/t) -> exists x . Φ, t free for x in Φ", _match_q2),
    ("Q3", "~forall x . Φ <-> exists x . ~Φ", iff(StrongNeg(Forall(X, A)), Exists(X, StrongNeg(A)))),
    ("Q4", "~exists x . Φ <-> forall x . ~Φ", iff(StrongNeg(Exists(X, A)), Forall(X, StrongNeg(A)))),
]

_EXTENSIONS: List[Tuple[str, str, Formula]] = [
    ("EXC", "Φ | ~Φ", Or(A, StrongNeg(A))),
    ("EXP", "~Φ -> (Φ -> Ψ)", Imp(StrongNeg(A), Imp(A, B))),
    ("BA", "<>exists x . Φ -> exists x . <>Φ", Imp(Diamond(Exists(X, A)), Exists(X, Diamond(A)))),
    ("BABOX", "forall x . []Φ -> []forall x . Φ", Imp(Forall(X, Box(A)), Box(Forall(X, A)))),
    ("T", "[]Φ -> Φ", Imp(Box(A), A)),
    ("FOUR", "[]Φ -> [][]Φ", Imp(Box(A), Box(Box(A)))),
]

BASE_SCHEMES: Tuple[str, ...] = tuple(entry[0] for entry in _BASE)
EXTENSION_SCHEMES: Tuple[str, ...] = tuple(entry[0] for entry in _EXTENSIONS)


def _halves(scheme_id: str, text: str, pattern: Formula) -> List[Scheme]:
    """Implication halves of an ``<->`` or ``<=>`` scheme."""

    result: List[Scheme] = []
    if "<=>" in text:
        left_text, right_text = (part.strip() for part in text.split("<=>"))
        assert isinstance(pattern, And) and isinstance(pattern.left, And)
        lr, rl = pattern.left.left, pattern.left.right
        neg_lr, neg_rl = pattern.right.left, pattern.right.right  # type: ignore[attr-defined]
        result.append(Scheme(f"{scheme_id}.lr", f"{left_text} -> {right_text}", lr, derived=True))
        result.append(Scheme(f"{scheme_id}.rl", f"{right_text} -> {left_text}", rl, derived=True))
        result.append(Scheme(f"{scheme_id}.neg-lr", f"~({left_text}) -> ~({right_text})", neg_lr, derived=True))
        result.append(Scheme(f"{scheme_id}.neg-rl", f"~({right_text}) -> ~({left_text})", neg_rl, derived=True))
    elif "<->" in text:
        left_text, right_text = (part.strip() for part in text.split("<->"))
        assert isinstance(pattern, And)
        result.append(Scheme(f"{scheme_id}.lr", f"{left_text} -> {right_text}", pattern.left, derived=True))
        result.append(Scheme(f"{scheme_id}.rl", f"{right_text} -> {left_text}", pattern.right, derived=True))
    return result


def _build_registry() -> Dict[str, Scheme]:
    registry: Dict[str, Scheme] = {}
    for scheme_id, text, body in _BASE:
        if isinstance(body, Formula):
            registry[scheme_id] = Scheme(scheme_id, text, pattern=body)
            for half in _halves(scheme_id, text, body):
                registry[half.id] = half
        else:
            registry[scheme_id] = Scheme(scheme_id, text, matcher=body)
    for scheme_id, text, body in _EXTENSIONS:
        registry[scheme_id] = Scheme(scheme_id, text, pattern=body, extension=True)
    return registry


SCHEMES: Dict[str, Scheme] = _build_registry()


def match_scheme(scheme_id: str, f: Formula) -> Optional[Instantiation]:
    """Bindings under which scheme ``scheme_id`` instantiates to ``f``."""

    scheme = SCHEMES.get(scheme_id)
    if scheme is None:
        raise QBKError(f"unknown axiom scheme {scheme_id!r}")
    bindings = scheme.match(f)
    if bindings is None:
        return None
    return Instantiation(scheme_id, tuple(sorted(bindings.items())))


def instantiate(scheme_id: str, bindings: Mapping[str, Any]) -> Formula:
    """Instance of a scheme; ``Q1``/``Q2`` take ``A``, ``?x`` and ``t``."""

    scheme = SCHEMES.get(scheme_id)
    if scheme is None:
        raise QBKError(f"unknown axiom scheme {scheme_id!r}")
    if scheme.pattern is not None:
        return _fill(scheme.pattern, bindings)
    phi, x, t = bindings["A"], bindings[X], bindings["t"]
    if scheme_id == "Q1":
        return Imp(Forall(x, phi), substitute_var(phi, x, t))
    return Imp(substitute_var(phi, x, t), Exists(x, phi))


# ---------------------------------------------------------------------------
# Logics
# ---------------------------------------------------------------------------

LOGICS: Dict[str, FrozenSet[str]] = {
    "QBK": frozenset(),
    "QBKo": frozenset({"EXC"}),
    "QB3K": frozenset({"EXP"}),
    "QB3Ko": frozenset({"EXC", "EXP"}),
    "QBKsharp": frozenset({"BA"}),
    "QBKsharp-box": frozenset({"BABOX"}),
    "QBT": frozenset({"T"}),
    "QBK4": frozenset({"FOUR"}),
    "QBS4": frozenset({"T", "FOUR"}),
    "QB3S4": frozenset({"T", "FOUR", "EXP"}),
}

_LOGIC_ALIASES = {"QBK°": "QBKo", "QB3K°": "QB3Ko", "QBK♯": "QBKsharp", "QBK#": "QBKsharp"}

_CONDITION_OF = {
    "EXC": Condition.ATOM_COMPLETE,
    "EXP": Condition.ATOM_CONSISTENT,
    "BA": Condition.CONSTANT_DOMAIN,
    "BABOX": Condition.CONSTANT_DOMAIN,
    "T": Condition.REFLEXIVE,
    "FOUR": Condition.TRANSITIVE,
}


@dataclass(frozen=True)
class LogicPreset:
    """Base calculus plus a set of extension schemes."""

    name: str
    extensions: FrozenSet[str] = frozenset()

    def enables(self, scheme_id: str) -> bool:
        scheme = SCHEMES.get(scheme_id)
        return scheme is not None and (not scheme.extension or scheme_id in self.extensions)

    def includes(self, other: "LogicPreset") -> bool:
        return other.extensions <= self.extensions

    def model_class(self) -> ModelClass:
        """Models on which every theorem of this logic is verified."""

        return ModelClass.of(*sorted({_CONDITION_OF[e] for e in self.extensions}))


def logic_preset(logic: str | Sequence[str] | LogicPreset) -> LogicPreset:
    """Resolve a preset name or a list of extension scheme ids."""

    if isinstance(logic, LogicPreset):
        return logic
    if isinstance(logic, str):
        key = _LOGIC_ALIASES.get(logic, logic)
        if key not in LOGICS:
            raise QBKError(f"unknown logic {logic!r}", details=[f"known logics: {', '.join(sorted(LOGICS))}"])
        return LogicPreset(key, LOGICS[key])
    extensions = frozenset(logic)
    unknown = sorted(extensions - set(EXTENSION_SCHEMES))
    if unknown:
        raise QBKError(f"unknown extension scheme {unknown[0]!r}")
    name = next((key for key, value in LOGICS.items() if value == extensions), "QBK+" + "+".join(sorted(extensions)))
    return LogicPreset(name, extensions)


# ---------------------------------------------------------------------------
# Derivations
# ---------------------------------------------------------------------------


class Mode(str, enum.Enum):
    THEOREM = "theorem"
    CONSEQUENCE = "consequence"


@dataclass(frozen=True)
class Axiom:
    scheme: str

    def cited(self) -> Tuple[int, ...]:
        return ()

    def token(self) -> str:
        return f"axiom:{self.scheme}"


@dataclass(frozen=True)
class Hyp:
    index: int

    def cited(self) -> Tuple[int, ...]:
        return ()

    def token(self) -> str:
        return f"hyp:{self.index}"


@dataclass(frozen=True)
class MP:
    """Modus ponens: line ``major`` is ``line minor -> this``."""

    minor: int
    major: int

    def cited(self) -> Tuple[int, ...]:
        return (self.minor, self.major)

    def token(self) -> str:
        return f"mp:{self.minor},{self.major}"


@dataclass(frozen=True)
class MB:
    premise: int

    def cited(self) -> Tuple[int, ...]:
        return (self.premise,)

    def token(self) -> str:
        return f"mb:{self.premise}"


@dataclass(frozen=True)
class MD:
    premise: int

    def cited(self) -> Tuple[int, ...]:
        return (self.premise,)

    def token(self) -> str:
        return f"md:{self.premise}"


@dataclass(frozen=True)
class BR1:
    premise: int
    var: str

    def cited(self) -> Tuple[int, ...]:
        return (self.premise,)

    def token(self) -> str:
        return f"br1:{self.premise},{self.var}"


@dataclass(frozen=True)
class BR2:
    premise: int
    var: str

    def cited(self) -> Tuple[int, ...]:
        return (self.premise,)

    def token(self) -> str:
        return f"br2:{self.premise},{self.var}"


@dataclass(frozen=True)
class Taut:
    """Tautological consequence of the cited lines; no citations means a tautology."""

    premises: Tuple[int, ...] = ()

    def cited(self) -> Tuple[int, ...]:
        return self.premises

    def token(self) -> str:
        return "taut" if not self.premises else "tc:" + ",".join(map(str, self.premises))


@dataclass(frozen=True)
class Lemma:
    name: str

    def cited(self) -> Tuple[int, ...]:
        return ()

    def token(self) -> str:
        return f"lemma:{self.name}"


Justification = Union[Axiom, Hyp, MP, MB, MD, BR1, BR2, Taut, Lemma]


@dataclass(frozen=True)
class Line:
    formula: Formula
    justification: Justification


@dataclass(frozen=True)
class Derivation:
    mode: Mode
    logic: LogicPreset
    hypotheses: Tuple[Formula, ...]
    lines: Tuple[Line, ...]
    signature: Optional[Signature] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        object.__setattr__(self, "lines", tuple(self.lines))
        if not self.lines:
            raise InvariantViolation("non-empty-derivation", "a derivation needs at least one line")
        for k, h in enumerate(self.hypotheses):
            if free_vars(h):
                raise InvariantViolation("closed-hypotheses", f"hypothesis {k} ({h}) is not a sentence")
        if self.mode is Mode.THEOREM and self.hypotheses:
            raise InvariantViolation("theorem-without-hypotheses", "theorem-mode derivations take no hypotheses")
        for index, line in enumerate(self.lines):
            j = line.justification
            for cited in j.cited():
                if not 0 <= cited < index:
                    raise InvariantViolation(
                        "earlier-lines", f"line {index} cites line {cited}, which is not an earlier line"
                    )
            if isinstance(j, Hyp):
                if self.mode is Mode.THEOREM:
                    raise InvariantViolation("theorem-without-hypotheses", f"line {index} cites a hypothesis")
                if not 0 <= j.index < len(self.hypotheses):
                    raise InvariantViolation("hypothesis-index", f"line {index} cites missing hypothesis {j.index}")
            if isinstance(j, (MB, MD)) and self.mode is Mode.CONSEQUENCE:
                raise InvariantViolation(
                    "consequence-rules", f"line {index} uses {j.token()}; consequence mode allows MP, BR1 and BR2 only"
                )

    @property
    def conclusion(self) -> Formula:
        return self.lines[-1].formula


@dataclass(frozen=True)
class LineReport:
    index: int
    ok: bool
    detail: str
    instantiation: Optional[Instantiation] = None


@dataclass(frozen=True)
class CheckReport:
    valid: bool
    lines: Tuple[LineReport, ...]
    conclusion: Formula

    @property
    def failures(self) -> Tuple[LineReport, ...]:
        return tuple(line for line in self.lines if not line.ok)


class LemmaStore:
    """Named theorem-mode derivations citable through ``lemma:<name>`` lines."""

    def __init__(self, lemmas: Mapping[str, Derivation] | None = None):
        self._lemmas: Dict[str, Derivation] = {}
        self._verdicts: Dict[str, bool] = {}
        self._checking: set[str] = set()
        for name, derivation in (lemmas or {}).items():
            self.register(name, derivation)

    def register(self, name: str, derivation: Derivation) -> None:
        if derivation.mode is not Mode.THEOREM:
            raise QBKError(f"lemma {name!r} must be a theorem-mode derivation")
        self._lemmas[name] = derivation
        self._verdicts.clear()

    def copy(self) -> "LemmaStore":
        return LemmaStore(dict(self._lemmas))

    def names(self) -> Tuple[str, ...]:
        return tuple(sorted(self._lemmas))

    def get(self, name: str) -> Optional[Derivation]:
        return self._lemmas.get(name)

    def is_valid(self, name: str) -> bool:
        """Whether ``name`` checks against this store; a lemma reached through itself does not."""

        if name in self._verdicts:
            return self._verdicts[name]
        if name in self._checking:
            return False
        self._checking.add(name)
        try:
            verdict = check_derivation(self._lemmas[name], self).valid
        finally:
            self._checking.discard(name)
        self._verdicts[name] = verdict
        return verdict


_DEFAULT_LEMMAS = {
    "converse-barcan": "converse_barcan.json",
    "converse-barcan-box": "converse_barcan_box.json",
    "necessitation": "necessitation.json",
    "barcan-box-from-barcan": "barcan_box_from_barcan.json",
}


@lru_cache(maxsize=1)
def default_lemma_store() -> LemmaStore:
    """Store holding the derivations shipped in ``qbk/fixtures``."""

    from .fixtures import load_fixture_derivation

    return LemmaStore({name: load_fixture_derivation(filename) for name, filename in _DEFAULT_LEMMAS.items()})


# ---------------------------------------------------------------------------
# Propositional skeleton
# ---------------------------------------------------------------------------


def _skeleton_atoms(f: Formula, acc: Dict[Formula, int]) -> None:
    match f:
        case And(l, r) | Or(l, r) | Imp(l, r):
            _skeleton_atoms(l, acc)
            _skeleton_atoms(r, acc)
        case Bottom():
            return
        case _:
            acc.setdefault(f, len(acc))


def _truth(f: Formula, index: Mapping[Formula, int], bits: Sequence[bool]) -> bool:
    match f:
        case And(l, r):
            return _truth(l, index, bits) and _truth(r, index, bits)
        case Or(l, r):
            return _truth(l, index, bits) or _truth(r, index, bits)
        case Imp(l, r):
            return not _truth(l, index, bits) or _truth(r, index, bits)
        case Bottom():
            return False
    return bits[index[f]]


MAX_SKELETON_ATOMS = 16


def is_tautological_consequence(premises: Sequence[Formula], conclusion: Formula) -> bool:
    """Classical consequence of the {->, &, |, _|_} skeleton.

    Every other subformula (atoms, ``~``, modalities, quantifiers) is an
    opaque propositional letter; syntactically equal ones share a letter.
    """

    index: Dict[Formula, int] = {}
    for f in (*premises, conclusion):
        _skeleton_atoms(f, index)
    if len(index) > MAX_SKELETON_ATOMS:
        raise QBKError(f"propositional skeleton has {len(index)} letters; at most {MAX_SKELETON_ATOMS} are supported")
    for bits in itertools.product((False, True), repeat=len(index)):
        if all(_truth(p, index, bits) for p in premises) and not _truth(conclusion, index, bits):
            return False
    return True


# ---------------------------------------------------------------------------
# Checking
# ---------------------------------------------------------------------------


def build_disjunction(formulas: Sequence[Formula]) -> Formula:
    """Right-nested disjunction; the empty disjunction is ``_|_``."""

    if not formulas:
        return BOTTOM
    result = formulas[-1]
    for f in reversed(formulas[:-1]):
        result = Or(f, result)
    return result


def in_disjunctions(f: Formula, delta: Sequence[Formula]) -> bool:
    """Whether ``f`` is a right-nested disjunction of members of ``delta``."""

    if not delta:
        return f == BOTTOM
    if f in delta:
        return True
    return isinstance(f, Or) and f.left in delta and in_disjunctions(f.right, delta)


def _check_line(
    d: Derivation, index: int, lemmas: Optional[LemmaStore]
) -> Tuple[bool, str, Optional[Instantiation]]:
    line = d.lines[index]
    f, j = line.formula, line.justification
    earlier = [ln.formula for ln in d.lines]

    if isinstance(j, Axiom):
        scheme = SCHEMES.get(j.scheme)
        if scheme is None:
            return False, f"unknown axiom scheme {j.scheme!r}", None
        if not d.logic.enables(j.scheme):
            return False, f"scheme {j.scheme} is not available in {d.logic.name}", None
        inst = match_scheme(j.scheme, f)
        if inst is None:
            return False, f"not an instance of {j.scheme}: {scheme.text}", None
        return True, inst.describe(), inst

    if isinstance(j, Hyp):
        if f != d.hypotheses[j.index]:
            return False, f"formula differs from hypothesis {j.index}", None
        return True, f"hypothesis {j.index}", None

    if isinstance(j, MP):
        if earlier[j.major] != Imp(earlier[j.minor], f):
            return False, f"line {j.major} is not 'line {j.minor} -> this formula'", None
        return True, f"modus ponens from {j.minor} and {j.major}", None

    if isinstance(j, (MB, MD)):
        premise = earlier[j.premise]
        wrap = Box if isinstance(j, MB) else Diamond
        rule = "MB" if isinstance(j, MB) else "MD"
        if not isinstance(premise, Imp):
            return False, f"{rule}: line {j.premise} is not an implication", None
        if f != Imp(wrap(premise.left), wrap(premise.right)):
            return False, f"{rule}: formula is not the {'box' if wrap is Box else 'diamond'} form of line {j.premise}", None
        return True, f"{rule} from {j.premise}", None

    if isinstance(j, BR1):
        premise = earlier[j.premise]
        if not isinstance(premise, Imp):
            return False, f"BR1: line {j.premise} is not an implication", None
        if f != Imp(premise.left, Forall(j.var, premise.right)):
            return False, f"BR1: formula is not 'antecedent -> forall {j.var} . consequent' of line {j.premise}", None
        if j.var in free_vars(premise.left):
            return False, f"BR1 side condition: {j.var} is free in the antecedent {premise.left}", None
        return True, f"BR1 from {j.premise} on {j.var}", None

    if isinstance(j, BR2):
        premise = earlier[j.premise]
        if not isinstance(premise, Imp):
            return False, f"BR2: line {j.premise} is not an implication", None
        if f != Imp(Exists(j.var, premise.left), premise.right):
            return False, f"BR2: formula is not 'exists {j.var} . antecedent -> consequent' of line {j.premise}", None
        if j.var in free_vars(premise.right):
            return False, f"BR2 side condition: {j.var} is free in the consequent {premise.right}", None
        return True, f"BR2 from {j.premise} on {j.var}", None

    if isinstance(j, Taut):
        try:
            ok = is_tautological_consequence([earlier[i] for i in j.premises], f)
        except QBKError as exc:
            return False, exc.message, None
        if not ok:
            cited = ", ".join(map(str, j.premises))
            return False, "not a tautology" if not j.premises else f"not a tautological consequence of lines {cited}", None
        return True, "tautology" if not j.premises else "tautological consequence", None

    if isinstance(j, Lemma):
        store = lemmas
        lemma = store.get(j.name) if store is not None else None
        if store is None or lemma is None:
            return False, f"unknown lemma {j.name!r}", None
        if not d.logic.includes(lemma.logic):
            return False, f"lemma {j.name!r} needs {lemma.logic.name}, derivation uses {d.logic.name}", None
        if not store.is_valid(j.name):
            return False, f"lemma {j.name!r} does not check", None
        if f != lemma.conclusion:
            return False, f"formula differs from the conclusion of lemma {j.name!r}", None
        return True, f"lemma {j.name}", None

    return False, f"unsupported justification {j!r}", None


def check_derivation(d: Derivation, lemmas: Optional[LemmaStore] = None) -> CheckReport:
    """Check every line of ``d`` independently."""

    reports = []
    for index in range(len(d.lines)):
        ok, detail, inst = _check_line(d, index, lemmas)
        reports.append(LineReport(index, ok, detail, inst))
    valid = all(r.ok for r in reports)
    metrics.increment("derivations_checked")
    metrics.increment("lines_checked", len(reports))
    metrics.increment("lines_rejected", sum(1 for r in reports if not r.ok))
    logger.debug("derivation checked", extra={"lines": len(reports), "valid": valid})
    return CheckReport(valid, tuple(reports), d.conclusion)


def derives(d: Derivation, delta: Sequence[Formula], lemmas: Optional[LemmaStore] = None) -> bool:
    """``hypotheses |- delta``: ``d`` checks and concludes a member of Disj(delta)."""

    return check_derivation(d, lemmas).valid and in_disjunctions(d.conclusion, delta)


# ---------------------------------------------------------------------------
# Deduction theorem
# ---------------------------------------------------------------------------


def deduction_transform(
    d: Derivation, phi: Formula | None = None, lemmas: Optional[LemmaStore] = None
) -> Derivation:
    """Turn a derivation from ``hypotheses`` into one of ``phi -> conclusion``.

    ``phi`` defaults to the last hypothesis; it is dropped from the hypotheses
    of the result.
    """

    if d.mode is not Mode.CONSEQUENCE:
        raise NotApplicable("the deduction transform needs a consequence-mode derivation")
    if phi is None:
        if not d.hypotheses:
            raise NotApplicable("the derivation has no hypotheses")
        phi = d.hypotheses[-1]
    if phi not in d.hypotheses:
        raise NotApplicable(f"{phi} is not a hypothesis of the derivation")
    report = check_derivation(d, lemmas)
    if not report.valid:
        raise NotApplicable(
            "the derivation does not check", details=[f"line {r.index}: {r.detail}" for r in report.failures]
        )

    remaining = tuple(h for h in d.hypotheses if h != phi)
    new_index = {h: remaining.index(h) for h in remaining}
    out: List[Line] = []
    target: List[int] = []

    def emit(f: Formula, j: Justification) -> int:
        out.append(Line(f, j))
        return len(out) - 1

    def weaken(f: Formula, j: Justification) -> int:
        base = emit(f, j)
        rule = emit(instantiate("I1", {"A": f, "B": phi}), Axiom("I1"))
        return emit(Imp(phi, f), MP(base, rule))

    for line in d.lines:
        f, j = line.formula, line.justification
        if isinstance(j, Hyp) and d.hypotheses[j.index] == phi:
            self_imp = Imp(phi, phi)
            a = emit(instantiate("I2", {"A": phi, "B": self_imp, "C": phi}), Axiom("I2"))
            b = emit(instantiate("I1", {"A": phi, "B": self_imp}), Axiom("I1"))
            c = emit(Imp(Imp(phi, self_imp), self_imp), MP(b, a))
            e = emit(instantiate("I1", {"A": phi, "B": phi}), Axiom("I1"))
            target.append(emit(self_imp, MP(e, c)))
        elif isinstance(j, Hyp):
            target.append(weaken(f, Hyp(new_index[d.hypotheses[j.index]])))
        elif isinstance(j, (Axiom, Lemma)):
            target.append(weaken(f, j))
        elif isinstance(j, MP):
            minor = d.lines[j.minor].formula
            a = emit(instantiate("I2", {"A": phi, "B": minor, "C": f}), Axiom("I2"))
            b = emit(Imp(Imp(phi, minor), Imp(phi, f)), MP(target[j.major], a))
            target.append(emit(Imp(phi, f), MP(target[j.minor], b)))
        elif isinstance(j, Taut):
            target.append(emit(Imp(phi, f), Taut(tuple(target[i] for i in j.premises))))
        elif isinstance(j, BR1):
            premise = d.lines[j.premise].formula
            assert isinstance(premise, Imp)
            a = emit(Imp(And(phi, premise.left), premise.right), Taut((target[j.premise],)))
            b = emit(Imp(And(phi, premise.left), Forall(j.var, premise.right)), BR1(a, j.var))
            target.append(emit(Imp(phi, f), Taut((b,))))
        elif isinstance(j, BR2):
            premise = d.lines[j.premise].formula
            assert isinstance(premise, Imp)
            a = emit(Imp(premise.left, Imp(phi, premise.right)), Taut((target[j.premise],)))
            b = emit(Imp(Exists(j.var, premise.left), Imp(phi, premise.right)), BR2(a, j.var))
            target.append(emit(Imp(phi, f), Taut((b,))))
        else:  # pragma: no cover - MB/MD are excluded from consequence mode
            raise NotApplicable(f"cannot transform {j.token()}")

    result = Derivation(Mode.CONSEQUENCE, d.logic, remaining, tuple(out), d.signature)
    logger.debug("deduction transform", extra={"lines_in": len(d.lines), "lines_out": len(out)})
    return result


__all__ = [
    "Axiom",
    "BASE_SCHEMES",
    "BR1",
    "BR2",
    "CheckReport",
    "Derivation",
    "EXTENSION_SCHEMES",
    "Hyp",
    "Instantiation",
    "Justification",
    "LOGICS",
    "Lemma",
    "LemmaStore",
    "Line",
    "LineReport",
    "LogicPreset",
    "MB",
    "MD",
    "MP",
    "Meta",
    "Mode",
    "SCHEMES",
    "Scheme",
    "Taut",
    "build_disjunction",
    "check_derivation",
    "deduction_transform",
    "default_lemma_store",
    "derives",
    "in_disjunctions",
    "instantiate",
    "is_tautological_consequence",
    "logic_preset",
    "match_scheme",
]
