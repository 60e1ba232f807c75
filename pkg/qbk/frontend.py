"""Concrete syntax for formulas and the JSON document formats.

Formula grammar (ASCII surface)::

    form    := quant | imp
    quant   := ("forall" | "exists") IDENT "." form
    imp     := or (("->" | "<->" | "<=>") form)?
    or      := and ("|" and)*
    and     := unary ("&" unary)*
    unary   := ("~" | "!" | "[]" | "<>") (unary | tight) | atom
    tight   := ("forall" | "exists") IDENT "." (unary | tight)
    atom    := "_|_" | IDENT ("(" term ("," term)* ")")? | "(" form ")"

A quantifier in formula position extends as far right as possible. Directly
after a prefix operator it scopes over a single unary operand, so
``<> exists x . P(x) -> exists x . <> P(x)`` is an implication. ``!A`` is
``A -> _|_``; ``<->`` and ``<=>`` expand into conjunctions of implications.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, FrozenSet, List, Literal, Mapping, Sequence, Tuple, Union

from lark import Lark, Token, Transformer
from lark.exceptions import UnexpectedInput
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, ValidationError

from .errors import ArityError, FormulaSyntaxError, QBKError, SchemaError
from .observability import get_logger
from .syntax import (
    BOTTOM,
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
    Var,
    check_formula,
    iff,
    neg,
    strong_iff,
    subformulas,
)

if TYPE_CHECKING:
    from .calculus import Derivation
    from .semantics import KripkeModel

logger = get_logger(__name__)

# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_GRAMMAR = r"""
?form: quant
     | imp

?quant: "forall" IDENT "." form      -> forall
      | "exists" IDENT "." form      -> exists

?imp: disj
    | disj "->" form                 -> imp
    | disj "<->" form                -> iff
    | disj "<=>" form                -> strong_iff

?disj: conj
     | disj "|" conj                 -> or_

?conj: unary
     | conj "&" unary                -> and_

?unary: "~" operand                  -> strong_neg
      | "!" operand                  -> classical_neg
      | "[]" operand                 -> box
      | "<>" operand                 -> diamond
      | atom

?operand: unary
        | tight

?tight: "forall" IDENT "." operand   -> forall
      | "exists" IDENT "." operand   -> exists

?atom: "_|_"                         -> bottom
     | IDENT "(" term ("," term)* ")" -> predicate
     | IDENT                         -> predicate
     | "(" form ")"

term: IDENT

IDENT: /[A-Za-z][A-Za-z0-9_']*/

%import common.WS
%ignore WS
"""


@lru_cache(maxsize=1)
def _parser() -> Lark:
    return Lark(_GRAMMAR, start="form", parser="lalr", maybe_placeholders=False)


class _ToFormula(Transformer):
    """Build formula values from the lark parse tree."""

    def __init__(self, constants: FrozenSet[str]):
        super().__init__()
        self._constants = constants

    def term(self, children: List[Token]) -> Term:
        name = str(children[0])
        return Const(name) if name in self._constants else Var(name)

    def predicate(self, children: List[Any]) -> Formula:
        name, *args = children
        return Atom(str(name), tuple(args))

    def bottom(self, _children: List[Any]) -> Formula:
        return BOTTOM

    def forall(self, children: List[Any]) -> Formula:
        return Forall(str(children[0]), children[1])

    def exists(self, children: List[Any]) -> Formula:
        return Exists(str(children[0]), children[1])

    def imp(self, children: List[Formula]) -> Formula:
        return Imp(children[0], children[1])

    def iff(self, children: List[Formula]) -> Formula:
        return iff(children[0], children[1])

    def strong_iff(self, children: List[Formula]) -> Formula:
        return strong_iff(children[0], children[1])

    def or_(self, children: List[Formula]) -> Formula:
        return Or(children[0], children[1])

    def and_(self, children: List[Formula]) -> Formula:
        return And(children[0], children[1])

    def strong_neg(self, children: List[Formula]) -> Formula:
        return StrongNeg(children[0])

    def classical_neg(self, children: List[Formula]) -> Formula:
        return neg(children[0])

    def box(self, children: List[Formula]) -> Formula:
        return Box(children[0])

    def diamond(self, children: List[Formula]) -> Formula:
        return Diamond(children[0])


def _describe_terminal(name: str) -> str:
    try:
        pattern = _parser().get_terminal(name).pattern
    except KeyError:
        return name
    if pattern.type == "str":
        return repr(pattern.value)
    return "identifier" if name == "IDENT" else name


def _syntax_error(text: str, exc: UnexpectedInput) -> FormulaSyntaxError:
    position = getattr(exc, "pos_in_stream", None)
    if position is None or position < 0:
        position = len(text)
    line = getattr(exc, "line", -1)
    column = getattr(exc, "column", -1)
    if line is None or line < 0:
        line = text.count("\n", 0, position) + 1
        column = position - (text.rfind("\n", 0, position) + 1) + 1
    raw = getattr(exc, "expected", None) or getattr(exc, "allowed", None) or ()
    expected = sorted({_describe_terminal(name) for name in raw})
    found = text[position : position + 1] or "end of input"
    return FormulaSyntaxError(
        f"unexpected {found!r} at line {line}, column {column}",
        position=position,
        line=line,
        column=column,
        expected=expected,
    )


def infer_signature(f: Formula, constants: FrozenSet[str] = frozenset()) -> Signature:
    """Signature whose predicates are exactly those used in ``f``."""

    arities: Dict[str, int] = {}
    for sub in subformulas(f):
        if isinstance(sub, Atom):
            seen = arities.setdefault(sub.predicate, len(sub.args))
            if seen != len(sub.args):
                raise ArityError(f"predicate {sub.predicate!r} used with {seen} and {len(sub.args)} arguments")
    return Signature(arities, constants)


def parse_formula(text: str, sig: Signature | None = None) -> Formula:
    """Parse ``text`` and validate it against ``sig``.

    Identifiers in term position are constants when ``sig`` declares them and
    variables otherwise. Without a signature the predicates are inferred.
    """

    try:
        tree = _parser().parse(text)
    except UnexpectedInput as exc:
        raise _syntax_error(text, exc) from None
    constants = sig.constants if sig is not None else frozenset()
    formula = _ToFormula(constants).transform(tree)
    check_formula(formula, sig if sig is not None else infer_signature(formula, constants))
    return formula


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_QUANT, _IMP, _OR, _AND, _UNARY, _ATOM = range(6)


def _level(f: Formula) -> int:
    match f:
        case Forall() | Exists():
            return _QUANT
        case Imp():
            return _IMP
        case Or():
            return _OR
        case And():
            return _AND
        case StrongNeg() | Box() | Diamond():
            return _UNARY
    return _ATOM


def _render(f: Formula, required: int) -> str:
    match f:
        case Atom(p, args):
            text = p if not args else f"{p}({', '.join(str(t) for t in args)})"
        case Bottom():
            text = "_|_"
        case Forall(v, body):
            text = f"forall {v} . {_render(body, _QUANT)}"
        case Exists(v, body):
            text = f"exists {v} . {_render(body, _QUANT)}"
        case Imp(left, right):
            text = f"{_render(left, _OR)} -> {_render(right, _QUANT)}"
        case Or(left, right):
            text = f"{_render(left, _OR)} | {_render(right, _AND)}"
        case And(left, right):
            text = f"{_render(left, _AND)} & {_render(right, _UNARY)}"
        case StrongNeg(body):
            text = f"~{_render(body, _UNARY)}"
        case Box(body):
            text = f"[]{_render(body, _UNARY)}"
        case Diamond(body):
            text = f"<>{_render(body, _UNARY)}"
        case _:
            raise TypeError(f"not a formula: {f!r}")
    return f"({text})" if _level(f) < required else text


def print_formula(f: Formula) -> str:
    """Canonical text; ``parse_formula(print_formula(f)) == f``."""

    return _render(f, _QUANT)


def formula_to_data(f: Formula) -> Dict[str, Any]:
    """JSON tree of a formula, one object per node."""

    match f:
        case Atom(p, args):
            return {
                "type": "Atom",
                "predicate": p,
                "args": [{"const" if isinstance(t, Const) else "var": t.name} for t in args],
            }
        case Bottom():
            return {"type": "Bottom"}
        case And(left, right) | Or(left, right) | Imp(left, right):
            return {"type": type(f).__name__, "left": formula_to_data(left), "right": formula_to_data(right)}
        case StrongNeg(body) | Box(body) | Diamond(body):
            return {"type": type(f).__name__, "body": formula_to_data(body)}
        case Forall(v, body) | Exists(v, body):
            return {"type": type(f).__name__, "var": v, "body": formula_to_data(body)}
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------


class DocumentFormat(str, enum.Enum):
    FORMULA = "formula"
    MODEL = "model"
    DERIVATION = "derivation"


@dataclass(frozen=True)
class SourceDocument:
    """Raw UTF-8 text tagged with the grammar it is written in."""

    text: str
    format: DocumentFormat
    origin: str = "<string>"

    @classmethod
    def read(cls, path: Path | str, fmt: DocumentFormat) -> "SourceDocument":
        target = Path(path)
        try:
            text = target.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise SchemaError(f"file not found: {target}") from None
        except UnicodeDecodeError as exc:
            raise SchemaError(f"{target} is not valid UTF-8: {exc.reason}") from None
        return cls(text, fmt, str(target))


class SignatureDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    predicates: Dict[str, NonNegativeInt] = Field(default_factory=dict)
    constants: List[str] = Field(default_factory=list)

    def to_signature(self) -> Signature:
        return Signature(dict(self.predicates), frozenset(self.constants))


Extension = Dict[str, Dict[str, List[List[str]]]]


class ModelDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    signature: SignatureDocument
    worlds: List[str] = Field(min_length=1)
    access: List[Tuple[str, str]] = Field(default_factory=list)
    domains: Dict[str, List[str]]
    const_interp: Dict[str, Dict[str, str]] = Field(default_factory=dict)
    positive: Extension = Field(default_factory=dict)
    negative: Extension = Field(default_factory=dict)


class LineDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    formula: str
    rule: str


class DerivationDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["theorem", "consequence"]
    logic: Union[str, List[str]] = "QBK"
    signature: SignatureDocument
    hypotheses: List[str] = Field(default_factory=list)
    lines: List[LineDocument] = Field(min_length=1)


def _decode(doc: SourceDocument | Mapping[str, Any] | str, fmt: DocumentFormat) -> Any:
    if isinstance(doc, Mapping):
        return doc
    if isinstance(doc, SourceDocument):
        if doc.format is not fmt:
            raise SchemaError(f"expected a {fmt.value} document, got {doc.format.value}")
        text, origin = doc.text, doc.origin
    else:
        text, origin = doc, "<string>"
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(
            f"{origin}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None


def _validate(schema: type[BaseModel], payload: Any) -> Any:
    try:
        return schema.model_validate(payload)
    except ValidationError as exc:
        details = []
        for error in exc.errors():
            path = ".".join(str(part) for part in error.get("loc", ()))
            details.append(f"{path or '<root>'}: {error.get('msg', 'invalid value')}")
        first = exc.errors()[0] if exc.errors() else {}
        path = ".".join(str(part) for part in first.get("loc", ()))
        raise SchemaError(f"document does not match the {schema.__name__} schema", path=path, details=details) from None


def load_signature(doc: SourceDocument | Mapping[str, Any] | str) -> Signature:
    """Signature object, bare or wrapped in a document's ``signature`` key."""

    payload = _decode(doc.text if isinstance(doc, SourceDocument) else doc, DocumentFormat.MODEL)
    if isinstance(payload, Mapping) and "signature" in payload:
        payload = payload["signature"]
    document: SignatureDocument = _validate(SignatureDocument, payload)
    return document.to_signature()


def load_model(doc: SourceDocument | Mapping[str, Any] | str) -> "KripkeModel":
    """Load and fully validate a model document."""

    from .semantics import KripkeModel

    data: ModelDocument = _validate(ModelDocument, _decode(doc, DocumentFormat.MODEL))
    sig = data.signature.to_signature()
    model = KripkeModel.create(
        signature=sig,
        worlds=data.worlds,
        access=data.access,
        domains=data.domains,
        const_interp=data.const_interp,
        positive={w: {p: [tuple(t) for t in rows] for p, rows in ext.items()} for w, ext in data.positive.items()},
        negative={w: {p: [tuple(t) for t in rows] for p, rows in ext.items()} for w, ext in data.negative.items()},
    )
    logger.debug("model loaded", extra={"worlds": len(model.worlds)})
    return model


def dump_model(model: "KripkeModel") -> Dict[str, Any]:
    """Inverse of :func:`load_model` with sorted, deterministic content."""

    def extension(polarity: str) -> Dict[str, Dict[str, List[List[str]]]]:
        result: Dict[str, Dict[str, List[List[str]]]] = {}
        for w in model.worlds:
            table = model.positive[w] if polarity == "+" else model.negative[w]
            rows = {p: [list(t) for t in sorted(table[p])] for p in sorted(table) if table[p]}
            if rows:
                result[w] = rows
        return result

    return {
        "signature": {
            "predicates": dict(sorted(model.signature.predicates.items())),
            "constants": sorted(model.signature.constants),
        },
        "worlds": list(model.worlds),
        "access": [list(pair) for pair in sorted(model.access)],
        "domains": {w: sorted(model.domains[w]) for w in model.worlds},
        "const_interp": {w: dict(sorted(model.const_interp[w].items())) for w in model.worlds if model.const_interp[w]},
        "positive": extension("+"),
        "negative": extension("-"),
    }


_RULE_PATTERNS: Sequence[Tuple[str, re.Pattern[str]]] = (
    ("axiom", re.compile(r"axiom:(?P<scheme>[A-Za-z0-9_.\-]+)")),
    ("hyp", re.compile(r"hyp:(?P<k>\d+)")),
    ("mp", re.compile(r"mp:(?P<i>\d+),(?P<j>\d+)")),
    ("mb", re.compile(r"mb:(?P<i>\d+)")),
    ("md", re.compile(r"md:(?P<i>\d+)")),
    ("br1", re.compile(r"br1:(?P<i>\d+),(?P<var>[A-Za-z][A-Za-z0-9_']*)")),
    ("br2", re.compile(r"br2:(?P<i>\d+),(?P<var>[A-Za-z][A-Za-z0-9_']*)")),
    ("taut", re.compile(r"taut")),
    ("tc", re.compile(r"tc:(?P<cited>\d+(?:,\d+)*)")),
    ("lemma", re.compile(r"lemma:(?P<name>[A-Za-z0-9_.\-]+)")),
)


def parse_rule(text: str) -> Any:
    """Turn a rule token such as ``mp:0,2`` into a justification value."""

    from . import calculus

    token = text.replace(" ", "")
    for kind, pattern in _RULE_PATTERNS:
        match = pattern.fullmatch(token)
        if match is None:
            continue
        groups = match.groupdict()
        if kind == "axiom":
            return calculus.Axiom(groups["scheme"])
        if kind == "hyp":
            return calculus.Hyp(int(groups["k"]))
        if kind == "mp":
            return calculus.MP(int(groups["i"]), int(groups["j"]))
        if kind == "mb":
            return calculus.MB(int(groups["i"]))
        if kind == "md":
            return calculus.MD(int(groups["i"]))
        if kind == "br1":
            return calculus.BR1(int(groups["i"]), groups["var"])
        if kind == "br2":
            return calculus.BR2(int(groups["i"]), groups["var"])
        if kind == "taut":
            return calculus.Taut(())
        if kind == "tc":
            return calculus.Taut(tuple(int(i) for i in groups["cited"].split(",")))
        return calculus.Lemma(groups["name"])
    raise SchemaError(f"unknown rule {text!r}")


def load_derivation(doc: SourceDocument | Mapping[str, Any] | str) -> "Derivation":
    """Load a derivation document; formulas are parsed against its signature."""

    from .calculus import Derivation, Line, Mode, logic_preset

    data: DerivationDocument = _validate(DerivationDocument, _decode(doc, DocumentFormat.DERIVATION))
    sig = data.signature.to_signature()

    def parse_at(text: str, path: str) -> Formula:
        try:
            return parse_formula(text, sig)
        except QBKError as exc:
            raise SchemaError(f"{path}: {exc.message}", path=path, details=exc.details) from None

    hypotheses = tuple(parse_at(text, f"hypotheses.{k}") for k, text in enumerate(data.hypotheses))
    lines = []
    for index, line in enumerate(data.lines):
        formula = parse_at(line.formula, f"lines.{index}.formula")
        try:
            justification = parse_rule(line.rule)
        except SchemaError as exc:
            raise SchemaError(exc.message, path=f"lines.{index}.rule") from None
        lines.append(Line(formula, justification))
    try:
        logic = logic_preset(data.logic)
    except QBKError as exc:
        raise SchemaError(exc.message, path="logic") from None
    return Derivation(
        mode=Mode(data.mode),
        logic=logic,
        hypotheses=hypotheses,
        lines=tuple(lines),
        signature=sig,
    )


def dump_derivation(derivation: "Derivation") -> Dict[str, Any]:
    """Derivation document for ``derivation`` (used to print transformed proofs)."""

    sig = derivation.signature or Signature()
    return {
        "mode": derivation.mode.value,
        "logic": derivation.logic.name,
        "signature": {"predicates": dict(sig.predicates), "constants": sorted(sig.constants)},
        "hypotheses": [print_formula(h) for h in derivation.hypotheses],
        "lines": [
            {"formula": print_formula(line.formula), "rule": line.justification.token()}
            for line in derivation.lines
        ],
    }


__all__ = [
    "DerivationDocument",
    "DocumentFormat",
    "ModelDocument",
    "SourceDocument",
    "dump_derivation",
    "dump_model",
    "formula_to_data",
    "infer_signature",
    "load_derivation",
    "load_model",
    "load_signature",
    "parse_formula",
    "parse_rule",
    "print_formula",
]
