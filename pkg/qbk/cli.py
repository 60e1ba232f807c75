"""Command-line interface.

Exit codes: 0 when the command succeeded and the answer is affirmative
(valid, verified, proof checks, no countermodel within bounds), 2 when it
succeeded with a negative answer, 1 on input or usage errors. Results go to
stdout, logs and diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from . import __version__
from .calculus import LemmaStore, check_derivation, deduction_transform, default_lemma_store
from .config import LOG_LEVELS, build_search_limits
from .errors import QBKError
from .frontend import (
    DocumentFormat,
    SourceDocument,
    dump_derivation,
    dump_model,
    formula_to_data,
    infer_signature,
    load_derivation,
    load_model,
    load_signature,
    parse_formula,
    print_formula,
)
from .nelson import (
    TRANSLATIONS,
    nelson_evaluate,
    tau,
    tau_prime,
    unfaithful_translation_fixture,
)
from .observability import configure_logging, correlation_scope, generate_correlation_id, get_logger, metrics
from .semantics import ModelClass, Polarity, check_consequence_on_model, evaluate, search_countermodel, validate_model
from .syntax import Formula, Signature
from .transform import to_nnf

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2

UNFAITHFUL_NOTE = "known-unfaithful translation (strong negation read classically)"


class UsageError(QBKError):
    """Invalid command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message, details=[self.format_usage().strip()])


@dataclass
class Outcome:
    verdict: str
    exit_code: int
    text: List[str] = field(default_factory=list)
    result: Any = None
    witness: Any = None
    diagnostics: List[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Argument helpers
# ---------------------------------------------------------------------------


def _parse_predicates(text: str) -> Dict[str, int]:
    predicates: Dict[str, int] = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        name, sep, arity = item.partition(":")
        if not sep or not arity.isdigit():
            raise UsageError(f"--predicates expects NAME:ARITY items, got {item!r}")
        predicates[name] = int(arity)
    return predicates


def _read_signature_file(path: Path) -> Signature:
    return load_signature(SourceDocument.read(path, DocumentFormat.MODEL))


def _explicit_signature(args: argparse.Namespace) -> Optional[Signature]:
    if getattr(args, "signature", None) is not None:
        return _read_signature_file(args.signature)
    if getattr(args, "predicates", None):
        constants = frozenset(filter(None, (c.strip() for c in (args.constants or "").split(","))))
        return Signature(_parse_predicates(args.predicates), constants)
    return None


def _parse(text: str, args: argparse.Namespace) -> Formula:
    """Parse a formula argument against the signature flags, if any."""

    sig = _explicit_signature(args)
    if sig is None and getattr(args, "constants", None):
        constants = frozenset(filter(None, (c.strip() for c in args.constants.split(","))))
        inferred = infer_signature(parse_formula(text))
        sig = Signature(inferred.predicates, constants)
    return parse_formula(text, sig)


def _limits(args: argparse.Namespace) -> Any:
    return build_search_limits(
        max_worlds=args.max_worlds,
        max_domain=args.max_domain,
        max_models=args.max_models,
        workers=args.workers,
    )


def _assignment(items: Sequence[str]) -> Dict[str, str]:
    env: Dict[str, str] = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name or not value:
            raise UsageError(f"--assign expects VAR=INDIVIDUAL, got {item!r}")
        env[name.strip()] = value.strip()
    return env


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_parse(args: argparse.Namespace) -> Outcome:
    f = _parse(args.formula, args)
    data = formula_to_data(f)
    return Outcome("ok", EXIT_OK, [json.dumps(data, sort_keys=True)], result=data)


def _cmd_print(args: argparse.Namespace) -> Outcome:
    text = print_formula(_parse(args.formula, args))
    return Outcome("ok", EXIT_OK, [text], result=text)


def _cmd_nnf(args: argparse.Namespace) -> Outcome:
    text = print_formula(to_nnf(_parse(args.formula, args)))
    return Outcome("ok", EXIT_OK, [text], result=text)


def _cmd_translate(args: argparse.Namespace) -> Outcome:
    f = _parse(args.formula, args)
    if args.mode == "tau":
        translated = tau(to_nnf(f))
    else:
        translated = TRANSLATIONS[args.mode](f)
    text = print_formula(translated)
    notes = [UNFAITHFUL_NOTE] if args.mode == "tau-prime" else []
    return Outcome("ok", EXIT_OK, [text], result=text, diagnostics=notes)


def _cmd_eval(args: argparse.Namespace) -> Outcome:
    model = load_model(SourceDocument.read(args.model, DocumentFormat.MODEL))
    f = parse_formula(args.formula, model.signature)
    env = _assignment(args.assign)
    polarity = Polarity(args.polarity)
    if args.semantics == "nelson":
        holds = nelson_evaluate(model, args.world, f, polarity, env)
    else:
        holds = evaluate(model, args.world, f, polarity, env)
    word = "verified" if polarity is Polarity.POS else "falsified"
    verdict = word if holds else f"not {word}"
    return Outcome(verdict, EXIT_OK if holds else EXIT_NEGATIVE, [verdict], result=holds)


def _cmd_validate_model(args: argparse.Namespace) -> Outcome:
    model = load_model(SourceDocument.read(args.model, DocumentFormat.MODEL))
    cls = ModelClass.preset(args.model_class)
    report = validate_model(model, cls)
    if report.ok:
        return Outcome("valid", EXIT_OK, [f"model is of class {cls}"], result=[])
    lines = [f"model is not of class {cls}:"] + [f"  {v}" for v in report.violations]
    return Outcome("invalid", EXIT_NEGATIVE, lines, result=list(report.violations))


def _lemma_store(items: Sequence[str]) -> LemmaStore:
    store = default_lemma_store().copy()
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"--lemma expects NAME=FILE, got {item!r}")
        store.register(name, load_derivation(SourceDocument.read(path, DocumentFormat.DERIVATION)))
    return store


def _cmd_check_proof(args: argparse.Namespace) -> Outcome:
    derivation = load_derivation(SourceDocument.read(args.derivation, DocumentFormat.DERIVATION))
    store = _lemma_store(args.lemma)
    report = check_derivation(derivation, store)
    lines = [f"{r.index:>4}  {'ok  ' if r.ok else 'FAIL'}  {r.detail}" for r in report.lines]
    per_line = [{"line": r.index, "ok": r.ok, "detail": r.detail} for r in report.lines]
    result: Dict[str, Any] = {"lines": per_line, "conclusion": print_formula(report.conclusion)}
    if not report.valid:
        lines.append("derivation is invalid")
        return Outcome("invalid", EXIT_NEGATIVE, lines, result=result)
    lines.append(f"derivation is valid: {print_formula(report.conclusion)}")
    if args.discharge:
        transformed = deduction_transform(derivation, lemmas=store)
        document = dump_derivation(transformed)
        result["discharged"] = document
        lines.append(json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False))
    return Outcome("valid", EXIT_OK, lines, result=result)


def _countermodel_payload(found: Any) -> Dict[str, Any]:
    return {**found.witness.as_dict(), "index": found.index, "model": dump_model(found.model)}


def _cmd_search(args: argparse.Namespace) -> Outcome:
    limits = _limits(args)
    cls = ModelClass.preset(args.model_class)
    gamma = [_parse(text, args) for text in args.premise]
    delta = [_parse(text, args) for text in args.conclusion]
    found = search_countermodel(gamma, delta, limits, cls, _explicit_signature(args))
    if found is None:
        line = f"no countermodel in {cls} with at most {limits.max_worlds} world(s) and {limits.max_domain} individual(s)"
        return Outcome("no-countermodel", EXIT_OK, [line])
    payload = _countermodel_payload(found)
    lines = [
        f"countermodel found at world {found.witness.world} (model #{found.index})",
        json.dumps(payload["model"], indent=2, sort_keys=True),
    ]
    return Outcome("countermodel", EXIT_NEGATIVE, lines, witness=payload)


def _fixture_unfaithful(args: argparse.Namespace) -> Outcome:
    fixture = unfaithful_translation_fixture()
    model, phi, expected = fixture.model, fixture.formula, fixture.expectations
    limits = _limits(args)
    tau_phi, prime_phi = tau(to_nnf(phi)), tau_prime(phi)

    refuting = search_countermodel([], [tau_phi], limits, ModelClass.preset("QBS4"))
    prime_refuting = search_countermodel([], [prime_phi], limits, ModelClass.preset(expected.tau_prime_valid_in))
    checks = [
        (
            f"{print_formula(phi)} Nelson-verified at {expected.world}",
            nelson_evaluate(model, expected.world, phi),
            expected.nelson_verified,
        ),
        (
            f"tau: {print_formula(tau_phi)} verified at {expected.world}",
            evaluate(model, expected.world, tau_phi),
            expected.tau_verified,
        ),
        (
            f"tau-prime: {print_formula(prime_phi)} verified at {expected.world}",
            evaluate(model, expected.world, prime_phi),
            expected.tau_prime_verified,
        ),
        (
            "bounded search refutes tau with a one-world model in QBS4",
            refuting is not None and len(refuting.model.worlds) == 1,
            True,
        ),
        (
            f"no countermodel to tau-prime in {expected.tau_prime_valid_in} "
            f"(at most {limits.max_worlds} worlds)",
            prime_refuting is None,
            True,
        ),
    ]
    return _fixture_outcome(checks, [UNFAITHFUL_NOTE])


def _fixture_barcan(args: argparse.Namespace) -> Outcome:
    from .fixtures import load_fixture_model

    limits = _limits(args)
    model = load_fixture_model("expanding_barcan.json")
    barcan = parse_formula("<>exists x . P(x) -> exists x . <>P(x)", model.signature)
    witness = check_consequence_on_model(model, [], [barcan])
    constant = search_countermodel([], [barcan], limits, ModelClass.preset("QBKsharp"), model.signature)
    checks = [
        (
            "expanding-domain model refutes " + print_formula(barcan)
            + (f" at {witness.world}" if witness is not None else ""),
            witness is not None,
            True,
        ),
        (
            f"no constant-domain countermodel with at most {limits.max_worlds} worlds "
            f"and {limits.max_domain} individuals",
            constant is None,
            True,
        ),
    ]
    return _fixture_outcome(checks, [])


def _fixture_outcome(checks: Sequence[tuple], notes: List[str]) -> Outcome:
    lines, results = [], []
    for description, observed, expected in checks:
        ok = observed == expected
        lines.append(f"{'ok  ' if ok else 'FAIL'}  {description}: {'yes' if observed else 'no'}")
        results.append({"check": description, "observed": bool(observed), "expected": expected, "ok": ok})
    reproduced = all(r["ok"] for r in results)
    verdict = "reproduced" if reproduced else "not-reproduced"
    lines.append(verdict)
    return Outcome(verdict, EXIT_OK if reproduced else EXIT_NEGATIVE, lines, result=results, diagnostics=notes)


FIXTURES: Dict[str, Callable[[argparse.Namespace], Outcome]] = {
    "unfaithful-translation": _fixture_unfaithful,
    "barcan": _fixture_barcan,
}
FIXTURE_ALIASES = {"remark28": "unfaithful-translation"}


def _cmd_fixtures(args: argparse.Namespace) -> Outcome:
    return FIXTURES[FIXTURE_ALIASES.get(args.name, args.name)](args)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_signature_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--predicates", help="Declared predicates as NAME:ARITY,... (default: inferred)")
    parser.add_argument("--constants", help="Declared constants as NAME,...")
    parser.add_argument("--signature", type=Path, help="JSON file with a signature object")


def _add_limit_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-worlds", type=int, default=None, help="Largest number of worlds (default 3)")
    parser.add_argument("--max-domain", type=int, default=None, help="Largest domain size (default 2)")
    parser.add_argument("--max-models", type=int, default=None, help="Refuse searches above this many models")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes for the search (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qbk", description="Belnapian modal predicate logic toolkit.")
    parser.add_argument("--version", action="version", version=f"qbk {__version__}")
    parser.add_argument("--json", action="store_true", help="Print a JSON envelope instead of text")
    parser.add_argument(
        "--log-level", type=str.upper, choices=LOG_LEVELS, help="Override QBK_LOG_LEVEL for this run"
    )
    subparsers = parser.add_subparsers(dest="command", parser_class=_Parser)

    for name, help_text in (
        ("parse", "Print the syntax tree of a formula as JSON."),
        ("print", "Print a formula in canonical form."),
        ("nnf", "Print the negative normal form of a formula."),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("formula")
        _add_signature_flags(sub)

    translate = subparsers.add_parser("translate", help="Translate a Nelson formula into the modal language.")
    translate.add_argument("formula")
    translate.add_argument("--mode", choices=sorted(TRANSLATIONS), default="tau")
    _add_signature_flags(translate)

    evaluate_parser = subparsers.add_parser("eval", help="Evaluate a formula at a world of a model.")
    evaluate_parser.add_argument("formula")
    evaluate_parser.add_argument("--model", type=Path, required=True)
    evaluate_parser.add_argument("--world", required=True)
    evaluate_parser.add_argument("--polarity", choices=[p.value for p in Polarity], default="+")
    evaluate_parser.add_argument("--semantics", choices=["qbk", "nelson"], default="qbk")
    evaluate_parser.add_argument("--assign", action="append", default=[], metavar="VAR=INDIVIDUAL")

    validate = subparsers.add_parser("validate-model", help="Check a model against a model class.")
    validate.add_argument("model", type=Path)
    validate.add_argument("--class", dest="model_class", default="QBK")

    check = subparsers.add_parser("check-proof", help="Check a derivation document.")
    check.add_argument("derivation", type=Path)
    check.add_argument("--lemma", action="append", default=[], metavar="NAME=FILE")
    check.add_argument(
        "--discharge", action="store_true", help="Also print the derivation with the last hypothesis discharged"
    )

    search = subparsers.add_parser("search-countermodel", help="Bounded search for a countermodel to Γ ⊨ Δ.")
    search.add_argument("--premise", action="append", default=[], metavar="FORMULA")
    search.add_argument("--conclusion", action="append", default=[], metavar="FORMULA")
    search.add_argument("--class", dest="model_class", default="QBK")
    _add_signature_flags(search)
    _add_limit_flags(search)

    fixtures = subparsers.add_parser("fixtures", help="Reproduce a shipped example.")
    fixtures.add_argument("name", choices=sorted({*FIXTURES, *FIXTURE_ALIASES}))
    _add_limit_flags(fixtures)

    return parser


COMMANDS: Dict[str, Callable[[argparse.Namespace], Outcome]] = {
    "parse": _cmd_parse,
    "print": _cmd_print,
    "nnf": _cmd_nnf,
    "translate": _cmd_translate,
    "eval": _cmd_eval,
    "validate-model": _cmd_validate_model,
    "check-proof": _cmd_check_proof,
    "search-countermodel": _cmd_search,
    "fixtures": _cmd_fixtures,
}


def _render(outcome: Outcome, command: str, as_json: bool) -> None:
    if as_json:
        envelope: Dict[str, Any] = {
            "command": command,
            "verdict": outcome.verdict,
            "diagnostics": outcome.diagnostics,
        }
        if outcome.result is not None:
            envelope["result"] = outcome.result
        if outcome.witness is not None:
            envelope["witness"] = outcome.witness
        print(json.dumps(envelope, indent=2, sort_keys=True, ensure_ascii=False))
        return
    for line in outcome.text:
        print(line)
    for note in outcome.diagnostics:
        print(f"note: {note}", file=sys.stderr)


def _error_outcome(exc: QBKError) -> Outcome:
    return Outcome("error", EXIT_ERROR, diagnostics=[exc.message, *exc.details])


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run one command and return its exit code."""

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc.message}", file=sys.stderr)
        for detail in exc.details:
            print(f"  {detail}", file=sys.stderr)
        return EXIT_ERROR

    if args.command is None:
        parser.print_help()
        return EXIT_ERROR

    try:
        configure_logging(level=args.log_level, force=True)
    except QBKError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_ERROR

    with correlation_scope(generate_correlation_id()):
        logger.info("command started", extra={"command": args.command})
        try:
            outcome = COMMANDS[args.command](args)
        except QBKError as exc:
            outcome = _error_outcome(exc)
            logger.info("command failed", extra={"command": args.command, "error": exc.message})
            if not args.json:
                print(f"error: {exc.message}", file=sys.stderr)
                for detail in exc.details:
                    print(f"  - {detail}", file=sys.stderr)
                return EXIT_ERROR
        _render(outcome, args.command, args.json)
        logger.info("command finished", extra={"command": args.command, "verdict": outcome.verdict, **metrics.snapshot()})
        return outcome.exit_code


def main() -> None:  # pragma: no cover - console script
    raise SystemExit(run())


__all__ = ["EXIT_ERROR", "EXIT_NEGATIVE", "EXIT_OK", "Outcome", "build_parser", "main", "run"]
