#!/usr/bin/env python3
"""Run the full-size acceptance sweeps that are too large for the unit tests."""
from __future__ import annotations

import argparse
import json
import random
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from qbk.calculus import (  # noqa: E402
    BR1,
    BR2,
    MP,
    SCHEMES,
    Axiom,
    Derivation,
    Hyp,
    Line,
    Mode,
    Taut,
    check_derivation,
    deduction_transform,
    default_lemma_store,
    instantiate,
    logic_preset,
)
from qbk.config import SearchLimits  # noqa: E402
from qbk.errors import InvariantViolation  # noqa: E402
from qbk.fixtures import fixture_text, load_fixture_model  # noqa: E402
from qbk.frontend import load_derivation, parse_formula  # noqa: E402
from qbk.nelson import (  # noqa: E402
    derived_model,
    nelson_evaluate,
    tau,
    tau_prime,
    tau_tilde,
    unfaithful_translation_fixture,
)
from qbk.observability import configure_logging, metrics  # noqa: E402
from qbk.semantics import (  # noqa: E402
    ModelClass,
    Polarity,
    check_consequence_on_model,
    enumerate_models,
    environments,
    evaluate,
    sample_models,
    search_countermodel,
    strong_equivalence_witness,
)
from qbk.syntax import (  # noqa: E402
    BOTTOM,
    And,
    Atom,
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
    Var,
    depth,
    free_vars,
    is_free_for,
)
from qbk.transform import is_nnf, to_nnf  # noqa: E402

UNARY = Signature({"P": 1}, frozenset({"c"}))
PREDICATE_ONLY = Signature({"P": 1})
EXTENSION_CLASSES = {"EXC": "QBKo", "EXP": "QB3K", "BA": "QBKsharp", "BABOX": "QBKsharp", "T": "QBT", "FOUR": "QBK4"}


def say(message: str) -> None:
    print(f"[run_acceptance] {message}", flush=True)


# ---------------------------------------------------------------------------
# Random formulas
# ---------------------------------------------------------------------------


def random_formula(
    rng: random.Random,
    max_depth: int,
    *,
    modal: bool = True,
    terms: Sequence[str] = ("x", "y", "c"),
    constants: frozenset[str] = frozenset({"c"}),
) -> Formula:
    if max_depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.1:
            return BOTTOM
        name = rng.choice(terms)
        return Atom("P", (Const(name) if name in constants else Var(name),))
    kinds = ["and", "or", "imp", "neg", "forall", "exists"] + (["box", "diamond"] if modal else [])
    kind = rng.choice(kinds)
    sub = lambda: random_formula(rng, max_depth - 1, modal=modal, terms=terms, constants=constants)  # noqa: E731
    if kind == "and":
        return And(sub(), sub())
    if kind == "or":
        return Or(sub(), sub())
    if kind == "imp":
        return Imp(sub(), sub())
    if kind == "neg":
        return StrongNeg(sub())
    if kind == "box":
        return Box(sub())
    if kind == "diamond":
        return Diamond(sub())
    var = rng.choice(("x", "y"))
    return Forall(var, sub()) if kind == "forall" else Exists(var, sub())


def close(f: Formula) -> Formula:
    for x in sorted(free_vars(f), reverse=True):
        f = Forall(x, f)
    return f


def verified_everywhere(models: Sequence, f: Formula) -> bool:
    variables = sorted(free_vars(f))
    for m in models:
        for w in m.worlds:
            for env in environments(m, w, variables):
                if not evaluate(m, w, f, Polarity.POS, env):
                    return False
    return True


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------


def unfaithful_translation(args: argparse.Namespace) -> List[str]:
    fixture = unfaithful_translation_fixture()
    expected = fixture.expectations
    failures = []
    if nelson_evaluate(fixture.model, expected.world, fixture.formula) != expected.nelson_verified:
        failures.append("formula should not be Nelson-verified on the fixture model")
    limits = SearchLimits(max_worlds=4, max_domain=1)
    prime = tau_prime(fixture.formula)
    if search_countermodel([], [prime], limits, ModelClass.preset(expected.tau_prime_valid_in)) is not None:
        failures.append(f"found a countermodel to {prime} in {expected.tau_prime_valid_in}")
    found = search_countermodel([], [tau(fixture.formula)], limits, ModelClass.preset("QBS4"))
    if found is None or len(found.model.worlds) != 1:
        failures.append("bounded search should refute tau with a one-world model")
    return failures


def axiom_soundness(args: argparse.Namespace) -> List[str]:
    rng = random.Random(args.seed)
    limits = SearchLimits(max_worlds=3, max_domain=2)
    pools: Dict[str, list] = {}

    def pool(name: str) -> list:
        if name not in pools:
            pools[name] = sample_models(UNARY, limits, ModelClass.preset(name), random.Random(args.seed), args.models)
        return pools[name]

    failures = []
    for scheme in SCHEMES.values():
        class_name = EXTENSION_CLASSES.get(scheme.id, "QBK")
        done = 0
        while done < args.instances:
            x = rng.choice(("x", "y"))
            a, b, c = (random_formula(rng, 2) for _ in range(3))
            bindings = {"A": a, "B": b, "C": c, "?x": x}
            if scheme.pattern is None:
                t = rng.choice((Var("x"), Var("y"), Const("c")))
                if not is_free_for(t, x, a):
                    continue
                bindings["t"] = t
            instance = instantiate(scheme.id, bindings)
            if not verified_everywhere(pool(class_name), instance):
                failures.append(f"{scheme.id}: {instance} fails on a {class_name} model")
                break
            done += 1
    return failures


def barcan(args: argparse.Namespace) -> List[str]:
    model = load_fixture_model("expanding_barcan.json")
    formula = parse_formula("<>exists x . P(x) -> exists x . <>P(x)", model.signature)
    failures = []
    witness = check_consequence_on_model(model, [], [formula])
    if witness is None:
        failures.append("expanding-domain model should refute the Barcan formula")
    else:
        say(f"  witness: {json.dumps(witness.as_dict())}")
    limits = SearchLimits(max_worlds=3, max_domain=2, workers=args.workers)
    if search_countermodel([], [formula], limits, ModelClass.preset("QBKsharp"), model.signature) is not None:
        failures.append("found a constant-domain countermodel to the Barcan formula")
    return failures


def nnf_equivalence(args: argparse.Namespace) -> List[str]:
    rng = random.Random(args.seed)
    models = list(enumerate_models(PREDICATE_ONLY, SearchLimits(max_worlds=2, max_domain=2), ModelClass.preset("QBK")))
    failures = []
    for _ in range(args.formulas):
        f = close(random_formula(rng, 4, terms=("x", "y")))
        g = to_nnf(f)
        if not is_nnf(g) or to_nnf(g) != g:
            failures.append(f"to_nnf is not normal or not idempotent on {f}")
            continue
        for m in models:
            if strong_equivalence_witness(m, f, g) is not None:
                failures.append(f"{f} and {g} differ")
                break
    return failures


_MUTATIONS: List[Tuple[str, int, Dict[str, str], str]] = [
    ("converse_barcan.json", 0, {"rule": "axiom:Q1"}, "not an instance of Q1"),
    ("converse_barcan.json", 1, {"rule": "mb:0"}, "MB: formula is not the box form of line 0"),
    ("converse_barcan.json", 2, {"rule": "br1:1,x"}, "BR1: formula is not"),
    ("converse_barcan.json", 2, {"rule": "br2:1,y"}, "BR2: formula is not"),
    ("converse_barcan_box.json", 0, {"rule": "axiom:Q2"}, "not an instance of Q2"),
    ("converse_barcan_box.json", 1, {"rule": "md:0"}, "MD: formula is not the diamond form of line 0"),
    ("converse_barcan_box.json", 2, {"rule": "br2:1,x"}, "BR2: formula is not"),
    ("necessitation.json", 0, {"rule": "axiom:EXC"}, "scheme EXC is not available in QBK"),
    ("necessitation.json", 2, {"rule": "mp:1,0"}, "line 0 is not 'line 1 -> this formula'"),
    ("necessitation.json", 3, {"rule": "md:2"}, "MD: formula is not the diamond form of line 2"),
    ("necessitation.json", 4, {"rule": "axiom:K1"}, "not an instance of K1"),
    ("necessitation.json", 5, {"rule": "mp:3,4"}, "line 4 is not 'line 3 -> this formula'"),
    ("necessitation.json", 5, {"rule": "mp:4,6"}, "earlier-lines"),
    ("barcan_box_from_barcan.json", 0, {"rule": "axiom:BABOX"}, "scheme BABOX is not available in QBKsharp"),
    ("barcan_box_from_barcan.json", 2, {"rule": "axiom:M1.lr"}, "not an instance of M1.lr"),
    ("barcan_box_from_barcan.json", 3, {"rule": "tc:1"}, "not a tautological consequence of lines 1"),
    ("barcan_box_from_barcan.json", 4, {"rule": "br1:3,x"}, "BR1: formula is not"),
    (
        "barcan_box_from_barcan.json",
        9,
        {"formula": "(exists x . !(exists x . !P(x))) -> P(x)", "rule": "br2:8,x"},
        "BR2 side condition: x is free in the consequent P(x)",
    ),
    ("barcan_box_from_barcan.json", 11, {"rule": "mb:10"}, "MB: formula is not the box form of line 10"),
    ("barcan_box_from_barcan.json", 12, {"rule": "tc:5,6"}, "not a tautological consequence of lines 5, 6"),
]


def proof_fixtures(args: argparse.Namespace) -> List[str]:
    store = default_lemma_store()
    failures = []
    limits = SearchLimits(max_worlds=2, max_domain=2, workers=args.workers)
    for name in store.names():
        if not store.is_valid(name):
            failures.append(f"shipped derivation {name} does not check")
            continue
        lemma = store.get(name)
        assert lemma is not None
        cls = lemma.logic.model_class()
        found = search_countermodel([], [lemma.conclusion], limits, cls, lemma.signature)
        if found is not None:
            failures.append(f"{name} checks but {lemma.conclusion} fails on a {cls} model")
    for filename, index, change, expected in _MUTATIONS:
        document = json.loads(fixture_text(filename))
        document["lines"][index].update(change)
        try:
            report = check_derivation(load_derivation(document), store)
        except InvariantViolation as exc:
            detail = exc.message
        else:
            if report.valid:
                failures.append(f"{filename} with line {index} changed to {change} still checks")
                continue
            detail = report.lines[index].detail
        if expected not in detail:
            failures.append(f"{filename} line {index}: expected {expected!r}, got {detail!r}")
    return failures


def _random_derivation(rng: random.Random) -> Derivation:
    letters = [Atom(name) for name in ("p", "q", "r")]
    hypotheses = tuple(rng.sample(letters, 2)) + (Imp(letters[0], letters[1]),)
    lines: List[Line] = []
    px = Atom("P", (Var("x"),))
    for _ in range(rng.randint(3, 10)):
        choice = rng.random()
        if choice < 0.3 or not lines:
            k = rng.randrange(len(hypotheses))
            lines.append(Line(hypotheses[k], Hyp(k)))
        elif choice < 0.5:
            a = rng.choice(lines).formula
            b = rng.choice(letters)
            lines.append(Line(instantiate("I1", {"A": a, "B": b}), Axiom("I1")))
        elif choice < 0.6:
            q1 = instantiate("Q1", {"A": px, "?x": "x", "t": Var("x")})
            lines.append(Line(q1, Axiom("Q1")))
            lines.append(Line(Imp(q1.left, Forall("x", px)), BR1(len(lines) - 1, "x")))
        elif choice < 0.7:
            q2 = instantiate("Q2", {"A": px, "?x": "x", "t": Var("x")})
            lines.append(Line(q2, Axiom("Q2")))
            lines.append(Line(Imp(Exists("x", px), q2.right), BR2(len(lines) - 1, "x")))
        elif choice < 0.8:
            i = rng.randrange(len(lines))
            lines.append(Line(Or(lines[i].formula, rng.choice(letters)), Taut((i,))))
        else:
            pairs = [
                (i, j)
                for j, major in enumerate(lines)
                for i, minor in enumerate(lines)
                if isinstance(major.formula, Imp) and major.formula.left == minor.formula
            ]
            if pairs:
                i, j = rng.choice(pairs)
                lines.append(Line(lines[j].formula.right, MP(i, j)))  # type: ignore[union-attr]
    return Derivation(Mode.CONSEQUENCE, logic_preset("QBK"), hypotheses, tuple(lines))


DERIVATION_SIG = Signature({"p": 0, "q": 0, "r": 0, "P": 1})


def _sound_on(models: Sequence, d: Derivation) -> bool:
    return all(check_consequence_on_model(m, d.hypotheses, [d.conclusion]) is None for m in models)


def deduction(args: argparse.Namespace) -> List[str]:
    rng = random.Random(args.seed)
    limits = SearchLimits(max_worlds=3, max_domain=2)
    models = sample_models(DERIVATION_SIG, limits, ModelClass.preset("QBK"), random.Random(args.seed), args.models)
    failures = []
    for n in range(args.derivations):
        d = _random_derivation(rng)
        if not check_derivation(d).valid:
            failures.append(f"generated derivation {n} does not check")
            continue
        if not _sound_on(models, d):
            failures.append(f"generated derivation {n} concludes {d.conclusion}, which fails on a sampled model")
        phi = rng.choice(d.hypotheses)
        out = deduction_transform(d, phi)
        if not check_derivation(out).valid:
            failures.append(f"transformed derivation {n} does not check")
        elif out.conclusion != Imp(phi, d.conclusion):
            failures.append(f"transformed derivation {n} concludes {out.conclusion}")
        elif not _sound_on(models, out):
            failures.append(f"transformed derivation {n} concludes {out.conclusion}, which fails on a sampled model")
    return failures


def _nnf_sentences(rng: random.Random, count: int) -> List[Formula]:
    result: List[Formula] = []
    while len(result) < count:
        f = to_nnf(close(random_formula(rng, 3, modal=False, terms=("x", "y"))))
        if depth(f) <= 3:
            result.append(f)
    return result


def translation_agreement(args: argparse.Namespace) -> List[str]:
    rng = random.Random(args.seed)
    sentences = _nnf_sentences(rng, args.sentences)
    translated = [tau(f) for f in sentences]
    limits = SearchLimits(max_worlds=args.max_worlds, max_domain=2)
    failures = []
    checked = 0
    for m in enumerate_models(PREDICATE_ONLY, limits, ModelClass.preset("QBS4")):
        derived = derived_model(m)
        for f, g in zip(sentences, translated):
            for w in m.worlds:
                if nelson_evaluate(derived, w, f) != evaluate(m, w, g):
                    failures.append(f"{f} disagrees with its translation at {w}")
                    return failures
        checked += 1
    say(f"  {checked} models checked")
    return failures


def direct_translation(args: argparse.Namespace) -> List[str]:
    rng = random.Random(args.seed)
    failures = []
    for _ in range(args.formulas):
        f = random_formula(rng, 4, modal=False)
        if tau_tilde(f) != tau(to_nnf(f)):
            failures.append(f"tau_tilde and tau disagree on {f}")
    return failures


CRITERIA: Dict[str, Callable[[argparse.Namespace], List[str]]] = {
    "unfaithful-translation": unfaithful_translation,
    "axiom-soundness": axiom_soundness,
    "barcan": barcan,
    "nnf": nnf_equivalence,
    "proof-fixtures": proof_fixtures,
    "deduction": deduction,
    "translation-agreement": translation_agreement,
    "direct-translation": direct_translation,
}


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("criteria", nargs="*", help=f"Criteria to run (default: all): {', '.join(CRITERIA)}")
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--workers", type=int, default=1, help="Worker processes for the countermodel searches")
    parser.add_argument("--instances", type=int, default=50, help="Instances per axiom scheme")
    parser.add_argument("--models", type=int, default=200, help="Random models per class for the axiom and derivation sweeps")
    parser.add_argument("--formulas", type=int, default=500, help="Random formulas for the NNF and tau checks")
    parser.add_argument("--derivations", type=int, default=100)
    parser.add_argument("--sentences", type=int, default=40, help="Nelson sentences for the translation sweep")
    parser.add_argument("--max-worlds", type=int, default=3, help="World bound for the translation sweep")
    parser.add_argument("--log-level", default="WARNING")
    args = parser.parse_args()
    unknown = [name for name in args.criteria if name not in CRITERIA]
    if unknown:
        parser.error(f"unknown criteria: {', '.join(unknown)}")
    return args


def main() -> None:
    args = parse_args()
    configure_logging(level=args.log_level.upper(), force=True)
    selected = args.criteria or list(CRITERIA)
    failed = 0
    for name in selected:
        say(f"{name}...")
        metrics.reset()
        started = time.perf_counter()
        failures = CRITERIA[name](args)
        elapsed = time.perf_counter() - started
        status = "ok" if not failures else f"FAILED ({len(failures)})"
        say(f"{name}: {status} in {elapsed:.1f}s {metrics.snapshot()}")
        for failure in failures[:10]:
            say(f"  - {failure}")
        failed += bool(failures)
    raise SystemExit(1 if failed else 0)


if __name__ == "__main__":
    main()
