import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from qbk.calculus import (
    BASE_SCHEMES,
    EXTENSION_SCHEMES,
    MB,
    MP,
    SCHEMES,
    Axiom,
    Derivation,
    Hyp,
    Lemma,
    LemmaStore,
    Line,
    Mode,
    Taut,
    build_disjunction,
    check_derivation,
    deduction_transform,
    default_lemma_store,
    derives,
    in_disjunctions,
    instantiate,
    is_tautological_consequence,
    logic_preset,
    match_scheme,
)
from qbk.config import SearchLimits
from qbk.errors import InvariantViolation, NotApplicable, QBKError
from qbk.fixtures import DERIVATIONS, load_fixture_derivation
from qbk.frontend import load_derivation, parse_formula
from qbk.observability import metrics
from qbk.semantics import ModelClass, environments, evaluate, search_countermodel
from qbk.syntax import BOTTOM, Atom, Const, Or, Signature, Var, free_vars, is_free_for
from strategies import VARIABLES, formulas, model_pool, terms

SIG = Signature({"P": 1, "R": 2, "p": 0, "q": 0}, frozenset({"c"}))


def f(text: str):
    return parse_formula(text, SIG)


def derivation(lines, *, mode="theorem", logic="QBK", hypotheses=()):
    return load_derivation(
        {
            "mode": mode,
            "logic": logic,
            "signature": {"predicates": dict(SIG.predicates), "constants": ["c"]},
            "hypotheses": list(hypotheses),
            "lines": [{"formula": text, "rule": rule} for text, rule in lines],
        }
    )


def test_scheme_tables():
    assert len(BASE_SCHEMES) == 25
    assert EXTENSION_SCHEMES == ("EXC", "EXP", "BA", "BABOX", "T", "FOUR")
    assert {"SN2.lr", "SN2.rl", "M3.neg-lr", "M4.neg-rl"} <= set(SCHEMES)
    assert "Q1.lr" not in SCHEMES


def test_match_equivalence_and_its_halves():
    inst = match_scheme("SN2", f("~(p -> q) <-> p & ~q"))
    assert inst is not None
    assert inst.as_dict() == {"A": Atom("p"), "B": Atom("q")}
    assert match_scheme("SN2.lr", f("~(p -> q) -> p & ~q")) is not None
    assert match_scheme("SN2.rl", f("~(p -> q) -> p & ~q")) is None


def test_match_binds_metavariables_consistently():
    assert match_scheme("I1", f("p -> q -> p")) is not None
    assert match_scheme("I1", f("p -> q -> q")) is None
    assert match_scheme("N1", f("P(c) | !P(c)")).describe() == "N1 with Φ := P(c)"


def test_quantifier_metavariable_must_agree():
    assert match_scheme("Q3", f("~(forall y . P(y)) <-> exists y . ~P(y)")) is not None
    assert match_scheme("Q3", f("~(forall y . P(y)) <-> exists z . ~P(z)")) is None


def test_instantiation_scheme_finds_the_term():
    inst = match_scheme("Q1", f("(forall x . R(x, c)) -> R(c, c)"))
    assert inst is not None
    assert inst.as_dict() == {"?x": "x", "A": f("R(x, c)"), "t": Const("c")}
    assert match_scheme("Q2", f("P(y) -> exists x . P(x)")).as_dict()["t"] == Var("y")
    assert match_scheme("Q1", f("(forall x . p) -> p")) is not None


def test_instantiation_scheme_rejects_capture():
    assert match_scheme("Q1", f("(forall x . exists y . R(x, y)) -> exists y . R(y, y)")) is None
    assert match_scheme("Q1", f("(forall x . R(x, x)) -> R(c, x)")) is None


def test_instantiate_builds_instances():
    assert instantiate("I1", {"A": Atom("p"), "B": Atom("q")}) == f("p -> q -> p")
    assert instantiate("Q1", {"A": f("P(x)"), "?x": "x", "t": Const("c")}) == f("(forall x . P(x)) -> P(c)")
    assert instantiate("BA", {"A": f("P(y)"), "?x": "y"}) == f("<>exists y . P(y) -> exists y . <>P(y)")


def test_unknown_scheme():
    with pytest.raises(QBKError):
        match_scheme("K9", BOTTOM)
    with pytest.raises(QBKError):
        instantiate("K9", {})


def test_logic_presets():
    assert logic_preset("QBK°").name == "QBKo"
    assert logic_preset(["FOUR", "T"]).name == "QBS4"
    assert logic_preset(["T", "EXC"]).name == "QBK+EXC+T"
    assert logic_preset("QBS4").includes(logic_preset("QBT"))
    assert not logic_preset("QBT").includes(logic_preset("QBS4"))
    assert logic_preset("QBS4").model_class() == ModelClass.preset("QBS4")
    assert logic_preset("QBKsharp-box").model_class() == ModelClass.preset("QBKsharp")
    assert logic_preset("QBK").enables("SN1.lr")
    assert not logic_preset("QBK").enables("BA")
    with pytest.raises(QBKError):
        logic_preset("S5")
    with pytest.raises(QBKError):
        logic_preset(["B"])


def test_derivation_structural_invariants():
    with pytest.raises(InvariantViolation) as excinfo:
        Derivation(Mode.THEOREM, logic_preset("QBK"), (), ())
    assert excinfo.value.condition == "non-empty-derivation"
    with pytest.raises(InvariantViolation) as excinfo:
        Derivation(Mode.CONSEQUENCE, logic_preset("QBK"), (f("P(x)"),), (Line(f("P(x)"), Hyp(0)),))
    assert excinfo.value.condition == "closed-hypotheses"
    with pytest.raises(InvariantViolation) as excinfo:
        Derivation(Mode.THEOREM, logic_preset("QBK"), (), (Line(f("p"), MP(0, 1)),))
    assert excinfo.value.condition == "earlier-lines"
    with pytest.raises(InvariantViolation) as excinfo:
        Derivation(Mode.THEOREM, logic_preset("QBK"), (), (Line(f("p"), Hyp(0)),))
    assert excinfo.value.condition == "theorem-without-hypotheses"
    with pytest.raises(InvariantViolation) as excinfo:
        Derivation(Mode.CONSEQUENCE, logic_preset("QBK"), (f("p"),), (Line(f("p"), Hyp(1)),))
    assert excinfo.value.condition == "hypothesis-index"
    with pytest.raises(InvariantViolation) as excinfo:
        Derivation(
            Mode.CONSEQUENCE,
            logic_preset("QBK"),
            (f("p -> q"),),
            (Line(f("p -> q"), Hyp(0)), Line(f("[]p -> []q"), MB(0))),
        )
    assert excinfo.value.condition == "consequence-rules"


@pytest.mark.parametrize("name", DERIVATIONS)
def test_shipped_derivations_check(name):
    report = check_derivation(load_fixture_derivation(name), default_lemma_store())
    assert report.valid, [r.detail for r in report.failures]


def test_shipped_derivation_conclusions():
    store = default_lemma_store()
    assert store.get("converse-barcan").conclusion == f("(exists x . <>P(x)) -> <>exists x . P(x)")
    assert store.get("converse-barcan-box").conclusion == f("[]forall x . P(x) -> forall x . []P(x)")
    assert store.get("barcan-box-from-barcan").conclusion == f("(forall x . []P(x)) -> []forall x . P(x)")
    assert store.get("barcan-box-from-barcan").logic.name == "QBKsharp"


@pytest.mark.parametrize("name", default_lemma_store().names())
def test_shipped_lemmas_have_no_small_countermodel(name):
    lemma = default_lemma_store().get(name)
    cls = lemma.logic.model_class()
    limits = SearchLimits(max_worlds=2, max_domain=2)
    assert search_countermodel([], [lemma.conclusion], limits, cls, lemma.signature) is None


def test_line_reports_carry_instantiations():
    report = check_derivation(load_fixture_derivation("converse_barcan.json"))
    assert report.lines[0].instantiation.scheme == "Q2"
    assert report.lines[1].detail == "MD from 0"
    assert report.lines[2].detail == "BR2 from 1 on x"
    assert metrics.get("derivations_checked") == 1
    assert metrics.get("lines_checked") == 3
    assert metrics.get("lines_rejected") == 0


def test_swapped_modus_ponens_is_rejected():
    d = load_fixture_derivation("necessitation.json")
    broken = Derivation(d.mode, d.logic, d.hypotheses, d.lines[:-1] + (Line(d.lines[-1].formula, MP(3, 4)),))
    report = check_derivation(broken)
    assert not report.valid
    assert [r.index for r in report.failures] == [5]
    assert report.failures[0].detail == "line 4 is not 'line 3 -> this formula'"
    assert metrics.get("lines_rejected") == 1


def test_axiom_diagnostics():
    report = check_derivation(
        derivation(
            [
                ("p -> q", "axiom:I1"),
                ("p | ~p", "axiom:EXC"),
                ("p", "axiom:Z9"),
            ]
        )
    )
    details = [r.detail for r in report.lines]
    assert details[0] == "not an instance of I1: Φ -> (Ψ -> Φ)"
    assert details[1] == "scheme EXC is not available in QBK"
    assert details[2] == "unknown axiom scheme 'Z9'"
    assert check_derivation(derivation([("p | ~p", "axiom:EXC")], logic="QBKo")).valid


def test_generalisation_side_conditions():
    br1 = check_derivation(derivation([("P(x) -> P(x)", "taut"), ("P(x) -> forall x . P(x)", "br1:0,x")]))
    assert br1.failures[0].detail == "BR1 side condition: x is free in the antecedent P(x)"
    br2 = check_derivation(derivation([("P(x) -> P(x)", "taut"), ("(exists x . P(x)) -> P(x)", "br2:0,x")]))
    assert br2.failures[0].detail == "BR2 side condition: x is free in the consequent P(x)"
    ok = check_derivation(derivation([("p -> P(x) -> P(x)", "taut"), ("p -> forall x . P(x) -> P(x)", "br1:0,x")]))
    assert ok.valid


def test_modal_rules_wrap_both_sides():
    good = derivation([("P(c) -> P(c)", "taut"), ("<>P(c) -> <>P(c)", "md:0")])
    assert check_derivation(good).valid
    bad = derivation([("P(c) -> P(c)", "taut"), ("[]P(c) -> <>P(c)", "mb:0")])
    assert check_derivation(bad).failures[0].detail == "MB: formula is not the box form of line 0"


def test_tautological_consequence():
    assert is_tautological_consequence([], f("((p -> q) -> p) -> p"))
    assert is_tautological_consequence([], f("[]p | ![]p"))
    assert not is_tautological_consequence([], f("p | ~p"))
    assert is_tautological_consequence([f("p"), f("p -> q")], f("q"))
    assert not is_tautological_consequence([f("q")], f("p"))
    many = f(" | ".join(f"P(x{i})" for i in range(17)))
    with pytest.raises(QBKError):
        is_tautological_consequence([], many)


def test_taut_line_diagnostics():
    report = check_derivation(derivation([("p", "taut")]))
    assert report.failures[0].detail == "not a tautology"


def test_disjunctions():
    p, q, r = Atom("p"), Atom("q"), Atom("r")
    assert build_disjunction([]) == BOTTOM
    assert build_disjunction([p]) == p
    assert build_disjunction([p, q, r]) == Or(p, Or(q, r))
    assert in_disjunctions(Or(q, p), [p, q])
    assert in_disjunctions(BOTTOM, [])
    assert not in_disjunctions(Or(p, r), [p, q])
    assert not in_disjunctions(Or(Or(p, q), p), [p, q])


def test_derives_checks_the_conclusion_against_delta():
    d = derivation([("p", "hyp:0"), ("p -> p | q", "axiom:D1"), ("p | q", "mp:0,1")], mode="consequence", hypotheses=["p"])
    assert derives(d, [Atom("p"), Atom("q")])
    assert not derives(d, [Atom("q")])


def test_lemma_lines():
    store = default_lemma_store()
    cited = derivation([("(exists x . <>P(x)) -> <>exists x . P(x)", "lemma:converse-barcan")])
    assert check_derivation(cited, store).valid
    assert check_derivation(cited).failures[0].detail == "unknown lemma 'converse-barcan'"
    wrong = derivation([("(exists x . []P(x)) -> <>exists x . P(x)", "lemma:converse-barcan")])
    assert check_derivation(wrong, store).failures[0].detail == (
        "formula differs from the conclusion of lemma 'converse-barcan'"
    )
    stronger = derivation([("(forall x . []P(x)) -> []forall x . P(x)", "lemma:barcan-box-from-barcan")])
    assert check_derivation(stronger, store).failures[0].detail == (
        "lemma 'barcan-box-from-barcan' needs QBKsharp, derivation uses QBK"
    )
    assert check_derivation(
        derivation([("(forall x . []P(x)) -> []forall x . P(x)", "lemma:barcan-box-from-barcan")], logic="QBKsharp"),
        store,
    ).valid


def test_lemma_store_rejects_consequence_derivations():
    d = derivation([("p", "hyp:0")], mode="consequence", hypotheses=["p"])
    with pytest.raises(QBKError):
        LemmaStore({"bad": d})


def test_lemma_store_copy_is_independent():
    store = default_lemma_store().copy()
    store.register("mine", load_fixture_derivation("converse_barcan.json"))
    assert "mine" in store.names()
    assert "mine" not in default_lemma_store().names()


def test_broken_lemma_does_not_check():
    broken = derivation([("p -> q", "axiom:I1")])
    store = LemmaStore({"broken": broken})
    cited = derivation([("p -> q", "lemma:broken")])
    assert check_derivation(cited, store).failures[0].detail == "lemma 'broken' does not check"


def test_lemma_citing_another_lemma_checks():
    store = default_lemma_store().copy()
    barcan = "(exists x . <>P(x)) -> <>exists x . P(x)"
    store.register("wrapper", derivation([(barcan, "lemma:converse-barcan")]))
    assert store.is_valid("wrapper")
    assert check_derivation(derivation([(barcan, "lemma:wrapper")]), store).valid


def test_circular_lemmas_do_not_check():
    store = LemmaStore({"loop": derivation([("p -> p", "lemma:loop")])})
    assert not store.is_valid("loop")
    cited = derivation([("p -> p", "lemma:loop")])
    assert check_derivation(cited, store).failures[0].detail == "lemma 'loop' does not check"
    store.register("first", derivation([("p -> p", "lemma:second")]))
    store.register("second", derivation([("p -> p", "lemma:first")]))
    assert not store.is_valid("first")
    assert not store.is_valid("second")


def test_registering_a_lemma_rechecks_its_dependents():
    store = LemmaStore({"uses": derivation([("p -> q -> p", "lemma:base")])})
    assert not store.is_valid("uses")
    store.register("base", derivation([("p -> q -> p", "axiom:I1")]))
    assert store.is_valid("uses")


def test_deduction_transform_discharges_the_last_hypothesis():
    d = derivation(
        [("p", "hyp:0"), ("p -> q", "hyp:1"), ("q", "mp:0,1")],
        mode="consequence",
        hypotheses=["p", "p -> q"],
    )
    out = deduction_transform(d)
    assert out.hypotheses == (f("p"),)
    assert out.conclusion == f("(p -> q) -> q")
    assert check_derivation(out).valid
    assert all(not isinstance(line.justification, Taut) for line in out.lines)


def test_deduction_transform_on_a_chosen_hypothesis():
    d = derivation(
        [("p", "hyp:0"), ("p -> q", "hyp:1"), ("q", "mp:0,1")],
        mode="consequence",
        hypotheses=["p", "p -> q"],
    )
    out = deduction_transform(d, f("p"))
    assert out.hypotheses == (f("p -> q"),)
    assert out.lines[-1].formula == f("p -> q")
    assert check_derivation(out).valid
    assert isinstance(out.lines[0].justification, Axiom)


def test_deduction_transform_through_generalisation_rules():
    d = derivation(
        [
            ("q", "hyp:0"),
            ("(forall x . P(x)) -> P(x)", "axiom:Q1"),
            ("(forall x . P(x)) -> forall x . P(x)", "br1:1,x"),
            ("P(x) -> exists x . P(x)", "axiom:Q2"),
            ("(exists x . P(x)) -> exists x . P(x)", "br2:3,x"),
            ("p | !p", "taut"),
            ("(exists x . P(x)) -> (exists x . P(x)) | q", "axiom:D1"),
        ],
        mode="consequence",
        hypotheses=["q"],
    )
    assert check_derivation(d).valid
    out = deduction_transform(d)
    report = check_derivation(out)
    assert report.valid, [r.detail for r in report.failures]
    assert out.hypotheses == ()
    assert out.conclusion == f("q -> (exists x . P(x)) -> (exists x . P(x)) | q")


def test_deduction_transform_with_lemmas():
    store = default_lemma_store()
    d = derivation(
        [("p", "hyp:0"), ("(exists x . <>P(x)) -> <>exists x . P(x)", "lemma:converse-barcan")],
        mode="consequence",
        hypotheses=["p"],
    )
    out = deduction_transform(d, lemmas=store)
    assert check_derivation(out, store).valid
    assert isinstance(out.lines[-3].justification, Lemma)


def test_deduction_transform_preconditions():
    theorem = derivation([("p -> q -> p", "axiom:I1")])
    with pytest.raises(NotApplicable):
        deduction_transform(theorem)
    no_hyps = derivation([("p -> q -> p", "axiom:I1")], mode="consequence")
    with pytest.raises(NotApplicable):
        deduction_transform(no_hyps)
    d = derivation([("p", "hyp:0")], mode="consequence", hypotheses=["p"])
    with pytest.raises(NotApplicable):
        deduction_transform(d, f("q"))
    broken = derivation([("q", "hyp:0")], mode="consequence", hypotheses=["p"])
    with pytest.raises(NotApplicable) as excinfo:
        deduction_transform(broken)
    assert excinfo.value.details == ["line 0: formula differs from hypothesis 0"]


def _verified_everywhere(formula, class_name):
    variables = sorted(free_vars(formula))
    for model in model_pool(class_name, count=10):
        for w in model.worlds:
            for env in environments(model, w, variables):
                if not evaluate(model, w, formula, "+", env):
                    return False
    return True


PATTERN_SCHEMES = [s for s in SCHEMES.values() if s.pattern is not None and not s.extension]
EXTENSION_CLASSES = {"EXC": "QBKo", "EXP": "QB3K", "BA": "QBKsharp", "BABOX": "QBKsharp", "T": "QBT", "FOUR": "QBK4"}
small = formulas(leaves=4)


@given(st.sampled_from(PATTERN_SCHEMES), small, small, small, st.sampled_from(VARIABLES))
def test_base_axioms_are_verified_on_sampled_models(scheme, a, b, c, x):
    instance = instantiate(scheme.id, {"A": a, "B": b, "C": c, "?x": x})
    assert match_scheme(scheme.id, instance) is not None
    assert _verified_everywhere(instance, "QBK")


@given(st.sampled_from(["Q1", "Q2"]), small, st.sampled_from(VARIABLES), terms)
def test_instantiation_axioms_are_verified_on_sampled_models(scheme_id, a, x, t):
    assume(is_free_for(t, x, a))
    instance = instantiate(scheme_id, {"A": a, "?x": x, "t": t})
    assert match_scheme(scheme_id, instance) is not None
    assert _verified_everywhere(instance, "QBK")


@given(st.sampled_from(sorted(EXTENSION_CLASSES)), small, small, st.sampled_from(VARIABLES))
def test_extension_axioms_are_verified_on_their_class(scheme_id, a, b, x):
    instance = instantiate(scheme_id, {"A": a, "B": b, "?x": x})
    assert _verified_everywhere(instance, EXTENSION_CLASSES[scheme_id])
