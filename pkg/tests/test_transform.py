from hypothesis import given

from qbk.frontend import parse_formula
from qbk.fixtures import load_fixture_model
from qbk.semantics import Polarity, environments, evaluate, strong_equivalence_witness
from qbk.syntax import And, Atom, StrongNeg, free_vars, neg, replace_subformula, size
from qbk.transform import is_nnf, to_nnf
from strategies import SIG, formulas, model_pool


def nnf(text: str) -> str:
    return str(to_nnf(parse_formula(text, SIG)))


def test_strong_negation_rewrites():
    assert nnf("~~P(x)") == "P(x)"
    assert nnf("~(P(x) & Q(x))") == "~P(x) | ~Q(x)"
    assert nnf("~(P(x) | Q(x))") == "~P(x) & ~Q(x)"
    assert nnf("~(P(x) -> Q(x))") == "P(x) & ~Q(x)"
    assert nnf("~[]P(x)") == "<>~P(x)"
    assert nnf("~<>P(x)") == "[]~P(x)"
    assert nnf("~(forall x . P(x))") == "exists x . ~P(x)"
    assert nnf("~(exists x . P(x))") == "forall x . ~P(x)"


def test_negated_atoms_and_bottom_are_normal():
    assert is_nnf(StrongNeg(Atom("p")))
    assert nnf("~_|_") == "~_|_"
    assert not is_nnf(parse_formula("~~p", SIG))


def test_rewriting_reaches_inside_implications():
    assert nnf("~~p -> ~(p & ~p)") == "p -> ~p | p"


@given(formulas())
def test_to_nnf_is_normal_and_idempotent(f):
    g = to_nnf(f)
    assert is_nnf(g)
    assert to_nnf(g) == g
    assert free_vars(g) == free_vars(f)


@given(formulas())
def test_nnf_size_stays_linear(f):
    assert size(to_nnf(f)) <= 2 * size(f)


@given(formulas())
def test_nnf_is_strongly_equivalent(f):
    g = to_nnf(f)
    variables = sorted(free_vars(f))
    for model in model_pool("QBK", max_worlds=2, max_domain=2, count=8):
        for w in model.worlds:
            for env in environments(model, w, variables):
                for polarity in Polarity:
                    assert evaluate(model, w, f, polarity, env) == evaluate(model, w, g, polarity, env)


@given(formulas())
def test_replacing_by_a_strong_equivalent_is_admissible(f):
    p = Atom("p")
    theta = And(f, p)
    replaced = replace_subformula(theta, p, StrongNeg(StrongNeg(p)))
    for model in model_pool("QBK", max_worlds=2, max_domain=2, count=8):
        assert strong_equivalence_witness(model, theta, replaced) is None


def test_weak_equivalents_are_not_replaceable_under_strong_negation():
    model = load_fixture_model("one_point_gap.json")
    p = Atom("p")
    assert evaluate(model, "x", p) == evaluate(model, "x", neg(neg(p)))
    theta = StrongNeg(p)
    replaced = replace_subformula(theta, p, neg(neg(p)))
    assert not evaluate(model, "x", theta)
    assert evaluate(model, "x", replaced)
    assert strong_equivalence_witness(model, theta, replaced) == ("x", {}, Polarity.POS)
