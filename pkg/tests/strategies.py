"""Hypothesis strategies and small model pools shared by the test modules."""

import random
from functools import lru_cache
from typing import List

from hypothesis import strategies as st

from qbk.config import SearchLimits
from qbk.semantics import KripkeModel, ModelClass, enumerate_models, sample_models
from qbk.syntax import (
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
    free_vars,
)
from qbk.transform import to_nnf

SIG = Signature({"P": 1, "Q": 1, "p": 0}, frozenset({"c"}))
UNARY_SIG = Signature({"P": 1}, frozenset({"c"}))
VARIABLES = ("x", "y")

terms = st.sampled_from([Var("x"), Var("y"), Const("c")])

atoms = st.one_of(
    st.just(Atom("p")),
    st.builds(lambda name, t: Atom(name, (t,)), st.sampled_from(["P", "Q"]), terms),
    st.just(BOTTOM),
)

unary_atoms = st.one_of(st.builds(lambda t: Atom("P", (t,)), terms), st.just(BOTTOM))


def _extend(children: st.SearchStrategy[Formula], modal: bool) -> st.SearchStrategy[Formula]:
    variables = st.sampled_from(VARIABLES)
    options = [
        st.builds(And, children, children),
        st.builds(Or, children, children),
        st.builds(Imp, children, children),
        st.builds(StrongNeg, children),
        st.builds(Forall, variables, children),
        st.builds(Exists, variables, children),
    ]
    if modal:
        options += [st.builds(Box, children), st.builds(Diamond, children)]
    return st.one_of(options)


def formulas(modal: bool = True, leaves: int = 6, base: st.SearchStrategy[Formula] = atoms) -> st.SearchStrategy[Formula]:
    return st.recursive(base, lambda children: _extend(children, modal), max_leaves=leaves)


def close(f: Formula) -> Formula:
    """Universal closure over the free variables, innermost first by name."""

    for x in sorted(free_vars(f), reverse=True):
        f = Forall(x, f)
    return f


def sentences(modal: bool = True, leaves: int = 6, base: st.SearchStrategy[Formula] = atoms) -> st.SearchStrategy[Formula]:
    return formulas(modal, leaves, base).map(close)


nelson_formulas = formulas(modal=False)
nnf_nelson_sentences = sentences(modal=False, base=unary_atoms).map(to_nnf)


@lru_cache(maxsize=None)
def _pool(class_name: str, sig: Signature, max_worlds: int, max_domain: int, count: int, seed: int) -> tuple:
    limits = SearchLimits(max_worlds=max_worlds, max_domain=max_domain)
    return tuple(sample_models(sig, limits, ModelClass.preset(class_name), random.Random(seed), count))


def model_pool(
    class_name: str = "QBK",
    sig: Signature = SIG,
    *,
    max_worlds: int = 2,
    max_domain: int = 2,
    count: int = 25,
    seed: int = 7,
) -> List[KripkeModel]:
    """Deterministic random models of a class."""

    return list(_pool(class_name, sig, max_worlds, max_domain, count, seed))


def all_models(class_name: str, sig: Signature, max_worlds: int, max_domain: int) -> List[KripkeModel]:
    limits = SearchLimits(max_worlds=max_worlds, max_domain=max_domain)
    return list(enumerate_models(sig, limits, ModelClass.preset(class_name)))
