"""Model and derivation documents shipped with the package."""

from __future__ import annotations

from importlib import resources
from typing import TYPE_CHECKING, Tuple

from ..errors import SchemaError
from ..frontend import DocumentFormat, SourceDocument, load_derivation, load_model

if TYPE_CHECKING:
    from ..calculus import Derivation
    from ..semantics import KripkeModel

MODELS: Tuple[str, ...] = ("one_point_gap.json", "expanding_barcan.json")
DERIVATIONS: Tuple[str, ...] = (
    "converse_barcan.json",
    "converse_barcan_box.json",
    "necessitation.json",
    "barcan_box_from_barcan.json",
)


def fixture_text(name: str) -> str:
    try:
        return resources.files(__name__).joinpath(name).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SchemaError(f"no shipped fixture named {name!r}") from None


def load_fixture_model(name: str) -> "KripkeModel":
    return load_model(SourceDocument(fixture_text(name), DocumentFormat.MODEL, f"fixtures/{name}"))


def load_fixture_derivation(name: str) -> "Derivation":
    return load_derivation(SourceDocument(fixture_text(name), DocumentFormat.DERIVATION, f"fixtures/{name}"))


__all__ = [
    "DERIVATIONS",
    "MODELS",
    "fixture_text",
    "load_fixture_derivation",
    "load_fixture_model",
]
