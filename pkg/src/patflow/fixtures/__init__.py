"""Small example graphs used by the documentation and the test suite."""

from __future__ import annotations

import json
from importlib import resources

__all__ = ["names", "load", "load_graph"]


def names() -> list[str]:
    """Names of the bundled example documents."""
    root = resources.files(__package__)
    return sorted(
        p.name[: -len(".json")]
        for p in root.iterdir()
        if p.name.endswith(".json")
    )


def load(name: str) -> dict:
    """The raw document for a bundled example."""
    text = resources.files(__package__).joinpath(f"{name}.json").read_text()
    return json.loads(text)


def load_graph(name: str):
    """The built graph for a bundled example."""
    from ..graphs import build_graph

    return build_graph(load(name))
