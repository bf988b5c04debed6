"""Access to the bundled example corpus."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .textfmt import SessionFile, parse_session

NAMES = (
    "characteristic",
    "characteristic2",
    "choice",
    "balancing",
    "depth",
    "projection",
    "narrowing",
    "forking",
    "loop",
)


def corpus_path(name: str) -> Path:
    path = resources.files("sessev") / "corpus" / f"{name}.sess"
    return Path(str(path))


def load(name: str) -> SessionFile:
    path = corpus_path(name)
    return parse_session(path.read_text(encoding="utf-8"), str(path))


def load_all() -> dict:
    return {name: load(name) for name in NAMES}


def typed_pairs(sf: SessionFile):
    """The (network, type) pairs a session file asserts typable."""
    for e in sf.expectations:
        if e.assertion == "typable-by" and e.value:
            yield sf.networks[e.subject], sf.types[e.argument], e.subject, e.argument
