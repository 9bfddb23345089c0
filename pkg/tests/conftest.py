"""Shared fixtures: corpus discovery and core-element accounting."""

from collections import Counter
from pathlib import Path

import pytest

from intentscan.dom import DomTree

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"

# Elements whose survival refinement must guarantee, keyed by (tag, name).
PRESERVED_TAGS = ("form", "input", "select", "textarea", "button", "a")


def core_multiset(tree: DomTree) -> Counter:
    return Counter(
        (node.tag, node.attributes.get("name", ""))
        for node in tree.nodes()
        if node.tag in PRESERVED_TAGS
    )


def corpus_paths() -> list[Path]:
    return sorted(CORPUS.glob("*.html"))


@pytest.fixture(scope="session")
def corpus_files() -> list[Path]:
    paths = corpus_paths()
    assert len(paths) >= 20, "refinement corpus must hold at least 20 pages"
    return paths
