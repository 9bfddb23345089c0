"""Functional-block segmentation of refined pages.

A refined page is cut into blocks that each bundle one piece of page
functionality (a navigation strip, a comment widget, a rules box).  The cut
happens per container level: children that either contain something
interactive or carry a minimum amount of text become blocks, decorative
leftovers are absorbed into their parent.  Single-child wrapper chains are
skipped so a page drowning in layout ``<div>`` nesting still yields its real
top-level blocks.

Blocks carry a semantic label (heading text when available) and a token
estimate of their serialized size so a decision provider can reason about
them without seeing the raw page, and can tell when a block is still too
large to hand over in one piece.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dom import DomNode, DomTree, is_interactive, serialize
from .refine import RefinedPage

# Children with no interactive descendant and less text than this are not
# blocks of their own; their content stays with the parent.
MIN_BLOCK_TEXT = 20

LABEL_WORD_LIMIT = 8

_HEADING_TAGS = ("h1", "h2", "h3", "h4", "h5", "h6")


class NodeNotFound(KeyError):
    """Raised when a block refers to a node id the page does not contain."""


@dataclass
class FunctionalBlock:
    """One functional unit of a page, anchored at a DOM node."""

    block_id: str
    node_id: int
    tag: str
    label: str
    token_estimate: int
    children: list["FunctionalBlock"] = field(default_factory=list)


def estimate_tokens(node: DomNode) -> int:
    """``ceil(len(serialized content) / 4)``; the unit all thresholds use."""
    content = node.text or "" if node.is_text else serialize(node)
    return math.ceil(len(content) / 4)


def interactive_elements(page: RefinedPage, node_id: int) -> list[DomNode]:
    """Interactive descendants in document order; hidden inputs do not count."""
    node = _find(page, node_id)
    out = []
    for n in node.iter():
        if n.is_text or not is_interactive(n):
            continue
        if n.tag == "input" and n.attr("type").lower() == "hidden":
            continue
        out.append(n)
    return out


def semantic_label(node: DomNode) -> str:
    """Short human-readable label: heading, legend, aria text or leading text."""
    for picker in (_heading_text, _legend_text, _aria_text, _leading_text):
        text = picker(node)
        if text:
            words = text.split()
            return " ".join(words[:LABEL_WORD_LIMIT])
    return node.tag


def _heading_text(node: DomNode) -> str:
    for n in node.iter():
        if n.tag in _HEADING_TAGS:
            return n.text_content().strip()
    return ""


def _legend_text(node: DomNode) -> str:
    for n in node.iter():
        if n.tag == "legend":
            return n.text_content().strip()
    return ""


def _aria_text(node: DomNode) -> str:
    return node.attr("aria-label") or node.attr("title")


def _leading_text(node: DomNode) -> str:
    return node.text_content().strip()


def _has_interactive(node: DomNode) -> bool:
    return any(
        not n.is_text
        and is_interactive(n)
        and not (n.tag == "input" and n.attr("type").lower() == "hidden")
        for n in node.iter()
    )


def _candidates(node: DomNode) -> list[DomNode]:
    out = []
    for child in node.children:
        if child.is_text:
            continue
        if _has_interactive(child) or len(child.text_content()) >= MIN_BLOCK_TEXT:
            out.append(child)
    return out


def _find(page: RefinedPage, node_id: int) -> DomNode:
    node = page.tree.find(node_id)
    if node is None:
        raise NodeNotFound(f"no node {node_id} in page")
    return node


def make_block(node: DomNode) -> FunctionalBlock:
    return FunctionalBlock(
        block_id=f"b{node.node_id}",
        node_id=node.node_id,
        tag=node.tag,
        label=semantic_label(node),
        token_estimate=estimate_tokens(node),
    )


def segment(page: RefinedPage, node_id: int) -> list[FunctionalBlock]:
    """Split the subtree at *node_id* into its next level of blocks.

    Returns an empty list when the subtree has no divisible structure left
    (the caller then works directly with the elements in scope).
    """
    cur = _find(page, node_id)
    cands = _candidates(cur)
    while len(cands) == 1 and _candidates(cands[0]):
        cur = cands[0]
        cands = _candidates(cur)
    return [make_block(c) for c in cands]


def segment_tree(page: RefinedPage, node_id: int | None = None) -> FunctionalBlock:
    """Full recursive segmentation rooted at *node_id* (default: document root)."""
    node = _find(page, page.tree.root.node_id if node_id is None else node_id)
    root_block = make_block(node)
    _grow(page, root_block)
    return root_block


def _grow(page: RefinedPage, block: FunctionalBlock) -> None:
    for child in segment(page, block.node_id):
        block.children.append(child)
        _grow(page, child)


def iter_blocks(block: FunctionalBlock):
    """Yield a block tree in preorder."""
    yield block
    for child in block.children:
        yield from iter_blocks(child)
