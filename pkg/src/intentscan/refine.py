"""Page refinement: shrink a parsed page to its interaction-relevant core.

Three passes run in a fixed order, each on a fresh copy of the tree:

1. removal: elements classified ``STYLE`` are dropped along with their
   subtrees, and presentational ``style``/``class`` attributes are stripped
   everywhere (their class tokens are collected first because page-similarity
   scoring wants them).
2. merging: runs of adjacent ``ASSOCIATION`` siblings are collapsed into one
   flat node whose text is truncated at a configurable length.  A run never
   extends across an element of another class, and any member containing a
   core-functional descendant (a link inside a paragraph, say) is exempt.
3. core refinement: inside core-functional subtrees only an attribute
   allowlist survives, and containers left with no text and no
   core-functional descendant are deleted bottom-up.

The composition is idempotent and never grows the node count, and it
preserves the multiset of interactive elements, which keeps every follow-up
stage honest about what can actually be clicked or filled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dom import (
    ClassificationLexicon,
    DomNode,
    DomTree,
    ElementClass,
    classify,
    is_interactive,
    text_node,
)

TRUNCATION_MARKER = "…"

# Attributes that survive inside core-functional subtrees.  Beyond the
# identification set (name/id/type/...) it keeps the state flags and
# association attributes interaction planning depends on.
DEFAULT_ATTRIBUTE_ALLOWLIST = (
    "name", "id", "type", "value", "action", "method", "href",
    "placeholder", "title", "alt", "aria-label",
    "disabled", "checked", "selected", "required", "for", "src",
)

# Never deleted even when empty: the document skeleton.
_PROTECTED_TAGS = frozenset({"html", "head", "body"})

_PRESENTATION_ATTRS = ("style", "class")


@dataclass(frozen=True)
class RefinementConfig:
    max_text: int = 200
    attribute_allowlist: tuple[str, ...] = DEFAULT_ATTRIBUTE_ALLOWLIST


@dataclass
class RefinedPage:
    """Result of :func:`compress_page`.

    ``core_elements`` lists node ids (in ``tree``) of surviving interactive
    elements; ``style_tokens`` holds the ``class`` vocabulary of the original
    page, captured before stripping.
    """

    tree: DomTree
    removed_count: int = 0
    merged_count: int = 0
    core_elements: list[int] = field(default_factory=list)
    style_tokens: frozenset[str] = frozenset()


def collect_style_tokens(tree: DomTree) -> frozenset[str]:
    """Gather every ``class`` attribute token present in the page."""
    tokens: set[str] = set()
    for node in tree.nodes():
        if not node.is_text and "class" in node.attributes:
            tokens.update(node.attributes["class"].split())
    return frozenset(tokens)


def remove_style_elements(
    tree: DomTree, lexicon: ClassificationLexicon | None = None
) -> tuple[DomTree, int]:
    """Drop style-classified elements; returns (new tree, removed count).

    The count covers style-classified elements only, not their descendants.
    Presentational attributes are stripped from every surviving element.
    """
    removed = 0

    def rebuild(node: DomNode) -> DomNode:
        nonlocal removed
        if node.is_text:
            return node.copy()
        attrs = {k: v for k, v in node.attributes.items() if k not in _PRESENTATION_ATTRS}
        kept: list[DomNode] = []
        for child in node.children:
            if not child.is_text and classify(child, lexicon) is ElementClass.STYLE:
                removed += sum(
                    1
                    for n in child.iter()
                    if not n.is_text and classify(n, lexicon) is ElementClass.STYLE
                )
                continue
            kept.append(rebuild(child))
        return DomNode(node.tag, attrs, node.text, kept)

    new_tree = DomTree(root=rebuild(tree.root), source_url=tree.source_url).reindex()
    return new_tree, removed


def _has_core_descendant(node: DomNode, lexicon: ClassificationLexicon | None) -> bool:
    return any(
        not n.is_text and classify(n, lexicon) is ElementClass.CORE_FUNCTIONAL
        for n in node.iter()
    )


def _mergeable(node: DomNode, lexicon: ClassificationLexicon | None) -> bool:
    if node.is_text:
        return True
    if classify(node, lexicon) is not ElementClass.ASSOCIATION:
        return False
    return not _has_core_descendant(node, lexicon)


def _flat_text(nodes: list[DomNode]) -> str:
    parts = [n.text if n.is_text else n.text_content() for n in nodes]
    return " ".join(p for p in parts if p)


def _truncate(text: str, max_text: int) -> str:
    if len(text) > max_text:
        return text[:max_text] + TRUNCATION_MARKER
    return text


def merge_association_elements(
    tree: DomTree, max_text: int = 200, lexicon: ClassificationLexicon | None = None
) -> tuple[DomTree, int]:
    """Collapse adjacent association content; returns (new tree, merged count).

    A run of two or more consecutive mergeable siblings becomes one node: the
    first element's tag and attributes with the concatenated, truncated text
    (or a bare text node when the run held no element).  Runs of one are left
    structurally intact unless their text exceeds ``max_text``, in which case
    they are flattened and truncated the same way.
    """
    merged = 0

    def collapse_run(run: list[DomNode]) -> DomNode:
        text = _truncate(_flat_text(run), max_text)
        first_element = next((n for n in run if not n.is_text), None)
        if first_element is None:
            return text_node(text)
        children = [text_node(text)] if text else []
        return DomNode(first_element.tag, dict(first_element.attributes), None, children)

    def rebuild(node: DomNode) -> DomNode:
        nonlocal merged
        if node.is_text:
            return node.copy()
        if _mergeable(node, lexicon):
            # Inline content of association elements stays verbatim; merging
            # only ever collapses sibling runs inside containers.
            return node.copy()
        new_children: list[DomNode] = []
        run: list[DomNode] = []

        def flush() -> None:
            nonlocal merged
            if not run:
                return
            if len(run) >= 2:
                merged += len(run)
                new_children.append(collapse_run(run))
            else:
                single = run[0]
                if not single.is_text and len(single.text_content()) > max_text:
                    new_children.append(collapse_run(run))
                else:
                    new_children.append(rebuild(single))
            run.clear()

        for child in node.children:
            if _mergeable(child, lexicon):
                run.append(child)
            else:
                flush()
                new_children.append(rebuild(child))
        flush()
        return DomNode(node.tag, dict(node.attributes), node.text, new_children)

    new_tree = DomTree(root=rebuild(tree.root), source_url=tree.source_url).reindex()
    return new_tree, merged


def refine_core_elements(
    tree: DomTree,
    config: RefinementConfig | None = None,
    lexicon: ClassificationLexicon | None = None,
) -> tuple[DomTree, list[int]]:
    """Enforce the attribute allowlist in core subtrees and prune dead weight.

    Containers with no text and no core-functional descendant are deleted
    bottom-up (the document skeleton html/head/body is exempt).  Returns the
    new tree plus node ids of the surviving interactive elements.
    """
    cfg = config or RefinementConfig()
    allow = set(cfg.attribute_allowlist)

    def rebuild(node: DomNode, in_core: bool) -> DomNode | None:
        if node.is_text:
            return node.copy() if node.text else None
        core = in_core or classify(node, lexicon) is ElementClass.CORE_FUNCTIONAL
        attrs = (
            {k: v for k, v in node.attributes.items() if k in allow}
            if core
            else dict(node.attributes)
        )
        children = [c for c in (rebuild(ch, core) for ch in node.children) if c is not None]
        rebuilt = DomNode(node.tag, attrs, node.text, children)
        if node.tag in _PROTECTED_TAGS or core:
            return rebuilt
        if not children and not rebuilt.text_content():
            return None
        return rebuilt

    root = rebuild(tree.root, False)
    assert root is not None  # html is protected
    new_tree = DomTree(root=root, source_url=tree.source_url).reindex()
    core_ids = [n.node_id for n in new_tree.nodes() if not n.is_text and is_interactive(n)]
    return new_tree, core_ids


def compress_page(
    tree: DomTree,
    config: RefinementConfig | None = None,
    lexicon: ClassificationLexicon | None = None,
) -> RefinedPage:
    """Run all three refinement passes; see the module docstring for order."""
    cfg = config or RefinementConfig()
    tokens = collect_style_tokens(tree)
    stripped, removed = remove_style_elements(tree, lexicon)
    merged_tree, merged = merge_association_elements(stripped, cfg.max_text, lexicon)
    final, core = refine_core_elements(merged_tree, cfg, lexicon)
    return RefinedPage(
        tree=final,
        removed_count=removed,
        merged_count=merged,
        core_elements=core,
        style_tokens=tokens,
    )
