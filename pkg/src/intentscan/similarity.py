"""Multidimensional page similarity for crawl-state deduplication.

Two fetched pages are considered the same application state when they share
an origin and score highly on a weighted blend of three signals:

- URL similarity: mean of normalized longest-common-subsequence scores over
  the full URL, the path, and the sorted query-parameter names.  Pages from
  different origins are never comparable.
- DOM similarity: ``1 - TED / max(|a|, |b|)`` where ``TED`` is the ordered
  tree edit distance (unit costs) between the element-tag shapes of the two
  refined pages.  Text nodes are excluded so content churn (one more comment
  in a list) does not split template twins into separate states.
- Style similarity: Jaccard overlap of the ``class`` token vocabularies
  captured before refinement stripped them.

URL similarity acts as a gate: when it falls below ``url_threshold`` the
expensive tree comparison is skipped entirely and the pair is not mergeable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable
from urllib.parse import parse_qsl, urlsplit

from .dom import DomNode, DomTree
from .refine import RefinedPage


class EmptyTree(ValueError):
    """Raised when a tree shape is requested for a tree without elements."""


# -- sequence similarity ------------------------------------------------------


def lcs_length(a: str, b: str) -> int:
    """Length of the longest common subsequence, O(len(a)*len(b))."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ch_a in a:
        cur = [0]
        for j, ch_b in enumerate(b, start=1):
            if ch_a == ch_b:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def dice_lcs(a: str, b: str) -> float:
    """LCS normalized to [0, 1]: ``2*LCS / (len(a)+len(b))``; both empty -> 1."""
    if not a and not b:
        return 1.0
    return 2.0 * lcs_length(a, b) / (len(a) + len(b))


def jaccard(a: Iterable[str], b: Iterable[str]) -> float:
    """Set overlap in [0, 1]; two empty sets count as identical."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


# -- tree shapes and edit distance --------------------------------------------


@dataclass(frozen=True)
class ShapeNode:
    """Immutable label/children skeleton of an element subtree."""

    label: str
    children: tuple["ShapeNode", ...] = ()

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)


def shape_from_dom(obj: DomTree | DomNode | RefinedPage) -> ShapeNode:
    """Project a DOM (sub)tree onto element tags only."""
    if isinstance(obj, RefinedPage):
        obj = obj.tree
    node = obj.root if isinstance(obj, DomTree) else obj
    if node.is_text:
        raise EmptyTree("cannot build a shape from a text node")

    def build(n: DomNode) -> ShapeNode:
        return ShapeNode(n.tag, tuple(build(c) for c in n.children if not c.is_text))

    return build(node)


class _Annotated:
    """Postorder numbering, leftmost-leaf table and keyroots of a shape."""

    def __init__(self, root: ShapeNode) -> None:
        self.labels: list[str] = [""]  # 1-based
        self.lml: list[int] = [0]

        def walk(node: ShapeNode) -> int:
            first_leaf = 0
            for child in node.children:
                leaf = walk(child)
                if first_leaf == 0:
                    first_leaf = leaf
            self.labels.append(node.label)
            index = len(self.labels) - 1
            self.lml.append(first_leaf if first_leaf else index)
            return self.lml[index]

        walk(root)
        self.size = len(self.labels) - 1
        seen: set[int] = set()
        self.keyroots: list[int] = []
        for i in range(self.size, 0, -1):
            if self.lml[i] not in seen:
                self.keyroots.append(i)
                seen.add(self.lml[i])
        self.keyroots.reverse()


def tree_edit_distance(a: ShapeNode, b: ShapeNode) -> int:
    """Ordered tree edit distance with unit insert/delete/relabel costs."""
    ta, tb = _Annotated(a), _Annotated(b)
    m, n = ta.size, tb.size
    td = [[0] * (n + 1) for _ in range(m + 1)]

    for i in ta.keyroots:
        for j in tb.keyroots:
            li, lj = ta.lml[i], tb.lml[j]
            rows, cols = i - li + 2, j - lj + 2
            fd = [[0] * cols for _ in range(rows)]
            for x in range(1, rows):
                fd[x][0] = fd[x - 1][0] + 1
            for y in range(1, cols):
                fd[0][y] = fd[0][y - 1] + 1
            for x in range(1, rows):
                for y in range(1, cols):
                    ai, bj = li + x - 1, lj + y - 1
                    if ta.lml[ai] == li and tb.lml[bj] == lj:
                        rename = 0 if ta.labels[ai] == tb.labels[bj] else 1
                        fd[x][y] = min(
                            fd[x - 1][y] + 1,
                            fd[x][y - 1] + 1,
                            fd[x - 1][y - 1] + rename,
                        )
                        td[ai][bj] = fd[x][y]
                    else:
                        fd[x][y] = min(
                            fd[x - 1][y] + 1,
                            fd[x][y - 1] + 1,
                            fd[ta.lml[ai] - li][tb.lml[bj] - lj] + td[ai][bj],
                        )
    return td[m][n]


def dom_similarity(a: ShapeNode, b: ShapeNode) -> float:
    """``1 - TED/max(sizes)`` clamped to [0, 1]."""
    distance = tree_edit_distance(a, b)
    return max(0.0, 1.0 - distance / max(a.size(), b.size()))


# -- page records and the combined score ---------------------------------------


@dataclass(frozen=True)
class PageRecord:
    """The similarity-relevant projection of one fetched page."""

    url: str
    origin: tuple[str, str, int]
    path: str
    query_names: tuple[str, ...]
    shape: ShapeNode
    style_tokens: frozenset[str]

    @classmethod
    def from_page(cls, url: str, refined: RefinedPage) -> "PageRecord":
        parts = urlsplit(url)
        scheme = parts.scheme.lower() or "http"
        port = parts.port or (443 if scheme == "https" else 80)
        names = tuple(sorted({name for name, _ in parse_qsl(parts.query, keep_blank_values=True)}))
        return cls(
            url=url,
            origin=(scheme, (parts.hostname or "").lower(), port),
            path=parts.path,
            query_names=names,
            shape=shape_from_dom(refined),
            style_tokens=refined.style_tokens,
        )


@dataclass(frozen=True)
class SimilarityConfig:
    w_url: float = 0.3
    w_dom: float = 0.5
    w_style: float = 0.2
    url_threshold: float = 0.6
    merge_threshold: float = 0.8

    def __post_init__(self) -> None:
        total = self.w_url + self.w_dom + self.w_style
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"similarity weights must sum to 1, got {total}")


@dataclass(frozen=True)
class SimilarityScore:
    url_sim: float
    dom_sim: float
    style_sim: float
    combined: float
    same_origin: bool
    mergeable: bool


def url_similarity(a: PageRecord, b: PageRecord) -> tuple[float, bool]:
    """(similarity, same_origin); cross-origin pairs score 0 outright."""
    if a.origin != b.origin:
        return 0.0, False
    full = dice_lcs(a.url, b.url)
    path = dice_lcs(a.path.lstrip("/"), b.path.lstrip("/"))
    query = dice_lcs("&".join(a.query_names), "&".join(b.query_names))
    return (full + path + query) / 3.0, True


def page_similarity(
    a: PageRecord, b: PageRecord, config: SimilarityConfig | None = None
) -> SimilarityScore:
    """Blend the three signals; DOM and style are skipped below the URL gate."""
    cfg = config or SimilarityConfig()
    url_sim, same_origin = url_similarity(a, b)
    if not same_origin or url_sim < cfg.url_threshold:
        return SimilarityScore(
            url_sim=url_sim,
            dom_sim=0.0,
            style_sim=0.0,
            combined=cfg.w_url * url_sim if same_origin else 0.0,
            same_origin=same_origin,
            mergeable=False,
        )
    dom_sim = dom_similarity(a.shape, b.shape)
    style_sim = jaccard(a.style_tokens, b.style_tokens)
    combined = cfg.w_url * url_sim + cfg.w_dom * dom_sim + cfg.w_style * style_sim
    return SimilarityScore(
        url_sim=url_sim,
        dom_sim=dom_sim,
        style_sim=style_sim,
        combined=combined,
        same_origin=True,
        mergeable=combined >= cfg.merge_threshold,
    )
