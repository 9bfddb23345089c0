"""HTML document model: lenient parsing, role classification, serialization.

Real-world pages are rarely well formed, so the parser recovers instead of
failing: missing ``<html>``/``<body>`` wrappers are synthesized, void tags
never open a scope, and tags such as ``<p>`` or ``<li>`` are closed
implicitly when a sibling opens.  The resulting tree is the unit of work
for every other module.

Each element is classified into one of four roles via a small lexicon that
ships with the package and can be replaced at load time:

- ``STYLE``: presentation only, safe to drop (``<script>``, ``<img>``, ...).
- ``ASSOCIATION``: text content that supports, but does not provide,
  functionality (``<p>``, ``<li>``, ...).
- ``CORE_FUNCTIONAL``: elements a user interacts with (forms, fields,
  buttons, links).
- ``OTHER``: structural containers that are kept but carry no weight.
"""

from __future__ import annotations

import functools
import html as htmlesc
import re
from dataclasses import dataclass, field
from enum import Enum
from html.parser import HTMLParser
from importlib import resources
from pathlib import Path
from typing import Iterator

TEXT_TAG = "#text"

VOID_TAGS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link",
    "meta", "param", "source", "track", "wbr",
})

# Content is emitted verbatim, not entity-escaped.
RAW_TEXT_TAGS = frozenset({"script", "style"})

HEAD_TAGS = frozenset({"base", "link", "meta", "noscript", "script", "style", "title"})

# Opening a tag from the value set implicitly closes an open key tag.
AUTO_CLOSE: dict[str, frozenset[str]] = {
    "p": frozenset({
        "address", "article", "aside", "blockquote", "details", "div", "dl",
        "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2",
        "h3", "h4", "h5", "h6", "header", "hr", "main", "menu", "nav", "ol",
        "p", "pre", "section", "table", "ul",
    }),
    "li": frozenset({"li"}),
    "dt": frozenset({"dt", "dd"}),
    "dd": frozenset({"dt", "dd"}),
    "tr": frozenset({"tr"}),
    "td": frozenset({"td", "th", "tr"}),
    "th": frozenset({"td", "th", "tr"}),
    "option": frozenset({"option", "optgroup"}),
    "optgroup": frozenset({"optgroup"}),
    "thead": frozenset({"tbody", "tfoot"}),
    "tbody": frozenset({"tbody", "tfoot"}),
}

_WS = re.compile(r"\s+")

# Leaf elements a user can actually act on (fill, pick, click).
INTERACTIVE_TAGS = frozenset({"a", "button", "input", "select", "textarea"})


def is_interactive(node: "DomNode") -> bool:
    """True for elements the crawler can drive directly.

    Containers such as ``<form>`` or ``<fieldset>`` are core-functional but
    are operated through their leaves, so they do not count here.  An
    ``<iframe>`` counts only when it actually embeds content.
    """
    if node.tag in INTERACTIVE_TAGS:
        return True
    return node.tag == "iframe" and "src" in node.attributes


class EmptyInput(ValueError):
    """Raised when asked to parse empty or whitespace-only markup."""


class LexiconError(ValueError):
    """Raised when a classification lexicon file contains an invalid line."""


class ElementClass(Enum):
    STYLE = "Style"
    ASSOCIATION = "Association"
    CORE_FUNCTIONAL = "CoreFunctional"
    OTHER = "Other"


@dataclass
class DomNode:
    """One tree node; text nodes use tag ``#text`` and never carry children."""

    tag: str
    attributes: dict[str, str] = field(default_factory=dict)
    text: str | None = None
    children: list["DomNode"] = field(default_factory=list)
    node_id: int = -1

    @property
    def is_text(self) -> bool:
        return self.tag == TEXT_TAG

    def attr(self, name: str, default: str = "") -> str:
        return self.attributes.get(name, default)

    def iter(self) -> Iterator["DomNode"]:
        """Yield this node and all descendants in document (preorder) order."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def text_content(self, sep: str = " ") -> str:
        return sep.join(n.text for n in self.iter() if n.is_text and n.text)

    def copy(self) -> "DomNode":
        return DomNode(
            tag=self.tag,
            attributes=dict(self.attributes),
            text=self.text,
            children=[c.copy() for c in self.children],
            node_id=self.node_id,
        )


def text_node(content: str) -> DomNode:
    return DomNode(TEXT_TAG, text=content)


@dataclass
class DomTree:
    """A parsed document plus an id index over its nodes."""

    root: DomNode
    source_url: str = ""
    node_count: int = 0
    _index: dict[int, DomNode] = field(default_factory=dict, repr=False)
    _parents: dict[int, DomNode | None] = field(default_factory=dict, repr=False)

    def reindex(self) -> "DomTree":
        """Assign preorder node ids starting at 0 and rebuild the lookup maps."""
        self._index.clear()
        self._parents.clear()
        next_id = 0
        stack: list[tuple[DomNode, DomNode | None]] = [(self.root, None)]
        while stack:
            node, parent = stack.pop()
            node.node_id = next_id
            self._index[next_id] = node
            self._parents[next_id] = parent
            next_id += 1
            for child in reversed(node.children):
                stack.append((child, node))
        self.node_count = next_id
        return self

    def nodes(self) -> Iterator[DomNode]:
        return self.root.iter()

    def find(self, node_id: int) -> DomNode | None:
        return self._index.get(node_id)

    def parent_of(self, node_id: int) -> DomNode | None:
        return self._parents.get(node_id)

    def copy(self) -> "DomTree":
        return DomTree(root=self.root.copy(), source_url=self.source_url).reindex()


class _TreeBuilder(HTMLParser):
    """Event handler that assembles a recovered tree.

    Recovery rules: an ``<html>`` root always exists, head content goes to a
    synthesized ``<head>`` only when head-only tags actually appear, all other
    content lives under ``<body>``, void tags never open a scope, stray end
    tags are ignored, and the ``AUTO_CLOSE`` table closes dangling ``<p>``,
    ``<li>`` and table scopes.
    """

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.root = DomNode("html")
        self.stack: list[DomNode] = [self.root]
        self.head: DomNode | None = None
        self.body: DomNode | None = None

    # -- structural helpers -------------------------------------------------

    def _open_body(self) -> None:
        if self.body is None:
            self.body = DomNode("body")
            self.root.children.append(self.body)
        if self.body not in self.stack:
            self.stack.append(self.body)

    def _ensure_context(self, tag: str | None) -> None:
        """Make sure there is a legal insertion point for *tag* (None = text)."""
        top = self.stack[-1]
        if top is self.root:
            if tag in HEAD_TAGS and self.head is None and self.body is None:
                self.head = DomNode("head")
                self.root.children.append(self.head)
                self.stack.append(self.head)
            else:
                self._open_body()
        elif top is self.head and (tag is None or tag not in HEAD_TAGS):
            self.stack.pop()
            self._open_body()

    def _append(self, node: DomNode, push: bool) -> None:
        self.stack[-1].children.append(node)
        if push:
            self.stack.append(node)

    # -- parser events ------------------------------------------------------

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        tag = tag.lower()
        attributes: dict[str, str] = {}
        for name, value in attrs:
            attributes.setdefault(name.lower(), value if value is not None else "")
        if tag == "html":
            for name, value in attributes.items():
                self.root.attributes.setdefault(name, value)
            return
        if tag == "head":
            if self.head is None and self.body is None and self.stack[-1] is self.root:
                self.head = DomNode("head", attributes)
                self.root.children.append(self.head)
                self.stack.append(self.head)
            return
        if tag == "body":
            if self.head is not None and self.stack[-1] is self.head:
                self.stack.pop()
            if self.body is None:
                self.body = DomNode("body", attributes)
                self.root.children.append(self.body)
                self.stack.append(self.body)
            return
        self._ensure_context(tag)
        while self.stack[-1].tag in AUTO_CLOSE and tag in AUTO_CLOSE[self.stack[-1].tag]:
            self.stack.pop()
        self._append(DomNode(tag, attributes), push=tag not in VOID_TAGS)

    def handle_endtag(self, tag: str) -> None:
        tag = tag.lower()
        if tag in ("html", "body"):
            return  # closed once parsing finishes
        if tag == "head":
            if self.head is not None and self.stack[-1] is self.head:
                self.stack.pop()
            return
        if tag in VOID_TAGS:
            return
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return

    def handle_data(self, data: str) -> None:
        parent = self.stack[-1]
        if parent.tag in RAW_TEXT_TAGS:
            if data:
                self._merge_text(parent, data, raw=True)
            return
        collapsed = _WS.sub(" ", data).strip()
        if not collapsed:
            return
        self._ensure_context(None)
        self._merge_text(self.stack[-1], collapsed, raw=False)

    def _merge_text(self, parent: DomNode, content: str, raw: bool) -> None:
        if parent.children and parent.children[-1].is_text:
            last = parent.children[-1]
            last.text = (last.text or "") + (content if raw else " " + content)
        else:
            parent.children.append(text_node(content))

    def finish(self) -> DomNode:
        del self.stack[1:]
        return self.root


def parse_html(raw: bytes | str, source_url: str = "") -> DomTree:
    """Parse *raw* markup into a recovered :class:`DomTree`.

    Whitespace runs inside text are collapsed to single spaces and pure
    whitespace text is dropped.  Raises :class:`EmptyInput` when there is
    nothing to parse.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="replace")
    if raw is None or not raw.strip():
        raise EmptyInput("no markup to parse")
    builder = _TreeBuilder()
    builder.feed(raw)
    builder.close()
    return DomTree(root=builder.finish(), source_url=source_url).reindex()


# -- serialization ----------------------------------------------------------


def serialize(obj: DomTree | DomNode) -> str:
    """Render a tree or subtree back to HTML.

    Text is entity-escaped except inside raw-text elements, so parsing the
    result yields a tree equal to the input (serialization is a fixed point
    of ``parse -> serialize -> parse``).
    """
    node = obj.root if isinstance(obj, DomTree) else obj
    out: list[str] = []
    _emit(node, out)
    return "".join(out)


def _emit(node: DomNode, out: list[str]) -> None:
    if node.is_text:
        out.append(htmlesc.escape(node.text or "", quote=False))
        return
    out.append("<" + node.tag)
    for name, value in node.attributes.items():
        out.append(' {}="{}"'.format(name, htmlesc.escape(value, quote=True)))
    out.append(">")
    if node.tag in VOID_TAGS:
        return
    if node.tag in RAW_TEXT_TAGS:
        for child in node.children:
            out.append(child.text or "")
    else:
        for child in node.children:
            _emit(child, out)
    out.append("</{}>".format(node.tag))


def tree_equal(a: DomTree | DomNode, b: DomTree | DomNode) -> bool:
    """Structural equality: tags, attributes, text and child order (ids ignored)."""
    na = a.root if isinstance(a, DomTree) else a
    nb = b.root if isinstance(b, DomTree) else b
    if na.tag != nb.tag or na.attributes != nb.attributes or na.text != nb.text:
        return False
    if len(na.children) != len(nb.children):
        return False
    return all(tree_equal(ca, cb) for ca, cb in zip(na.children, nb.children))


# -- classification ---------------------------------------------------------


@dataclass(frozen=True)
class ClassificationLexicon:
    """Tag and tag+attribute rules mapping elements to :class:`ElementClass`.

    Attribute rules beat plain tag rules; an exact attribute value beats the
    ``*`` (attribute present) wildcard.
    """

    by_tag: dict[str, ElementClass]
    by_attr: dict[tuple[str, str, str], ElementClass]

    def classify_element(self, tag: str, attributes: dict[str, str]) -> ElementClass:
        for name, value in attributes.items():
            exact = self.by_attr.get((tag, name, value))
            if exact is not None:
                return exact
        for name in attributes:
            wild = self.by_attr.get((tag, name, "*"))
            if wild is not None:
                return wild
        return self.by_tag.get(tag, ElementClass.OTHER)


_CLASS_BY_NAME = {cls.value: cls for cls in ElementClass}


def load_lexicon(path: str | Path | None = None) -> ClassificationLexicon:
    """Load a lexicon from a tab-separated file.

    Each line is ``tag<TAB>Class`` or ``tag,attr=value<TAB>Class`` where the
    value ``*`` means "attribute present".  Blank lines and ``#`` comments are
    skipped; anything else raises :class:`LexiconError`.
    """
    if path is None:
        source = resources.files("intentscan").joinpath("data/element_classes.tsv")
        content = source.read_text(encoding="utf-8")
        origin = "element_classes.tsv"
    else:
        content = Path(path).read_text(encoding="utf-8")
        origin = str(path)
    by_tag: dict[str, ElementClass] = {}
    by_attr: dict[tuple[str, str, str], ElementClass] = {}
    for lineno, line in enumerate(content.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise LexiconError(f"{origin}:{lineno}: expected 'selector<TAB>class'")
        selector, class_name = parts[0].strip(), parts[1].strip()
        element_class = _CLASS_BY_NAME.get(class_name)
        if element_class is None:
            raise LexiconError(f"{origin}:{lineno}: unknown class {class_name!r}")
        if "," in selector:
            tag, _, condition = selector.partition(",")
            attr, eq, value = condition.partition("=")
            if not tag or not attr or not eq:
                raise LexiconError(f"{origin}:{lineno}: bad selector {selector!r}")
            by_attr[(tag.strip().lower(), attr.strip().lower(), value.strip())] = element_class
        elif selector:
            by_tag[selector.lower()] = element_class
        else:
            raise LexiconError(f"{origin}:{lineno}: empty selector")
    return ClassificationLexicon(by_tag=by_tag, by_attr=by_attr)


@functools.lru_cache(maxsize=1)
def default_lexicon() -> ClassificationLexicon:
    return load_lexicon(None)


def classify(node: DomNode, lexicon: ClassificationLexicon | None = None) -> ElementClass:
    """Classify one node; total over any tree this package produces."""
    if node.is_text:
        return ElementClass.ASSOCIATION
    lex = lexicon if lexicon is not None else default_lexicon()
    return lex.classify_element(node.tag, node.attributes)
