"""Key-element identification and interaction planning.

The scanner never feeds a whole page to its decision provider.  Instead it
walks the page's functional blocks top down: the provider picks one block per
level, and the walk descends while the chosen block's token estimate exceeds
one twentieth of the provider's context window.  Once the block is small
enough (or cannot be divided further) the interactive elements in scope are
put in front of the provider, which picks the key ones for the current goal.
The chosen blocks form an intention path, e.g. ``Comment -> Comment sent``,
that explains *why* the scanner is about to act.

Interaction planning turns key elements into a self-contained action plan:
values for every field, at most one submit, and all fills ordered before it.
Dependencies between controls are honored: a checkbox whose label enables a
group ("Enable comments") is checked before its dependents are filled, while
a disabling one ("Send anonymously") suppresses the fields it governs.  The
resulting plan carries absolute URLs and encoded values so it can be replayed
later without re-deriving anything from the page.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Protocol
from urllib.parse import urljoin

from .dom import DomNode
from .refine import RefinedPage
from .segmentation import (
    FunctionalBlock,
    interactive_elements,
    segment,
)

# How much of the provider's context window a block may take before the
# walk must descend another level.
CONTEXT_SHARE = 20

# Safety valve: no realistic page nests deeper than this many block levels.
MAX_DESCENT = 12

DESTRUCTIVE_WORDS = (
    "logout", "log out", "sign out", "signout", "delete", "remove", "reset",
    "drop", "destroy", "erase", "purge", "clear all", "deactivate",
    "unsubscribe", "cancel account",
)

ENABLING_WORDS = ("enable", "allow", "activate", "show", "turn on", "accept", "agree")

DISABLING_WORDS = ("anonymous", "disable", "without", "hide", "opt out", "turn off")


class NoInteractiveElements(RuntimeError):
    """The selected scope holds nothing the crawler could act on."""


class ProviderFailure(RuntimeError):
    """A decision provider returned something unusable."""


def is_destructive(text: str) -> bool:
    """Lexical screen for actions that change or destroy server state."""
    lowered = text.lower()
    return any(word in lowered for word in DESTRUCTIVE_WORDS)


def dependency_direction(text: str) -> str | None:
    """'enabling', 'disabling' or None for a control's label text."""
    lowered = text.lower()
    if any(word in lowered for word in DISABLING_WORDS):
        return "disabling"
    if any(word in lowered for word in ENABLING_WORDS):
        return "enabling"
    return None


# -- provider-facing candidate views ------------------------------------------


@dataclass(frozen=True)
class DecisionContext:
    goal: str
    url: str = ""
    path: tuple[str, ...] = ()


@dataclass(frozen=True)
class BlockCandidate:
    index: int
    block_id: str
    node_id: int
    tag: str
    label: str
    token_estimate: int
    interactive_count: int
    untested_count: int
    element_texts: tuple[str, ...]
    preview: str


@dataclass(frozen=True)
class ElementCandidate:
    index: int
    node_id: int
    tag: str
    type: str
    name: str
    text: str
    href: str
    options: tuple[str, ...]
    group_id: int
    tested: bool
    disabled: bool
    fillable: bool
    submits: bool


@dataclass(frozen=True)
class BlockDecision:
    index: int
    intent: str = ""


@dataclass(frozen=True)
class ElementDecision:
    index: int
    operation: str = ""


class DecisionProvider(Protocol):
    """The pluggable brain: an LLM client or a deterministic heuristic."""

    context_window: int
    defer_destructive: bool

    def select_block(
        self, ctx: DecisionContext, blocks: list[BlockCandidate]
    ) -> BlockDecision: ...

    def select_elements(
        self, ctx: DecisionContext, elements: list[ElementCandidate]
    ) -> list[ElementDecision]: ...

    def generate_value(
        self,
        ctx: DecisionContext,
        element: ElementCandidate,
        history: tuple[tuple[str, str], ...],
    ) -> str | bool: ...


# -- intention paths -----------------------------------------------------------


@dataclass(frozen=True)
class IntentionStep:
    block_id: str
    node_id: int
    label: str
    intent: str
    token_estimate: int


@dataclass
class IntentionPath:
    goal: str
    steps: list[IntentionStep] = field(default_factory=list)
    terminal_node: int = 0

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(step.label for step in self.steps)


# -- element metadata helpers ---------------------------------------------------


def element_label(page: RefinedPage, node: DomNode) -> str:
    """Best human-readable text for a control, used for reasoning about it."""
    own = node.text_content().strip()
    if own:
        return own
    if node.tag == "input" and node.attr("type").lower() in ("submit", "reset", "button", "image"):
        # Only button-like inputs display their value; elsewhere it is data.
        if node.attr("value").strip():
            return node.attr("value").strip()
    for attr in ("placeholder", "aria-label", "title"):
        if node.attr(attr).strip():
            return node.attr(attr).strip()
    label = _label_for(page, node)
    if label:
        return label
    return node.attr("name")


def _label_for(page: RefinedPage, node: DomNode) -> str:
    ancestor = page.tree.parent_of(node.node_id)
    while ancestor is not None:
        if ancestor.tag == "label":
            return ancestor.text_content().strip()
        ancestor = page.tree.parent_of(ancestor.node_id)
    node_id = node.attr("id")
    if node_id:
        for n in page.tree.nodes():
            if n.tag == "label" and n.attr("for") == node_id:
                return n.text_content().strip()
    return ""


def enclosing(page: RefinedPage, node: DomNode, tags: tuple[str, ...]) -> DomNode | None:
    cur = page.tree.parent_of(node.node_id)
    while cur is not None:
        if cur.tag in tags:
            return cur
        cur = page.tree.parent_of(cur.node_id)
    return None


def _is_submit(node: DomNode) -> bool:
    kind = node.attr("type").lower()
    if node.tag == "button":
        return kind in ("", "submit")
    return node.tag == "input" and kind in ("submit", "image")


def _is_fillable(node: DomNode) -> bool:
    if node.tag in ("textarea", "select"):
        return True
    if node.tag != "input":
        return False
    kind = node.attr("type").lower()
    return kind not in (
        "hidden", "submit", "reset", "button", "image", "checkbox", "radio", "file",
    )


def element_candidate(
    page: RefinedPage, index: int, node: DomNode, tested: frozenset[int]
) -> ElementCandidate:
    group = enclosing(page, node, ("fieldset", "form"))
    options: tuple[str, ...] = ()
    if node.tag == "select":
        # An option submits its value attribute, empty or not; only a missing
        # attribute falls back to the option text.
        options = tuple(
            opt.attributes["value"] if "value" in opt.attributes else opt.text_content().strip()
            for opt in node.iter()
            if opt.tag == "option"
        )
    return ElementCandidate(
        index=index,
        node_id=node.node_id,
        tag=node.tag,
        type=node.attr("type").lower(),
        name=node.attr("name"),
        text=element_label(page, node),
        href=node.attr("href"),
        options=options,
        group_id=group.node_id if group is not None else page.tree.root.node_id,
        tested=node.node_id in tested,
        disabled="disabled" in node.attributes,
        fillable=_is_fillable(node),
        submits=_is_submit(node),
    )


def block_candidate(
    page: RefinedPage, index: int, block: FunctionalBlock, tested: frozenset[int]
) -> BlockCandidate:
    elements = interactive_elements(page, block.node_id)
    untested = [e for e in elements if e.node_id not in tested]
    node = page.tree.find(block.node_id)
    preview = _WS_RE.sub(" ", node.text_content())[:120]
    return BlockCandidate(
        index=index,
        block_id=block.block_id,
        node_id=block.node_id,
        tag=block.tag,
        label=block.label,
        token_estimate=block.token_estimate,
        interactive_count=len(elements),
        untested_count=len(untested),
        element_texts=tuple(element_label(page, e) for e in untested),
        preview=preview,
    )


_WS_RE = re.compile(r"\s+")


# -- the descent ----------------------------------------------------------------


def identify_key_elements(
    page: RefinedPage,
    provider: DecisionProvider,
    goal: str,
    tested: frozenset[int] = frozenset(),
) -> tuple[IntentionPath, list[ElementCandidate]]:
    """Walk blocks until one fits the provider's window, then pick elements.

    Raises :class:`NoInteractiveElements` when the terminal scope has nothing
    actionable and :class:`ProviderFailure` on out-of-range decisions.
    """
    threshold = provider.context_window // CONTEXT_SHARE
    ctx = DecisionContext(goal=goal, url=page.tree.source_url)
    path = IntentionPath(goal=goal)
    scope_id = page.tree.root.node_id
    for _ in range(MAX_DESCENT):
        blocks = segment(page, scope_id)
        if not blocks:
            break  # indivisible scope; work with what is here
        candidates = [
            block_candidate(page, i, b, tested) for i, b in enumerate(blocks)
        ]
        ctx = DecisionContext(goal=goal, url=page.tree.source_url, path=path.labels)
        decision = provider.select_block(ctx, candidates)
        if not 0 <= decision.index < len(blocks):
            raise ProviderFailure(f"block index {decision.index} out of range")
        chosen = blocks[decision.index]
        path.steps.append(
            IntentionStep(
                block_id=chosen.block_id,
                node_id=chosen.node_id,
                label=chosen.label,
                intent=decision.intent,
                token_estimate=chosen.token_estimate,
            )
        )
        scope_id = chosen.node_id
        if chosen.token_estimate <= threshold:
            break
    path.terminal_node = scope_id

    elements = interactive_elements(page, scope_id)
    if not elements:
        raise NoInteractiveElements(f"nothing actionable under node {scope_id}")
    candidates = [
        element_candidate(page, i, node, tested) for i, node in enumerate(elements)
    ]
    ctx = DecisionContext(goal=goal, url=page.tree.source_url, path=path.labels)
    decisions = provider.select_elements(ctx, candidates)
    key: list[ElementCandidate] = []
    for d in decisions:
        if not 0 <= d.index < len(candidates):
            raise ProviderFailure(f"element index {d.index} out of range")
        key.append(candidates[d.index])
    return path, key


# -- action plans -----------------------------------------------------------------


@dataclass(frozen=True)
class ElementAction:
    node_id: int
    tag: str
    name: str
    operation: str  # check | fill | click | submit
    value: str = ""


@dataclass
class ActionPlan:
    """Self-contained description of one interaction with a page."""

    kind: str  # click | submit
    actions: list[ElementAction]
    description: str
    scope_node: int
    form_action: str = ""
    form_method: str = "get"
    target_url: str = ""

    def payload(self) -> list[tuple[str, str]]:
        """Ordered form fields this plan submits."""
        return [
            (a.name, a.value)
            for a in self.actions
            if a.operation in ("fill", "check", "submit") and a.name
        ]

    def element_names(self) -> list[str]:
        return [a.name for a in self.actions if a.name]


def generate_interactions(
    page: RefinedPage,
    key_elements: list[ElementCandidate],
    path: IntentionPath,
    provider: DecisionProvider,
    history: tuple[tuple[str, str], ...] = (),
) -> ActionPlan:
    """Build an executable plan around the chosen key elements."""
    if not key_elements:
        raise NoInteractiveElements("no key elements to plan around")
    ctx = DecisionContext(goal=path.goal, url=page.tree.source_url, path=path.labels)

    anchor = next((e for e in key_elements if e.tag != "a"), None)
    if anchor is None:
        link = key_elements[0]
        target = urljoin(page.tree.source_url, link.href)
        action = ElementAction(
            node_id=link.node_id, tag="a", name=link.name,
            operation="click", value=link.href,
        )
        return ActionPlan(
            kind="click",
            actions=[action],
            description=f"follow link '{link.text or link.href}'",
            scope_node=link.node_id,
            target_url=target,
        )

    anchor_node = page.tree.find(anchor.node_id)
    form = enclosing(page, anchor_node, ("form",))
    scope = form if form is not None else page.tree.find(anchor.group_id)
    controls = [
        element_candidate(page, i, node, frozenset())
        for i, node in enumerate(interactive_elements(page, scope.node_id))
    ]

    actions: list[ElementAction] = []
    fills = list(history)

    if form is not None:
        for node in form.iter():
            if node.tag == "input" and node.attr("type").lower() == "hidden" and node.attr("name"):
                actions.append(
                    ElementAction(
                        node_id=node.node_id, tag="input", name=node.attr("name"),
                        operation="fill", value=node.attr("value"),
                    )
                )
                fills.append((node.attr("name"), node.attr("value")))

    gates = [c for c in controls if c.type in ("checkbox", "radio")]
    checked: dict[int, bool] = {}
    for gate in gates:
        value = provider.generate_value(ctx, gate, tuple(fills))
        state = value if isinstance(value, bool) else str(value).lower() in (
            "yes", "true", "on", "1", "checked",
        )
        checked[gate.node_id] = state
        if state:
            node = page.tree.find(gate.node_id)
            submit_value = node.attr("value") or "on"
            actions.append(
                ElementAction(
                    node_id=gate.node_id, tag=gate.tag, name=gate.name,
                    operation="check", value=submit_value,
                )
            )
            fills.append((gate.name or gate.text, submit_value))

    # A disabling gate ("Send anonymously") suppresses the field it directly
    # precedes; an enabling gate ("Enable comments") governs its whole group.
    suppressed: set[int] = set()
    for gate in gates:
        if dependency_direction(gate.text) == "disabling" and checked[gate.node_id]:
            follower = min(
                (
                    c.node_id
                    for c in controls
                    if c.fillable and c.node_id > gate.node_id and _governs(page, gate, c)
                ),
                default=None,
            )
            if follower is not None:
                suppressed.add(follower)

    def active(candidate: ElementCandidate) -> bool:
        if candidate.node_id in suppressed:
            return False
        governed_by_enabler = False
        for gate in gates:
            if gate.node_id == candidate.node_id:
                continue
            if dependency_direction(gate.text) != "enabling":
                continue
            if not _governs(page, gate, candidate):
                continue
            governed_by_enabler = True
            if not checked[gate.node_id]:
                return False
        if candidate.disabled and not governed_by_enabler:
            return False
        return True

    # Submissions are holistic: every active fillable in the chosen scope is
    # filled, not only the provider-picked ones, so the form arrives valid.
    for candidate in sorted(controls, key=lambda c: c.node_id):
        if not candidate.fillable:
            continue
        if not active(candidate):
            continue
        value = provider.generate_value(ctx, candidate, tuple(fills))
        actions.append(
            ElementAction(
                node_id=candidate.node_id, tag=candidate.tag, name=candidate.name,
                operation="fill", value=str(value),
            )
        )
        fills.append((candidate.name or candidate.text, str(value)))

    submit = next((e for e in key_elements if e.submits), None)
    if submit is None:
        submit = next((c for c in controls if c.submits), None)
    if submit is not None:
        actions.append(
            ElementAction(
                node_id=submit.node_id, tag=submit.tag, name=submit.name,
                operation="submit", value=page.tree.find(submit.node_id).attr("value"),
            )
        )
    else:
        scope_ref = form if form is not None else scope
        actions.append(
            ElementAction(
                node_id=scope_ref.node_id, tag=scope_ref.tag, name="",
                operation="submit",
            )
        )

    base = page.tree.source_url
    form_action = urljoin(base, form.attr("action")) if form is not None else base
    form_method = (form.attr("method").lower() if form is not None else "") or "get"
    label = path.steps[-1].label if path.steps else "page"
    return ActionPlan(
        kind="submit",
        actions=actions,
        description=f"submit '{label}' form",
        scope_node=scope.node_id,
        form_action=form_action,
        form_method=form_method,
    )


def _governs(page: RefinedPage, gate: ElementCandidate, candidate: ElementCandidate) -> bool:
    """A gate rules everything inside its nearest fieldset (or form)."""
    group = gate.group_id
    node = page.tree.find(candidate.node_id)
    while node is not None:
        if node.node_id == group:
            return True
        node = page.tree.parent_of(node.node_id)
    return False
