"""Decision providers: the pluggable brains behind the block walk.

Two implementations ship:

- :class:`HeuristicProvider` is fully deterministic and offline.  It scores
  blocks by label match with the goal plus untested interactive elements,
  picks fillable fields and one submit, and fills values from a fixed table.
  Destructive-sounding choices (logout, delete, reset) are deferred until
  nothing else is left.
- :class:`LlmProvider` renders prompt templates and asks a completion
  endpoint, parsing ``CHOICE:``/``VALUE:`` style answers.  Malformed answers
  are retried; after that the provider silently degrades to a configurable
  fallback (the heuristic by default) and records the event, so a scan never
  dies because the model had a bad day.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import requests

from .intention import (
    BlockCandidate,
    BlockDecision,
    DecisionContext,
    ElementCandidate,
    ElementDecision,
    ProviderFailure,
    is_destructive,
)

log = logging.getLogger(__name__)

_WORD_RE = re.compile(r"[a-z0-9]+")


def _tokens(text: str) -> set[str]:
    """Lowercased word set with a crude plural fold for overlap scoring."""
    out = set()
    for word in _WORD_RE.findall(text.lower()):
        out.add(word)
        if len(word) > 3 and word.endswith("s"):
            out.add(word[:-1])
    return out


FILL_TABLE = (
    # (predicate key, value): first matching row wins.
    ("email", "scanner@example.test"),
    ("mail", "scanner@example.test"),
    ("password", "Sc4nner-Pass!"),
    ("url", "https://example.test/"),
    ("number", "1"),
    ("tel", "5551234567"),
    ("phone", "5551234567"),
    ("date", "2024-05-06"),
    ("search", "test query"),
    ("user", "tester"),
    ("login", "tester"),
    ("comment", "An automated note left during a security check."),
    ("message", "An automated note left during a security check."),
    ("content", "An automated note left during a security check."),
    ("note", "An automated note left during a security check."),
)

DEFAULT_TEXT_VALUE = "test input"
DEFAULT_TEXTAREA_VALUE = "An automated note left during a security check."


class HeuristicProvider:
    """Deterministic, offline decision making.

    ``context_window`` plays the same role as an LLM's limit: blocks larger
    than a twentieth of it force the walk to descend another level.
    """

    defer_destructive = True

    def __init__(self, context_window: int = 32768) -> None:
        self.context_window = context_window

    # -- block choice -------------------------------------------------------

    def select_block(
        self, ctx: DecisionContext, blocks: list[BlockCandidate]
    ) -> BlockDecision:
        goal_tokens = _tokens(ctx.goal)

        def score(block: BlockCandidate):
            exact = block.label.strip().lower() == ctx.goal.strip().lower()
            overlap = len(_tokens(block.label) & goal_tokens)
            destructive = block.untested_count > 0 and all(
                is_destructive(t) for t in block.element_texts
            )
            return (
                not exact,
                destructive if self.defer_destructive else False,
                -overlap,
                block.untested_count == 0,
                -block.untested_count,
                -block.interactive_count,
                block.index,
            )

        best = min(blocks, key=score)
        return BlockDecision(
            index=best.index,
            intent=f"look into '{best.label}' for: {ctx.goal}",
        )

    # -- element choice -----------------------------------------------------

    def select_elements(
        self, ctx: DecisionContext, elements: list[ElementCandidate]
    ) -> list[ElementDecision]:
        actionable = [
            e for e in elements if not e.tested and e.type not in ("reset", "button")
        ]
        if not actionable:
            return []
        fillables = [e for e in actionable if e.fillable]
        if fillables:
            chosen = [ElementDecision(e.index, "fill") for e in fillables]
            submit = next((e for e in elements if e.submits), None)
            if submit is not None:
                chosen.append(ElementDecision(submit.index, "submit"))
            return chosen
        goal_tokens = _tokens(ctx.goal)

        def score(e: ElementCandidate):
            return (
                is_destructive(e.text) if self.defer_destructive else False,
                -len(_tokens(e.text) & goal_tokens),
                e.index,
            )

        best = min(actionable, key=score)
        return [ElementDecision(best.index, "click" if best.tag == "a" else "submit")]

    # -- values ---------------------------------------------------------------

    def generate_value(
        self,
        ctx: DecisionContext,
        element: ElementCandidate,
        history: tuple[tuple[str, str], ...],
    ) -> str | bool:
        if element.type in ("checkbox", "radio"):
            return True
        if element.tag == "select":
            for option in element.options:
                if option:
                    return option
            return ""
        hints = " ".join((element.type, element.name, element.text)).lower()
        for key, value in FILL_TABLE:
            if key in hints:
                return value
        if element.tag == "textarea":
            return DEFAULT_TEXTAREA_VALUE
        return DEFAULT_TEXT_VALUE


# -- prompt templates ----------------------------------------------------------


_SLOT_RE = re.compile(r"\{\{(\w+)\}\}")

TEMPLATE_NAMES = ("select_block", "select_element", "generate_value")


def load_templates(directory: str | Path | None = None) -> dict[str, str]:
    """Template name -> text; *directory* overrides the packaged defaults."""
    templates: dict[str, str] = {}
    for name in TEMPLATE_NAMES:
        if directory is not None:
            templates[name] = (Path(directory) / f"{name}.txt").read_text(encoding="utf-8")
        else:
            source = resources.files("intentscan").joinpath(f"prompts/{name}.txt")
            templates[name] = source.read_text(encoding="utf-8")
    return templates


def render(template: str, slots: dict[str, str]) -> str:
    """Replace ``{{name}}`` placeholders; unknown names become empty strings."""
    return _SLOT_RE.sub(lambda m: slots.get(m.group(1), ""), template)


def _format_blocks(blocks: list[BlockCandidate]) -> str:
    lines = []
    for b in blocks:
        lines.append(
            f"[{b.index}] <{b.tag}> '{b.label}' "
            f"(~{b.token_estimate} tokens, {b.interactive_count} interactive, "
            f"{b.untested_count} untested) :: {b.preview}"
        )
    return "\n".join(lines)


def _format_elements(elements: list[ElementCandidate]) -> str:
    lines = []
    for e in elements:
        kind = e.type or e.tag
        extra = f" href={e.href}" if e.href else ""
        status = "tested" if e.tested else "untested"
        lines.append(f"[{e.index}] {kind} name={e.name!r} text={e.text!r}{extra} ({status})")
    return "\n".join(lines)


@dataclass
class FallbackEvent:
    operation: str
    reason: str


class LlmProvider:
    """Talks to a text-completion endpoint; degrades to a fallback provider.

    The transport posts ``{"model", "prompt", "max_tokens", "temperature"}``
    and accepts either ``{"text": ...}`` or an OpenAI-style
    ``{"choices": [{"text": ...}]}`` response body.  A custom *transport*
    callable (prompt -> completion) replaces HTTP entirely, which tests use.
    """

    defer_destructive = True

    def __init__(
        self,
        endpoint: str = "",
        model: str = "",
        api_key: str | None = None,
        context_window: int = 32768,
        timeout: float = 20.0,
        retries: int = 2,
        fallback: object | None = None,
        template_dir: str | Path | None = None,
        transport: Callable[[str], str] | None = None,
        session: requests.Session | None = None,
    ) -> None:
        if not endpoint and transport is None:
            raise ValueError("LlmProvider needs an endpoint or a transport")
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.context_window = context_window
        self.timeout = timeout
        self.retries = retries
        self.fallback = fallback if fallback is not None else HeuristicProvider(context_window)
        self.templates = load_templates(template_dir)
        self.transport = transport
        self.session = session or requests.Session()
        self.fallback_events: list[FallbackEvent] = []

    # -- plumbing -------------------------------------------------------------

    def _complete(self, prompt: str) -> str:
        if self.transport is not None:
            return self.transport(prompt)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        response = self.session.post(
            self.endpoint,
            data=json.dumps(
                {
                    "model": self.model,
                    "prompt": prompt,
                    "max_tokens": 256,
                    "temperature": 0,
                }
            ),
            headers=headers,
            timeout=self.timeout,
        )
        response.raise_for_status()
        body = response.json()
        if isinstance(body, dict):
            if isinstance(body.get("text"), str):
                return body["text"]
            choices = body.get("choices")
            if isinstance(choices, list) and choices:
                first = choices[0]
                if isinstance(first, dict) and isinstance(first.get("text"), str):
                    return first["text"]
        raise ProviderFailure("completion response had no text")

    def _ask(self, operation: str, prompt: str, parse: Callable[[str], object]) -> object:
        last = "no attempts made"
        for _ in range(self.retries + 1):
            try:
                return parse(self._complete(prompt))
            except (requests.RequestException, ProviderFailure, ValueError) as exc:
                last = str(exc)
                log.debug("provider %s attempt failed: %s", operation, last)
        self.fallback_events.append(FallbackEvent(operation=operation, reason=last))
        log.warning("falling back to %s for %s: %s", type(self.fallback).__name__, operation, last)
        return None

    # -- decisions --------------------------------------------------------------

    def select_block(
        self, ctx: DecisionContext, blocks: list[BlockCandidate]
    ) -> BlockDecision:
        prompt = render(
            self.templates["select_block"],
            {
                "goal": ctx.goal,
                "url": ctx.url,
                "path": " -> ".join(ctx.path) or "(top of page)",
                "blocks": _format_blocks(blocks),
            },
        )

        def parse(text: str) -> BlockDecision:
            match = re.search(r"CHOICE:\s*(\d+)", text)
            if not match:
                raise ProviderFailure("no CHOICE line")
            index = int(match.group(1))
            if not 0 <= index < len(blocks):
                raise ProviderFailure(f"choice {index} out of range")
            intent_match = re.search(r"INTENT:\s*(.+)", text)
            intent = intent_match.group(1).strip() if intent_match else ""
            return BlockDecision(index=index, intent=intent)

        decision = self._ask("select_block", prompt, parse)
        if decision is None:
            return self.fallback.select_block(ctx, blocks)
        return decision

    def select_elements(
        self, ctx: DecisionContext, elements: list[ElementCandidate]
    ) -> list[ElementDecision]:
        prompt = render(
            self.templates["select_element"],
            {
                "goal": ctx.goal,
                "url": ctx.url,
                "path": " -> ".join(ctx.path) or "(top of page)",
                "elements": _format_elements(elements),
            },
        )

        def parse(text: str) -> list[ElementDecision]:
            match = re.search(r"CHOICE:\s*([0-9,\s]+)", text)
            if not match:
                raise ProviderFailure("no CHOICE line")
            indexes = [int(p) for p in re.findall(r"\d+", match.group(1))]
            if not indexes:
                raise ProviderFailure("empty choice list")
            for index in indexes:
                if not 0 <= index < len(elements):
                    raise ProviderFailure(f"choice {index} out of range")
            return [ElementDecision(index=i) for i in indexes]

        decision = self._ask("select_elements", prompt, parse)
        if decision is None:
            return self.fallback.select_elements(ctx, elements)
        return decision

    def generate_value(
        self,
        ctx: DecisionContext,
        element: ElementCandidate,
        history: tuple[tuple[str, str], ...],
    ) -> str | bool:
        filled = "\n".join(f"{name} = {value}" for name, value in history) or "(none yet)"
        prompt = render(
            self.templates["generate_value"],
            {
                "goal": ctx.goal,
                "url": ctx.url,
                "path": " -> ".join(ctx.path) or "(top of page)",
                "element": _format_elements([element]),
                "history": filled,
            },
        )

        def parse(text: str) -> str | bool:
            match = re.search(r"VALUE:\s*(.*)", text)
            if not match:
                raise ProviderFailure("no VALUE line")
            value = match.group(1).strip()
            if element.type in ("checkbox", "radio"):
                return value.lower() in ("yes", "true", "on", "1", "checked")
            return value

        decision = self._ask("generate_value", prompt, parse)
        if decision is None:
            return self.fallback.generate_value(ctx, element, history)
        return decision
