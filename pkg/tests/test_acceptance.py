"""Acceptance gate: one test, and one printed verdict line, per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict lines;
each test asserts its criterion at the stated tolerance, so the pytest
result column doubles as the pass/fail record.
"""

import time
from random import Random

import pytest
import requests

from conftest import core_multiset, corpus_paths
from oracles import lcs_oracle, random_shape, random_string, ted_oracle

from intentscan.crawler import (
    DEFAULT_TAG,
    Credentials,
    replay_finding,
    run_baseline_scan,
    run_scan,
)
from intentscan.dom import parse_html, tree_equal
from intentscan.intention import identify_key_elements
from intentscan.metrics import (
    coverage,
    load_access_log,
    mask_report_timestamps,
    render_report,
)
from intentscan.providers import HeuristicProvider
from intentscan.refine import compress_page
from intentscan.similarity import lcs_length, tree_edit_distance
from intentscan.testbed import TestbedApp, TestbedServer

CREDS = Credentials("admin", "admin")
# The fixture app serves exactly these pages.
FIXTURE_PAGES = ("/", "/login", "/logout", "/about", "/setup", "/comments", "/list")
WINDOW = 32768
THRESHOLD = WINDOW // 20  # 1638


def verdict(number: int, name: str, ok: bool, detail: str = "") -> None:
    suffix = f" ({detail})" if detail else ""
    print(f"criterion {number} [{name}]: {'PASS' if ok else 'FAIL'}{suffix}")
    assert ok, f"criterion {number} [{name}] failed: {detail}"


@pytest.fixture(scope="module")
def server(tmp_path_factory):
    log = tmp_path_factory.mktemp("acceptance") / "access.jsonl"
    srv = TestbedServer(port=0, log_path=log).start()
    srv.access_log = log
    yield srv
    srv.close()


@pytest.fixture(scope="module")
def extra_server():
    srv = TestbedServer(port=0, extra_vulns=True).start()
    yield srv
    srv.close()


def golden_scan(server):
    requests.post(server.url + "__reset")
    return run_scan(
        server.url, HeuristicProvider(), budget=300, seed=7, credentials=CREDS
    )


@pytest.fixture(scope="module")
def golden(server):
    """One golden run plus the coverage computed from the log it left."""
    result = golden_scan(server)
    entries, skipped = load_access_log(server.access_log)
    assert skipped == 0
    return result, coverage(entries, DEFAULT_TAG)


def visited_pages(paths) -> set[str]:
    return {p for p in FIXTURE_PAGES if any(path.split("?")[0] == p for path in paths)}


def test_criterion_1_logout_trap_avoidance(server):
    started = time.monotonic()
    requests.post(server.url + "__reset")
    baseline = run_baseline_scan(server.url, credentials=CREDS, budget=60)
    naive_pages = visited_pages(baseline.visited_paths)

    intention = golden_scan(server)
    guided_paths = [r.url.split(server.url.rstrip("/"), 1)[-1] for r in intention.records]
    guided_pages = visited_pages(guided_paths)
    elapsed = time.monotonic() - started

    trapped = "/logout" in naive_pages and "/list" not in naive_pages
    detail = (
        f"naive {len(naive_pages)}/7 pages, guided {len(guided_pages)}/7,"
        f" {elapsed:.1f}s"
    )
    verdict(
        1,
        "logout-trap avoidance",
        trapped
        and len(naive_pages) <= 3
        and len(guided_pages) >= 6
        and "/list" in guided_pages
        and elapsed < 10,
        detail,
    )


def test_criterion_2_vulnerability_detection(server, extra_server):
    started = time.monotonic()
    result = golden_scan(server)
    one_stored = [f.kind for f in result.findings] == ["stored"]
    requests.post(server.url + "__reset")
    replays = all(replay_finding(f) for f in result.findings)

    requests.post(extra_server.url + "__reset")
    extra = run_scan(
        extra_server.url, HeuristicProvider(), budget=300, seed=7, credentials=CREDS
    )
    labels = sorted((f.kind, f.parameter) for f in extra.findings)
    both_labeled = labels == [("reflected", "q"), ("stored", "comment")]
    requests.post(extra_server.url + "__reset")
    extra_replays = all(replay_finding(f) for f in extra.findings)
    elapsed = time.monotonic() - started

    detail = f"golden {labels if not one_stored else '1 stored'}, {elapsed:.1f}s"
    verdict(
        2,
        "vulnerability detection",
        one_stored and replays and both_labeled and extra_replays and elapsed < 30,
        detail,
    )


def test_criterion_3_request_accuracy(golden):
    _, cov = golden
    detail = f"success rate {cov.success_rate:.3f} over {cov.request_count} requests"
    verdict(
        3,
        "request accuracy",
        cov.success_rate is not None and cov.success_rate >= 0.95,
        detail,
    )


def test_criterion_4_core_attention(golden):
    _, cov = golden
    share = cov.attention.get("core", 0.0)
    verdict(4, "core-functionality attention", share >= 85.0, f"core {share:.1f}%")


def test_criterion_5_similarity_oracles():
    started = time.monotonic()
    rng = Random(20260815)
    for _ in range(500):
        a, b = random_shape(rng), random_shape(rng)
        assert tree_edit_distance(a, b) == ted_oracle(a, b), (a, b)
    for _ in range(500):
        a, b = random_string(rng), random_string(rng)
        assert lcs_length(a, b) == lcs_oracle(a, b), (a, b)
    elapsed = time.monotonic() - started
    verdict(5, "similarity oracles", elapsed < 20, f"1000 pairs in {elapsed:.1f}s")


def test_criterion_6_refinement_properties():
    paths = corpus_paths()
    assert len(paths) >= 20
    for path in paths:
        tree = parse_html(path.read_text(), str(path))
        once = compress_page(tree)
        twice = compress_page(once.tree)
        assert tree_equal(once.tree, twice.tree), path.name
        assert once.tree.node_count <= tree.node_count, path.name
        assert core_multiset(once.tree) == core_multiset(tree), path.name
    verdict(6, "refinement properties", True, f"{len(paths)} pages, 3 properties")


def _comments_page():
    """The authenticated /comments fixture page, parsed and compressed."""
    app = TestbedApp()
    app.dispatch("POST", "/login", {"username": "admin", "password": "admin"}, "")
    sid = next(iter(app.sessions))
    response = app.dispatch("GET", "/comments", {}, sid)
    return compress_page(parse_html(response.body, "http://fixture/comments"))


def test_criterion_7_threshold_conformance(golden):
    result, _ = golden
    edge_tokens = [e.terminal_tokens for e in result.graph.edges]
    within = all(tokens <= THRESHOLD for tokens in edge_tokens)

    page = _comments_page()
    path, elements = identify_key_elements(page, HeuristicProvider(WINDOW), "comment")
    direct_within = path.steps[-1].token_estimate <= THRESHOLD and bool(elements)

    narrow_path, _ = identify_key_elements(page, HeuristicProvider(400), "comment")
    forced_depth = len(narrow_path.steps)

    detail = (
        f"max terminal block {max(edge_tokens)} tokens (limit {THRESHOLD}),"
        f" window 400 depth {forced_depth}"
    )
    verdict(
        7,
        "descent threshold conformance",
        within and direct_within and forced_depth >= 2,
        detail,
    )


def test_criterion_8_determinism(server):
    first = golden_scan(server)
    second = golden_scan(server)
    masked = [
        mask_report_timestamps(render_report(r)).encode() for r in (first, second)
    ]
    verdict(
        8,
        "seeded determinism",
        masked[0] == masked[1],
        f"{len(masked[0])} byte reports",
    )
