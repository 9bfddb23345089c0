"""Log parsing, normalization, coverage arithmetic and report rendering."""

import io
import json

import pytest
import requests

from intentscan.crawler import Credentials, run_scan
from intentscan.metrics import (
    DEFAULT_LABEL_MAP,
    AccessLogEntry,
    UnknownFormat,
    classify_path,
    coverage,
    load_label_map,
    mask_report_timestamps,
    normalize_path,
    parse_access_log,
    render_report,
    report_dict,
)
from intentscan.providers import HeuristicProvider
from intentscan.testbed import TestbedServer

CLF_LINE = '127.0.0.1 - - [10/Oct/2024:13:55:36 -0700] "GET /about HTTP/1.0" 200 2326'
COMBINED_LINE = (
    '127.0.0.1 - - [10/Oct/2024:13:55:36 -0700] "POST /comment HTTP/1.1" 302 0 '
    '"http://t/comments" "python-requests scanner/1"'
)
JSONL_LINE = '{"ts": "2024-05-06T01:02:03", "method": "GET", "path": "/list", "status": 200, "ua": "x scanner/1"}'


def entry(path, status=200, ua="probe tag/1", method="GET"):
    return AccessLogEntry("t", method, path, status, ua)


class TestParsing:
    def test_clf_line(self):
        entries, skipped = parse_access_log(io.StringIO(CLF_LINE + "\n"))
        assert skipped == 0
        assert entries[0].method == "GET"
        assert entries[0].path == "/about"
        assert entries[0].status == 200
        assert entries[0].user_agent == ""

    def test_combined_line_has_user_agent(self):
        entries, _ = parse_access_log(io.StringIO(COMBINED_LINE + "\n"))
        assert entries[0].user_agent == "python-requests scanner/1"
        assert entries[0].method == "POST"

    def test_jsonl_line(self):
        entries, _ = parse_access_log(io.StringIO(JSONL_LINE + "\n"))
        assert entries[0].path == "/list"
        assert entries[0].user_agent == "x scanner/1"

    def test_malformed_lines_skipped_with_count(self):
        lines = [JSONL_LINE] * 9 + ['{"broken": true}']
        entries, skipped = parse_access_log(io.StringIO("\n".join(lines)))
        assert len(entries) == 9
        assert skipped == 1

    def test_garbage_raises_unknown_format(self):
        with pytest.raises(UnknownFormat) as err:
            parse_access_log(io.StringIO("\x00\x01binary junk\n"))
        assert err.value.line == 1

    def test_empty_log_is_empty(self):
        assert parse_access_log(io.StringIO("")) == ([], 0)

    def test_order_preserved(self):
        lines = [
            '{"ts": "1", "method": "GET", "path": "/a", "status": 200, "ua": ""}',
            '{"ts": "2", "method": "GET", "path": "/b", "status": 200, "ua": ""}',
        ]
        entries, _ = parse_access_log(io.StringIO("\n".join(lines)))
        assert [e.path for e in entries] == ["/a", "/b"]


class TestNormalization:
    def test_query_values_dropped_names_sorted(self):
        assert normalize_path("/p?b=2&a=1") == "/p?a&b"

    def test_bare_path_unchanged(self):
        assert normalize_path("/comments") == "/comments"

    def test_fragment_ignored(self):
        assert normalize_path("/p#section") == "/p"

    def test_duplicate_names_collapse(self):
        assert normalize_path("/p?a=1&a=2") == "/p?a"

    def test_idempotent(self):
        for raw in ("/p?b=2&a=1", "/", "/x?y", "/comments?delete=all"):
            once = normalize_path(raw)
            assert normalize_path(once) == once


class TestClassification:
    def test_longest_prefix_wins(self):
        assert classify_path("/comments?delete=all") == "core"
        assert classify_path("/comment") == "core"
        assert classify_path("/login") == "login"
        assert classify_path("/") == "homepage"

    def test_unknown_prefix_is_other(self):
        assert classify_path("/surprise", label_map=(("/a", "x"),)) == "other"

    def test_label_map_file(self, tmp_path):
        mapfile = tmp_path / "labels.txt"
        mapfile.write_text("# demo\n/shop cart\n/ home\n")
        label_map = load_label_map(mapfile)
        assert classify_path("/shop/item", label_map) == "cart"
        assert classify_path("/misc", label_map) == "home"

    def test_label_map_rejects_missing_label(self, tmp_path):
        mapfile = tmp_path / "labels.txt"
        mapfile.write_text("/justaprefix\n")
        with pytest.raises(ValueError):
            load_label_map(mapfile)


class TestCoverage:
    def test_success_rate_formula(self):
        entries = [entry("/a") for _ in range(95)] + [entry("/a", status=500) for _ in range(5)]
        report = coverage(entries, "tag/1")
        assert report.success_rate == pytest.approx(0.95)

    def test_untagged_entries_ignored(self):
        entries = [entry("/a"), entry("/b", ua="someone else")]
        report = coverage(entries, "tag/1")
        assert report.pages_covered == 1
        assert report.request_count == 1

    def test_pages_counted_by_normalized_path(self):
        entries = [entry("/p?a=1"), entry("/p?a=2"), entry("/q")]
        report = coverage(entries, "tag/1")
        assert report.pages_covered == 2
        assert report.paths == ("/p?a", "/q")

    def test_attention_sums_to_hundred(self):
        entries = [entry("/login")] * 2 + [entry("/comment", method="POST")] * 18
        report = coverage(entries, "tag/1")
        assert report.attention["login"] == pytest.approx(10.0)
        assert report.attention["core"] == pytest.approx(90.0)
        assert sum(report.attention.values()) == pytest.approx(100.0, abs=0.1)

    def test_empty_log_reports_none_rate(self):
        report = coverage([], "tag/1")
        assert report.success_rate is None
        assert report.attention == {}

    def test_order_insensitive(self):
        entries = [entry("/a"), entry("/b", status=500), entry("/c")]
        fwd = coverage(entries, "tag/1")
        rev = coverage(list(reversed(entries)), "tag/1")
        assert fwd.pages_covered == rev.pages_covered
        assert fwd.success_rate == rev.success_rate
        assert fwd.attention == rev.attention

    def test_empty_tag_rejected(self):
        with pytest.raises(ValueError):
            coverage([], "")


@pytest.fixture(scope="module")
def result():
    srv = TestbedServer(port=0).start()
    try:
        yield run_scan(
            srv.url,
            HeuristicProvider(),
            budget=300,
            seed=7,
            credentials=Credentials("admin", "admin"),
        )
    finally:
        srv.close()


class TestReportRendering:
    def test_json_round_trips(self, result):
        text = render_report(result, None, format="json")
        assert json.loads(text) == report_dict(result, None)

    def test_schema_keys_present(self, result):
        doc = report_dict(result, None)
        assert set(doc) == {"scan", "pages", "edges", "requests", "findings", "metrics"}
        assert {"start_url", "seed", "tag"} <= set(doc["scan"])
        assert all({"state_id", "url", "cluster_size"} <= set(p) for p in doc["pages"])
        assert all(
            {"seq", "method", "url", "status", "purpose"} <= set(r)
            for r in doc["requests"]
        )
        assert all(
            {"kind", "sink", "evidence", "reproduction"} <= set(f)
            for f in doc["findings"]
        )

    def test_table_mentions_findings(self, result):
        text = render_report(result, None, format="table")
        assert "stored XSS via 'comment'" in text

    def test_mask_removes_timestamps(self, result):
        masked = mask_report_timestamps(render_report(result, None, format="json"))
        doc = json.loads(masked)
        assert doc["scan"]["started"] == "MASKED"
        assert doc["scan"]["finished"] == "MASKED"

    def test_coverage_table_formats_percentages(self):
        entries = [entry("/login")] + [entry("/comment")] * 3
        report = coverage(entries, "tag/1")
        from intentscan.metrics import render_coverage_table

        text = render_coverage_table(report)
        assert "75.0%" in text
        assert "25.0%" in text

    def test_golden_scan_metrics(self, result):
        entries = [
            AccessLogEntry("t", r.method, r.url.split("127.0.0.1")[-1].split("/", 1)[-1], r.status, r.user_agent)
            for r in result.records
        ]
        entries = [
            AccessLogEntry(e.timestamp, e.method, "/" + e.path, e.status, e.user_agent)
            for e in entries
        ]
        report = coverage(entries, result.tag)
        assert report.success_rate == 1.0
        assert report.attention["core"] >= 85.0
