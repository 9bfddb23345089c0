"""Evaluation quantities computed from server-side access logs and scan results.

Three numbers describe a scan the way the evaluation tables do: how many
distinct pages the scanner reached (from the server's own log, so nothing the
client believes is taken on faith), what fraction of its requests succeeded,
and how its attention distributed over the application's functions.

Logs come in two shapes: the fixture's JSON-lines format and Common Log
Format (with or without the combined referrer/user-agent tail).  The format
is autodetected from the first byte; malformed lines after the first are
skipped and counted rather than fatal.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, TextIO
from urllib.parse import parse_qsl, urlsplit

from .crawler import Finding, ScanResult

CLF_RE = re.compile(
    r'^(\S+) (\S+) (\S+) \[([^\]]*)\] "(\S+) (\S+)[^"]*" (\d{3}) (\S+)'
    r'(?: "([^"]*)" "([^"]*)")?\s*$'
)

TIMESTAMP_RE = re.compile(
    r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(?:\.\d+)?(?:[+-]\d{2}:?\d{2}|Z)?"
)

# Longest matching prefix wins; paths outside the map fall into "other".
DEFAULT_LABEL_MAP = (
    ("/comments", "core"),
    ("/comment", "core"),
    ("/list", "core"),
    ("/login", "login"),
    ("/logout", "login"),
    ("/about", "about"),
    ("/setup", "setup"),
    ("/", "homepage"),
)


class UnknownFormat(ValueError):
    """The log is neither JSON lines nor Common Log Format."""

    def __init__(self, message: str, line: int = 1) -> None:
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class AccessLogEntry:
    timestamp: str
    method: str
    path: str  # path plus query, as requested
    status: int
    user_agent: str


@dataclass
class CoverageReport:
    pages_covered: int
    paths: tuple[str, ...]
    success_rate: float | None  # None when no tagged requests were seen
    attention: dict[str, float]  # label -> percentage of tagged requests
    request_count: int


def parse_access_log(stream: TextIO | Iterable[str]) -> tuple[list[AccessLogEntry], int]:
    """Entries in original order, plus a count of skipped malformed lines."""
    lines = [line.rstrip("\n") for line in stream]
    first = next((line for line in lines if line.strip()), None)
    if first is None:
        return [], 0
    jsonl = first.lstrip()[0] == "{"
    if not jsonl and CLF_RE.match(first) is None:
        raise UnknownFormat("log is neither JSON lines nor Common Log Format", line=1)

    entries: list[AccessLogEntry] = []
    skipped = 0
    for line in lines:
        if not line.strip():
            continue
        entry = _parse_jsonl(line) if jsonl else _parse_clf(line)
        if entry is None:
            skipped += 1
        else:
            entries.append(entry)
    return entries, skipped


def _parse_jsonl(line: str) -> AccessLogEntry | None:
    try:
        raw = json.loads(line)
        return AccessLogEntry(
            timestamp=str(raw["ts"]),
            method=str(raw["method"]),
            path=str(raw["path"]),
            status=int(raw["status"]),
            user_agent=str(raw.get("ua", "")),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        return None


def _parse_clf(line: str) -> AccessLogEntry | None:
    match = CLF_RE.match(line)
    if match is None:
        return None
    return AccessLogEntry(
        timestamp=match.group(4),
        method=match.group(5),
        path=match.group(6),
        status=int(match.group(7)),
        user_agent=match.group(10) or "",
    )


def load_access_log(path: str | Path) -> tuple[list[AccessLogEntry], int]:
    with open(path, encoding="utf-8", errors="replace") as fh:
        return parse_access_log(fh)


def normalize_path(path: str) -> str:
    """Drop the fragment and query values, keeping sorted unique query names."""
    parts = urlsplit(path)
    names = sorted({name for name, _ in parse_qsl(parts.query, keep_blank_values=True)})
    if not names and parts.query:
        # Bare "?delete" style queries carry names without values.
        names = sorted({p.split("=")[0] for p in parts.query.split("&") if p})
    base = parts.path or "/"
    return base + ("?" + "&".join(names) if names else "")


def classify_path(path: str, label_map: Iterable[tuple[str, str]] = DEFAULT_LABEL_MAP) -> str:
    bare = urlsplit(path).path or "/"
    best_label, best_len = "other", -1
    for prefix, label in label_map:
        if bare.startswith(prefix) and len(prefix) > best_len:
            best_label, best_len = label, len(prefix)
    return best_label


def load_label_map(path: str | Path) -> tuple[tuple[str, str], ...]:
    """Parse `prefix label` lines; '#' starts a comment."""
    pairs: list[tuple[str, str]] = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        prefix, _, label = line.partition(" ")
        if not label.strip():
            raise ValueError(f"label map line needs 'prefix label': {raw!r}")
        pairs.append((prefix, label.strip()))
    return tuple(pairs)


def coverage(
    entries: list[AccessLogEntry],
    scan_tag: str,
    normalizer: Callable[[str], str] = normalize_path,
    label_map: Iterable[tuple[str, str]] = DEFAULT_LABEL_MAP,
) -> CoverageReport:
    """Coverage, success rate and attention over the tagged subset of a log."""
    if not scan_tag:
        raise ValueError("scan_tag must be non-empty")
    tagged = [e for e in entries if scan_tag in e.user_agent]
    paths = tuple(sorted({normalizer(e.path) for e in tagged}))
    if not tagged:
        return CoverageReport(0, (), None, {}, 0)
    ok = sum(1 for e in tagged if 200 <= e.status <= 399)
    counts: dict[str, int] = {}
    for entry in tagged:
        label = classify_path(entry.path, label_map)
        counts[label] = counts.get(label, 0) + 1
    attention = {
        label: 100.0 * n / len(tagged) for label, n in sorted(counts.items())
    }
    return CoverageReport(
        pages_covered=len(paths),
        paths=paths,
        success_rate=ok / len(tagged),
        attention=attention,
        request_count=len(tagged),
    )


# -- report rendering ---------------------------------------------------------------


def _finding_dict(finding: Finding) -> dict:
    return {
        "kind": finding.kind,
        "sink": finding.sink_url,
        "parameter": finding.parameter,
        "verified": finding.verified,
        "evidence": {
            "offset": finding.evidence_offset,
            "context": finding.evidence,
        },
        "reproduction": list(finding.reproduction),
    }


def report_dict(result: ScanResult, cov: CoverageReport | None = None) -> dict:
    doc = {
        "scan": {
            "start_url": result.start_url,
            "seed": result.seed,
            "tag": result.tag,
            "stop_reason": result.stop_reason,
            "started": result.started,
            "finished": result.finished,
        },
        "pages": [
            {"state_id": s.state_id, "url": s.url, "cluster_size": s.cluster_size}
            for s in result.graph.states
        ],
        "edges": [
            {
                "edge_id": e.edge_id,
                "from_state": e.from_state,
                "to_state": e.to_state,
                "action": e.action,
                "method": e.method,
                "url": e.url,
                "fields": list(e.fields),
                "requests": list(e.request_ids),
                "path_labels": list(e.path_labels),
                "terminal_tokens": e.terminal_tokens,
                "failed": e.failed,
            }
            for e in result.graph.edges
        ],
        "requests": [
            {
                "seq": r.sequence,
                "method": r.method,
                "url": r.url,
                "status": r.status,
                "purpose": r.purpose,
            }
            for r in result.records
        ],
        "findings": [_finding_dict(f) for f in result.findings],
        "metrics": None,
    }
    if cov is not None:
        doc["metrics"] = {
            "pages_covered": cov.pages_covered,
            "paths": list(cov.paths),
            "success_rate": cov.success_rate,
            "attention": cov.attention,
            "request_count": cov.request_count,
        }
    return doc


def render_report(
    result: ScanResult, cov: CoverageReport | None = None, format: str = "json"
) -> str:
    """Emit the machine-readable JSON document or the human summary table."""
    if format == "json":
        return json.dumps(report_dict(result, cov), indent=2, sort_keys=True) + "\n"
    if format == "table":
        return render_table(result, cov)
    raise ValueError(f"unknown report format: {format!r}")


def render_table(result: ScanResult, cov: CoverageReport | None = None) -> str:
    lines = [
        f"scan of {result.start_url} (seed {result.seed}, {result.stop_reason})",
        f"  states: {len(result.graph.states)}  edges: {len(result.graph.edges)}"
        f"  requests: {len(result.records)}",
        f"  findings: {len(result.findings)}",
    ]
    for finding in result.findings:
        lines.append(f"    {finding.kind} XSS via '{finding.parameter}' at {finding.sink_url}")
    if cov is not None:
        lines.append(render_coverage_table(cov))
    return "\n".join(lines) + "\n"


def render_coverage_table(cov: CoverageReport) -> str:
    rate = "n/a" if cov.success_rate is None else f"{cov.success_rate:.3f}"
    lines = [
        f"  pages covered: {cov.pages_covered}",
        f"  success rate: {rate} over {cov.request_count} requests",
        "  attention:",
    ]
    for label, share in cov.attention.items():
        lines.append(f"    {label:<10} {share:5.1f}%")
    if not cov.attention:
        lines.append("    (no tagged requests)")
    return "\n".join(lines)


def mask_report_timestamps(text: str) -> str:
    """Replace ISO timestamps so seeded runs compare byte-for-byte."""
    return TIMESTAMP_RE.sub("MASKED", text)
