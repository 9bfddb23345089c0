"""Command-line front end.

Subcommands:

* ``scan``      run a full scan against a target and emit a report
* ``coverage``  compute coverage metrics from a server-side access log
* ``refine``    compress one page and print its functional-block tree
* ``testbed``   serve the built-in deliberately vulnerable fixture app

Exit codes: 0 clean, 1 usage/config/fatal error, 2 scan found
vulnerabilities (so CI pipelines can gate on findings).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import requests

from . import __version__
from .config import ConfigError, ScanConfig, apply_overrides, load_config
from .crawler import (
    DEFAULT_BUDGET,
    DEFAULT_TAG,
    StartUnreachable,
    TransportError,
    run_scan,
)
from .dom import EmptyInput, parse_html, serialize
from .metrics import (
    DEFAULT_LABEL_MAP,
    UnknownFormat,
    coverage,
    load_access_log,
    load_label_map,
    render_coverage_table,
    render_report,
)
from .providers import HeuristicProvider, LlmProvider
from .refine import compress_page
from .segmentation import segment_tree
from .testbed import PortInUse, TestbedServer

log = logging.getLogger(__name__)


class UsageError(Exception):
    """Bad invocation; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; this tool reserves 2 for "findings
    # present", so usage problems become a catchable error -> exit 1.
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="intentscan",
        description="Intention-guided black-box web application scanner.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log progress on stderr"
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    scan = commands.add_parser("scan", help="scan a target and emit a report")
    scan.add_argument("--target", help="start URL of the application under test")
    scan.add_argument("--config", help="path to an INI config file")
    scan.add_argument(
        "--provider",
        choices=("heuristic", "llm"),
        help="decision provider (default: heuristic)",
    )
    scan.add_argument("--budget", type=int, help=f"request budget (default {DEFAULT_BUDGET})")
    scan.add_argument("--seed", type=int, help="random seed for taint tokens (default 0)")
    scan.add_argument("--tag", help=f"User-Agent scan tag (default {DEFAULT_TAG})")
    scan.add_argument("--report", help="write the report to this path instead of stdout")
    scan.add_argument(
        "--format",
        dest="report_format",
        choices=("json", "table"),
        help="report format (default json)",
    )
    scan.add_argument("--login-url", help="URL of the page holding the login form")
    scan.add_argument("--login-user", help="username to log in with")
    scan.add_argument("--login-pass", help="password to log in with")
    scan.add_argument(
        "--politeness",
        type=float,
        help="delay in seconds between requests to non-loopback hosts",
    )
    scan.add_argument("--llm-endpoint", help="completion endpoint URL (provider=llm)")
    scan.add_argument("--llm-model", help="model name (provider=llm)")
    scan.add_argument(
        "--llm-context-window", type=int, help="provider context window in tokens"
    )
    scan.set_defaults(handler=cmd_scan)

    cov = commands.add_parser(
        "coverage", help="coverage metrics from a server-side access log"
    )
    cov.add_argument("logfile", help="access log in JSONL or combined format")
    cov.add_argument(
        "--tag",
        default=DEFAULT_TAG,
        help=f"scan tag whose requests to measure (default {DEFAULT_TAG})",
    )
    cov.add_argument(
        "--labels", help="label-map file: one 'path-prefix label' pair per line"
    )
    cov.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    cov.set_defaults(handler=cmd_coverage)

    refine = commands.add_parser(
        "refine", help="compress one page and print its functional-block tree"
    )
    refine.add_argument("source", help="HTML file path or http(s) URL")
    refine.add_argument("--config", help="config file supplying [refinement] keys")
    refine.add_argument(
        "--json", action="store_true", help="emit JSON instead of HTML plus tree text"
    )
    refine.set_defaults(handler=cmd_refine)

    testbed = commands.add_parser("testbed", help="built-in vulnerable fixture app")
    testbed_commands = testbed.add_subparsers(dest="testbed_command", metavar="ACTION")
    testbed_commands.required = True
    serve = testbed_commands.add_parser("serve", help="serve the fixture app")
    serve.add_argument("--port", type=int, default=8080, help="listen port (default 8080)")
    serve.add_argument("--log", help="write a JSONL access log to this path")
    serve.add_argument(
        "--extra-vulns",
        action="store_true",
        help="also seed a reflected XSS in the /about search form",
    )
    serve.set_defaults(handler=cmd_testbed_serve)

    return parser


# -- scan ----------------------------------------------------------------


def _resolve_scan_config(args: argparse.Namespace) -> ScanConfig:
    config = load_config(args.config)
    config = apply_overrides(
        config,
        target=args.target,
        provider=args.provider,
        budget=args.budget,
        seed=args.seed,
        scan_tag=args.tag,
        report_path=args.report,
        report_format=args.report_format,
        login_url=args.login_url,
        login_user=args.login_user,
        login_pass=args.login_pass,
        politeness=args.politeness,
        llm_endpoint=args.llm_endpoint,
        llm_model=args.llm_model,
        llm_context_window=args.llm_context_window,
    )
    config.validate()
    if not config.target:
        raise UsageError(
            "scan: a target URL is required (--target or [scan] target in the config file)"
        )
    return config


def make_provider(config: ScanConfig):
    """The decision provider the config asks for; assumes validate() passed."""
    if config.provider == "llm":
        return LlmProvider(
            endpoint=config.llm.endpoint,
            model=config.llm.model,
            api_key=config.api_key(),
            context_window=config.llm.context_window,
        )
    return HeuristicProvider(context_window=config.llm.context_window)


def _summary_line(result) -> str:
    pages = len(result.graph.states)
    findings = len(result.findings)
    noun = "finding" if findings == 1 else "findings"
    return (
        f"{pages} pages, {len(result.records)} requests, {findings} {noun}"
        f" (stopped: {result.stop_reason})"
    )


def cmd_scan(args: argparse.Namespace) -> int:
    config = _resolve_scan_config(args)
    provider = make_provider(config)
    try:
        result = run_scan(
            config.target,
            provider,
            budget=config.budget,
            seed=config.seed,
            tag=config.scan_tag,
            credentials=config.credentials(),
            sim=config.similarity,
            politeness=config.politeness,
        )
    except (StartUnreachable, TransportError) as exc:
        print(f"scan failed: {exc}", file=sys.stderr)
        return 1
    rendered = render_report(result, format=config.report_format)
    if config.report_path:
        try:
            Path(config.report_path).write_text(rendered, encoding="utf-8")
        except OSError as exc:
            print(f"could not write report: {exc}", file=sys.stderr)
            return 1
        print(f"report written to {config.report_path}")
        print(_summary_line(result))
    else:
        sys.stdout.write(rendered)
    return 2 if result.findings else 0


# -- coverage --------------------------------------------------------------


def cmd_coverage(args: argparse.Namespace) -> int:
    try:
        entries, skipped = load_access_log(args.logfile)
    except FileNotFoundError:
        print(f"no such log file: {args.logfile}", file=sys.stderr)
        return 1
    except UnknownFormat as exc:
        print(f"unrecognized log format at line {exc.line}: {exc}", file=sys.stderr)
        return 1
    label_map = DEFAULT_LABEL_MAP
    if args.labels:
        try:
            label_map = load_label_map(args.labels)
        except (OSError, ValueError) as exc:
            print(f"bad label map: {exc}", file=sys.stderr)
            return 1
    report = coverage(entries, args.tag, label_map=label_map)
    if skipped:
        print(f"note: skipped {skipped} malformed log line(s)", file=sys.stderr)
    if args.json:
        print(json.dumps(dataclasses.asdict(report), indent=2, sort_keys=True))
    else:
        print(render_coverage_table(report))
    return 0


# -- refine ----------------------------------------------------------------


def _load_source(source: str) -> tuple[bytes, str]:
    """Raw HTML bytes and a source URL for link resolution."""
    if source.startswith(("http://", "https://")):
        response = requests.get(source, timeout=10)
        return response.content, source
    path = Path(source)
    return path.read_bytes(), path.resolve().as_uri()


def _block_lines(block, depth: int = 0) -> list[str]:
    line = (
        f"{'  ' * depth}{block.block_id}: {block.label}"
        f" <{block.tag}> ~{block.token_estimate} tokens"
    )
    lines = [line]
    for child in block.children:
        lines.extend(_block_lines(child, depth + 1))
    return lines


def cmd_refine(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    try:
        raw, source_url = _load_source(args.source)
    except OSError as exc:
        print(f"could not read {args.source}: {exc}", file=sys.stderr)
        return 1
    except requests.RequestException as exc:
        print(f"could not fetch {args.source}: {exc}", file=sys.stderr)
        return 1
    try:
        tree = parse_html(raw, source_url=source_url)
    except EmptyInput:
        print(f"no HTML content in {args.source}", file=sys.stderr)
        return 1
    page = compress_page(tree, config=config.refinement)
    root = segment_tree(page)
    if args.json:
        payload = {"html": serialize(page.tree), "blocks": dataclasses.asdict(root)}
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(serialize(page.tree))
        print()
        print("\n".join(_block_lines(root)))
    return 0


# -- testbed ----------------------------------------------------------------


def cmd_testbed_serve(args: argparse.Namespace) -> int:
    try:
        server = TestbedServer(
            port=args.port, log_path=args.log, extra_vulns=args.extra_vulns
        ).start()
    except PortInUse as exc:
        print(f"cannot listen on port {args.port}: {exc}", file=sys.stderr)
        return 1
    print(f"testbed listening on {server.url} (Ctrl-C to stop)")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


# -- entry point -------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
