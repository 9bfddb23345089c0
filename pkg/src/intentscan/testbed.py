"""Deliberately vulnerable fixture application for scanner exercises.

A tiny notes-and-comments site served by the standard library HTTP server,
single threaded so request handling is strictly serialized and responses are
deterministic for a given request sequence.  The site models the classic
crawler trap plus two seeded cross-site scripting flaws:

- The authenticated home page lists "Log out" before anything useful, so a
  crawler that clicks links in document order keeps destroying its own
  session (``/`` -> ``/login`` -> ``/`` -> ``/logout`` -> ...).
- Comments posted through ``/comment`` are rendered unescaped on ``/list``
  (stored XSS).  Everywhere else user input is escaped.
- With ``extra_vulns`` enabled, ``/about`` grows a search box whose query is
  echoed unescaped (reflected XSS).

Pages: ``/``, ``/login``, ``/logout``, ``/comments``, ``/list``, ``/about``,
``/setup``; ``POST /comment`` stores a comment and ``POST /__reset`` restores
the pristine state (a test hook, never linked from any page).  Every request
is appended to an access log as one JSON object per line with ``ts``,
``method``, ``path``, ``status`` and ``ua`` fields.
"""

from __future__ import annotations

import html
import json
import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.cookies import SimpleCookie
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path
from urllib.parse import parse_qsl, urlsplit

log = logging.getLogger(__name__)

USERNAME = "admin"
PASSWORD = "admin"


class PortInUse(OSError):
    """The requested port is already bound."""


@dataclass
class Response:
    status: int
    body: str = ""
    location: str = ""
    set_cookie: str = ""
    content_type: str = "text/html; charset=utf-8"


@dataclass
class TestbedApp:
    """Request dispatcher plus all mutable site state."""

    __test__ = False  # fixture, not a pytest case, despite the name

    extra_vulns: bool = False
    log_path: str | Path | None = None
    comments: list[str] = field(default_factory=list)
    comments_enabled: bool = False
    sessions: dict[str, str] = field(default_factory=dict)
    session_counter: int = 0
    access_entries: list[dict] = field(default_factory=list)

    def reset(self) -> None:
        self.comments = []
        self.comments_enabled = False
        self.sessions.clear()
        self.session_counter = 0
        self.access_entries.clear()
        if self.log_path:
            Path(self.log_path).write_text("")

    # -- logging ------------------------------------------------------------

    def log_access(self, method: str, path: str, status: int, ua: str) -> None:
        entry = {
            "ts": datetime.now(timezone.utc).isoformat(),
            "method": method,
            "path": path,
            "status": status,
            "ua": ua,
        }
        self.access_entries.append(entry)
        if self.log_path:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry) + "\n")

    # -- dispatch -------------------------------------------------------------

    def dispatch(self, method: str, target: str, form: dict[str, str], sid: str) -> Response:
        parts = urlsplit(target)
        path = parts.path
        query = dict(parse_qsl(parts.query, keep_blank_values=True))
        user = self.sessions.get(sid)

        if method == "GET":
            if path == "/":
                return self.page_home(user)
            if path == "/login":
                return self.page_login(error=False)
            if path == "/logout":
                self.sessions.pop(sid, None)
                return Response(302, location="/login")
            if path == "/comments":
                if user is None:
                    return Response(302, location="/login")
                if query.get("delete") == "all":
                    self.comments.clear()
                return self.page_comments()
            if path == "/list":
                if user is None:
                    return Response(302, location="/login")
                return self.page_list()
            if path == "/about":
                return self.page_about(query.get("q"))
            if path == "/setup":
                return self.page_setup()
        elif method == "POST":
            if path == "/login":
                return self.do_login(form)
            if path == "/comment":
                if user is None:
                    return Response(302, location="/login")
                return self.do_comment(form)
            if path == "/__reset":
                self.reset()
                return Response(204)
        return Response(404, _shell("Not found", "<h1>Not found</h1><p>No such page.</p>", "error-page"))

    # -- actions ---------------------------------------------------------------

    def do_login(self, form: dict[str, str]) -> Response:
        if form.get("username") == USERNAME and form.get("password") == PASSWORD:
            self.session_counter += 1
            sid = f"s{self.session_counter}"
            self.sessions[sid] = USERNAME
            return Response(302, location="/", set_cookie=f"sid={sid}; Path=/")
        return self.page_login(error=True)

    def do_comment(self, form: dict[str, str]) -> Response:
        self.comments_enabled = form.get("enable") == "on"
        if not self.comments_enabled:
            return Response(
                403,
                _shell(
                    "Comments disabled",
                    "<h1>Comments disabled</h1>"
                    "<p>Tick the enable box before sending a comment.</p>",
                    "error-page",
                ),
            )
        self.comments.append(form.get("comment", ""))
        return Response(302, location="/list")

    # -- pages -------------------------------------------------------------------

    def page_home(self, user: str | None) -> Response:
        if user is None:
            body = (
                '<header class="masthead"><h1>Notevault</h1>'
                "<p>A tiny notes and comments demo application.</p></header>"
                '<nav class="mainnav">'
                '<a href="/login">Log in</a> '
                '<a href="/about">About</a> '
                '<a href="/setup">Setup guide</a>'
                "</nav>"
                '<div class="welcome"><h2>Welcome</h2>'
                "<p>Log in to read and write comments. The about page explains "
                "what this demo is for.</p></div>"
            )
            return Response(200, _shell("Notevault", body, "home public"))
        body = (
            '<header class="masthead"><h1>Notevault</h1>'
            "<p>A tiny notes and comments demo application.</p></header>"
            '<nav class="mainnav">'
            '<a href="/logout">Log out</a> '
            '<a href="/comments">Comments</a>'
            "</nav>"
            '<div class="dashboard"><h2>Your dashboard</h2>'
            '<ul class="stats">'
            f"<li>{len(self.comments)} comments stored</li>"
            f"<li>Signed in as {html.escape(user)}</li>"
            "</ul>"
            "<p>Use the comments area to read and write notes.</p></div>"
        )
        return Response(200, _shell("Notevault", body, "home authed"))

    def page_login(self, error: bool) -> Response:
        message = '<p class="error">Wrong username or password.</p>' if error else ""
        body = (
            '<div class="login card"><h2>Log in</h2>'
            f"{message}"
            '<form action="/login" method="post">'
            '<label for="u">Username</label>'
            '<input id="u" name="username" type="text">'
            '<label for="p">Password</label>'
            '<input id="p" name="password" type="password">'
            '<button type="submit" name="go">Log in</button>'
            "</form>"
            '<p class="hint">Default development credentials are admin / admin.</p>'
            "</div>"
        )
        return Response(401 if error else 200, _shell("Log in", body, "login-page"))

    def page_comments(self) -> Response:
        body = (
            '<nav class="subnav">'
            '<a href="/comments?delete=all">Delete all comments</a> '
            '<a href="/logout">Log out</a>'
            "</nav>"
            '<div class="comment"><h2>Comment</h2>'
            '<div class="comment-list"><h3>Comment list</h3>'
            f"<p>{len(self.comments)} comments so far.</p>"
            '<a href="/list">View all comments</a></div>'
            '<div class="comment-sent"><h3>Comment sent</h3>'
            '<form action="/comment" method="post"><fieldset>'
            '<label><input type="checkbox" name="enable" value="on"> Enable comments</label>'
            '<div class="comment-content"><h4>Comment content</h4>'
            '<textarea name="comment" placeholder="Write a comment"></textarea></div>'
            '<button type="submit" name="send">Send</button>'
            '<button type="reset" name="clear">Clear</button>'
            "</fieldset></form></div>"
            '<div class="rules"><h3>Rules</h3>'
            "<p>Keep it civil and on topic. Comments stay until deleted.</p></div>"
            "</div>"
        )
        return Response(200, _shell("Comments", body, "comments-page"))

    def page_list(self) -> Response:
        # Seeded flaw: stored comments are rendered without escaping.
        items = "".join(f"<li>{comment}</li>" for comment in self.comments)
        body = (
            "<h2>Comment list page</h2>"
            f'<ul class="all-comments">{items}</ul>'
            '<a href="/comments">Back to comments</a>'
        )
        return Response(200, _shell("All comments", body, "list-page"))

    def page_about(self, q: str | None) -> Response:
        body = (
            "<h1>About Notevault</h1>"
            "<p>Notevault is a deliberately small demo used to exercise web "
            "scanners against a known layout.</p>"
            "<p>It ships a login area, a comment widget and this static page, "
            "nothing more.</p>"
        )
        if self.extra_vulns:
            body += (
                '<form action="/about" method="get" class="aboutsearch">'
                '<input type="search" name="q" placeholder="Search the docs">'
                '<button type="submit">Search</button>'
                "</form>"
            )
            if q is not None:
                # Seeded flaw: the query is echoed without escaping.
                body += (
                    '<div class="search-results">'
                    f"<p>Results for <span>{q}</span>:</p>"
                    "<p>No entries matched.</p></div>"
                )
        return Response(200, _shell("About", body, "about-page"))

    def page_setup(self) -> Response:
        body = (
            "<h1>Setup guide</h1>"
            '<ol class="steps">'
            "<li>Install the package into a virtual environment.</li>"
            "<li>Start this testbed on a free port.</li>"
            "<li>Point the scanner at the printed URL.</li>"
            "<li>Read the report it writes when done.</li>"
            "</ol>"
        )
        return Response(200, _shell("Setup", body, "setup-page"))


def _shell(title: str, body: str, body_class: str) -> str:
    return (
        "<html><head>"
        f"<title>{html.escape(title)}</title>"
        "<style>body{font-family:sans-serif;margin:2em}</style>"
        f'</head><body class="{body_class}">{body}</body></html>'
    )


class _Handler(BaseHTTPRequestHandler):
    server_version = "Notevault/0.1"

    def _app(self) -> TestbedApp:
        return self.server.app  # type: ignore[attr-defined]

    def _session_id(self) -> str:
        cookie = SimpleCookie(self.headers.get("Cookie", ""))
        return cookie["sid"].value if "sid" in cookie else ""

    def _serve(self, method: str) -> None:
        form: dict[str, str] = {}
        if method == "POST":
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length).decode("utf-8", errors="replace")
            form = dict(parse_qsl(raw, keep_blank_values=True))
        response = self._app().dispatch(method, self.path, form, self._session_id())
        payload = response.body.encode("utf-8")
        self.send_response(response.status)
        if response.location:
            self.send_header("Location", response.location)
        if response.set_cookie:
            self.send_header("Set-Cookie", response.set_cookie)
        if payload or response.status != 204:
            self.send_header("Content-Type", response.content_type)
            self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        if payload:
            self.wfile.write(payload)
        if urlsplit(self.path).path != "/__reset":
            self._app().log_access(
                method, self.path, response.status, self.headers.get("User-Agent", "")
            )

    def do_GET(self) -> None:  # noqa: N802 (framework name)
        self._serve("GET")

    def do_POST(self) -> None:  # noqa: N802
        self._serve("POST")

    def log_message(self, fmt: str, *args) -> None:
        log.debug("testbed: " + fmt, *args)


class TestbedServer:
    """Owns the HTTP server thread; single-threaded request handling."""

    __test__ = False  # fixture, not a pytest case, despite the name

    def __init__(
        self,
        port: int = 0,
        log_path: str | Path | None = None,
        extra_vulns: bool = False,
    ) -> None:
        self.app = TestbedApp(extra_vulns=extra_vulns, log_path=log_path)
        if log_path:
            Path(log_path).write_text("")
        try:
            self._server = HTTPServer(("127.0.0.1", port), _Handler)
        except OSError as exc:
            raise PortInUse(f"cannot bind port {port}: {exc}") from exc
        self._server.app = self.app  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}/"

    def start(self) -> "TestbedServer":
        # Short poll interval so close() does not stall on the accept loop.
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.02}, daemon=True
        )
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None


def serve(port: int = 0, log_path: str | Path | None = None, extra_vulns: bool = False) -> TestbedServer:
    """Create and start a testbed; the caller owns closing it."""
    return TestbedServer(port=port, log_path=log_path, extra_vulns=extra_vulns).start()
