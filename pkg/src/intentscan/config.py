"""Scanner configuration: defaults, INI config files, and flag overrides.

A config file is optional.  When given it uses key=value sections::

    [scan]
    target = http://localhost:8080
    budget = 300
    seed = 7

    [llm]
    endpoint = http://localhost:9000/v1/completions
    model = local-model
    context_window = 32768

    [credentials]
    login_url = http://localhost:8080/login
    username = admin
    password = admin

    [similarity]
    url_weight = 0.3
    dom_weight = 0.5
    style_weight = 0.2

    [refinement]
    max_text = 200

Precedence is strict: a command-line flag beats the file, the file beats
the built-in default.  The LLM API key is never accepted from a file or a
flag; it is read from the ``SCANNER_LLM_API_KEY`` environment variable so
it cannot leak into shell history or committed configs.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .crawler import DEFAULT_BUDGET, DEFAULT_TAG, Credentials
from .refine import RefinementConfig
from .similarity import SimilarityConfig

ENV_API_KEY = "SCANNER_LLM_API_KEY"

PROVIDERS = ("heuristic", "llm")
REPORT_FORMATS = ("json", "table")


class ConfigError(ValueError):
    """Raised for invalid, unknown, or inconsistent configuration."""


@dataclass
class LlmConfig:
    """Connection details for the completion endpoint (key comes from env)."""

    endpoint: str = ""
    model: str = ""
    context_window: int = 32768


@dataclass
class ScanConfig:
    """Everything a scan run needs, resolved from defaults, file, and flags."""

    target: str = ""
    provider: str = "heuristic"
    llm: LlmConfig = field(default_factory=LlmConfig)
    budget: int = DEFAULT_BUDGET
    seed: int = 0
    scan_tag: str = DEFAULT_TAG
    login_url: str = ""
    login_user: str = ""
    login_pass: str = ""
    report_path: str = ""
    report_format: str = "json"
    politeness: float | None = None
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    refinement: RefinementConfig = field(default_factory=RefinementConfig)

    def credentials(self) -> Credentials | None:
        """A Credentials record when a username and password are configured."""
        if self.login_user and self.login_pass:
            return Credentials(self.login_user, self.login_pass, self.login_url)
        return None

    def api_key(self) -> str | None:
        return os.environ.get(ENV_API_KEY) or None

    def validate(self) -> None:
        """Raise ConfigError naming every problem found."""
        problems: list[str] = []
        if self.provider not in PROVIDERS:
            problems.append(
                f"provider must be one of {', '.join(PROVIDERS)}; got {self.provider!r}"
            )
        if self.provider == "llm":
            # The key is deliberately not validated here: a transport-level
            # endpoint may be unauthenticated, and the key lives in the env.
            if not self.llm.endpoint:
                problems.append("provider=llm requires llm.endpoint (--llm-endpoint)")
            if not self.llm.model:
                problems.append("provider=llm requires llm.model (--llm-model)")
            if self.llm.context_window <= 0:
                problems.append("llm.context_window must be a positive integer")
        if self.budget < 1:
            problems.append(f"budget must be at least 1; got {self.budget}")
        if self.report_format not in REPORT_FORMATS:
            problems.append(
                f"report format must be one of {', '.join(REPORT_FORMATS)};"
                f" got {self.report_format!r}"
            )
        if self.politeness is not None and self.politeness < 0:
            problems.append("politeness delay cannot be negative")
        if bool(self.login_user) != bool(self.login_pass):
            problems.append("credentials need both a username and a password")
        if problems:
            raise ConfigError("; ".join(problems))


# Section -> {file key: (ScanConfig attribute, converter)}.  Flat string
# attributes convert with str; numeric ones go through int/float so a typo
# like budget=fast fails with the offending key in the message.
_SCAN_KEYS = {
    "target": ("target", str),
    "provider": ("provider", str),
    "budget": ("budget", int),
    "seed": ("seed", int),
    "tag": ("scan_tag", str),
    "report": ("report_path", str),
    "report_format": ("report_format", str),
    "politeness": ("politeness", float),
}
_LLM_KEYS = {
    "endpoint": ("endpoint", str),
    "model": ("model", str),
    "context_window": ("context_window", int),
}
_CREDENTIAL_KEYS = {
    "login_url": ("login_url", str),
    "username": ("login_user", str),
    "password": ("login_pass", str),
}
_SIMILARITY_KEYS = {
    "url_weight": ("w_url", float),
    "dom_weight": ("w_dom", float),
    "style_weight": ("w_style", float),
    "url_threshold": ("url_threshold", float),
    "merge_threshold": ("merge_threshold", float),
}
_REFINEMENT_KEYS = {
    "max_text": ("max_text", int),
    # Comma-separated list in the file.
    "attribute_allowlist": (
        "attribute_allowlist",
        lambda raw: tuple(part.strip() for part in raw.split(",") if part.strip()),
    ),
}
_SECTIONS = {
    "scan": _SCAN_KEYS,
    "llm": _LLM_KEYS,
    "credentials": _CREDENTIAL_KEYS,
    "similarity": _SIMILARITY_KEYS,
    "refinement": _REFINEMENT_KEYS,
}


def _convert(section: str, key: str, raw: str, converter) -> object:
    try:
        return converter(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def _section_values(parser: configparser.ConfigParser, section: str) -> dict:
    """Converted values for one section; unknown keys are errors, not noise."""
    known = _SECTIONS[section]
    values: dict[str, object] = {}
    if not parser.has_section(section):
        return values
    for key, raw in parser.items(section):
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        attr, converter = known[key]
        values[attr] = _convert(section, key, raw, converter)
    return values


def load_config(path: str | Path | None = None) -> ScanConfig:
    """Defaults, overlaid with *path* when given.  Raises ConfigError."""
    config = ScanConfig()
    if path is None:
        return config
    location = Path(path)
    if not location.is_file():
        raise ConfigError(f"config file not found: {location}")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(location.read_text(encoding="utf-8"), source=str(location))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"could not parse {location}: {exc}") from exc
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}] in {location}")

    flat = _section_values(parser, "scan") | _section_values(parser, "credentials")
    config = replace(config, **flat)
    llm = _section_values(parser, "llm")
    if llm:
        config = replace(config, llm=replace(config.llm, **llm))
    sim = _section_values(parser, "similarity")
    if sim:
        try:
            config = replace(config, similarity=replace(config.similarity, **sim))
        except ValueError as exc:  # weight-sum check in SimilarityConfig
            raise ConfigError(f"[similarity] {exc}") from exc
    refinement = _section_values(parser, "refinement")
    if refinement:
        config = replace(config, refinement=replace(config.refinement, **refinement))
    return config


def apply_overrides(config: ScanConfig, **overrides) -> ScanConfig:
    """Overlay non-None flag values on *config* (flag wins over file).

    Recognizes every ScanConfig attribute plus ``llm_endpoint``,
    ``llm_model``, and ``llm_context_window`` for the nested block.
    """
    llm_updates = {}
    flat_updates = {}
    for name, value in overrides.items():
        if value is None:
            continue
        if name.startswith("llm_"):
            llm_updates[name[len("llm_"):]] = value
        else:
            flat_updates[name] = value
    if llm_updates:
        config = replace(config, llm=replace(config.llm, **llm_updates))
    if flat_updates:
        config = replace(config, **flat_updates)
    return config
