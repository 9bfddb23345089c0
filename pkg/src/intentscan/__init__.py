"""Intention-guided black-box web application scanner.

The package is organised around a small pipeline:

- :mod:`intentscan.dom` parses messy HTML into a recovered element tree and
  classifies every node into one of four roles (style, association, core
  functional, other).
- :mod:`intentscan.refine` compresses a parsed page: style noise is removed,
  adjacent text content is merged, and attributes outside a small allowlist
  are stripped so downstream consumers see short, interaction-centric pages.
- :mod:`intentscan.similarity` scores page pairs on URL shape, DOM shape and
  style vocabulary so the crawler can merge template twins into one state.
- :mod:`intentscan.segmentation` splits a refined page into labelled
  functional blocks that can be reasoned about independently.
- :mod:`intentscan.intention` walks those blocks with a pluggable decision
  provider until it has a concrete set of key elements and an action plan.
- :mod:`intentscan.crawler` drives HTTP sessions, maintains the navigation
  graph, plants taint tokens and turns surviving markup into XSS findings.
- :mod:`intentscan.metrics` grades a finished scan from the server's access
  log (coverage, success rate, attention share per functionality group).
- :mod:`intentscan.testbed` is a deliberately vulnerable fixture application
  used by the test-suite and usable as a standalone demo target.
- :mod:`intentscan.cli` wires everything into the ``intentscan`` command.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
