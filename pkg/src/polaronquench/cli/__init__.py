"""Command line runner; see ``main`` for verbs and exit codes."""

from .config import RunConfig, load_config  # noqa: F401
