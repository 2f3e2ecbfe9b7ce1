"""Exception hierarchy shared across the package."""

from __future__ import annotations


class GraphirError(Exception):
    """Base class for all errors raised by this package."""


class CorpusFormatError(GraphirError):
    """A corpus/QA file could not be parsed. Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationFailure(GraphirError):
    """A record violated a data invariant (duplicate id, bad reference, ...)."""


class UnknownNodeError(GraphirError):
    """A graph operation referenced a node that is not in the graph."""

    def __init__(self, node: str):
        super().__init__(f"unknown node: {node!r}")
        self.node = node


class EmbeddingError(GraphirError):
    """An embedding provider returned unusable output (wrong dim, missing id)."""


class TransportError(GraphirError):
    """An external stream-protocol process failed (timeout, EOF, bad reply).

    ``request_index`` identifies the request that was in flight, when known.
    """

    def __init__(self, message: str, request_index: int | None = None):
        if request_index is not None:
            message = f"request {request_index}: {message}"
        super().__init__(message)
        self.request_index = request_index


class RankingError(GraphirError):
    """Rankings passed to a fuser were inconsistent (query ids, weights)."""


class SarError(GraphirError):
    """Structure-aware reranking was invoked with invalid inputs."""


class RunConfigError(GraphirError):
    """An experiment configuration failed validation."""
