"""
Exception hierarchy for the bipartite cross-validation toolkit.

Library code raises these; workflow nodes, MCP tools and the CLI catch them
and record the failure instead of propagating it.
"""


class BcvError(ValueError):
    """Base class for every error raised by the toolkit."""


class GraphError(BcvError):
    """Invalid bipartite graph: out-of-range index, duplicate edge, empty side."""


class SpecError(BcvError):
    """Invalid block-model specification."""


class EmptyCommunityError(BcvError):
    """Membership sampling kept producing an empty community."""


class EdgeListParseError(BcvError):
    """Malformed edge-list line."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class NumericsError(BcvError):
    """Bad input to a numeric kernel (rank out of range, non-finite values, K > m)."""


class SplitError(BcvError):
    """Invalid edge split or empty evaluation set."""


class ConfigError(BcvError):
    """Unknown or invalid configuration value."""


class DegenerateMatrixError(BcvError):
    """Scaled block matrix is identically zero."""
