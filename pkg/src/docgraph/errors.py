"""Exception hierarchy shared across the package.

Every error a caller is expected to handle derives from :class:`DocGraphError`,
so the CLI can catch one type and exit with status 1.
"""


class DocGraphError(Exception):
    """Base class for all docgraph errors."""


class ShapeError(DocGraphError):
    """Tensor shapes do not conform to an operation's contract."""


class NumericError(DocGraphError):
    """Domain violation or non-finite value in numeric computation."""


class CorpusError(DocGraphError):
    """Malformed corpus file, unknown label, or invalid split request."""


class GraphError(DocGraphError):
    """Invalid adjacency / edge-weight data for a document graph."""


class ModelError(DocGraphError):
    """Model configuration or parameter-set inconsistency."""


class TrainingError(DocGraphError):
    """Invalid training request (empty sets, missing class, zero epochs)."""


class CheckpointError(DocGraphError):
    """Unreadable, truncated, or version-incompatible checkpoint file."""


class EvaluationError(DocGraphError):
    """Evaluation request that cannot be satisfied (empty data, class mismatch)."""
