"""Exception types shared across the package.

Ingestion failures carry a short machine-readable code so callers (CLI,
service) can report them without parsing messages.
"""


class SceneReplicaError(Exception):
    """Base class for all package errors."""


class PreconditionError(SceneReplicaError, ValueError):
    """An operation was called with inputs violating its contract."""


class EmptyCloudError(PreconditionError):
    """A point cloud with zero points where at least one is required."""


class DegenerateHullError(SceneReplicaError, ValueError):
    """Footprint corners are collinear; no positive-area hull exists."""


class IngestError(SceneReplicaError, ValueError):
    """A scene bundle failed validation. `code` is machine-readable."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


# Ingest error codes
E_MISSING_FILE = "E_MISSING_FILE"
E_DUP_ID = "E_DUP_ID"
E_DIM = "E_DIM"
E_SCHEMA = "E_SCHEMA"
E_BAD_EMBEDDING = "E_BAD_EMBEDDING"
E_FEW_CANDIDATES = "E_FEW_CANDIDATES"
