"""Custom exceptions for the cosmocrowd platform.

Provides a structured exception hierarchy for different error scenarios.
Every error carries a stable snake_case ``code`` used in HTTP error bodies
and CLI messages.
"""


class CrowdError(Exception):
    """Base exception class for all cosmocrowd errors."""

    code = "crowd_error"


# Record codec


class CodecError(CrowdError):
    """Raised when a protocol line does not match the record grammar.

    Attributes:
        field: Name of the first offending field.
        index: Zero-based position of that field in the ``|``-split line.
    """

    code = "codec_error"

    def __init__(self, field: str, index: int, message: str):
        self.field = field
        self.index = index
        super().__init__(f"{message} (field {index}: {field})")


class BadMagicError(CodecError):
    """Raised when a line lacks the ``SHWR1|`` prefix."""

    code = "bad_magic"

    def __init__(self, message: str = "line lacks SHWR1 prefix"):
        super().__init__("magic", 0, message)


class BadFieldCountError(CodecError):
    """Raised when a record has the wrong number of fields for its kind."""

    code = "bad_field_count"

    def __init__(self, kind: str, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(
            "kind", 1, f"{kind} record needs {expected} fields, got {actual}"
        )


class BadFieldValueError(CodecError):
    """Raised when a field value is malformed or out of range."""

    code = "bad_field_value"

    def __init__(self, field: str, index: int, value: str):
        self.value = value
        super().__init__(field, index, f"bad value {value!r}")


# Store


class UnknownDeviceError(CrowdError):
    """Raised when a data record references an unregistered device.

    Attributes:
        device_id: The device identifier that is not registered.
    """

    code = "unknown_device"

    def __init__(self, device_id: str):
        self.device_id = device_id
        super().__init__(f"Device {device_id} is not registered")


class StorageError(CrowdError):
    """Raised when the append-only log cannot be read or written."""

    code = "storage_failure"


class CorruptLineError(CrowdError):
    """Raised for an unreadable line found during replay.

    Attributes:
        file: Log file name.
        line_no: One-based line number inside the file.
    """

    code = "corrupt_line"

    def __init__(self, file: str, line_no: int, message: str):
        self.file = file
        self.line_no = line_no
        super().__init__(f"{file}:{line_no}: {message}")


# Flash detection


class DimensionMismatchError(CrowdError):
    """Raised when frames or masks disagree on width/height."""

    code = "dimension_mismatch"


class TooFewFramesError(CrowdError):
    """Raised when a hot-pixel mask is requested from too few frames."""

    code = "too_few_frames"


# Time synchronization


class EmptyInputError(CrowdError):
    """Raised when no sync exchanges are supplied."""

    code = "empty_input"


class NegativeRttError(CrowdError):
    """Raised when an exchange has a negative round-trip delay."""

    code = "negative_rtt"


# Rate statistics


class BadRangeError(CrowdError):
    """Raised when a time range or bin width is invalid."""

    code = "bad_range"


class BadWindowError(CrowdError):
    """Raised when a smoothing window is not an odd integer >= 3."""

    code = "bad_window"


class BaselineMissingError(CrowdError):
    """Raised when spikes are flagged before a baseline was fitted."""

    code = "baseline_missing"


class DegenerateInputError(CrowdError):
    """Raised when a fit has too few distinct points or non-positive rates."""

    code = "degenerate_input"


class BadFitError(CrowdError):
    """Raised when a fitted altitude model is not increasing."""

    code = "bad_fit"


# Activity


class ZeroVarianceError(CrowdError):
    """Raised when all samples of a window are equal."""

    code = "zero_variance"


class TooFewSamplesError(CrowdError):
    """Raised when a window holds fewer than the minimum number of samples."""

    code = "too_few_samples"


class MissingClassError(CrowdError):
    """Raised when training data lacks one of the activity classes."""

    code = "missing_class"


class DegenerateFeatureError(CrowdError):
    """Raised when a training feature has zero spread."""

    code = "degenerate_feature"


# Exposure


class UnorderedTrackError(CrowdError):
    """Raised when track timestamps are not strictly increasing."""

    code = "unordered_track"


class BadBBoxError(CrowdError):
    """Raised when a bounding box or cell size is invalid."""

    code = "bad_bbox"


# Simulation


class BadConfigError(CrowdError):
    """Raised when a simulation config violates its invariants."""

    code = "bad_config"


# Query surface


class QueryError(CrowdError):
    """Base for errors returned by the HTTP query surface.

    Attributes:
        status_code: HTTP status to answer with.
    """

    code = "query_error"
    status_code = 400


class UnknownEndpointError(QueryError):
    """Raised for requests to endpoints that do not exist."""

    code = "unknown_endpoint"
    status_code = 404


class BadParameterError(QueryError):
    """Raised when a query-string parameter is missing or invalid."""

    code = "bad_parameter"
    status_code = 400
