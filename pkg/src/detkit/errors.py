"""Exception hierarchy.

Every error carries a short ``code`` used by the command-line front end as a
machine-parsable prefix on standard error.
"""


class DetkitError(Exception):
    code = "detkit_error"


# geometry
class SpaceMismatchError(DetkitError, ValueError):
    code = "space_mismatch"


class InvalidBoxError(DetkitError, ValueError):
    code = "invalid_box"


class UndefinedIoUError(DetkitError, ValueError):
    code = "undefined_iou"


class BoundsError(DetkitError, ValueError):
    code = "out_of_bounds"


# annotation io
class VocParseError(DetkitError, ValueError):
    code = "voc_parse_error"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(DetkitError, ValueError):
    code = "schema_error"


class ManifestValueError(DetkitError, ValueError):
    code = "manifest_value_error"

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class LabelMapError(DetkitError, ValueError):
    code = "label_map_error"


class LabelLookupError(DetkitError, LookupError):
    code = "label_lookup_error"

    def __init__(self, key):
        super().__init__(f"unknown label map key: {key!r}")
        self.key = key


class ConfigError(DetkitError, ValueError):
    code = "config_error"


# records
class RecordFormatError(DetkitError, ValueError):
    code = "record_format_error"


class RecordVersionError(RecordFormatError):
    code = "record_version_error"


class TruncationError(RecordFormatError):
    code = "record_truncated"

    def __init__(self, message, offset=None, frame=None):
        parts = []
        if frame is not None:
            parts.append(f"frame {frame}")
        if offset is not None:
            parts.append(f"offset {offset}")
        if parts:
            message = f"{', '.join(parts)}: {message}"
        super().__init__(message)
        self.offset = offset
        self.frame = frame


class CorruptionError(DetkitError, ValueError):
    """A frame failed checksum verification.

    ``checksum`` is either ``"length"`` or ``"payload"``.
    """

    code = "record_corrupted"

    def __init__(self, frame, checksum):
        super().__init__(f"frame {frame}: {checksum} checksum mismatch")
        self.frame = frame
        self.checksum = checksum


class RecordWriteError(DetkitError, OSError):
    code = "record_write_error"

    def __init__(self, message, written):
        super().__init__(f"{message} (after {written} complete frames)")
        self.written = written


# augmentation
class AugmentError(DetkitError, ValueError):
    """An op in a pipeline failed; ``op_index`` locates it in the config."""

    code = "augment_error"

    def __init__(self, op_index, message):
        super().__init__(f"op {op_index}: {message}")
        self.op_index = op_index


# evaluation / fusion
class InputError(DetkitError, ValueError):
    code = "input_error"


class EmptyCurveError(DetkitError, ValueError):
    code = "empty_curve"


class LogFormatError(DetkitError, ValueError):
    code = "log_format_error"

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class AlignmentError(DetkitError, LookupError):
    code = "alignment_error"

    def __init__(self, sensor_id, label):
        super().__init__(f"no canonical label for sensor {sensor_id!r} label {label!r}")
        self.sensor_id = sensor_id
        self.label = label
