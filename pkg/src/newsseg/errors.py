"""Exception hierarchy.

Everything deriving from :class:`ValidationError` maps to CLI exit code 1.
I/O problems are left as :class:`OSError` (exit code 2).
"""


class NewssegError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(NewssegError, ValueError):
    """Input is well-typed but violates a contract."""


class OverlapError(ValidationError):
    def __init__(self, first, second):
        self.first = first
        self.second = second
        super().__init__(f"overlapping spans: {first!r} and {second!r}")


class UnknownLabel(ValidationError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"unknown scene label: {label!r}")


class FpsMismatch(ValidationError):
    pass


class SchemaError(ValidationError):
    pass


class InsufficientVideos(ValidationError):
    pass


class EmptyFrame(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class SpanTooShort(ValidationError):
    pass


class SampleRateMismatch(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class DivergenceError(NewssegError, ArithmeticError):
    pass


class VersionMismatch(ValidationError):
    pass


class ConfigMismatch(ValidationError):
    pass


class CorruptFile(ValidationError):
    pass


class MissingMedia(ValidationError):
    def __init__(self, video_id):
        self.video_id = video_id
        super().__init__(f"no media/prediction for video {video_id!r}")


class ShotClassificationError(NewssegError):
    def __init__(self, shot_index, cause):
        self.shot_index = shot_index
        super().__init__(f"classification failed on shot {shot_index}: {cause}")
