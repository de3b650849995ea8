"""Exception hierarchy shared by every stage of the pipeline."""


class WristTypeError(Exception):
    """Base class for all package errors."""


class MalformedLine(WristTypeError):
    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}" if reason else f"line {line_no}")


class NonMonotoneTimestamp(WristTypeError):
    def __init__(self, line_no):
        self.line_no = line_no
        super().__init__(f"line {line_no}: timestamp decreases")


class MisalignedTimestamps(WristTypeError):
    def __init__(self, line_no):
        self.line_no = line_no
        super().__init__(f"line {line_no}: accelerometer and gyroscope timestamps differ by more than one frame period")


class EmptyFile(WristTypeError):
    pass


class SampleSizeTooSmall(WristTypeError):
    pass


class WindowTooShort(WristTypeError):
    pass


class SeriesTooShort(WristTypeError):
    pass


class LengthMismatch(WristTypeError):
    pass


class EmptyTemplateSet(WristTypeError):
    pass


class DegenerateLabels(WristTypeError):
    pass


class BadLayout(WristTypeError):
    pass


class LabelMismatch(WristTypeError):
    pass


class DegenerateClasses(WristTypeError):
    pass


class ShapeMismatch(WristTypeError):
    pass


class InsufficientSamples(WristTypeError):
    pass


class IndexOutOfRange(WristTypeError):
    pass


class BadDuration(WristTypeError):
    pass


class AlreadyEnrolled(WristTypeError):
    pass


class InsufficientWindows(WristTypeError):
    pass


class UnknownUser(WristTypeError):
    pass


# The profile-update path names the same condition differently.
NotEnrolled = UnknownUser


class SessionSuspended(WristTypeError):
    pass


class BindFailure(WristTypeError):
    pass


class BadPolicy(WristTypeError):
    pass
