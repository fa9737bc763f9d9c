"""Exception hierarchy shared by all modules."""


class SemCompError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(SemCompError, ValueError):
    pass


class CenterOutOfBounds(SemCompError, ValueError):
    pass


class DimensionMismatch(SemCompError, ValueError):
    pass


class EmptyInput(SemCompError, ValueError):
    pass


class EmptyReference(EmptyInput):
    pass


class EmptyLocalData(EmptyInput):
    pass


class SingleClassData(SemCompError, ValueError):
    pass


class NonConvergence(SemCompError, RuntimeError):
    pass


class TrajectoryTooShort(SemCompError, ValueError):
    pass


class ModelFormatError(SemCompError, ValueError):
    pass
