"""Exception hierarchy.

``DataError`` subclasses describe bad inputs (exit code 2 on the command
line); ``ConfigError`` subclasses describe inconsistent settings or models.
"""


class EmoCascadeError(Exception):
    """Base class for every error raised by this package."""


class DataError(EmoCascadeError, ValueError):
    pass


class ConfigError(EmoCascadeError, ValueError):
    pass


# corpus
class MissingFile(DataError):
    pass


class MalformedWav(DataError):
    pass


class UnsupportedEncoding(DataError):
    pass


class EmptyAudio(DataError):
    pass


class MissingHeader(DataError):
    pass


class UnknownLabel(DataError):
    pass


class DuplicatePath(DataError):
    pass


class IoFailure(DataError):
    pass


# mfcc
class TooShort(DataError):
    pass


class NonFiniteFeature(DataError):
    pass


class DegenerateFilter(ConfigError):
    pass


# learners
class EmptyNode(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


# cascade / eval
class MissingClass(DataError):
    def __init__(self, label):
        super().__init__(f"training set has no samples of class {label!r}")
        self.label = label


class ConfigMismatch(ConfigError):
    pass


class TooFewSamples(DataError):
    pass


class TooFewSpeakers(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyClass(DataError):
    pass


class EmptyStage(DataError):
    pass


class UnknownFormatVersion(ConfigError):
    pass
