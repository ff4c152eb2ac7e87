"""Exception hierarchy.

Every error raised by the library derives from :class:`MyographError` and
carries an ``exit_code`` used by the CLI:

    2  input error (bad files, bad metadata, bad configuration)
    3  analysis error (signal cannot be analysed as requested)
    4  internal invariant violation
"""


class MyographError(Exception):
    exit_code = 3

    def __init__(self, message: str, stage: str | None = None):
        super().__init__(message)
        self.stage = stage

    def __str__(self) -> str:
        msg = super().__str__()
        if self.stage:
            return f"[{self.stage}] {type(self).__name__}: {msg}"
        return msg


class InputError(MyographError):
    exit_code = 2


class AnalysisError(MyographError):
    exit_code = 3


class InvariantViolation(MyographError):
    exit_code = 4


# ingestion / configuration
class MalformedFile(InputError):
    pass


class NonFiniteSample(InputError):
    pass


class MetadataMismatch(InputError):
    pass


class UnsupportedRate(InputError):
    pass


class ConfigError(InputError):
    pass


class DuplicateTrialLevel(InputError):
    pass


class SpecInvalid(InputError):
    pass


class IoFailure(InputError):
    pass


# signal model
class RegionTooShort(AnalysisError):
    pass


# preprocess
class BandInvalid(AnalysisError):
    pass


class ColumnOutOfRange(AnalysisError):
    pass


class WrongMontageKind(AnalysisError):
    pass


class TooFewChannels(AnalysisError):
    pass


class NotEnoughCleanChannels(AnalysisError):
    pass


# features
class EmptySignal(AnalysisError):
    pass


class SignalTooShort(AnalysisError):
    pass


class ZeroPower(AnalysisError):
    pass


# conduction velocity
class WindowTooShort(AnalysisError):
    pass


class SearchDidNotConverge(AnalysisError):
    pass


# time course
class DurationTooShort(AnalysisError):
    pass


class TooFewPoints(AnalysisError):
    pass
