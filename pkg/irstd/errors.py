"""Exception hierarchy. The class attribute ``exit_code`` is what the CLI returns."""


class IrstdError(Exception):
    exit_code = 2


# --- Usage errors (exit 1) ---

class UsageError(IrstdError):
    exit_code = 1


class ConfigError(UsageError):
    pass


class RankOutOfRange(UsageError, ValueError):
    pass


class DimensionMismatch(UsageError, ValueError):
    pass


# --- Data errors (exit 2) ---

class DataError(IrstdError):
    exit_code = 2


class TooFewFrames(DataError, ValueError):
    pass


class AlignmentMismatch(DataError, ValueError):
    pass


class BadMagic(DataError):
    pass


class TruncatedPayload(DataError):
    pass


class UnsupportedMaxval(DataError):
    pass


class InvalidSpec(DataError, ValueError):
    pass


class UnsortedInput(DataError, ValueError):
    pass


class LengthMismatch(DataError, ValueError):
    pass


class ManifestError(DataError):
    pass


class FrameSizeMismatch(DataError, ValueError):
    pass


# --- Numerical failures (exit 3) ---

class NumericalError(IrstdError):
    exit_code = 3


class NonFiniteError(NumericalError):
    pass


class ImaginaryResidueTooLarge(NumericalError):
    pass
