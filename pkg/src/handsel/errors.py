"""Exception hierarchy.

Every error carries a stable ``code`` string so the command line can emit
machine-readable failure reports.
"""


class HandselError(Exception):
    code = "handsel_error"


# distribution fitting
class DivergenceError(HandselError, ValueError):
    code = "cmp_divergent"


class TruncationError(HandselError, ArithmeticError):
    code = "cmp_truncation"


class DegenerateSampleError(HandselError, ValueError):
    code = "degenerate_sample"


class InsufficientSamplesError(HandselError, ValueError):
    code = "insufficient_samples"


# strengths
class StrengthDomainError(HandselError, ValueError):
    code = "strength_domain"


class InsufficientHistoryError(HandselError, LookupError):
    code = "insufficient_history"


# ingestion
class MalformedRowError(HandselError, ValueError):
    code = "malformed_row"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvariantViolationError(HandselError, ValueError):
    code = "invariant_violation"

    def __init__(self, field, value, reason="", line=None):
        self.field = field
        self.value = value
        self.line = line
        msg = f"invalid {field}={value!r}"
        if reason:
            msg += f" ({reason})"
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)


class DuplicateIdError(HandselError, ValueError):
    code = "duplicate_id"


class EmptySplitError(HandselError, ValueError):
    code = "empty_split"


# features
class CoordinateRangeError(HandselError, ValueError):
    code = "coordinate_range"


class MissingScoreError(HandselError, ValueError):
    code = "missing_score"


class UnresolvedRosterError(HandselError, LookupError):
    code = "unresolved_roster"


# learners / explanations
class ConfigError(HandselError, ValueError):
    code = "config"


class DimensionMismatchError(HandselError, ValueError):
    code = "dimension_mismatch"


class ClassMissingError(HandselError, ValueError):
    code = "class_missing"


class MissingCoverError(HandselError, ValueError):
    code = "missing_cover"


class TooManyFeaturesError(HandselError, ValueError):
    code = "too_many_features"


class ModelFormatError(HandselError, ValueError):
    code = "model_format"


# metrics
class LengthMismatchError(HandselError, ValueError):
    code = "length_mismatch"


class EmptyInputError(HandselError, ValueError):
    code = "empty_input"


class ZeroActualError(HandselError, ValueError):
    code = "zero_actual"


class NormalizationError(HandselError, ValueError):
    code = "not_normalized"


# command line
class MissingInputError(HandselError, FileNotFoundError):
    code = "missing_input"


class UnknownMatchError(HandselError, LookupError):
    code = "unknown_match"
