"""Exception hierarchy shared by all modules.

Three branches matter to the CLI exit-code mapping: ``ConfigError`` (exit 2),
``DataError`` (exit 3) and ``NumericError`` (exit 4).
"""


class MwpclError(Exception):
    pass


class ConfigError(MwpclError):
    pass


class DataError(MwpclError):
    pass


class NumericError(MwpclError):
    pass


# corpus
class ParseError(DataError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class InvariantViolation(DataError):
    def __init__(self, record_id, which):
        super().__init__(f"record {record_id!r}: {which}")
        self.record_id = record_id
        self.which = which


class UnmatchedNumeral(DataError):
    pass


class NoQuestion(DataError):
    pass


# equation
class EquationSyntaxError(DataError):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class UnknownToken(DataError):
    pass


class MissingSlot(DataError):
    pass


class DivisionByZero(NumericError):
    pass


class EvaluationError(NumericError):
    pass


# similarity
class EmptyInput(DataError):
    pass


class DimMismatch(DataError):
    pass


class ZeroVector(NumericError):
    pass


# augment
class SingleSentence(DataError):
    pass


class TargetAbsent(DataError):
    pass


class TargetRepeated(DataError):
    pass


class NonInvertible(DataError):
    pass


class AmbiguousSentence(DataError):
    pass


class InsufficientAugments(DataError):
    pass


# retrieval
class NoNegative(DataError):
    pass


class MissingEmbedding(DataError):
    def __init__(self, record_id):
        super().__init__(f"no embedding for record {record_id!r}")
        self.record_id = record_id


# trainer
class EmptyText(DataError):
    pass


class NonFiniteGradient(NumericError):
    pass
