"""Exception hierarchy.

``ValidationError`` subclasses signal bad input (CLI exit code 2); everything
else derived from ``EpicastError`` is a runtime failure (exit code 1).
"""


class EpicastError(Exception):
    pass


class ValidationError(EpicastError, ValueError):
    pass


class MissingColumn(ValidationError):
    def __init__(self, column, path=None):
        self.column = column
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(f"MissingColumn: required column {column!r} not found{where}")


class NonContiguousWeeks(ValidationError):
    def __init__(self, state, gap):
        self.state = state
        self.gap = gap
        super().__init__(f"NonContiguousWeeks: state {state} jumps from week {gap[0]} to week {gap[1]}")


class NegativeValue(ValidationError):
    def __init__(self, row, column=None):
        self.row = row
        self.column = column
        super().__init__(f"NegativeValue: row {row} has negative/invalid {column or 'value'}")


class RankNotPermutation(ValidationError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"RankNotPermutation: column {column!r} is not a permutation of 1..N")


class UnknownPolicyLevel(ValidationError):
    def __init__(self, policy, level):
        self.policy = policy
        self.level = level
        super().__init__(f"UnknownPolicyLevel: policy {policy} has no level {level}")


class ProportionSumViolation(ValidationError):
    def __init__(self, week, total=None):
        self.week = week
        self.total = total
        super().__init__(f"ProportionSumViolation: week {week} proportions sum to {total}")


class CoverageMismatch(ValidationError):
    def __init__(self, state, week, panel=None):
        self.state = state
        self.week = week
        self.panel = panel
        what = f" in {panel} panel" if panel else ""
        super().__init__(f"CoverageMismatch: no data for state {state}, week {week}{what}")


class InvalidConfig(ValidationError):
    def __init__(self, field, reason=""):
        self.field = field
        super().__init__(f"InvalidConfig: {field}" + (f" ({reason})" if reason else ""))


class InsufficientHistory(EpicastError, ValueError):
    pass


class FutureUnavailable(EpicastError, ValueError):
    pass


class RankOutOfRange(EpicastError, ValueError):
    pass


class WindowTooShort(EpicastError, ValueError):
    pass


class ShapeMismatch(EpicastError, ValueError):
    pass


class IdOutOfRange(EpicastError, IndexError):
    pass


class IndexOutOfRange(EpicastError, IndexError):
    pass


class DimensionMismatch(EpicastError, ValueError):
    pass


class EmptyCorpus(EpicastError, ValueError):
    pass


class NonFiniteLoss(EpicastError, FloatingPointError):
    def __init__(self, step, detail=""):
        self.step = step
        super().__init__(f"NonFiniteLoss at step {step}" + (f": {detail}" if detail else ""))


class EmptyStateSet(EpicastError, ValueError):
    pass


class SingularSystem(EpicastError, ArithmeticError):
    pass


class LengthMismatch(EpicastError, ValueError):
    pass


class Empty(EpicastError, ValueError):
    pass


class InvalidDistribution(EpicastError, ValueError):
    pass


class SplitLeakage(ValidationError):
    pass


class MissingBundle(EpicastError, FileNotFoundError):
    pass
