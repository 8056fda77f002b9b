"""Exception types. ``exit_code`` is what the CLI returns when one escapes."""


class DataExternalityError(Exception):
    exit_code = 4


class ConfigError(DataExternalityError, ValueError):
    exit_code = 2


class DataError(DataExternalityError, ValueError):
    exit_code = 3


class ComputeError(DataExternalityError, RuntimeError):
    exit_code = 4


class AllocationExceedsAvailable(DataError):
    def __init__(self, group, requested, available):
        self.group, self.requested, self.available = group, requested, available
        super().__init__(
            f"group {group!r}: requested {requested} instances but only {available} available"
        )


class UnknownGroupInAllocation(DataError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"allocation names group {group!r} which the generator spec does not define")


class SchemaMismatch(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row, column, detail=""):
        self.row, self.column = row, column
        msg = f"row {row}, column {column!r}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class EmptyVocabulary(DataError):
    pass


class ReferenceNotInGrid(DataError):
    pass


class AxisNotFound(DataError):
    pass


class DataLeakage(DataError):
    pass


class EmptyEvaluationGroup(DataError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"no evaluation instances tagged with group {group!r}")


class DegenerateDesign(ComputeError):
    pass


class NonConvergence(ComputeError):
    def __init__(self, max_iter, last_iterate=None, residual=None):
        self.max_iter = max_iter
        self.last_iterate = last_iterate
        self.residual = residual
        super().__init__(f"no convergence after {max_iter} iterations (last change {residual:.3g})")


class UnknownGroupIntercept(ComputeError):
    def __init__(self, group):
        self.group = group
        super().__init__(f"model has no intercept for group {group!r}")


class SingleClassUndefined(ComputeError):
    def __init__(self, group=None):
        self.group = group
        where = f" for group {group!r}" if group is not None else ""
        super().__init__(f"AUROC undefined{where}: labels contain a single class")
