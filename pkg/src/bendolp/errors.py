"""Exception hierarchy shared by every stage of the pipeline."""


class BendError(Exception):
    """Base class for all user-facing failures."""

    code = "Error"


class SceneError(BendError):
    """Raised when a scene file cannot be turned into a valid CellScene."""


class SceneSyntaxError(SceneError):
    code = "SyntaxError"

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class MissingField(SceneError):
    code = "MissingField"


class InvariantViolation(SceneError):
    code = "InvariantViolation"


class MalformedLabel(SceneError):
    code = "MalformedLabel"


class ZeroIndex(SceneError):
    code = "ZeroIndex"


class NonOrthonormal(SceneError):
    code = "NonOrthonormal"


class UnmappablePose(SceneError):
    code = "UnmappablePose"


class AmbiguousLadder(SceneError):
    code = "AmbiguousLadder"


class NoStation(SceneError):
    code = "NoStation"


class ProgramError(BendError):
    """Raised by the job-file parser. Carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ProgramSyntaxError(ProgramError):
    code = "SyntaxError"


class UndefinedLabel(ProgramError):
    code = "UndefinedLabel"


class UndefinedRegister(ProgramError):
    code = "UndefinedRegister"


class ExecutionError(BendError):
    """Raised while interpreting a program; ``trace`` holds the partial trace."""

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class StepBudgetExceeded(ExecutionError):
    code = "StepBudgetExceeded"


class InvalidSpeed(ExecutionError):
    code = "InvalidSpeed"


class KinematicsError(BendError):
    pass


class NoConvergence(KinematicsError):
    code = "NoConvergence"

    def __init__(self, message, q=None, residual=None):
        self.q = q
        self.residual = residual
        super().__init__(message)


class LimitViolation(KinematicsError):
    code = "LimitViolation"

    def __init__(self, message, q=None, diagnostics=()):
        self.q = q
        self.diagnostics = list(diagnostics)
        super().__init__(message)


class InternalError(BendError):
    """Code generation produced an inconsistent program. Always a bug."""

    code = "InternalError"
