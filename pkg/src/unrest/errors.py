"""Exception hierarchy shared across the package."""


class UnrestError(Exception):
    """Base class for every error raised by this package."""


# expression language

class ExprError(UnrestError):
    pass


class ExprSyntaxError(ExprError):
    """Malformed expression. ``column`` is 1-based."""

    def __init__(self, message, column, expected=()):
        self.column = column
        self.expected = tuple(expected)
        detail = f"column {column}: {message}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


class UnknownFunction(ExprError):
    def __init__(self, name, column):
        self.name = name
        self.column = column
        super().__init__(f"column {column}: unknown function {name!r}")


class UnboundVariable(ExprError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"variable {name!r} is not allowed here")


class UnboundConstant(ExprError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"constant {name!r} has no value")


class EvalDomainError(ExprError):
    pass


# model / numerics

class ModelError(UnrestError):
    pass


class BracketError(ModelError):
    pass


class NoPositiveRoot(ModelError):
    pass


class SubcriticalTension(ModelError):
    """Raised when v_b <= v_star; ``c_1`` still carries the upper speed."""

    def __init__(self, message, c_1=None):
        self.c_1 = c_1
        super().__init__(message)


class PreconditionViolated(ModelError):
    pass


class AssumptionViolation(ModelError):
    def __init__(self, report):
        self.report = report
        failed = [c.name for c in report.checks if not c.passed]
        super().__init__("standing assumptions violated: " + ", ".join(failed))


# simulation

class SolverAbort(UnrestError):
    """Base class for run-aborting conditions (CLI exit code 3)."""


class BlowUp(SolverAbort):
    pass


class PositivityViolation(SolverAbort):
    pass


class CFLViolation(SolverAbort):
    pass


class FrontTooClose(SolverAbort):
    pass


class InvalidInitialData(UnrestError):
    pass


class Interrupted(UnrestError):
    """Observer-requested early stop; the partial record is attached."""

    def __init__(self, record):
        self.record = record
        super().__init__(f"run interrupted at t={record.series['t'][-1]:.6g}")


# analysis

class NotConverged(UnrestError):
    pass


class NoFront(UnrestError):
    pass


# scenario files

class ConfigError(UnrestError):
    pass


class ConfigSyntax(ConfigError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class ConfigSchema(ConfigError):
    pass


class FieldError(ConfigError):
    """An expression error tagged with the scenario field it came from."""

    def __init__(self, field, cause):
        self.field = field
        self.cause = cause
        super().__init__(f"{field}: {cause}")
