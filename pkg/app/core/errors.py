# app/core/errors.py

"""
Exception hierarchy shared by every checker service.

Each error carries the process exit code the CLI reports for it and a short
human-readable detail. The HTTP layer turns them into 422 responses.
"""


class AmornaError(Exception):
    code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# --- Syntax ---


class ParseError(AmornaError):
    code = 2

    def __init__(self, detail: str, line: int | None = None, column: int | None = None):
        where = f"{line}:{column}: " if line is not None else ""
        super().__init__(f"{where}{detail}")
        self.line = line
        self.column = column


class CaptureRisk(AmornaError):
    """A substitution would capture a free variable of the substituted term."""


# --- Potentials ---


class WfError(AmornaError):
    code = 3

    def __init__(self, rule: str, subterm: str, detail: str = ""):
        super().__init__(f"{rule}: {subterm} is not well-formed{': ' + detail if detail else ''}")
        self.rule = rule
        self.subterm = subterm


class UnboundVariable(AmornaError):
    pass


class UnresolvedBinder(AmornaError):
    """A MinOver/MaxOver node reached evaluation."""


class EnumerationOverflow(AmornaError):
    pass


# --- Typing ---


class TypingError(AmornaError):
    code = 3

    def __init__(self, rule: str, subterm: str, detail: str):
        super().__init__(f"{rule} at `{subterm}`: {detail}")
        self.rule = rule
        self.subterm = subterm


class ConstraintUnknown(AmornaError):
    code = 4

    def __init__(self, query, reason: str, rule: str = ""):
        from app.services.internal.render import show_query

        prefix = f"{rule}: " if rule else ""
        super().__init__(f"{prefix}cannot prove {show_query(query)} ({reason})")
        self.query = query
        self.reason = reason
        self.rule = rule


class RuleViolation(AmornaError):
    code = 3

    def __init__(self, rule: str, detail: str):
        super().__init__(f"{rule}: {detail}")
        self.rule = rule
