"""Exception hierarchy shared by every vulguard module."""

from __future__ import annotations


class VulGuardError(Exception):
    """Base class for all errors raised by vulguard."""


class NotARepository(VulGuardError):
    pass


class UnsupportedLanguage(VulGuardError):
    pass


class FileAbsentAtRevision(VulGuardError):
    pass


class LineOutOfRange(VulGuardError):
    pass


class GitCommandFailed(VulGuardError):
    """A git subprocess exited non-zero."""

    def __init__(self, args: list[str], returncode: int, stderr: str) -> None:
        self.args_ = args
        self.returncode = returncode
        self.stderr = stderr
        super().__init__(f"git {' '.join(args)} failed ({returncode}): {stderr.strip()}")


class OutOfOrderCommit(VulGuardError):
    pass


class MalformedLine(VulGuardError):
    """A JSONL input line does not follow the expected schema."""

    def __init__(self, line_no: int, detail: str) -> None:
        self.line_no = line_no
        self.detail = detail
        super().__init__(f"line {line_no}: {detail}")


class SchemaViolation(MalformedLine):
    pass


class ScoreOutOfRange(SchemaViolation):
    pass


class UnknownId(VulGuardError):
    pass


class EmptyDataset(VulGuardError):
    pass


class SchemaMismatch(VulGuardError):
    pass


class SingleClassTrainingSet(VulGuardError):
    pass


class SingleClassEvalSet(VulGuardError):
    pass


class VersionMismatch(VulGuardError):
    pass
