"""Drop commits that carry no meaningful source change.

Rules run in a fixed order and the first failing rule names the reason:
merge, no language files, whitespace-only, comment-only.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from . import kernels
from .repo import CommitRecord, FileDiff, Hunk, Language

_EXTENSIONS: dict[Language, frozenset[str]] = {
    Language.C: frozenset({".c", ".h"}),
    Language.CPP: frozenset({".cpp"}),
    Language.JAVA: frozenset({".java"}),
    Language.JAVASCRIPT: frozenset({".js"}),
    Language.PYTHON: frozenset({".py"}),
}


class FilterReason(str, enum.Enum):
    MERGE = "merge"
    WHITESPACE_ONLY = "whitespace_only"
    COMMENT_ONLY = "comment_only"
    NO_LANGUAGE_FILES = "no_language_files"
    KEPT = "kept"


@dataclass(frozen=True, slots=True)
class FilterVerdict:
    keep: bool
    reason: FilterReason


def language_extensions(language: Language | str) -> frozenset[str]:
    return _EXTENSIONS[Language.parse(language)]


def comment_style(language: Language) -> int:
    return kernels.STYLE_HASH if language is Language.PYTHON else kernels.STYLE_C


def is_language_file(path: str | None, extensions: Iterable[str]) -> bool:
    if not path:
        return False
    lower = path.lower()
    return any(lower.endswith(ext) for ext in extensions)


def language_files(files: Iterable[FileDiff], extensions: Iterable[str]) -> list[FileDiff]:
    exts = tuple(extensions)
    return [f for f in files if is_language_file(f.new_path, exts) or is_language_file(f.old_path, exts)]


def squeeze(line: str) -> str:
    """Drop every whitespace character."""
    return "".join(line.split())


def code_residues(lines: Sequence[str], language: Language) -> list[str]:
    """Comment- and whitespace-free residue of each line.

    Block-comment state only flows between the lines passed in together,
    which callers keep to one side of one hunk.
    """
    stripped, _ = kernels.strip_comments(list(lines), comment_style(language))
    return [squeeze(s) for s in stripped]


def cosmetic_mask(lines: Sequence[str], language: Language) -> list[bool]:
    """True for blank and comment-only lines."""
    return [not r for r in code_residues(lines, language)]


def _hunk_equal_after(hunk: Hunk, transform) -> bool:
    before = [r for r in transform(hunk.removed) if r]
    after = [r for r in transform(hunk.added) if r]
    return before == after


def _whitespace(lines: Sequence[str]) -> list[str]:
    return [squeeze(line) for line in lines]


def classify_commit(
    commit: CommitRecord,
    language: Language | str,
    extensions: Iterable[str] | None = None,
) -> FilterVerdict:
    """First failing rule wins. A commit whose language files carry no hunks
    at all (pure renames, mode or binary changes) counts as whitespace-only.
    """
    lang = Language.parse(language)
    exts = tuple(extensions) if extensions is not None else tuple(language_extensions(lang))
    if len(commit.parent_ids) > 1:
        return FilterVerdict(False, FilterReason.MERGE)
    files = language_files(commit.files, exts)
    if not files:
        return FilterVerdict(False, FilterReason.NO_LANGUAGE_FILES)
    hunks = [h for f in files if not f.binary for h in f.hunks]
    # lines that vanish entirely after stripping do not count, so added or
    # removed blank lines are whitespace changes too
    if all(_hunk_equal_after(h, _whitespace) for h in hunks):
        return FilterVerdict(False, FilterReason.WHITESPACE_ONLY)
    if all(_hunk_equal_after(h, lambda ls: code_residues(ls, lang)) for h in hunks):
        return FilterVerdict(False, FilterReason.COMMENT_ONLY)
    return FilterVerdict(True, FilterReason.KEPT)


def filter_stream(
    commits: Sequence[CommitRecord],
    language: Language | str,
    extensions: Iterable[str] | None = None,
) -> tuple[list[CommitRecord], list[tuple[str, FilterReason]]]:
    kept: list[CommitRecord] = []
    dropped: list[tuple[str, FilterReason]] = []
    exts = tuple(extensions) if extensions is not None else None
    for commit in commits:
        verdict = classify_commit(commit, language, exts)
        if verdict.keep:
            kept.append(commit)
        else:
            dropped.append((commit.id, verdict.reason))
    return kept, dropped
