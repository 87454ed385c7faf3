"""Trace vulnerability-inducing commits from fixing commits (SZZ family).

Every variant starts from the lines a fix deletes and blames them in the
fix's first parent:

* ``b``  reports the blamed commits as they are.
* ``ag`` drops blank/comment-only deleted lines and skips blamed commits
  whose change to the line was cosmetic (equal after removing comments and
  whitespace), hopping to the matching line in the parent.
* ``ma`` is ``ag`` that also skips meta-changes: merges, rename-only and
  mode-only changes.
* ``v``  drops cosmetic lines and follows a line back while the blamed
  commit only rewrote it (equal after whitespace normalisation), ending at
  the commit that created it.
"""

from __future__ import annotations

import enum
import logging
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

from .commit_filter import code_residues, cosmetic_mask, language_extensions, language_files
from .errors import VulGuardError
from .parallel import ordered_map
from .repo import (
    BlameEntry,
    ChangeKind,
    CommitRecord,
    FileDiff,
    Language,
    RepoHandle,
    blame_at,
    commit_diff,
    commit_parents,
    diff_between,
)

log = logging.getLogger(__name__)

MAX_HOPS = 128


class SzzAlgorithm(str, enum.Enum):
    B = "b"
    AG = "ag"
    MA = "ma"
    V = "v"


@dataclass(frozen=True, slots=True)
class DeletedLine:
    file: str
    line_no: int
    content: str


@dataclass(frozen=True)
class TraceResult:
    vfc_id: str
    algorithm: SzzAlgorithm
    vic_ids: frozenset[str]
    line_evidence: dict[str, tuple[DeletedLine, ...]] = field(default_factory=dict)
    flags: tuple[str, ...] = ()
    error: str | None = None

    def to_json(self) -> dict[str, Any]:
        row: dict[str, Any] = {"vfc": self.vfc_id, "algorithm": self.algorithm.value, "vics": sorted(self.vic_ids)}
        if self.flags:
            row["flags"] = list(self.flags)
        if self.error is not None:
            row["error"] = self.error
        return row


_WS_RE = re.compile(r"\s+")


def normalize_ws(line: str) -> str:
    """Trim and collapse internal whitespace runs to one space."""
    return _WS_RE.sub(" ", line.strip())


def candidate_lines(
    vfc: CommitRecord,
    language: Language | str,
    exclude_cosmetic: bool = False,
    extensions: Iterable[str] | None = None,
) -> list[DeletedLine]:
    lang = Language.parse(language)
    exts = tuple(extensions) if extensions is not None else tuple(language_extensions(lang))
    out: list[DeletedLine] = []
    for f in language_files(vfc.files, exts):
        if f.old_path is None or f.binary:
            continue
        for hunk in f.hunks:
            mask = cosmetic_mask(hunk.removed, lang) if exclude_cosmetic else [False] * hunk.old_count
            for i, content in enumerate(hunk.removed):
                if not mask[i]:
                    out.append(DeletedLine(f.old_path, hunk.old_start + i, content))
    return out


def _closest(candidates: Sequence[int], target: int) -> int:
    return min(candidates, key=lambda n: (abs(n - target), n))


def _file_in(diffs: Sequence[FileDiff], path: str) -> FileDiff | None:
    for f in diffs:
        if f.new_path == path:
            return f
    return None


class _Tracer:
    """Follows one deleted line back through history for one algorithm."""

    def __init__(self, handle: RepoHandle, algorithm: SzzAlgorithm, language: Language) -> None:
        self.handle = handle
        self.algorithm = algorithm
        self.language = language
        self.flags: list[str] = []

    def trace(self, revision: str, line: DeletedLine) -> str:
        entry = blame_at(self.handle, revision, line.file, [line.line_no])[0]
        if self.algorithm is SzzAlgorithm.B:
            return entry.origin_commit
        for _ in range(MAX_HOPS):
            step = self._predecessor(entry)
            if step is None:
                return entry.origin_commit
            rev, path, line_no = step
            entry = blame_at(self.handle, rev, path, [line_no])[0]
        self.flags.append(f"truncated:{line.file}:{line.line_no}")
        return entry.origin_commit

    def _predecessor(self, entry: BlameEntry) -> tuple[str, str, int] | None:
        commit = entry.origin_commit
        parents = commit_parents(self.handle, commit)
        if not parents:
            return None
        if self.algorithm is SzzAlgorithm.MA:
            if len(parents) > 1:
                return self._through_merge(entry, parents)
            fd = _file_in(commit_diff(self.handle, commit), entry.origin_file)
            if fd is not None and _is_meta_only(fd):
                return parents[0], fd.old_path or fd.path, fd.old_line_for_unchanged(entry.origin_line_no)
        fd = _file_in(commit_diff(self.handle, commit), entry.origin_file)
        if fd is None or fd.old_path is None:
            return None
        found = fd.hunk_for_new_line(entry.origin_line_no)
        if found is None:
            return None
        if self.algorithm is SzzAlgorithm.V:
            return self._rewritten_from(parents[0], fd, entry)
        hunk, idx = found
        target = code_residues(hunk.added, self.language)[idx]
        before = code_residues(hunk.removed, self.language)
        matches = [hunk.old_start + j for j, r in enumerate(before) if r and r == target]
        if not target or not matches:
            return None
        return parents[0], fd.old_path, _closest(matches, entry.origin_line_no)

    def _rewritten_from(self, parent: str, fd: FileDiff, entry: BlameEntry) -> tuple[str, str, int] | None:
        target = normalize_ws(entry.content)
        matches = [
            h.old_start + j
            for h in fd.hunks
            for j, old in enumerate(h.removed)
            if normalize_ws(old) == target
        ]
        if not matches:
            return None
        if len(matches) > 1:
            self.flags.append(f"ambiguous:{entry.origin_commit[:12]}:{fd.path}:{entry.origin_line_no}")
        return parent, fd.old_path, _closest(matches, entry.origin_line_no)  # type: ignore[return-value]

    def _through_merge(self, entry: BlameEntry, parents: Sequence[str]) -> tuple[str, str, int] | None:
        k = entry.origin_line_no
        target = code_residues([entry.content], self.language)[0]
        # merged-in side first, mainline last
        for parent in [*parents[1:], parents[0]]:
            fd = _file_in(diff_between(self.handle, parent, entry.origin_commit), entry.origin_file)
            if fd is None:
                return parent, entry.origin_file, k
            if fd.old_path is None:
                continue
            found = fd.hunk_for_new_line(k)
            if found is None:
                return parent, fd.old_path, fd.old_line_for_unchanged(k)
            hunk, idx = found
            if not hunk.removed:
                continue
            before = code_residues(hunk.removed, self.language)
            same = [j for j, r in enumerate(before) if r and r == target]
            j = min(same, key=lambda j: (abs(j - idx), j)) if same else min(idx, len(hunk.removed) - 1)
            return parent, fd.old_path, hunk.old_start + j
        self.flags.append(f"merge_unresolved:{entry.origin_commit[:12]}:{entry.origin_file}:{k}")
        return None


def _is_meta_only(fd: FileDiff) -> bool:
    return not fd.hunks and (fd.change_kind is ChangeKind.RENAME or fd.mode_change)


def trace(
    handle: RepoHandle,
    vfc: CommitRecord,
    algorithm: SzzAlgorithm | str,
    extensions: Iterable[str] | None = None,
) -> TraceResult:
    algo = SzzAlgorithm(algorithm)
    lang = handle.primary_language
    if not vfc.parent_ids:
        return TraceResult(vfc.id, algo, frozenset(), flags=("root_commit_fix",))
    lines = candidate_lines(vfc, lang, exclude_cosmetic=algo is not SzzAlgorithm.B, extensions=extensions)
    tracer = _Tracer(handle, algo, lang)
    evidence: dict[str, list[DeletedLine]] = {}
    for line in lines:
        vic = tracer.trace(vfc.parent_ids[0], line)
        if vic != vfc.id:
            evidence.setdefault(vic, []).append(line)
    return TraceResult(
        vfc_id=vfc.id,
        algorithm=algo,
        vic_ids=frozenset(evidence),
        line_evidence={k: tuple(v) for k, v in sorted(evidence.items())},
        flags=tuple(tracer.flags),
    )


def b_szz(handle: RepoHandle, vfc: CommitRecord, extensions: Iterable[str] | None = None) -> TraceResult:
    return trace(handle, vfc, SzzAlgorithm.B, extensions)


def ag_szz(handle: RepoHandle, vfc: CommitRecord, extensions: Iterable[str] | None = None) -> TraceResult:
    return trace(handle, vfc, SzzAlgorithm.AG, extensions)


def ma_szz(handle: RepoHandle, vfc: CommitRecord, extensions: Iterable[str] | None = None) -> TraceResult:
    return trace(handle, vfc, SzzAlgorithm.MA, extensions)


def v_szz(handle: RepoHandle, vfc: CommitRecord, extensions: Iterable[str] | None = None) -> TraceResult:
    return trace(handle, vfc, SzzAlgorithm.V, extensions)


def run_szz(
    handle: RepoHandle,
    vfcs: Sequence[CommitRecord],
    algorithm: SzzAlgorithm | str = SzzAlgorithm.V,
    workers: int = 1,
    extensions: Iterable[str] | None = None,
) -> list[TraceResult]:
    """Trace every fix; a failing fix yields an empty result carrying the error."""
    algo = SzzAlgorithm(algorithm)
    exts = tuple(extensions) if extensions is not None else None

    def one(vfc: CommitRecord) -> TraceResult:
        try:
            return trace(handle, vfc, algo, exts)
        except VulGuardError as exc:
            log.warning("tracing %s failed: %s", vfc.id, exc)
            return TraceResult(vfc.id, algo, frozenset(), error=str(exc))

    return ordered_map(one, list(vfcs), workers)
