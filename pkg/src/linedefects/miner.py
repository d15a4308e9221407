"""Construct line-level defect datasets from commit history and bug report ids.

The miner is VCS-agnostic: it consumes a commit-export JSONL file (one
commit per line) rather than talking to a repository directly. Each record
carries the commit id, the commit message, and, per changed file, the
modified-or-deleted lines of the pre-change revision:

    {"commit_id": "...", "message": "...",
     "changes": [{"path": "...", "removed": [{"line": 10, "content": "..."}]}]}

A matching export can be produced from a git checkout with the standard
``git log``/``git diff`` plumbing; see the README for a recipe.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .corpus import LineRecord, ReleaseDataset, SourceFile, write_dataset

logger = logging.getLogger(__name__)

# how far a pre-change line number may drift from the release snapshot
LINE_MATCH_WINDOW = 20

_ISSUE_KEY_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*-\d+$")


@dataclass(frozen=True)
class RemovedLine:
    line: int
    content: str


@dataclass(frozen=True)
class FileChange:
    path: str
    removed: tuple[RemovedLine, ...]


@dataclass(frozen=True)
class CommitRecord:
    commit_id: str
    message: str
    changes: tuple[FileChange, ...]


@dataclass(frozen=True)
class IssueKeySet:
    """Bug report identifiers (``KEY-123`` style) affecting the studied release."""

    project_key: str
    bug_ids: frozenset[str]

    def __post_init__(self) -> None:
        if not self.bug_ids:
            raise ValueError("issue key set must not be empty")
        for bug_id in self.bug_ids:
            if not _ISSUE_KEY_RE.match(bug_id):
                raise ValueError(f"bad issue identifier {bug_id!r}: expected KEY-<digits>")


def _normalize_path(path: str) -> str:
    return path.replace("\\", "/").lstrip("/")


def load_commit_export(path: str | Path) -> list[CommitRecord]:
    """Parse a commit-export JSONL file."""
    commits: list[CommitRecord] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            changes = []
            for change in doc.get("changes", []):
                removed = tuple(
                    RemovedLine(line=int(r["line"]), content=str(r["content"]))
                    for r in change.get("removed", [])
                )
                for r in removed:
                    if r.line < 1:
                        raise ValueError(f"{path}:{lineno}: line numbers must be >= 1")
                changes.append(FileChange(path=_normalize_path(str(change["path"])), removed=removed))
            commits.append(
                CommitRecord(
                    commit_id=str(doc["commit_id"]),
                    message=str(doc.get("message", "")),
                    changes=tuple(changes),
                )
            )
    return commits


def load_issue_keys(path: str | Path, project_key: str | None = None) -> IssueKeySet:
    """Read bug ids from a newline-delimited text file."""
    ids = {line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()}
    if project_key is None:
        prefixes = {bug_id.split("-", 1)[0] for bug_id in ids}
        project_key = sorted(prefixes)[0] if prefixes else ""
    return IssueKeySet(project_key=project_key, bug_ids=frozenset(ids))


def find_bugfix_commits(commits: list[CommitRecord], issues: IssueKeySet) -> list[CommitRecord]:
    """Commits whose message references a bug id as a whole token.

    Matching is exact on KEY-<digits> bounded by non-alphanumerics, never
    keyword-based, so AMQ-123 does not match inside AMQ-1234.
    """
    if not issues.bug_ids:
        return []
    alternation = "|".join(re.escape(bug_id) for bug_id in sorted(issues.bug_ids))
    pattern = re.compile(r"(?<![A-Za-z0-9])(?:" + alternation + r")(?![A-Za-z0-9])")
    return [c for c in commits if pattern.search(c.message)]


def _resolve_line(file: SourceFile, removed: RemovedLine) -> int | None:
    """Find the snapshot line matching a pre-change line.

    Exact content match within +/-LINE_MATCH_WINDOW of the reported number;
    the nearest candidate wins, lower line number on ties. Returns None when
    nothing matches (the line drifted out of the window or was added after
    the release).
    """
    lo = max(1, removed.line - LINE_MATCH_WINDOW)
    hi = min(len(file.lines), removed.line + LINE_MATCH_WINDOW)
    best: int | None = None
    best_delta = LINE_MATCH_WINDOW + 1
    for number in range(lo, hi + 1):
        if file.lines[number - 1].content != removed.content:
            continue
        delta = abs(number - removed.line)
        if delta < best_delta:
            best, best_delta = number, delta
    return best


def label_defective_lines(
    snapshot: ReleaseDataset, bugfix_commits: list[CommitRecord]
) -> tuple[ReleaseDataset, int]:
    """Mark snapshot lines touched by bug-fixing commits as defective.

    A snapshot line is defective iff some bug-fixing commit modified or
    deleted it and it appears in the release snapshot (resolved by path plus
    pre-change line identity; content matching absorbs line-number drift).
    A file is defective iff it contains at least one defective line. Changes
    to files absent from the snapshot are ignored (added after the release);
    renames are not chased. Returns the labeled dataset and the number of
    changed lines that could not be resolved.
    """
    by_path = {f.path: f for f in snapshot.files}
    defective: dict[str, set[int]] = {}
    unresolved = 0
    for commit in bugfix_commits:
        for change in commit.changes:
            file = by_path.get(change.path)
            if file is None:
                continue
            for removed in change.removed:
                number = _resolve_line(file, removed)
                if number is None:
                    unresolved += 1
                else:
                    defective.setdefault(change.path, set()).add(number)
    if unresolved:
        logger.warning("%d changed lines could not be matched to the release snapshot", unresolved)

    files = []
    for f in snapshot.files:
        hits = defective.get(f.path, set())
        lines = tuple(
            LineRecord(number=line.number, content=line.content, is_defective=line.number in hits)
            for line in f.lines
        )
        files.append(
            SourceFile(release_id=f.release_id, path=f.path, lines=lines, file_label=bool(hits))
        )
    labeled = ReleaseDataset(
        release_id=snapshot.release_id,
        release_date=snapshot.release_date,
        files=tuple(sorted(files, key=lambda f: f.path)),
    )
    return labeled, unresolved


def export_dataset(
    labeled: ReleaseDataset, out_path: str | Path, metadata_path: str | Path | None = None
) -> None:
    """Write one labeled release in the canonical CSV format.

    Pass ``metadata_path`` to also write the release-date sidecar, making
    the export/load round trip exact including the date.
    """
    write_dataset([labeled], out_path, metadata_path)
