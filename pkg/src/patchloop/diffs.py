"""Unified-diff engine: parse, apply, compute, render, and summarize.

This module treats diffs as data.  Candidate patches arrive as unified-diff
text, get parsed into :class:`UnifiedDiff` values, and are applied to
baseline source with exact context matching.  Application is deliberately
strict: a hunk whose context does not match byte-for-byte at the stated
position is rejected rather than relocated, because silent fuzzy matching
would blur the failure accounting downstream.

Line bookkeeping conventions:

* ``old_start`` / ``new_start`` are 1-based line numbers, as in diff text.
* A zero-length side (pure insertion or pure deletion) uses the standard
  unified-diff convention: the start number names the line *after which*
  the change happens, so ``-0,0`` inserts at the top of the file.
* Sources are split on ``"\\n"``.  A missing trailing newline is normalized
  on read and restored on write; ``\\ No newline at end of file`` markers in
  diff text are accepted and ignored.  Computed diffs remember the new
  text's trailing-newline status so the round trip is exact even when the
  two sides disagree about it.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, field

from .errors import PatchLoopError


class DiffError(PatchLoopError):
    """Base class for parse and apply failures."""


class MalformedHunkHeader(DiffError):
    """A ``@@`` line that does not match the unified hunk header shape."""


class InvalidLinePrefix(DiffError):
    """A hunk body line starting with something other than ' ', '+', '-', '\\'."""


class LengthMismatch(DiffError):
    """Declared old/new lengths disagree with the hunk body."""


class EmptyDiff(DiffError):
    """Diff text with no hunks at all."""


class EmptyHunk(DiffError):
    """A hunk whose body contains no additions or deletions."""


class OverlappingHunks(DiffError):
    """Hunks out of order or touching the same old-file lines."""


class ContextMismatch(DiffError):
    """A context or delete line disagrees with the source at its position."""

    def __init__(self, hunk_index: int, expected_line: str, found_line: str | None):
        self.hunk_index = hunk_index
        self.expected_line = expected_line
        self.found_line = found_line
        found = "end of file" if found_line is None else repr(found_line)
        super().__init__(
            f"hunk {hunk_index}: expected {expected_line!r}, found {found}"
        )


class OutOfRange(DiffError):
    """A hunk whose old_start points beyond the end of the source."""

    def __init__(self, hunk_index: int, old_start: int, file_len: int):
        self.hunk_index = hunk_index
        self.old_start = old_start
        self.file_len = file_len
        super().__init__(
            f"hunk {hunk_index}: old_start {old_start} beyond file of {file_len} lines"
        )


CONTEXT = "context"
ADD = "add"
DELETE = "delete"

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


@dataclass(frozen=True, slots=True)
class DiffLine:
    """One body line of a hunk: its kind plus the text without the prefix."""

    kind: str
    text: str


@dataclass(frozen=True, slots=True)
class Hunk:
    """A contiguous change region.

    ``old_len``/``new_len`` always agree with the body (the parser enforces
    this), so ``old_len == #context + #delete`` and
    ``new_len == #context + #add``.
    """

    old_start: int
    old_len: int
    new_start: int
    new_len: int
    lines: tuple[DiffLine, ...]

    def counts(self) -> tuple[int, int, int]:
        """Return (added, deleted, context) line counts."""
        added = sum(1 for l in self.lines if l.kind == ADD)
        deleted = sum(1 for l in self.lines if l.kind == DELETE)
        context = len(self.lines) - added - deleted
        return added, deleted, context


@dataclass(frozen=True, slots=True)
class UnifiedDiff:
    """A parsed diff: optional file names plus ordered, non-overlapping hunks.

    ``new_ends_with_newline`` records whether the new text ends in a newline.
    Computed diffs carry it so application reproduces the new text exactly;
    parsed diffs leave it unset (the textual markers are ignored) and
    application falls back to the source's own trailing-newline status.  It
    is excluded from equality so parse(render(d)) == d holds either way.
    """

    old_name: str = "a"
    new_name: str = "b"
    hunks: tuple[Hunk, ...] = ()
    new_ends_with_newline: bool | None = field(default=None, compare=False)


@dataclass(frozen=True, slots=True)
class DiffStats:
    hunk_count: int
    added: int
    deleted: int
    context: int


def _first_affected(hunk: Hunk) -> int:
    # A pure insertion sits in the gap after old_start, so it cannot clash
    # with a hunk that ends on old_start itself.
    return hunk.old_start if hunk.old_len > 0 else hunk.old_start + 1


def _last_affected(hunk: Hunk) -> int:
    return hunk.old_start + hunk.old_len - 1 if hunk.old_len > 0 else hunk.old_start


def _check_hunk_order(hunks: tuple[Hunk, ...]) -> None:
    for prev, cur in zip(hunks, hunks[1:]):
        if _first_affected(cur) <= _last_affected(prev):
            raise OverlappingHunks(
                f"hunks touching old lines {prev.old_start}.. and {cur.old_start}.. "
                "overlap or are out of order"
            )


def parse_diff(text: str) -> UnifiedDiff:
    """Parse unified-diff text into a :class:`UnifiedDiff`.

    ``---``/``+++`` header lines are optional; when absent the names default
    to ``a`` and ``b``.  Hunk lengths default to 1 when omitted.  Text after
    the closing ``@@`` of a hunk header (section headings emitted by some
    tools) is tolerated and dropped.
    """
    raw_lines = text.splitlines()
    pos = 0
    old_name, new_name = "a", "b"

    while pos < len(raw_lines) and not raw_lines[pos].strip():
        pos += 1
    if pos < len(raw_lines) and raw_lines[pos].startswith("--- "):
        old_name = raw_lines[pos][4:].strip() or "a"
        pos += 1
        if pos < len(raw_lines) and raw_lines[pos].startswith("+++ "):
            new_name = raw_lines[pos][4:].strip() or "b"
            pos += 1

    hunks: list[Hunk] = []
    while pos < len(raw_lines):
        line = raw_lines[pos]
        if not line.strip():
            pos += 1
            continue
        if line.startswith("@@"):
            m = _HUNK_RE.match(line)
            if not m:
                raise MalformedHunkHeader(f"bad hunk header: {line!r}")
            old_start = int(m.group(1))
            old_len = int(m.group(2)) if m.group(2) is not None else 1
            new_start = int(m.group(3))
            new_len = int(m.group(4)) if m.group(4) is not None else 1
            if old_len > 0 and old_start < 1:
                raise MalformedHunkHeader(
                    f"old_start must be >= 1 for a non-empty old range: {line!r}"
                )
            if new_len > 0 and new_start < 1:
                raise MalformedHunkHeader(
                    f"new_start must be >= 1 for a non-empty new range: {line!r}"
                )
            pos += 1
            pos, hunk = _parse_hunk_body(
                raw_lines, pos, len(hunks), old_start, old_len, new_start, new_len
            )
            hunks.append(hunk)
        elif line.startswith("--- ") or line.startswith("+++ "):
            # Stray file header between hunks: treat like garbage.
            raise MalformedHunkHeader(f"unexpected file header: {line!r}")
        else:
            raise MalformedHunkHeader(
                f"expected hunk header, got: {line!r}"
            )

    if not hunks:
        raise EmptyDiff("diff text contains no hunks")
    _check_hunk_order(tuple(hunks))
    return UnifiedDiff(old_name=old_name, new_name=new_name, hunks=tuple(hunks))


def _parse_hunk_body(
    raw_lines: list[str],
    pos: int,
    hunk_index: int,
    old_start: int,
    old_len: int,
    new_start: int,
    new_len: int,
) -> tuple[int, Hunk]:
    body: list[DiffLine] = []
    old_seen = 0
    new_seen = 0
    while old_seen < old_len or new_seen < new_len:
        if pos >= len(raw_lines):
            raise LengthMismatch(
                f"hunk {hunk_index}: body ended with {old_seen}/{old_len} old and "
                f"{new_seen}/{new_len} new lines consumed"
            )
        line = raw_lines[pos]
        if line.startswith("\\"):
            # "\ No newline at end of file": accepted, ignored.
            pos += 1
            continue
        prefix, content = (line[0], line[1:]) if line else (" ", "")
        if prefix == " ":
            if old_seen >= old_len or new_seen >= new_len:
                raise LengthMismatch(
                    f"hunk {hunk_index}: context line exceeds declared lengths"
                )
            body.append(DiffLine(CONTEXT, content))
            old_seen += 1
            new_seen += 1
        elif prefix == "-":
            if old_seen >= old_len:
                raise LengthMismatch(
                    f"hunk {hunk_index}: delete line exceeds declared old length"
                )
            body.append(DiffLine(DELETE, content))
            old_seen += 1
        elif prefix == "+":
            if new_seen >= new_len:
                raise LengthMismatch(
                    f"hunk {hunk_index}: add line exceeds declared new length"
                )
            body.append(DiffLine(ADD, content))
            new_seen += 1
        else:
            raise InvalidLinePrefix(
                f"hunk {hunk_index}: line must start with ' ', '+', '-' or "
                f"'\\': {line!r}"
            )
        pos += 1
    while pos < len(raw_lines) and raw_lines[pos].startswith("\\"):
        pos += 1
    added = sum(1 for l in body if l.kind == ADD)
    deleted = sum(1 for l in body if l.kind == DELETE)
    if added == 0 and deleted == 0:
        raise EmptyHunk(f"hunk {hunk_index} contains no additions or deletions")
    return pos, Hunk(old_start, old_len, new_start, new_len, tuple(body))


def _split_source(source: str) -> tuple[list[str], bool]:
    if source == "":
        return [], True
    had_newline = source.endswith("\n")
    body = source[:-1] if had_newline else source
    return body.split("\n"), had_newline


def _join_lines(lines: list[str], trailing_newline: bool) -> str:
    if not lines:
        return ""
    text = "\n".join(lines)
    return text + "\n" if trailing_newline else text


def apply_diff(source: str, diff: UnifiedDiff, fuzz: int = 0) -> str:
    """Apply ``diff`` to ``source`` and return the patched text.

    Context and delete lines must match the source exactly at the declared
    positions.  With ``fuzz > 0`` the hunk may shift by up to ``fuzz`` lines
    (offsets tried in order 0, +1, -1, +2, ...); anything beyond that is a
    :class:`ContextMismatch`, never an automatic relocation.
    """
    _check_hunk_order(diff.hunks)
    src_lines, trailing_newline = _split_source(source)
    if diff.new_ends_with_newline is not None:
        trailing_newline = diff.new_ends_with_newline
    out: list[str] = []
    cursor = 0  # 0-based index into src_lines of the next unconsumed line

    for hunk_index, hunk in enumerate(diff.hunks):
        anchor = hunk.old_start - 1 if hunk.old_len > 0 else hunk.old_start
        if anchor > len(src_lines):
            raise OutOfRange(hunk_index, hunk.old_start, len(src_lines))
        matched = None
        mismatch: ContextMismatch | None = None
        for delta in _fuzz_offsets(fuzz):
            start = anchor + delta
            if start < cursor or start > len(src_lines):
                continue
            err = _match_hunk(src_lines, start, hunk, hunk_index)
            if err is None:
                matched = start
                break
            if mismatch is None:
                mismatch = err
        if matched is None:
            if mismatch is None:
                raise OutOfRange(hunk_index, hunk.old_start, len(src_lines))
            raise mismatch
        out.extend(src_lines[cursor:matched])
        for dline in hunk.lines:
            if dline.kind in (CONTEXT, ADD):
                out.append(dline.text)
        cursor = matched + hunk.old_len

    out.extend(src_lines[cursor:])
    return _join_lines(out, trailing_newline)


def _fuzz_offsets(fuzz: int):
    yield 0
    for d in range(1, fuzz + 1):
        yield d
        yield -d


def _match_hunk(
    src_lines: list[str], start: int, hunk: Hunk, hunk_index: int
) -> ContextMismatch | None:
    pos = start
    for dline in hunk.lines:
        if dline.kind == ADD:
            continue
        if pos >= len(src_lines):
            return ContextMismatch(hunk_index, dline.text, None)
        if src_lines[pos] != dline.text:
            return ContextMismatch(hunk_index, dline.text, src_lines[pos])
        pos += 1
    return None


def compute_diff(
    old: str,
    new: str,
    context: int = 3,
    old_name: str = "a",
    new_name: str = "b",
) -> UnifiedDiff:
    """Compute a line diff from ``old`` to ``new`` with ``context`` lines.

    Equal inputs produce a diff with zero hunks, which :func:`apply_diff`
    treats as the identity.
    """
    old_lines, _ = _split_source(old)
    new_lines, _ = _split_source(new)
    matcher = difflib.SequenceMatcher(a=old_lines, b=new_lines, autojunk=False)
    hunks: list[Hunk] = []
    for group in matcher.get_grouped_opcodes(context):
        body: list[DiffLine] = []
        for tag, i1, i2, j1, j2 in group:
            if tag == "equal":
                body.extend(DiffLine(CONTEXT, l) for l in old_lines[i1:i2])
            else:
                if tag in ("replace", "delete"):
                    body.extend(DiffLine(DELETE, l) for l in old_lines[i1:i2])
                if tag in ("replace", "insert"):
                    body.extend(DiffLine(ADD, l) for l in new_lines[j1:j2])
        i1, i2 = group[0][1], group[-1][2]
        j1, j2 = group[0][3], group[-1][4]
        old_len, new_len = i2 - i1, j2 - j1
        hunks.append(
            Hunk(
                old_start=i1 + 1 if old_len > 0 else i1,
                old_len=old_len,
                new_start=j1 + 1 if new_len > 0 else j1,
                new_len=new_len,
                lines=tuple(body),
            )
        )
    return UnifiedDiff(
        old_name=old_name,
        new_name=new_name,
        hunks=tuple(hunks),
        new_ends_with_newline=new.endswith("\n") if new else None,
    )


def render_diff(diff: UnifiedDiff) -> str:
    """Serialize a diff back to unified text (no timestamps, no index lines).

    The output is a fixed point of ``parse_diff``: parsing it yields an
    equal :class:`UnifiedDiff`.
    """
    parts = [f"--- {diff.old_name}", f"+++ {diff.new_name}"]
    for hunk in diff.hunks:
        parts.append(
            "@@ -%s +%s @@"
            % (
                _format_range(hunk.old_start, hunk.old_len),
                _format_range(hunk.new_start, hunk.new_len),
            )
        )
        for dline in hunk.lines:
            prefix = {CONTEXT: " ", ADD: "+", DELETE: "-"}[dline.kind]
            parts.append(prefix + dline.text)
    return "\n".join(parts) + "\n"


def _format_range(start: int, length: int) -> str:
    return str(start) if length == 1 else f"{start},{length}"


def diff_stats(diff: UnifiedDiff) -> DiffStats:
    """Count hunks and added/deleted/context lines."""
    added = deleted = context = 0
    for hunk in diff.hunks:
        a, d, c = hunk.counts()
        added += a
        deleted += d
        context += c
    return DiffStats(
        hunk_count=len(diff.hunks), added=added, deleted=deleted, context=context
    )
