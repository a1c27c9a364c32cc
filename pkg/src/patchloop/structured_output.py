"""Parsing of raw generator completions into their tagged sections.

Completions are expected to carry up to three tagged blocks: ``<hp>`` with a
JSON object of hyperparameters, ``<tr>`` with transform code, and ``<delta>``
with a unified diff.  The tags are plain string markers scanned literally;
the text is not XML and is never fed to an XML parser, so malformed markup
elsewhere in the completion cannot mask a present ``<delta>`` block.

Only the delta is load-bearing.  A missing or unclosed ``<delta>`` is a hard
error; a second ``<delta>`` block is also a hard error because silently
picking one of two candidate patches would hide generator drift.  The hp and
tr blocks are advisory: absence is recorded as ``None``, and an hp body that
fails to parse as a JSON object is dropped with a warning flag rather than
rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import PatchLoopError


class TagError(PatchLoopError):
    """Base class for tag extraction failures."""


class MissingDeltaTag(TagError):
    """No ``<delta>`` block in the completion."""


class UnclosedTag(TagError):
    """An opening tag without its closing counterpart."""


class DuplicateTag(TagError):
    """More than one ``<delta>`` block in the completion."""


@dataclass(frozen=True, slots=True)
class GeneratorOutput:
    """The parsed sections of one generator completion."""

    raw_text: str
    delta_text: str
    hp: dict[str, float | int | str] | None
    transform_code: str | None
    total_lines: int
    hp_malformed: bool = False


def total_lines(text: str) -> int:
    """Line count of ``text``: 1 + newline count, or 0 for empty text."""
    if text == "":
        return 0
    return text.count("\n") + 1


def estimate_tokens(lines: float) -> int:
    """Rough token cost for an output of ``lines`` lines (about 4 per line)."""
    return round(4 * lines)


def _find_block(text: str, tag: str) -> tuple[str | None, int]:
    """Return (content, occurrence count) for ``<tag>...</tag>``.

    Content is the text between the markers with the newline that follows
    the opener dropped; the newline before the closer stays, so a tag
    holding N lines yields N+1 newline-delimited lines, the convention the
    length metrics use.  Raises :class:`UnclosedTag` when the opener has
    no closer.
    """
    open_marker = f"<{tag}>"
    close_marker = f"</{tag}>"
    count = text.count(open_marker)
    if count == 0:
        return None, 0
    start = text.index(open_marker) + len(open_marker)
    end = text.find(close_marker, start)
    if end < 0:
        raise UnclosedTag(f"<{tag}> is never closed")
    content = text[start:end]
    if content.startswith("\n"):
        content = content[1:]
    return content, count


def _parse_hp(body: str) -> tuple[dict[str, float | int | str] | None, bool]:
    try:
        value = json.loads(body)
    except ValueError:
        return None, True
    if not isinstance(value, dict):
        return None, True
    hp: dict[str, float | int | str] = {}
    for key, raw in value.items():
        if isinstance(raw, bool):
            hp[str(key)] = str(raw).lower()
        elif isinstance(raw, (int, float)):
            hp[str(key)] = raw
        elif isinstance(raw, str):
            hp[str(key)] = raw
        else:
            hp[str(key)] = json.dumps(raw)
    return hp, False


def parse_generator_output(text: str) -> GeneratorOutput:
    """Extract the tagged sections of a raw completion.

    The delta block is mandatory and must be unique; hp and tr are optional.
    An empty ``<delta></delta>`` body parses successfully here and fails
    later, in the diff parser, where it is diagnosed as an empty diff.
    """
    delta, delta_count = _find_block(text, "delta")
    if delta_count == 0:
        raise MissingDeltaTag("completion has no <delta> block")
    if delta_count > 1:
        raise DuplicateTag(f"completion has {delta_count} <delta> blocks")

    hp: dict[str, float | int | str] | None = None
    hp_malformed = False
    hp_body, hp_count = _find_block(text, "hp")
    if hp_count > 0:
        hp, hp_malformed = _parse_hp(hp_body or "")

    transform, tr_count = _find_block(text, "tr")
    if tr_count == 0:
        transform = None

    return GeneratorOutput(
        raw_text=text,
        delta_text=delta if delta is not None else "",
        hp=hp,
        transform_code=transform,
        total_lines=total_lines(text),
        hp_malformed=hp_malformed,
    )
