"""Class-tagged hypothesis markup.

Entities are wrapped in whitespace-delimited tags, ``Call <contact> Thomson
</contact>``. ``<s>``/``</s>`` delimit prompt regions and are never entity
classes. Tags for unknown labels are ordinary words.
"""
import logging
import re
from typing import Iterable, List, Optional, Sequence, Tuple

from phonctx.app.config import settings
from phonctx.app.errors import InvalidInputError, TagParseError
from phonctx.app.schemas import EntitySpan, TaggedHypothesis

logger = logging.getLogger(__name__)

REGION_LABEL = "s"


def _classes(known_classes: Optional[Iterable[str]]) -> Tuple[str, ...]:
    classes = settings.ENTITY_CLASSES if known_classes is None else known_classes
    return tuple(sorted({c for c in classes if c != REGION_LABEL}, key=lambda c: (-len(c), c)))


def _tag_pattern(labels: Sequence[str]) -> re.Pattern:
    alternatives = "|".join(re.escape(label) for label in labels)
    return re.compile(rf"<(/?)({alternatives})>")


def collapse(text: str) -> str:
    return " ".join(text.split())


def open_tag(label: str) -> str:
    return f"<{label}>"


def close_tag(label: str) -> str:
    return f"</{label}>"


def parse_tagged(raw: str, known_classes: Optional[Iterable[str]] = None) -> TaggedHypothesis:
    """Extract entity spans from tagged text.

    A tag left open at the end of the text closes there and the span is
    flagged ``auto_closed``. Nested tags and stray or mismatched closing
    tags raise ``TagParseError`` with the character offset of the tag.
    """
    classes = _classes(known_classes)
    pattern = _tag_pattern(classes + (REGION_LABEL,))

    words: List[str] = []
    word_spans: List[Tuple[str, int, int, bool]] = []
    open_label: Optional[str] = None
    open_at = 0
    open_offset = 0
    cursor = 0

    for match in pattern.finditer(raw):
        words.extend(raw[cursor:match.start()].split())
        cursor = match.end()
        closing, label = match.group(1) == "/", match.group(2)
        if label == REGION_LABEL:
            continue

        if not closing:
            if open_label is not None:
                raise TagParseError(f"nested tag <{label}> inside <{open_label}>", match.start())
            open_label, open_at, open_offset = label, len(words), match.start()
        else:
            if open_label is None:
                raise TagParseError(f"closing tag </{label}> without an opening tag", match.start())
            if label != open_label:
                raise TagParseError(f"closing tag </{label}> does not match <{open_label}>", match.start())
            if len(words) > open_at:
                word_spans.append((label, open_at, len(words), False))
            else:
                logger.debug(f"Dropping empty <{label}> span at offset {open_offset}")
            open_label = None

    words.extend(raw[cursor:].split())
    if open_label is not None and len(words) > open_at:
        word_spans.append((open_label, open_at, len(words), True))

    text = " ".join(words)
    starts = []
    position = 0
    for word in words:
        starts.append(position)
        position += len(word) + 1

    spans = []
    for label, first, last, auto_closed in word_spans:
        start = starts[first]
        end = starts[last - 1] + len(words[last - 1])
        spans.append(EntitySpan(entity_class=label, surface=text[start:end], start=start, end=end, auto_closed=auto_closed))

    return TaggedHypothesis(raw=raw, text=text, spans=spans)


def serialize_tagged(text: str, spans: Sequence[EntitySpan]) -> str:
    """Render text and spans in canonical form with single spaces around tags."""
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    parts: List[str] = []
    cursor = 0
    for span in ordered:
        if span.start < cursor:
            raise InvalidInputError(f"Span '{span.surface}' at {span.start} overlaps a previous span")
        if span.end > len(text) or span.start >= span.end:
            raise InvalidInputError(f"Span '{span.surface}' range {span.start}..{span.end} is invalid for the text")
        covered = text[span.start:span.end]
        if covered != covered.strip():
            raise InvalidInputError(f"Span range {span.start}..{span.end} starts or ends on whitespace")
        parts.append(text[cursor:span.start])
        parts.append(f" {open_tag(span.entity_class)} {text[span.start:span.end]} {close_tag(span.entity_class)} ")
        cursor = span.end
    parts.append(text[cursor:])
    return collapse("".join(parts))


def strip_tags(raw: str, known_classes: Optional[Iterable[str]] = None) -> str:
    """Remove known-class tags and region delimiters, collapsing whitespace."""
    pattern = _tag_pattern(_classes(known_classes) + (REGION_LABEL,))
    return collapse(pattern.sub(" ", raw))


def canonical(hyp: TaggedHypothesis) -> str:
    return serialize_tagged(hyp.text, hyp.spans)


def entities_only(hyp: TaggedHypothesis) -> str:
    """Render only the tagged entities, as NE-only decoding emits them."""
    return " ".join(f"{open_tag(s.entity_class)} {s.surface} {close_tag(s.entity_class)}" for s in hyp.spans)


def safe_parse(raw: str, known_classes: Optional[Iterable[str]] = None) -> Tuple[TaggedHypothesis, Optional[str]]:
    """Parse untrusted text, degrading to untagged text on markup errors."""
    try:
        return parse_tagged(raw, known_classes), None
    except TagParseError as e:
        logger.warning(f"Malformed tags in decoder output, keeping plain text: {e.detail}")
        return TaggedHypothesis(raw=raw, text=strip_tags(raw, known_classes), spans=[]), e.detail


def replace_spans(hyp: TaggedHypothesis, surfaces: Sequence[str]) -> TaggedHypothesis:
    """Substitute each span's surface positionally, keeping its class."""
    if len(surfaces) != len(hyp.spans):
        raise InvalidInputError(f"Expected {len(hyp.spans)} replacement surfaces, got {len(surfaces)}")

    pieces: List[str] = []
    new_spans: List[EntitySpan] = []
    cursor = 0
    length = 0
    for span, surface in zip(hyp.spans, surfaces):
        before = hyp.text[cursor:span.start]
        pieces.append(before)
        length += len(before)
        surface = collapse(surface)
        new_spans.append(EntitySpan(entity_class=span.entity_class, surface=surface, start=length, end=length + len(surface)))
        pieces.append(surface)
        length += len(surface)
        cursor = span.end
    pieces.append(hyp.text[cursor:])
    text = "".join(pieces)
    return TaggedHypothesis(raw=serialize_tagged(text, new_spans), text=text, spans=new_spans)
