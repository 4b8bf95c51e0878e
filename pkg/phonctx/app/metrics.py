"""Word error rate and named entity error rate.

WER ignores entity tags. NER is the fraction of reference entities that are
not recovered by a same-class hypothesis span with the same normalized
surface; corpus figures pool counts over utterances.
"""
import logging
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from phonctx.app.errors import InvalidInputError
from phonctx.app.phoneme import normalize_surface
from phonctx.app.schemas import EntitySpan, NerReport, TaggedHypothesis, WerReport
from phonctx.app.tags import safe_parse

logger = logging.getLogger(__name__)

TextOrTagged = Union[str, TaggedHypothesis]

REPORT_COLUMNS = [
    "mode", "utterances", "ref_words", "word_errors", "substitutions", "insertions", "deletions", "wer",
    "ref_entities", "entity_errors", "ner", "detected_entities", "false_positives",
]


class MatchPolicy(str, Enum):
    GREEDY = "greedy"
    ALIGNED = "aligned"


def _as_tagged(value: TextOrTagged, known_classes: Optional[Iterable[str]]) -> TaggedHypothesis:
    if isinstance(value, TaggedHypothesis):
        return value
    return safe_parse(value, known_classes)[0]


def _words(value: TextOrTagged, known_classes: Optional[Iterable[str]]) -> List[str]:
    return _as_tagged(value, known_classes).text.lower().split()


def align_words(ref: Sequence[str], hyp: Sequence[str]) -> Tuple[int, int, int]:
    """(substitutions, insertions, deletions) of one minimal alignment.

    Backtrace prefers the diagonal, then insertion, then deletion.
    """
    n, m = len(ref), len(hyp)
    dp = np.zeros((n + 1, m + 1), dtype=np.int64)
    dp[0, :] = np.arange(m + 1)
    offsets = np.arange(m + 1)
    hyp_arr = np.array(hyp, dtype=object)
    for i in range(1, n + 1):
        cost = (hyp_arr != ref[i - 1]).astype(np.int64) if m else np.zeros(0, dtype=np.int64)
        best = np.empty(m + 1, dtype=np.int64)
        best[0] = i
        best[1:] = np.minimum(dp[i - 1, :-1] + cost, dp[i - 1, 1:] + 1)
        # Insertions chain along the row: dp[i, j] = min_k (best[k] + j - k).
        dp[i] = np.minimum.accumulate(best - offsets) + offsets

    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dp[i, j] == dp[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += int(ref[i - 1] != hyp[j - 1])
            i, j = i - 1, j - 1
        elif j > 0 and dp[i, j] == dp[i, j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return subs, ins, dels


def wer(reference: TextOrTagged, hypothesis: TextOrTagged, known_classes: Optional[Iterable[str]] = None) -> WerReport:
    ref_words = _words(reference, known_classes)
    if not ref_words:
        raise InvalidInputError("WER is undefined for an empty reference")
    subs, ins, dels = align_words(ref_words, _words(hypothesis, known_classes))
    return WerReport(substitutions=subs, insertions=ins, deletions=dels, ref_words=len(ref_words))


def _same(r: EntitySpan, h: EntitySpan) -> bool:
    return r.entity_class == h.entity_class and normalize_surface(r.surface) == normalize_surface(h.surface)


def _greedy_matches(ref: Sequence[EntitySpan], hyp: Sequence[EntitySpan]) -> int:
    matched = 0
    pointer = 0
    for r in ref:
        for index in range(pointer, len(hyp)):
            if _same(r, hyp[index]):
                matched += 1
                pointer = index + 1
                break
    return matched


def _aligned_matches(ref: Sequence[EntitySpan], hyp: Sequence[EntitySpan]) -> int:
    table = np.zeros((len(ref) + 1, len(hyp) + 1), dtype=np.int64)
    for i, r in enumerate(ref, start=1):
        for j, h in enumerate(hyp, start=1):
            if _same(r, h):
                table[i, j] = table[i - 1, j - 1] + 1
            else:
                table[i, j] = max(table[i - 1, j], table[i, j - 1])
    return int(table[-1, -1])


def ner(reference: TextOrTagged, hypothesis: TextOrTagged, known_classes: Optional[Iterable[str]] = None,
        policy: MatchPolicy = MatchPolicy.GREEDY) -> NerReport:
    ref = _as_tagged(reference, known_classes).spans
    hyp = _as_tagged(hypothesis, known_classes).spans
    matcher = _greedy_matches if MatchPolicy(policy) == MatchPolicy.GREEDY else _aligned_matches
    matched = matcher(ref, hyp)
    return NerReport(ref_entities=len(ref), entity_errors=len(ref) - matched, hyp_entities=len(hyp),
                     false_positives=len(hyp) - matched)


def corpus_report(pairs: Iterable[Tuple[TextOrTagged, TextOrTagged, str]],
                  known_classes: Optional[Iterable[str]] = None,
                  policy: MatchPolicy = MatchPolicy.GREEDY) -> pd.DataFrame:
    """Pooled WER/NER per mode, one row per mode in order of first appearance."""
    rows = []
    for reference, hypothesis, mode in pairs:
        ref = _as_tagged(reference, known_classes)
        hyp = _as_tagged(hypothesis, known_classes)
        ref_words = ref.text.lower().split()
        subs, ins, dels = align_words(ref_words, hyp.text.lower().split())
        entities = ner(ref, hyp, policy=policy)
        rows.append({
            "mode": getattr(mode, "value", mode), "utterances": 1, "ref_words": len(ref_words),
            "substitutions": subs, "insertions": ins, "deletions": dels,
            "ref_entities": entities.ref_entities, "entity_errors": entities.entity_errors,
            "detected_entities": entities.hyp_entities, "false_positives": entities.false_positives,
        })

    if not rows:
        return pd.DataFrame(columns=REPORT_COLUMNS)

    frame = pd.DataFrame(rows)
    totals = frame.groupby("mode", sort=False).sum(numeric_only=True).reset_index()
    totals["word_errors"] = totals["substitutions"] + totals["insertions"] + totals["deletions"]
    totals["wer"] = totals["word_errors"].div(totals["ref_words"].where(totals["ref_words"] > 0))
    totals["ner"] = totals["entity_errors"].div(totals["ref_entities"].where(totals["ref_entities"] > 0))
    return totals[REPORT_COLUMNS]


def format_report(report: pd.DataFrame) -> str:
    """Plain-text table with WER/NER in percent."""
    if report.empty:
        return "(no utterances)"
    table = report.copy()
    table["WER %"] = (table["wer"] * 100).round(2)
    table["NER %"] = (table["ner"] * 100).round(2)
    keep = [c for c in table.columns if c not in ("wer", "ner", "substitutions", "insertions", "deletions")]
    return table[keep].to_string(index=False, na_rep="-")


def report_jsonl(report: pd.DataFrame) -> str:
    if report.empty:
        return ""
    return report.to_json(orient="records", lines=True)
