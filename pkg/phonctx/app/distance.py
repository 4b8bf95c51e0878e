"""Phoneme edit distance and normalized phonetic distance (NPD).

NPD divides the unit-cost Levenshtein distance by the number of phonemes in
the *query*, so it is not symmetric in its arguments.
"""
from typing import Optional, Sequence, Tuple

from rapidfuzz.distance import Levenshtein

from phonctx.app.errors import InvalidInputError
from phonctx.app.schemas import NpdScore


def phoneme_edit_distance(a: Sequence[str], b: Sequence[str], score_cutoff: Optional[int] = None) -> int:
    """Unit-cost Levenshtein distance over phoneme symbols.

    With ``score_cutoff`` the computation may stop early; any distance above
    the cutoff is reported as ``score_cutoff + 1``. Distances at or below it
    are exact.
    """
    if score_cutoff is not None and abs(len(a) - len(b)) > score_cutoff:
        return score_cutoff + 1
    return Levenshtein.distance(a, b, score_cutoff=score_cutoff)


def npd(query: Sequence[str], entry: Sequence[str]) -> NpdScore:
    if not query:
        raise InvalidInputError("NPD query pronunciation must be non-empty")
    dist = Levenshtein.distance(query, entry)
    return NpdScore(value=dist / len(query), query_len=len(query), edit_distance=dist)


def best_npd(
    query_prons: Sequence[Sequence[str]],
    entry_prons: Sequence[Sequence[str]],
    max_value: Optional[float] = None,
) -> Optional[Tuple[float, int, int]]:
    """Minimum (value, edit_distance, query_len) over the cross product.

    When ``max_value`` is given, pairs whose NPD provably exceeds it are
    pruned and ``None`` is returned if every pair does.
    """
    best: Optional[Tuple[float, int, int]] = None
    for q in query_prons:
        qlen = len(q)
        cutoff = None if max_value is None else int(max_value * qlen) + 1
        for e in entry_prons:
            dist = phoneme_edit_distance(q, e, score_cutoff=cutoff)
            if cutoff is not None and dist > cutoff:
                continue
            key = (dist / qlen, dist, qlen)
            if best is None or key < best:
                best = key
    if best is not None and max_value is not None and best[0] > max_value:
        return None
    return best


def npd_multi(query_prons: Sequence[Sequence[str]], entry_prons: Sequence[Sequence[str]]) -> NpdScore:
    if not query_prons or not entry_prons:
        raise InvalidInputError("npd_multi needs at least one query and one entry pronunciation")
    if any(len(q) == 0 for q in query_prons):
        raise InvalidInputError("NPD query pronunciation must be non-empty")
    value, dist, qlen = best_npd(query_prons, entry_prons)
    return NpdScore(value=value, query_len=qlen, edit_distance=dist)
