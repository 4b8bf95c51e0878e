"""Pronunciation lexicons, surface normalization and letter-to-sound fallback.

Pronunciations are tuples of stress-free ARPAbet-style phoneme symbols. A
lexicon maps normalized surface forms to one or more pronunciations; words
the lexicon does not know are pronounced with a fixed rule table.
"""
import itertools
import logging
import re
import string
import unicodedata
from pathlib import Path
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

from phonctx.app.cache import cached
from phonctx.app.config import settings
from phonctx.app.errors import InvalidInputError, LexiconParseError

logger = logging.getLogger(__name__)

Pronunciation = Tuple[str, ...]

LEXICON_FORMATS = ("tsv", "cmudict")

_STRIP_CHARS = "".join(ch for ch in string.punctuation if ch not in "'-")
_STRESS_RE = re.compile(r"[012]$")
_SYMBOL_RE = re.compile(r"^[A-Z]+$")
_VARIANT_RE = re.compile(r"\(\d+\)$")

# Letter-to-sound rules. Digraphs are matched before single letters.
DIGRAPHS: Dict[str, Pronunciation] = {
    "th": ("TH",),
    "sh": ("SH",),
    "ch": ("CH",),
    "ph": ("F",),
    "ck": ("K",),
    "qu": ("K", "W"),
}
LETTERS: Dict[str, Pronunciation] = {
    "a": ("AE",), "b": ("B",), "c": ("K",), "d": ("D",), "e": ("EH",),
    "f": ("F",), "g": ("G",), "h": ("HH",), "i": ("IH",), "j": ("JH",),
    "k": ("K",), "l": ("L",), "m": ("M",), "n": ("N",), "o": ("AA",),
    "p": ("P",), "q": ("K",), "r": ("R",), "s": ("S",), "t": ("T",),
    "u": ("AH",), "v": ("V",), "w": ("W",), "x": ("K", "S"), "y": ("Y",),
    "z": ("Z",),
}
_VOWEL_LETTERS = set("aeiouy")


class Lexicon:
    """Immutable mapping from normalized surface to pronunciations."""

    __slots__ = ("_entries", "_inventory")

    def __init__(self, entries: Mapping[str, Iterable[Pronunciation]]):
        frozen = {surface: tuple(tuple(p) for p in prons) for surface, prons in entries.items()}
        self._entries = MappingProxyType(frozen)
        self._inventory = frozenset(ph for prons in frozen.values() for p in prons for ph in p)

    @property
    def entries(self) -> Mapping[str, Tuple[Pronunciation, ...]]:
        return self._entries

    @property
    def inventory(self) -> FrozenSet[str]:
        return self._inventory

    def lookup(self, surface: str) -> Tuple[Pronunciation, ...]:
        return self._entries.get(normalize_surface(surface), ())

    def __contains__(self, surface: str) -> bool:
        return normalize_surface(surface) in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    @classmethod
    def empty(cls) -> "Lexicon":
        return cls({})


def normalize_surface(surface: str) -> str:
    """Lowercase, trim, collapse whitespace and strip edge punctuation per token."""
    tokens = (tok.strip(_STRIP_CHARS) for tok in surface.lower().split())
    return " ".join(tok for tok in tokens if tok)


def normalize_phoneme(symbol: str) -> str:
    phoneme = _STRESS_RE.sub("", symbol.strip().upper())
    if not _SYMBOL_RE.match(phoneme):
        raise InvalidInputError(f"Malformed phoneme symbol '{symbol}'")
    return phoneme


def parse_pronunciation(text: str) -> Pronunciation:
    """Parse a space-separated phoneme string, stripping stress digits."""
    phonemes = tuple(normalize_phoneme(sym) for sym in text.split())
    if not phonemes:
        raise InvalidInputError("Pronunciation must contain at least one phoneme")
    return phonemes


def load_lexicon(path: Union[str, Path], format: str = "tsv") -> Lexicon:
    if format not in LEXICON_FORMATS:
        raise LexiconParseError(f"Unknown lexicon format '{format}'; expected one of {LEXICON_FORMATS}")

    entries: Dict[str, List[Pronunciation]] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith(";;;"):
                continue

            if format == "tsv":
                if "\t" not in line:
                    raise LexiconParseError("expected SURFACE<TAB>PHONEMES", line_no)
                surface, _, phones = line.partition("\t")
            else:
                surface, _, phones = line.strip().partition(" ")
                surface = _VARIANT_RE.sub("", surface)

            key = normalize_surface(surface)
            if not key:
                raise LexiconParseError("empty surface form", line_no)
            try:
                pron = parse_pronunciation(phones)
            except InvalidInputError as e:
                raise LexiconParseError(e.detail, line_no) from e

            prons = entries.setdefault(key, [])
            if pron not in prons:
                prons.append(pron)

    if not entries:
        raise LexiconParseError(f"Lexicon {path} contains no entries")

    lexicon = Lexicon(entries)
    logger.info(f"Loaded {len(lexicon)} lexicon entries over {len(lexicon.inventory)} phonemes from {path}")
    return lexicon


def write_lexicon(lexicon: Lexicon, path: Union[str, Path]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for surface in sorted(lexicon.entries):
            for pron in lexicon.entries[surface]:
                f.write(f"{surface.upper()}\t{' '.join(pron)}\n")
                count += 1
    return count


def _fold_letters(token: str) -> str:
    ascii_form = unicodedata.normalize("NFKD", token).encode("ascii", "ignore").decode("ascii")
    return "".join(ch for ch in ascii_form.lower() if "a" <= ch <= "z")


@cached("g2p")
def g2p_fallback(surface_token: str) -> Pronunciation:
    """Pronounce one token with the fixed letter-to-sound rule table.

    Apostrophes and hyphens are skipped, a silent final 'e' is dropped when
    another vowel letter precedes it, and doubled consonants sound once.
    """
    letters = _fold_letters(surface_token)
    if not letters:
        raise InvalidInputError(f"Token '{surface_token}' has no mappable characters")

    if len(letters) > 1 and letters.endswith("e") and _VOWEL_LETTERS & set(letters[:-1]):
        letters = letters[:-1]

    collapsed = [letters[0]]
    for ch in letters[1:]:
        if ch == collapsed[-1] and ch not in _VOWEL_LETTERS:
            continue
        collapsed.append(ch)
    letters = "".join(collapsed)

    phonemes: List[str] = []
    i = 0
    while i < len(letters):
        pair = letters[i:i + 2]
        if pair in DIGRAPHS:
            phonemes.extend(DIGRAPHS[pair])
            i += 2
        else:
            phonemes.extend(LETTERS[letters[i]])
            i += 1
    return tuple(phonemes)


def pronounce(lex: Lexicon, surface: str, cap: Optional[int] = None) -> List[Pronunciation]:
    """Return the pronunciations of a (possibly multi-token) surface form.

    Known tokens contribute every lexicon pronunciation, unknown ones their
    letter-to-sound fallback. Token pronunciations are concatenated over the
    cross product, keeping the first ``cap`` variants.
    """
    cap = settings.PRONUNCIATION_CAP if cap is None else cap
    key = normalize_surface(surface)
    if not key:
        raise InvalidInputError(f"Surface '{surface}' is empty after normalization")

    whole = lex.entries.get(key)
    if whole:
        return list(whole[:cap])

    per_token: List[Tuple[Pronunciation, ...]] = []
    for token in key.split():
        prons = lex.entries.get(token)
        per_token.append(prons if prons else (g2p_fallback(token),))

    variants: List[Pronunciation] = []
    for combo in itertools.product(*per_token):
        pron = tuple(ph for part in combo for ph in part)
        if pron not in variants:
            variants.append(pron)
        if len(variants) >= cap:
            break
    return variants
