"""Decoder interface and the deterministic simulated decoder.

The simulator stands in for the speech LLM. Context-free decoding corrupts
each ground-truth entity with sampled phoneme edits and respells the result;
context-aware decoding picks, per entity, the prompt candidate closest in
NPD to what was "heard" (the corrupted pronunciation), and keeps what it
heard when no candidate lies within the correction limit.
"""
import logging
import zlib
from typing import Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from phonctx.app.distance import best_npd
from phonctx.app.errors import InvalidInputError
from phonctx.app.phoneme import Lexicon, Pronunciation, normalize_surface, pronounce
from phonctx.app.retrieval import parse_prompt
from phonctx.app.schemas import DecoderRequest, DecoderTask, EntitySpan, TaggedHypothesis
from phonctx.app.tags import entities_only, parse_tagged, replace_spans, serialize_tagged
from phonctx.app.validation import PromptTemplate, SimulatorConfig

logger = logging.getLogger(__name__)


class Decoder(Protocol):
    """Synchronous request/response decoding backend."""

    # Whether decode() may be called from several threads at once.
    concurrent_safe: bool

    def decode(self, request: DecoderRequest) -> str:
        ...


# Representative spellings used to write corrupted pronunciations back as text.
RESPELLING = {
    "AA": "o", "AE": "a", "AH": "u", "AO": "au", "AW": "ow", "AY": "ai",
    "EH": "e", "ER": "er", "EY": "ay", "IH": "i", "IY": "ee", "OW": "oa",
    "OY": "oy", "UH": "oo", "UW": "ou",
    "B": "b", "CH": "ch", "D": "d", "DH": "th", "F": "f", "G": "g",
    "HH": "h", "JH": "j", "K": "k", "L": "l", "M": "m", "N": "n",
    "NG": "ng", "P": "p", "R": "r", "S": "s", "SH": "sh", "T": "t",
    "TH": "th", "V": "v", "W": "w", "Y": "y", "Z": "z", "ZH": "zh",
}

# Phonemes whose respelling the letter-to-sound rules read back unchanged.
EDIT_ALPHABET = (
    "AA", "AE", "AH", "B", "CH", "D", "EH", "F", "G", "HH", "IH", "JH", "K",
    "L", "M", "N", "P", "R", "S", "SH", "T", "TH", "V", "W", "Y", "Z",
)


def respell(pron: Pronunciation) -> str:
    return "".join(RESPELLING.get(ph, ph.lower()) for ph in pron)


class _HeardEntity:
    __slots__ = ("surface", "pron", "dropped")

    def __init__(self, surface: str, pron: Pronunciation, dropped: bool):
        self.surface = surface
        self.pron = pron
        self.dropped = dropped


class SimulatedDecoder:
    """Seeded stand-in for a speech LLM.

    ``config.correction_limit`` bounds how far a prompt candidate may be from
    what was heard before it replaces it. ``float("inf")`` removes the bound,
    so every context-aware pass takes the minimum-NPD candidate outright.
    """

    concurrent_safe = True

    def __init__(self, config: SimulatorConfig, lexicon: Optional[Lexicon] = None,
                 known_classes: Optional[Iterable[str]] = None, template: Optional[PromptTemplate] = None,
                 alphabet: Sequence[str] = EDIT_ALPHABET):
        self.config = config
        self.lexicon = lexicon or Lexicon.empty()
        self.known_classes = None if known_classes is None else tuple(known_classes)
        self.template = template or PromptTemplate()
        self.alphabet = tuple(alphabet)
        self._ks = np.array(list(config.corruption.keys()))
        self._ps = np.array(list(config.corruption.values()))

    def _rng(self, utterance_id: str, span_index: int) -> np.random.Generator:
        key = zlib.crc32(utterance_id.encode("utf-8")) & 0xFFFFFFFF
        return np.random.default_rng(np.random.SeedSequence([self.config.seed, key, span_index]))

    def _token_pron(self, token: str) -> Pronunciation:
        try:
            return pronounce(self.lexicon, token)[0]
        except InvalidInputError:
            return ()

    def _corrupt(self, rng: np.random.Generator, span: EntitySpan) -> _HeardEntity:
        k = int(rng.choice(self._ks, p=self._ps))
        dropped = bool(rng.random() < self.config.tag_drop)
        tokens = span.surface.split()
        prons = [list(self._token_pron(tok)) for tok in tokens]
        if k == 0:
            return _HeardEntity(span.surface, tuple(ph for p in prons for ph in p), dropped)

        touched = set()
        for _ in range(k):
            total = sum(len(p) for p in prons)
            pos = int(rng.integers(total + 1))
            index = 0
            while index < len(prons) - 1 and pos > len(prons[index]):
                pos -= len(prons[index])
                index += 1
            pron = prons[index]
            op = int(rng.integers(3))
            if op == 2 and len(pron) > 1 and pos < len(pron):
                del pron[pos]
            elif op == 1 or pos == len(pron):
                pron.insert(pos, self.alphabet[int(rng.integers(len(self.alphabet)))])
            else:
                choices = [ph for ph in self.alphabet if ph != pron[pos]]
                pron[pos] = choices[int(rng.integers(len(choices)))]
            touched.add(index)

        surfaces = []
        for index, (token, pron) in enumerate(zip(tokens, prons)):
            if index not in touched:
                surfaces.append(token)
                continue
            spelled = respell(tuple(pron))
            surfaces.append(spelled.capitalize() if token[:1].isupper() else spelled)
        return _HeardEntity(" ".join(surfaces), tuple(ph for p in prons for ph in p), dropped)

    def hear(self, request: DecoderRequest) -> Tuple[TaggedHypothesis, List[_HeardEntity]]:
        truth = parse_tagged(request.utterance.transcript, self.known_classes)
        heard = [self._corrupt(self._rng(request.utterance.id, i), span) for i, span in enumerate(truth.spans)]
        return truth, heard

    def _choose(self, candidates: Sequence[str], heard: _HeardEntity) -> str:
        """Closest candidate to what was heard; among equals, the heard spelling, else the earliest."""
        best_surface, best_key = heard.surface, None
        if not heard.pron:
            return best_surface
        heard_key = normalize_surface(heard.surface)
        for surface in candidates:
            try:
                prons = pronounce(self.lexicon, surface)
            except InvalidInputError:
                continue
            value = best_npd([heard.pron], prons)[0]
            if value > self.config.correction_limit:
                continue
            key = (value, normalize_surface(surface) != heard_key)
            if best_key is None or key < best_key:
                best_surface, best_key = surface, key
        return best_surface

    def decode(self, request: DecoderRequest) -> str:
        truth, heard = self.hear(request)

        if request.task == DecoderTask.NE_ONLY_DETECTION or request.context_prompt is None:
            surfaces = [h.surface for h in heard]
        else:
            candidates = parse_prompt(request.context_prompt, self.template)
            surfaces = [self._choose(candidates, h) if candidates else h.surface for h in heard]

        hyp = replace_spans(truth, surfaces)
        kept = [span for span, h in zip(hyp.spans, heard) if not h.dropped]
        if request.task == DecoderTask.FULL_ASR:
            return serialize_tagged(hyp.text, kept)
        return entities_only(TaggedHypothesis(raw="", text=hyp.text, spans=kept))


def simulated_decoder(behavior: SimulatorConfig, lexicon: Optional[Lexicon] = None,
                      known_classes: Optional[Iterable[str]] = None) -> SimulatedDecoder:
    return SimulatedDecoder(behavior, lexicon=lexicon, known_classes=known_classes)
