"""Synthetic benchmark: lexicon, entity pool, size histogram and tagged corpus.

Names are built from consonant-vowel syllables ending in a consonant, so the
letter-to-sound rules read them back letter by letter and every name has a
distinct pronunciation at least ``min_distance`` phoneme edits from the rest.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from rapidfuzz.distance import Levenshtein

from phonctx.app.config import settings
from phonctx.app.errors import ConfigError
from phonctx.app.phoneme import Lexicon, Pronunciation, g2p_fallback, write_lexicon
from phonctx.app.pipeline import write_utterances
from phonctx.app.schemas import Utterance
from phonctx.app.synthdb import EntityPool, SizeDistribution, write_pool, write_sizes
from phonctx.app.tags import close_tag, open_tag

logger = logging.getLogger(__name__)

CONSONANTS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "ch", "th"]
VOWELS = ["a", "e", "i", "o", "u"]
FINALS = ["d", "k", "l", "m", "n", "r", "s", "t"]

DEFAULT_TEMPLATES: List[Tuple[str, float]] = [
    ("call {contact}", 0.3),
    ("send a message to {contact}", 0.2),
    ("text {contact} on {app}", 0.15),
    ("open {app}", 0.1),
    ("remind me to ring {contact} tomorrow", 0.15),
    ("what time is it", 0.1),
]


class BenchmarkGenerator:
    def __init__(self, seed: int = settings.SEED, contacts: int = 1000, apps: int = 60,
                 contact_syllables: int = 3, app_syllables: int = 2, min_distance: int = 3,
                 templates: Optional[Sequence[Tuple[str, float]]] = None):
        self.seed = seed
        self.counts = {"contact": contacts, "app": apps}
        self.syllables = {"contact": contact_syllables, "app": app_syllables}
        self.min_distance = min_distance
        self.templates = list(templates or DEFAULT_TEMPLATES)
        self.rng = np.random.default_rng(seed)
        self._accepted: List[Pronunciation] = []

    def _spell(self, syllables: int) -> str:
        parts = []
        for _ in range(syllables):
            parts.append(CONSONANTS[int(self.rng.integers(len(CONSONANTS)))])
            parts.append(VOWELS[int(self.rng.integers(len(VOWELS)))])
        parts.append(FINALS[int(self.rng.integers(len(FINALS)))])
        return "".join(parts).capitalize()

    def _distinct(self, pron: Pronunciation) -> bool:
        cutoff = self.min_distance - 1
        return all(Levenshtein.distance(pron, other, score_cutoff=cutoff) > cutoff for other in self._accepted)

    def _generate_names(self, entity_class: str) -> List[str]:
        names: List[str] = []
        attempts = 0
        limit = 200 * self.counts[entity_class]
        while len(names) < self.counts[entity_class]:
            attempts += 1
            if attempts > limit:
                raise ConfigError(f"Could not find {self.counts[entity_class]} distinct {entity_class} names "
                                  f"at distance {self.min_distance}; got {len(names)}")
            surface = self._spell(self.syllables[entity_class])
            pron = g2p_fallback(surface.lower())
            if not self._distinct(pron):
                continue
            self._accepted.append(pron)
            names.append(surface)
        logger.info(f"Generated {len(names)} {entity_class} names in {attempts} attempts")
        return names

    def generate_pool(self) -> EntityPool:
        classes = {}
        for entity_class in sorted(self.counts):
            names = self._generate_names(entity_class)
            # Zipf-like popularity so frequent contacts recur across utterances.
            weights = 1.0 / np.sqrt(np.arange(1, len(names) + 1))
            classes[entity_class] = [(name, float(round(w, 6))) for name, w in zip(names, weights)]
        return EntityPool(classes=classes)

    @staticmethod
    def lexicon_for(pool: EntityPool) -> Lexicon:
        return Lexicon({
            surface.lower(): [g2p_fallback(surface.lower())]
            for label in pool.classes for surface in pool.surfaces(label)
        })

    def size_distribution(self, contacts: int = 300, apps: Sequence[int] = (5, 10)) -> SizeDistribution:
        app_sizes = {n: 1.0 / len(apps) for n in apps}
        return SizeDistribution(classes={"contact": {contacts: 1.0}, "app": app_sizes})

    def _draw(self, pool: EntityPool, entity_class: str) -> str:
        weights = pool.weights(entity_class)
        index = int(self.rng.choice(len(weights), p=weights / weights.sum()))
        return pool.surfaces(entity_class)[index]

    def generate_corpus(self, pool: EntityPool, utterances: int = 1000) -> List[Utterance]:
        texts = [t for t, _ in self.templates]
        probs = np.array([w for _, w in self.templates], dtype=float)
        probs = probs / probs.sum()
        corpus = []
        for i in range(utterances):
            template = texts[int(self.rng.choice(len(texts), p=probs))]
            words = []
            for word in template.split():
                if word.startswith("{") and word.endswith("}"):
                    label = word[1:-1]
                    words.extend([open_tag(label), self._draw(pool, label), close_tag(label)])
                else:
                    words.append(word)
            corpus.append(Utterance(id=f"utt-{i:05d}", transcript=" ".join(words)))
        return corpus

    def generate_data(self, out_dir: Union[str, Path], utterances: int = 1000, contacts_per_db: int = 300) -> Dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        pool = self.generate_pool()
        if contacts_per_db > len(pool.surfaces("contact")):
            raise ConfigError(f"Databases of {contacts_per_db} contacts need a larger contact pool")
        paths = {
            "lexicon": out / "lexicon.tsv",
            "pool": out / "pool.txt",
            "sizes": out / "sizes.txt",
            "corpus": out / "corpus.jsonl",
        }
        write_lexicon(self.lexicon_for(pool), paths["lexicon"])
        write_pool(pool, paths["pool"])
        write_sizes(self.size_distribution(contacts_per_db), paths["sizes"])
        write_utterances(self.generate_corpus(pool, utterances), paths["corpus"])
        logger.info(f"Wrote benchmark with {utterances} utterances to {out}")
        return paths
