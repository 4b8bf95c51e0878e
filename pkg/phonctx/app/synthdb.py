"""Per-utterance personal database synthesis.

For every utterance and class c a size n(c) is drawn from N(c), n(c) unique
surfaces are drawn from the weighted pool NE(c) without replacement, and the
utterance's own reference entities are added if missing.
"""
import logging
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from phonctx.app.errors import ConfigError, InvalidInputError
from phonctx.app.phoneme import Lexicon, normalize_surface
from phonctx.app.retrieval import EntityDatabase, make_entity, normalize_class
from phonctx.app.schemas import NamedEntity, TaggedHypothesis

logger = logging.getLogger(__name__)


class EntityPool(BaseModel):
    """Per class, the weighted surfaces of NE(c)."""

    model_config = ConfigDict(frozen=True)

    classes: Dict[str, List[Tuple[str, float]]] = {}

    @field_validator("classes")
    def validate_classes(cls, v):
        for label, entries in v.items():
            seen = set()
            for surface, weight in entries:
                if weight <= 0:
                    raise ValueError(f"Weight for '{surface}' in class {label} must be positive, not {weight}")
                key = normalize_surface(surface)
                if key in seen:
                    raise ValueError(f"Duplicate surface '{surface}' in class {label}")
                seen.add(key)
        return v

    def surfaces(self, entity_class: str) -> List[str]:
        return [s for s, _ in self.classes.get(entity_class, [])]

    def weights(self, entity_class: str) -> np.ndarray:
        return np.array([w for _, w in self.classes.get(entity_class, [])], dtype=float)


class SizeDistribution(BaseModel):
    """Per class, the histogram N(c) over entity counts."""

    model_config = ConfigDict(frozen=True)

    classes: Dict[str, Dict[int, float]] = {}

    @field_validator("classes")
    def validate_classes(cls, v):
        for label, histogram in v.items():
            if not histogram:
                raise ValueError(f"Size distribution for class {label} is empty")
            if any(n < 0 for n in histogram):
                raise ValueError(f"Sizes for class {label} must be non-negative")
            if any(p < 0 for p in histogram.values()):
                raise ValueError(f"Probabilities for class {label} must be non-negative")
            total = sum(histogram.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"Probabilities for class {label} sum to {total}, not 1")
        return v


def _read_triples(path: Union[str, Path]) -> Iterator[Tuple[int, str, str, str]]:
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) < 3:
                raise ConfigError(f"{path} line {line_no}: expected 'class value weight'")
            yield line_no, parts[0], " ".join(parts[1:-1]), parts[-1]


def load_pool(path: Union[str, Path]) -> EntityPool:
    classes: Dict[str, List[Tuple[str, float]]] = {}
    for line_no, label, surface, weight in _read_triples(path):
        try:
            classes.setdefault(normalize_class(label), []).append((surface, float(weight)))
        except (ValueError, InvalidInputError) as e:
            raise ConfigError(f"{path} line {line_no}: {e}") from e
    try:
        return EntityPool(classes=classes)
    except ValueError as e:
        raise ConfigError(f"Invalid pool {path}: {e}") from e


def load_sizes(path: Union[str, Path]) -> SizeDistribution:
    classes: Dict[str, Dict[int, float]] = {}
    for line_no, label, size, prob in _read_triples(path):
        try:
            histogram = classes.setdefault(normalize_class(label), {})
            histogram[int(size)] = histogram.get(int(size), 0.0) + float(prob)
        except (ValueError, InvalidInputError) as e:
            raise ConfigError(f"{path} line {line_no}: {e}") from e
    try:
        return SizeDistribution(classes=classes)
    except ValueError as e:
        raise ConfigError(f"Invalid size distribution {path}: {e}") from e


def write_pool(pool: EntityPool, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for label in sorted(pool.classes):
            for surface, weight in pool.classes[label]:
                f.write(f"{label} {surface} {weight:g}\n")


def write_sizes(sizes: SizeDistribution, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for label in sorted(sizes.classes):
            for n, p in sorted(sizes.classes[label].items()):
                f.write(f"{label} {n} {p!r}\n")


def weighted_sample(weights: np.ndarray, n: int, rng: np.random.Generator, uniform: bool = False) -> np.ndarray:
    """Indices of ``n`` items drawn by weight without replacement.

    Uses exponential keys: item i gets log(u_i) / w_i and the ``n`` largest
    keys win, which matches successive weighted draws exactly.
    """
    if n <= 0 or len(weights) == 0:
        return np.zeros(0, dtype=int)
    w = np.ones(len(weights)) if uniform else np.asarray(weights, dtype=float)
    keys = np.log(rng.random(len(w))) / w
    order = np.argsort(-keys, kind="stable")
    return order[:n]


def synthesize(pool: EntityPool, sizes: SizeDistribution, reference_entities: Sequence[Tuple[str, str]],
               seed: int, lexicon: Optional[Lexicon] = None, uniform: bool = False) -> EntityDatabase:
    rng = np.random.default_rng(seed)
    entities: List[NamedEntity] = []
    present: Dict[str, set] = {}

    for label in sorted(set(pool.classes) | set(sizes.classes)):
        histogram = sizes.classes.get(label, {0: 1.0})
        support = np.array(list(histogram.keys()))
        n = int(rng.choice(support, p=np.array(list(histogram.values()))))
        surfaces = pool.surfaces(label)
        if n > len(surfaces):
            logger.warning(f"Class {label}: drew n={n} but the pool has {len(surfaces)} entities; clamping")
            n = len(surfaces)
        seen = present.setdefault(label, set())
        for index in weighted_sample(pool.weights(label), n, rng, uniform=uniform):
            surface = surfaces[index]
            entities.append(make_entity(f"{label}-{len(seen):05d}", surface, label, lexicon))
            seen.add(normalize_surface(surface))

    for label, surface in reference_entities:
        label = normalize_class(label)
        seen = present.setdefault(label, set())
        if normalize_surface(surface) in seen:
            continue
        entities.append(make_entity(f"{label}-{len(seen):05d}", surface, label, lexicon))
        seen.add(normalize_surface(surface))

    return EntityDatabase.from_entities(entities)


def reference_entities(hyp: TaggedHypothesis) -> List[Tuple[str, str]]:
    return [(span.entity_class, span.surface) for span in hyp.spans]


def utterance_seed(seed: int, index: int) -> int:
    return seed ^ index


def estimate_pool(tagged_corpus: Iterable[TaggedHypothesis]) -> EntityPool:
    """Weight each entity surface by its occurrence count, per class."""
    counts: Dict[str, Counter] = {}
    display: Dict[Tuple[str, str], str] = {}
    for hyp in tagged_corpus:
        for span in hyp.spans:
            key = normalize_surface(span.surface)
            counts.setdefault(span.entity_class, Counter())[key] += 1
            display.setdefault((span.entity_class, key), span.surface)

    classes = {
        label: [(display[(label, key)], float(count))
                for key, count in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))]
        for label, counter in sorted(counts.items())
    }
    return EntityPool(classes=classes)


def estimate_sizes(databases: Iterable[EntityDatabase], classes: Optional[Iterable[str]] = None) -> SizeDistribution:
    """Histogram of partition sizes across databases."""
    databases = list(databases)
    if not databases:
        raise InvalidInputError("Cannot estimate sizes from zero databases")
    labels = sorted(set(classes) if classes is not None else {c for db in databases for c in db.classes()})
    histograms = {}
    for label in labels:
        counter = Counter(len(db.partition(label)) for db in databases)
        histograms[label] = {n: count / len(databases) for n, count in sorted(counter.items())}
    return SizeDistribution(classes=histograms)
