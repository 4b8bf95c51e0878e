"""Class-partitioned personal entity databases and phonetic retrieval."""
import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from phonctx.app.distance import best_npd
from phonctx.app.errors import DatabaseError, InvalidInputError
from phonctx.app.phoneme import Lexicon, Pronunciation, normalize_surface, parse_pronunciation, pronounce
from phonctx.app.schemas import Candidate, EntityRecord, NamedEntity, NpdScore, RetrievalResult
from phonctx.app.validation import PromptTemplate, RetrievalConfig

logger = logging.getLogger(__name__)


def normalize_class(label: str) -> str:
    cls = label.strip().lower()
    if not cls or any(ch.isspace() for ch in cls):
        raise InvalidInputError(f"Entity class '{label}' must be a single non-empty token")
    if cls == "s":
        raise InvalidInputError("'s' is reserved for region delimiters")
    return cls


class EntityDatabase:
    """Immutable mapping from entity class to its list of named entities."""

    def __init__(self, partitions: Mapping[str, Sequence[NamedEntity]]):
        frozen: Dict[str, Tuple[NamedEntity, ...]] = {}
        for cls, entities in partitions.items():
            seen = set()
            for entity in entities:
                if entity.entity_class != cls:
                    raise DatabaseError(f"Entity '{entity.surface}' of class {entity.entity_class} filed under {cls}", entity=entity.surface)
                if entity.id in seen:
                    raise DatabaseError(f"Duplicate id '{entity.id}' in class {cls}", entity=entity.surface)
                seen.add(entity.id)
            frozen[cls] = tuple(entities)
        self._partitions = frozen

    @classmethod
    def from_entities(cls, entities: Iterable[NamedEntity]) -> "EntityDatabase":
        partitions: Dict[str, List[NamedEntity]] = {}
        for entity in entities:
            partitions.setdefault(entity.entity_class, []).append(entity)
        return cls(partitions)

    @property
    def partitions(self) -> Mapping[str, Tuple[NamedEntity, ...]]:
        return dict(self._partitions)

    def classes(self) -> List[str]:
        return sorted(self._partitions)

    def partition(self, entity_class: str) -> Tuple[NamedEntity, ...]:
        return self._partitions.get(entity_class, ())

    def entities(self) -> List[NamedEntity]:
        return [e for cls in self.classes() for e in self._partitions[cls]]

    def contains_surface(self, entity_class: str, surface: str) -> bool:
        key = normalize_surface(surface)
        return any(e.normalized == key for e in self.partition(entity_class))

    def __len__(self) -> int:
        return sum(len(p) for p in self._partitions.values())


def make_entity(entity_id: str, surface: str, entity_class: str, lexicon: Optional[Lexicon] = None,
                prons: Optional[Sequence[Pronunciation]] = None) -> NamedEntity:
    if not prons:
        prons = pronounce(lexicon or Lexicon.empty(), surface)
    return NamedEntity(id=entity_id, surface=surface, entity_class=normalize_class(entity_class), pronunciations=tuple(prons))


def load_database(path: Union[str, Path], lexicon: Optional[Lexicon] = None) -> EntityDatabase:
    entities: List[NamedEntity] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = EntityRecord.model_validate_json(line)
            except ValidationError as e:
                fields = ", ".join(".".join(str(p) for p in err["loc"]) or "record" for err in e.errors())
                raise DatabaseError(f"invalid entity record ({fields})", line_no=line_no) from e

            if not record.surface.strip():
                raise DatabaseError("entity surface is empty", line_no=line_no)
            try:
                prons = [parse_pronunciation(p) for p in record.prons or []]
                entity = make_entity(record.id or str(line_no), record.surface, record.entity_class, lexicon, prons)
            except InvalidInputError as e:
                raise DatabaseError(f"cannot resolve a pronunciation for '{record.surface}': {e.detail}",
                                    line_no=line_no, entity=record.surface) from e
            entities.append(entity)

    db = EntityDatabase.from_entities(entities)
    logger.info(f"Loaded {len(db)} entities in classes {db.classes()} from {path}")
    return db


def write_database(db: EntityDatabase, path: Union[str, Path]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for entity in db.entities():
            record = EntityRecord(id=entity.id, surface=entity.surface, entity_class=entity.entity_class,
                                  prons=[" ".join(p) for p in entity.pronunciations])
            f.write(record.model_dump_json(by_alias=True) + "\n")
            count += 1
    return count


def _sort_key(item: Tuple[Tuple[float, int, int], NamedEntity]):
    (value, dist, _), entity = item
    return value, dist, entity.normalized, entity.id


def retrieve(db: EntityDatabase, query_prons: Sequence[Pronunciation], entity_class: str,
             cfg: Optional[RetrievalConfig] = None, query_surface: str = "") -> RetrievalResult:
    """Rank entities of one class by NPD to the query.

    An entity is kept when its NPD is no greater than ``relative_factor``
    times the best NPD or lower than ``absolute_floor``; the kept entities
    are sorted by (NPD, edit distance, normalized surface, id) and capped.
    With ``cfg.fixed_count`` the rule is bypassed and the top entities are
    returned regardless of distance.
    """
    cfg = cfg or RetrievalConfig()
    if not query_prons:
        raise InvalidInputError("Retrieval needs at least one query pronunciation")
    if any(len(q) == 0 for q in query_prons):
        raise InvalidInputError("Query pronunciations must be non-empty")

    scored: List[Tuple[Tuple[float, int, int], NamedEntity]] = []
    if cfg.fixed_count is not None:
        for entity in db.partition(entity_class):
            scored.append((best_npd(query_prons, entity.pronunciations), entity))
    else:
        best = math.inf
        for entity in db.partition(entity_class):
            # Pruning bound never admits less than the final rule would keep.
            bound = max(cfg.relative_factor * best, best, cfg.absolute_floor)
            key = best_npd(query_prons, entity.pronunciations, None if math.isinf(bound) else bound)
            if key is None:
                continue
            best = min(best, key[0])
            scored.append((key, entity))
        scored = [item for item in scored
                  if item[0][0] <= cfg.relative_factor * best or item[0][0] < cfg.absolute_floor]

    scored.sort(key=_sort_key)
    candidates = [
        Candidate(entity=entity, score=NpdScore(value=value, query_len=qlen, edit_distance=dist))
        for (value, dist, qlen), entity in scored[:cfg.cap]
    ]
    return RetrievalResult(query_surface=query_surface, query_class=entity_class, candidates=candidates)


def interleave(results: Sequence[RetrievalResult], cap: int) -> List[str]:
    """Merge per-span candidate lists rank by rank, dropping repeats, up to ``cap``."""
    merged: List[str] = []
    seen = set()
    depth = max((len(r.candidates) for r in results), default=0)
    for rank in range(depth):
        for result in results:
            if rank >= len(result.candidates):
                continue
            surface = result.candidates[rank].entity.surface
            key = normalize_surface(surface)
            if key in seen:
                continue
            seen.add(key)
            merged.append(surface)
            if len(merged) >= cap:
                return merged
    return merged


def render_prompt(surfaces: Sequence[str], template: Optional[PromptTemplate] = None) -> str:
    template = template or PromptTemplate()
    if not surfaces:
        return f"{template.open} {template.close}"
    return f"{template.open} {template.separator.join(surfaces)} {template.close}"


def build_prompt(result: RetrievalResult, template: Optional[PromptTemplate] = None) -> str:
    return render_prompt(result.surfaces(), template)


def parse_prompt(prompt: str, template: Optional[PromptTemplate] = None) -> List[str]:
    """Recover candidate surfaces from a rendered prompt."""
    template = template or PromptTemplate()
    body = prompt.strip()
    start = body.find(template.open)
    end = body.rfind(template.close)
    if start < 0 or end < start:
        raise InvalidInputError(f"Prompt '{prompt}' is not delimited by {template.open} ... {template.close}")
    inner = body[start + len(template.open):end]
    sep = template.separator.strip()
    return [" ".join(part.split()) for part in inner.split(sep) if part.strip()]


def result_to_json(result: RetrievalResult) -> str:
    return json.dumps({
        "query": result.query_surface,
        "class": result.query_class,
        "candidates": [
            {"id": c.entity.id, "surface": c.entity.surface, "npd": c.score.value, "edit_distance": c.score.edit_distance}
            for c in result.candidates
        ],
    })
