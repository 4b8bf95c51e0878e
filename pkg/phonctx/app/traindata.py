"""Training source sequences for the three two-pass variants.

A source is up to three regions: the detection output, the retrieved
candidates between ``<s>`` and ``</s>``, and the generation target. The
detection region and retrieval queries come from a standalone detection
model's output, never from the reference, so training sees the same kind
of input as inference.
"""
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Union

from pydantic import ValidationError

from phonctx.app.errors import InvalidInputError, TrainDataError
from phonctx.app.phoneme import Lexicon, pronounce
from phonctx.app.retrieval import EntityDatabase, interleave, render_prompt, retrieve
from phonctx.app.schemas import (
    PipelineMode, RegionKind, RegionRole, TaggedHypothesis, TrainingExample, TrainingRegion,
)
from phonctx.app.tags import canonical, entities_only
from phonctx.app.validation import PromptTemplate, RetrievalConfig

logger = logging.getLogger(__name__)

TRAINING_VARIANTS = (PipelineMode.FULL_FULL, PipelineMode.NE_FULL, PipelineMode.FULL_NE)


def _retrieval_region(queries: TaggedHypothesis, db: EntityDatabase, cfg: RetrievalConfig,
                      lexicon: Lexicon, template: PromptTemplate) -> TrainingRegion:
    results = []
    for span in queries.spans:
        try:
            prons = pronounce(lexicon, span.surface)
        except InvalidInputError:
            logger.debug(f"Skipping unpronounceable query '{span.surface}'")
            continue
        results.append(retrieve(db, prons, span.entity_class, cfg, query_surface=span.surface))
    prompt = render_prompt(interleave(results, cfg.cap), template)
    return TrainingRegion(kind=RegionKind.RETRIEVAL, role=RegionRole.PROMPT, text=prompt)


def build_example(variant: PipelineMode, reference: TaggedHypothesis, detection_output: TaggedHypothesis,
                  db: EntityDatabase, cfg: Optional[RetrievalConfig] = None, lexicon: Optional[Lexicon] = None,
                  utterance_id: str = "", teacher_inject: bool = False,
                  template: Optional[PromptTemplate] = None) -> TrainingExample:
    """Build one training source sequence.

    Without detected entities, FULL_FULL and FULL_NE emit only the tagged
    reference; NE_FULL still emits the empty context and the full
    generation target. ``teacher_inject`` forces the entity path with the
    reference spans as queries when detection found nothing.
    """
    variant = PipelineMode(variant)
    if variant not in TRAINING_VARIANTS:
        raise InvalidInputError(f"No training sequences for mode {variant.value}")
    cfg = cfg or RetrievalConfig()
    lexicon = lexicon or Lexicon.empty()
    template = template or PromptTemplate()

    queries, provenance = detection_output, "detection"
    if not detection_output.spans:
        if teacher_inject and reference.spans:
            queries, provenance = reference, "reference"
        else:
            queries, provenance = None, "none"

    if queries is None and variant != PipelineMode.NE_FULL:
        regions = [TrainingRegion(kind=RegionKind.DETECTION, role=RegionRole.DETECTION_TARGET, text=canonical(reference))]
        return TrainingExample(id=utterance_id, variant=variant, regions=regions, provenance=provenance)

    if variant == PipelineMode.NE_FULL:
        detection_text = entities_only(detection_output)
    else:
        detection_text = canonical(detection_output)

    if queries is None:
        retrieval = TrainingRegion(kind=RegionKind.RETRIEVAL, role=RegionRole.PROMPT, text=render_prompt([], template))
    else:
        retrieval = _retrieval_region(queries, db, cfg, lexicon, template)

    if variant == PipelineMode.FULL_NE:
        generation_text = entities_only(reference)
    else:
        generation_text = canonical(reference)

    regions = [
        TrainingRegion(kind=RegionKind.DETECTION, role=RegionRole.DETECTION_TARGET, text=detection_text),
        retrieval,
        TrainingRegion(kind=RegionKind.GENERATION, role=RegionRole.GENERATION_TARGET, text=generation_text),
    ]
    example = TrainingExample(id=utterance_id, variant=variant, regions=regions, provenance=provenance)
    check_regions(example, template)
    return example


def check_regions(example: TrainingExample, template: Optional[PromptTemplate] = None) -> None:
    """Validate region order and variant-specific presence."""
    template = template or PromptTemplate()
    kinds = [r.kind for r in example.regions]
    if kinds not in ([RegionKind.DETECTION], [RegionKind.DETECTION, RegionKind.RETRIEVAL, RegionKind.GENERATION]):
        raise InvalidInputError(f"Example {example.id}: regions out of order: {[k.value for k in kinds]}")
    if example.variant == PipelineMode.NE_FULL and len(kinds) == 1:
        raise InvalidInputError(f"Example {example.id}: NE_FULL examples always carry a generation region")
    for region in example.regions:
        expected = {
            RegionKind.DETECTION: RegionRole.DETECTION_TARGET,
            RegionKind.RETRIEVAL: RegionRole.PROMPT,
            RegionKind.GENERATION: RegionRole.GENERATION_TARGET,
        }[region.kind]
        if region.role != expected:
            raise InvalidInputError(f"Example {example.id}: {region.kind.value} region has role {region.role.value}")
        if region.kind == RegionKind.RETRIEVAL:
            if not (region.text.startswith(template.open) and region.text.endswith(template.close)):
                raise InvalidInputError(f"Example {example.id}: retrieval region is not delimited")
        elif template.open in region.text.split() or template.close in region.text.split():
            raise InvalidInputError(f"Example {example.id}: region delimiter inside {region.kind.value} region")


def emit_corpus(examples: Iterable[TrainingExample], path: Union[str, Path]) -> int:
    written = 0
    try:
        with open(path, "w", encoding="utf-8") as f:
            for example in examples:
                f.write(example.model_dump_json() + "\n")
                written += 1
    except OSError as e:
        raise TrainDataError(f"Failed writing training corpus {path}: {e}", written=written) from e
    logger.info(f"Wrote {written} training examples to {path}")
    return written


def load_corpus(path: Union[str, Path]) -> List[TrainingExample]:
    examples = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                examples.append(TrainingExample.model_validate_json(line))
            except ValidationError as e:
                raise TrainDataError(f"{path} line {line_no}: invalid training record") from e
    return examples
