from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, computed_field

from phonctx.app.phoneme import Pronunciation, normalize_surface
from phonctx.app.trace import StageEvent


# Distance Schemas
class NpdScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float = Field(..., ge=0)
    query_len: int = Field(..., gt=0)
    edit_distance: int = Field(..., ge=0)


# Entity Schemas
class NamedEntity(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    surface: str
    entity_class: str
    pronunciations: Tuple[Pronunciation, ...] = Field(..., min_length=1)

    @property
    def normalized(self) -> str:
        return normalize_surface(self.surface)


class EntityRecord(BaseModel):
    """One line of an entity database file."""

    model_config = ConfigDict(populate_by_name=True)

    id: Optional[str] = None
    surface: str
    entity_class: str = Field(..., alias="class")
    prons: Optional[List[str]] = None


class Candidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    entity: NamedEntity
    score: NpdScore


class RetrievalResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    query_surface: str
    query_class: str
    candidates: List[Candidate] = []

    def surfaces(self) -> List[str]:
        return [c.entity.surface for c in self.candidates]


# Tagged Text Schemas
class EntitySpan(BaseModel):
    model_config = ConfigDict(frozen=True)

    entity_class: str
    surface: str = Field(..., min_length=1)
    start: int = Field(..., ge=0)
    end: int = Field(..., ge=0)
    auto_closed: bool = False


class TaggedHypothesis(BaseModel):
    model_config = ConfigDict(frozen=True)

    raw: str
    text: str
    spans: List[EntitySpan] = []


# Pipeline Schemas
class PipelineMode(str, Enum):
    FULL_FULL = "full-full"
    NE_FULL = "ne-full"
    FULL_NE = "full-ne"
    SIMPLE_REPLACEMENT = "simple"


class DecoderTask(str, Enum):
    FULL_ASR = "full_asr"
    NE_ONLY_DETECTION = "ne_only_detection"
    NE_ONLY_GENERATION = "ne_only_generation"


class Utterance(BaseModel):
    """An audio reference; the simulator reads the tagged ground truth."""

    model_config = ConfigDict(frozen=True)

    id: str
    transcript: str


class DecoderRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    utterance: Utterance
    task: DecoderTask
    context_prompt: Optional[str] = None
    # Stage-1 output the context-aware pass is conditioned on.
    detection: Optional[str] = None

    @property
    def context_aware(self) -> bool:
        return self.context_prompt is not None


class SpanTrace(BaseModel):
    span: EntitySpan
    query: List[Pronunciation] = []
    result: Optional[RetrievalResult] = None
    note: Optional[str] = None


class PipelineTrace(BaseModel):
    detection_raw: str
    spans: List[SpanTrace] = []
    retrieval_skipped: bool = False
    prompt: Optional[str] = None
    generation_request: Optional[DecoderRequest] = None
    generation_raw: Optional[str] = None
    fallback: Optional[str] = None
    events: List[StageEvent] = []


class PipelineOutcome(BaseModel):
    utterance_id: str
    mode: PipelineMode
    use_context: bool = True
    detection: TaggedHypothesis
    final_hypothesis: TaggedHypothesis
    trace: PipelineTrace


# Results File Schemas
class CandidateRecord(BaseModel):
    id: str
    surface: str
    npd: float
    edit_distance: int


class SpanRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    entity_class: str = Field(..., alias="class")
    surface: str
    candidates: List[CandidateRecord] = []
    note: Optional[str] = None


class ResultRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    id: str
    mode: PipelineMode
    context: bool = True
    stage1: str
    prompt: Optional[str] = None
    generation: Optional[str] = None
    final: str
    spans: List[SpanRecord] = []


# Training Data Schemas
class RegionRole(str, Enum):
    PROMPT = "prompt"
    DETECTION_TARGET = "detection-target"
    GENERATION_TARGET = "generation-target"


class RegionKind(str, Enum):
    DETECTION = "detection"
    RETRIEVAL = "retrieval"
    GENERATION = "generation"


class TrainingRegion(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: RegionKind
    role: RegionRole
    text: str


class TrainingExample(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    variant: PipelineMode
    regions: List[TrainingRegion]
    # Where the retrieval queries came from: "detection", "reference" or "none".
    provenance: str = "none"

    @property
    def source(self) -> str:
        return " ".join(r.text for r in self.regions if r.text)

    @property
    def target_mask(self) -> List[RegionRole]:
        return [r.role for r in self.regions]


# Metric Schemas
class WerReport(BaseModel):
    substitutions: int = Field(0, ge=0)
    insertions: int = Field(0, ge=0)
    deletions: int = Field(0, ge=0)
    ref_words: int = Field(..., gt=0)

    @computed_field
    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @computed_field
    @property
    def wer(self) -> float:
        return self.errors / self.ref_words


class NerReport(BaseModel):
    ref_entities: int = Field(0, ge=0)
    entity_errors: int = Field(0, ge=0)
    hyp_entities: int = Field(0, ge=0)
    # Hypothesis spans left unmatched; informational, not part of NER.
    false_positives: int = Field(0, ge=0)

    @computed_field
    @property
    def ner(self) -> Optional[float]:
        if self.ref_entities == 0:
            return None
        return self.entity_errors / self.ref_entities
