from typing import Dict, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from phonctx.app.config import settings
from phonctx.app.errors import ConfigError

M = TypeVar("M", bound=BaseModel)


class RetrievalConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    relative_factor: float = Field(settings.RELATIVE_FACTOR, gt=0)
    absolute_floor: float = Field(settings.ABSOLUTE_FLOOR, ge=0)
    max_candidates: int = Field(settings.MAX_CANDIDATES, ge=1)
    # When set, the selection rule is bypassed and exactly
    # min(fixed_count, partition size) top-NPD entities are kept.
    fixed_count: Optional[int] = Field(None, ge=1)

    @property
    def cap(self) -> int:
        return self.fixed_count if self.fixed_count is not None else self.max_candidates


class PromptTemplate(BaseModel):
    model_config = ConfigDict(frozen=True)

    open: str = settings.PROMPT_OPEN
    close: str = settings.PROMPT_CLOSE
    separator: str = settings.PROMPT_SEPARATOR

    @field_validator("open", "close")
    def validate_delimiter(cls, v):
        if not v or any(ch.isspace() for ch in v):
            raise ValueError("Region delimiters must be non-empty and contain no whitespace")
        return v

    @field_validator("separator")
    def validate_separator(cls, v):
        if not v.strip():
            raise ValueError("Separator must contain a visible character")
        return v


class SimulatorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    # Distribution over the number of phoneme edits applied to each entity.
    corruption: Dict[int, float] = Field(default_factory=lambda: {0: 1.0})
    tag_drop: float = Field(0.0, ge=0.0, le=1.0)
    # Context-aware decoding only swaps in a candidate within this NPD of what was heard.
    correction_limit: float = Field(0.7, gt=0)
    seed: int = settings.SEED

    @field_validator("corruption")
    def validate_corruption(cls, v):
        if not v:
            raise ValueError("Corruption distribution must not be empty")
        for k, p in v.items():
            if k < 0:
                raise ValueError(f"Number of edits must be non-negative, not {k}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"Probability for k={k} must lie in [0, 1], not {p}")
        total = sum(v.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"Corruption probabilities must sum to 1, not {total}")
        return dict(sorted(v.items()))

    @model_validator(mode="after")
    def validate_seed(self):
        if self.seed < 0:
            raise ValueError("Seed must be non-negative")
        return self


def parse_config(model: Type[M], **values) -> M:
    """Build a config model, turning validation failures into ConfigError."""
    try:
        return model(**values)
    except ValidationError as e:
        messages = "; ".join(err["msg"] for err in e.errors())
        raise ConfigError(f"Invalid {model.__name__}: {messages}") from e


def parse_histogram(text: str) -> Dict[int, float]:
    """Parse ``"1:0.5,2:0.5"`` into a {k: probability} mapping."""
    histogram: Dict[int, float] = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        key, sep, prob = item.partition(":")
        if not sep:
            raise ConfigError(f"Histogram entry '{item}' must look like k:probability")
        try:
            histogram[int(key)] = histogram.get(int(key), 0.0) + float(prob)
        except ValueError as e:
            raise ConfigError(f"Histogram entry '{item}' is not numeric") from e
    return histogram
