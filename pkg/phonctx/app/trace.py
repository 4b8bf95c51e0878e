import logging
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

from pydantic import BaseModel

logger = logging.getLogger(__name__)


class StageType(str, Enum):
    DETECTION = "detection"
    RETRIEVAL = "retrieval"
    PROMPT = "prompt"
    GENERATION = "generation"
    REPLACEMENT = "replacement"
    FALLBACK = "fallback"


class StageEvent(BaseModel):
    seq: int
    stage: StageType
    data: Dict[str, Any]


class TraceRecorder:
    """Collects the per-stage events of one pipeline run.

    Events are numbered in recording order instead of timestamped, so two
    runs with the same inputs produce identical traces.
    """

    def __init__(self):
        self.events: List[StageEvent] = []
        self.handlers: Dict[StageType, List[Callable[[StageEvent], None]]] = {}

    def register_handler(self, stage: StageType, handler: Callable[[StageEvent], None]):
        """Register a handler for a specific stage"""
        self.handlers.setdefault(stage, []).append(handler)

    def record(self, stage: StageType, **data) -> StageEvent:
        event = StageEvent(seq=len(self.events), stage=stage, data=data)
        self.events.append(event)

        for handler in self.handlers.get(stage, []):
            try:
                handler(event)
            except Exception as e:
                logger.error(f"Error in trace handler: {str(e)}")

        return event

    def get_events(self, stage: Optional[StageType] = None) -> List[StageEvent]:
        if stage is None:
            return list(self.events)
        return [e for e in self.events if e.stage == stage]


# Handlers registered here are attached to every recorder the pipeline creates.
global_handlers: Dict[StageType, List[Callable[[StageEvent], None]]] = {}


def register_global_handler(stage: StageType, handler: Callable[[StageEvent], None]):
    """Attach a handler to future recorders; registering it again is a no-op"""
    handlers = global_handlers.setdefault(stage, [])
    if handler not in handlers:
        handlers.append(handler)


def new_recorder() -> TraceRecorder:
    recorder = TraceRecorder()
    for stage, handlers in global_handlers.items():
        for handler in handlers:
            recorder.register_handler(stage, handler)
    return recorder
