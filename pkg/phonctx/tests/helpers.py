"""Test doubles and oracles shared across test modules."""
from typing import Callable, Dict, List, Optional

import numpy as np

from phonctx.app.retrieval import parse_prompt
from phonctx.app.schemas import DecoderRequest
from phonctx.app.validation import SimulatorConfig


class ScriptedDecoder:
    """Replays fixed outputs per (utterance id, task).

    A value may be a callable taking the request, for outputs that depend
    on the prompt.
    """

    concurrent_safe = True

    def __init__(self, outputs: Dict[tuple, object]):
        self.outputs = outputs
        self.requests: List[DecoderRequest] = []

    def decode(self, request: DecoderRequest) -> str:
        self.requests.append(request)
        output = self.outputs[(request.utterance.id, request.task)]
        return output(request) if callable(output) else output


def prompt_choice(candidate: str, fallback: str, label: str = "contact") -> Callable[[DecoderRequest], str]:
    """Generation that emits ``candidate`` when the prompt offers it."""

    def choose(request: DecoderRequest) -> str:
        offered = parse_prompt(request.context_prompt) if request.context_prompt else []
        surface = candidate if candidate in offered else fallback
        return f"<{label}> {surface} </{label}>"

    return choose


def noisy_config(seed: int = 7, corruption: Optional[Dict[int, float]] = None, tag_drop: float = 0.0) -> SimulatorConfig:
    return SimulatorConfig(corruption=corruption or {1: 0.5, 2: 0.5}, tag_drop=tag_drop, seed=seed)


def restricted_growth(length: int, symbols: int) -> np.ndarray:
    """Every sequence of ``length`` symbol indices, up to renaming of the symbols.

    Rows list symbols in order of first appearance, so each class of
    sequences equal under a bijection of the alphabet occurs exactly once.
    """
    rows = np.zeros((1, 0), dtype=np.int8)
    top = np.full(1, -1)
    for _ in range(length):
        parts, tops = [], []
        for value in range(symbols):
            ok = value <= top + 1
            column = np.full((int(ok.sum()), 1), value, dtype=np.int8)
            parts.append(np.hstack([rows[ok], column]))
            tops.append(np.maximum(top[ok], value))
        rows, top = np.vstack(parts), np.concatenate(tops)
    return rows


def batch_edit_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise unit-cost edit distance, the textbook recurrence run over whole columns"""
    count, m = a.shape[0], b.shape[1]
    prev = np.tile(np.arange(m + 1, dtype=np.int16), (count, 1))
    for i in range(1, a.shape[1] + 1):
        cur = np.empty_like(prev)
        cur[:, 0] = i
        for j in range(1, m + 1):
            diagonal = prev[:, j - 1] + (a[:, i - 1] != b[:, j - 1])
            cur[:, j] = np.minimum(np.minimum(prev[:, j], cur[:, j - 1]) + 1, diagonal)
        prev = cur
    return prev[:, m]
