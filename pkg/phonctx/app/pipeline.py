"""Detection, retrieval and generation over a pluggable decoder.

Four modes are supported: the two-pass FULL_FULL, NE_FULL and FULL_NE
variants and the single-pass SIMPLE_REPLACEMENT baseline that substitutes
each detected entity with its top retrieved candidate.
"""
import copy
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from phonctx.app.decoder import Decoder
from phonctx.app.errors import InvalidInputError, PipelineError
from phonctx.app.metrics import corpus_report
from phonctx.app.phoneme import Lexicon, pronounce
from phonctx.app.retrieval import EntityDatabase, interleave, render_prompt, retrieve
from phonctx.app.schemas import (
    CandidateRecord, DecoderRequest, DecoderTask, PipelineMode, PipelineOutcome, PipelineTrace,
    ResultRecord, RetrievalResult, SpanRecord, SpanTrace, TaggedHypothesis, Utterance,
)
from phonctx.app.tags import replace_spans, safe_parse
from phonctx.app.trace import StageType, TraceRecorder, new_recorder
from phonctx.app.validation import PromptTemplate, RetrievalConfig

logger = logging.getLogger(__name__)

STAGE1_TASK = {
    PipelineMode.FULL_FULL: DecoderTask.FULL_ASR,
    PipelineMode.NE_FULL: DecoderTask.NE_ONLY_DETECTION,
    PipelineMode.FULL_NE: DecoderTask.FULL_ASR,
    PipelineMode.SIMPLE_REPLACEMENT: DecoderTask.FULL_ASR,
}
STAGE2_TASK = {
    PipelineMode.FULL_FULL: DecoderTask.FULL_ASR,
    PipelineMode.NE_FULL: DecoderTask.FULL_ASR,
    PipelineMode.FULL_NE: DecoderTask.NE_ONLY_GENERATION,
}


class ContextualizationPipeline:
    def __init__(self, decoder: Decoder, lexicon: Optional[Lexicon] = None,
                 cfg: Optional[RetrievalConfig] = None, template: Optional[PromptTemplate] = None,
                 known_classes: Optional[Iterable[str]] = None, detection_decoder: Optional[Decoder] = None):
        self.decoder = decoder
        # Stage 1 may come from a different model than stage 2.
        self.detection_decoder = detection_decoder or decoder
        self.lexicon = lexicon or Lexicon.empty()
        self.cfg = cfg or RetrievalConfig()
        self.template = template or PromptTemplate()
        self.known_classes = None if known_classes is None else tuple(known_classes)

    @property
    def concurrent_safe(self) -> bool:
        return bool(getattr(self.decoder, "concurrent_safe", False)
                    and getattr(self.detection_decoder, "concurrent_safe", False))

    def _decode(self, decoder: Decoder, request: DecoderRequest, stage: str) -> str:
        try:
            return decoder.decode(request)
        except PipelineError:
            raise
        except Exception as e:
            raise PipelineError(f"decoder failed for utterance {request.utterance.id}: {e}", stage) from e

    def _retrieve_spans(self, detection: TaggedHypothesis, db: EntityDatabase,
                        recorder: TraceRecorder) -> List[SpanTrace]:
        traces = []
        for span in detection.spans:
            try:
                query = pronounce(self.lexicon, span.surface)
            except InvalidInputError as e:
                traces.append(SpanTrace(span=span, note=f"no pronunciation: {e.detail}"))
                recorder.record(StageType.FALLBACK, surface=span.surface, reason="unpronounceable span")
                continue
            result = retrieve(db, query, span.entity_class, self.cfg, query_surface=span.surface)
            traces.append(SpanTrace(span=span, query=query, result=result))
            recorder.record(StageType.RETRIEVAL, surface=span.surface, entity_class=span.entity_class,
                            candidates=result.surfaces())
        return traces

    def _prompt(self, span_traces: Sequence[SpanTrace]) -> str:
        results: List[RetrievalResult] = [t.result for t in span_traces if t.result is not None]
        return render_prompt(interleave(results, self.cfg.cap), self.template)

    def run(self, mode: PipelineMode, utterance: Utterance, db: EntityDatabase,
            use_context: bool = True) -> PipelineOutcome:
        """Run one utterance through the given mode.

        With ``use_context=False`` the run is context-free: NE_FULL decodes
        with the empty context and the other modes stop after stage 1.
        """
        recorder = new_recorder()
        request = DecoderRequest(utterance=utterance, task=STAGE1_TASK[mode])
        stage1_raw = self._decode(self.detection_decoder, request, StageType.DETECTION.value)
        detection, error = safe_parse(stage1_raw, self.known_classes)
        recorder.record(StageType.DETECTION, raw=stage1_raw, spans=len(detection.spans))
        trace = PipelineTrace(detection_raw=stage1_raw, fallback=error)

        if mode == PipelineMode.NE_FULL:
            final = self._run_ne_full(utterance, db, detection, stage1_raw, trace, recorder, use_context)
        elif not detection.spans or not use_context:
            trace.retrieval_skipped = True
            final = detection
        elif mode == PipelineMode.SIMPLE_REPLACEMENT:
            final = self._run_simple(db, detection, trace, recorder)
        else:
            trace.spans = self._retrieve_spans(detection, db, recorder)
            trace.prompt = self._prompt(trace.spans)
            recorder.record(StageType.PROMPT, prompt=trace.prompt)
            final = self._generate(mode, utterance, detection, stage1_raw, trace, recorder)

        trace.events = recorder.get_events()
        return PipelineOutcome(utterance_id=utterance.id, mode=mode, use_context=use_context,
                               detection=detection, final_hypothesis=final, trace=trace)

    def _run_ne_full(self, utterance, db, detection, stage1_raw, trace, recorder, use_context):
        if detection.spans and use_context:
            trace.spans = self._retrieve_spans(detection, db, recorder)
            trace.prompt = self._prompt(trace.spans)
        else:
            trace.retrieval_skipped = True
            trace.prompt = render_prompt([], self.template)
        recorder.record(StageType.PROMPT, prompt=trace.prompt)
        return self._generate(PipelineMode.NE_FULL, utterance, detection, stage1_raw, trace, recorder)

    def _run_simple(self, db, detection, trace, recorder) -> TaggedHypothesis:
        trace.spans = self._retrieve_spans(detection, db, recorder)
        surfaces = []
        for span_trace in trace.spans:
            result = span_trace.result
            top = result.candidates[0].entity.surface if result and result.candidates else span_trace.span.surface
            surfaces.append(top)
        final = replace_spans(detection, surfaces)
        recorder.record(StageType.REPLACEMENT, surfaces=surfaces)
        return final

    def _generate(self, mode, utterance, detection, stage1_raw, trace, recorder) -> TaggedHypothesis:
        request = DecoderRequest(utterance=utterance, task=STAGE2_TASK[mode],
                                 context_prompt=trace.prompt, detection=stage1_raw)
        trace.generation_request = request
        raw = self._decode(self.decoder, request, StageType.GENERATION.value)
        trace.generation_raw = raw
        generated, error = safe_parse(raw, self.known_classes)
        recorder.record(StageType.GENERATION, raw=raw, spans=len(generated.spans))
        if error:
            trace.fallback = error

        if mode != PipelineMode.FULL_NE:
            return generated

        if len(generated.spans) != len(detection.spans):
            note = f"generated {len(generated.spans)} entities for {len(detection.spans)} detected spans; keeping stage-1 spans"
            logger.warning(f"Utterance {utterance.id}: {note}")
            trace.fallback = note
            recorder.record(StageType.FALLBACK, reason=note)
            return detection
        surfaces = [span.surface for span in generated.spans]
        recorder.record(StageType.REPLACEMENT, surfaces=surfaces)
        return replace_spans(detection, surfaces)

    def replay_generation(self, outcome: PipelineOutcome) -> Optional[str]:
        """Re-run stage 2 from a recorded trace."""
        request = outcome.trace.generation_request
        if request is None:
            return None
        return self._decode(self.decoder, request, StageType.GENERATION.value)

    def run_corpus(self, mode: PipelineMode, utterances: Sequence[Utterance],
                   db_for: Callable[[Utterance], EntityDatabase], jobs: int = 1,
                   use_context: bool = True) -> List[PipelineOutcome]:
        """Run every utterance; output is ordered by utterance id."""

        def work(utt: Utterance) -> PipelineOutcome:
            return self.run(mode, utt, db_for(utt), use_context=use_context)

        if jobs > 1 and self.concurrent_safe:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(work, utterances))
        else:
            if jobs > 1:
                logger.warning("Decoder is not safe for concurrent requests; running sequentially")
            outcomes = [work(utt) for utt in utterances]
        return sorted(outcomes, key=lambda o: o.utterance_id)


def run(mode: PipelineMode, utterance: Utterance, db: EntityDatabase, decoder: Decoder,
        cfg: Optional[RetrievalConfig] = None, lexicon: Optional[Lexicon] = None,
        known_classes: Optional[Iterable[str]] = None) -> PipelineOutcome:
    pipeline = ContextualizationPipeline(decoder, lexicon=lexicon, cfg=cfg, known_classes=known_classes)
    return pipeline.run(mode, utterance, db)


def to_record(outcome: PipelineOutcome) -> ResultRecord:
    spans = []
    for span_trace in outcome.trace.spans:
        candidates = []
        if span_trace.result is not None:
            candidates = [
                CandidateRecord(id=c.entity.id, surface=c.entity.surface, npd=c.score.value,
                                edit_distance=c.score.edit_distance)
                for c in span_trace.result.candidates
            ]
        spans.append(SpanRecord(entity_class=span_trace.span.entity_class, surface=span_trace.span.surface,
                                candidates=candidates, note=span_trace.note))
    return ResultRecord(id=outcome.utterance_id, mode=outcome.mode, context=outcome.use_context,
                        stage1=outcome.trace.detection_raw, prompt=outcome.trace.prompt,
                        generation=outcome.trace.generation_raw, final=outcome.final_hypothesis.raw, spans=spans)


def write_results(outcomes: Iterable[PipelineOutcome], path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for outcome in outcomes:
            f.write(to_record(outcome).model_dump_json(by_alias=True) + "\n")
            count += 1
    return count


def load_results(path) -> List[ResultRecord]:
    with open(path, encoding="utf-8") as f:
        return [ResultRecord.model_validate_json(line) for line in f if line.strip()]


def write_utterances(utterances: Iterable[Utterance], path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for utterance in utterances:
            f.write(utterance.model_dump_json() + "\n")
            count += 1
    return count


def load_utterances(path) -> List[Utterance]:
    """Read a JSON Lines corpus of {id, transcript} records."""
    utterances = []
    ids = set()
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                utterance = Utterance.model_validate_json(line)
            except ValidationError as e:
                raise InvalidInputError(f"{path} line {line_no}: invalid utterance record") from e
            if utterance.id in ids:
                raise InvalidInputError(f"{path} line {line_no}: duplicate utterance id '{utterance.id}'")
            ids.add(utterance.id)
            utterances.append(utterance)
    return utterances


def sweep_context_size(pipeline: ContextualizationPipeline, mode: PipelineMode, corpus: Sequence[Utterance],
                       db_for: Callable[[Utterance], EntityDatabase], sizes: Sequence[int],
                       jobs: int = 1) -> pd.DataFrame:
    """WER/NER for a fixed number of retrieved candidates per size.

    Each size forces exactly min(size, partition size) top-NPD candidates
    per span, bypassing the relative/absolute selection rule.
    """
    if not sizes or any(size < 1 for size in sizes):
        raise InvalidInputError(f"Context sizes must be a non-empty list of positive integers, not {list(sizes)}")

    columns = ["size", "wer", "ner", "word_errors", "ref_words", "entity_errors", "ref_entities"]
    rows: List[Dict] = []
    if not corpus:
        return pd.DataFrame(rows, columns=columns)

    for size in sizes:
        sized = copy.copy(pipeline)
        sized.cfg = pipeline.cfg.model_copy(update={"fixed_count": size})
        outcomes = sized.run_corpus(mode, corpus, db_for, jobs=jobs)
        refs = {utt.id: utt.transcript for utt in corpus}
        report = corpus_report([(refs[o.utterance_id], o.final_hypothesis, mode.value) for o in outcomes],
                               known_classes=pipeline.known_classes)
        row = report.iloc[0]
        rows.append({"size": size, **{col: row[col] for col in columns[1:]}})
    return pd.DataFrame(rows, columns=columns)


def mode_from_name(name: str) -> PipelineMode:
    try:
        return PipelineMode(name)
    except ValueError as e:
        raise InvalidInputError(f"Unknown mode '{name}'; expected one of {[m.value for m in PipelineMode]}") from e
