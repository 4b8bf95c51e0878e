"""Command-line entry point for phonctx."""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from phonctx.app.config import settings
from phonctx.app.data_generator import BenchmarkGenerator
from phonctx.app.decoder import SimulatedDecoder
from phonctx.app.errors import InvalidInputError, PhonctxError
from phonctx.app.metrics import MatchPolicy, corpus_report, format_report, report_jsonl
from phonctx.app.phoneme import LEXICON_FORMATS, Lexicon, load_lexicon, pronounce, write_lexicon
from phonctx.app.pipeline import (
    ContextualizationPipeline, load_results, load_utterances, mode_from_name, sweep_context_size, write_results,
)
from phonctx.app.retrieval import EntityDatabase, load_database, result_to_json, retrieve, write_database
from phonctx.app.schemas import DecoderRequest, DecoderTask, PipelineMode, Utterance
from phonctx.app.synthdb import load_pool, load_sizes, reference_entities, synthesize, utterance_seed
from phonctx.app.tags import parse_tagged
from phonctx.app.trace import StageEvent, StageType, register_global_handler
from phonctx.app.traindata import TRAINING_VARIANTS, build_example, emit_corpus
from phonctx.app.validation import (
    PromptTemplate, RetrievalConfig, SimulatorConfig, parse_config, parse_histogram,
)

logger = logging.getLogger(__name__)


def _csv(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _sizes(value: str) -> List[int]:
    try:
        return [int(item) for item in _csv(value)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{value}' is not a comma-separated list of integers") from None


def _add_lexicon_args(parser: argparse.ArgumentParser, required: bool = False):
    parser.add_argument("--lexicon", required=required, help="Pronunciation lexicon file")
    parser.add_argument("--lexicon-format", choices=LEXICON_FORMATS, default="tsv",
                        help="Lexicon file format (default: tsv)")


def _add_retrieval_args(parser: argparse.ArgumentParser):
    parser.add_argument("--relative-factor", type=float, default=settings.RELATIVE_FACTOR,
                        help=f"Keep entities within this factor of the best NPD (default: {settings.RELATIVE_FACTOR})")
    parser.add_argument("--absolute-floor", type=float, default=settings.ABSOLUTE_FLOOR,
                        help=f"Always keep entities with NPD below this (default: {settings.ABSOLUTE_FLOOR})")
    parser.add_argument("--max-candidates", type=int, default=settings.MAX_CANDIDATES,
                        help=f"Candidates per prompt (default: {settings.MAX_CANDIDATES})")


def _add_simulator_args(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=settings.SEED, help=f"Random seed (default: {settings.SEED})")
    parser.add_argument("--corruption", default="0:1.0",
                        help="Distribution over phoneme edits per entity, as k:p pairs (default: 0:1.0)")
    parser.add_argument("--tag-drop", type=float, default=0.0,
                        help="Probability that a detected entity loses its tags (default: 0.0)")
    parser.add_argument("--correction-limit", type=float, default=0.7,
                        help="Largest NPD at which the simulated decoder accepts a prompt candidate (default: 0.7)")


def _add_run_args(parser: argparse.ArgumentParser):
    parser.add_argument("--mode", required=True, choices=[m.value for m in PipelineMode], help="Pipeline mode")
    parser.add_argument("--db", required=True, help="Entity database file, or a directory of <id>.jsonl files")
    parser.add_argument("--corpus", required=True, help="JSON Lines corpus of {id, transcript} records")
    parser.add_argument("--jobs", type=int, default=1, help="Utterances decoded in parallel (default: 1)")
    parser.add_argument("--no-context", action="store_true", help="Decode without retrieved context")
    parser.add_argument("--detector-seed", type=int, default=None,
                        help="Seed of a separate detection decoder (default: same decoder for both stages)")
    parser.add_argument("--detector-corruption", default=None,
                        help="Edit distribution of the separate detection decoder (default: --corruption)")
    _add_lexicon_args(parser, required=True)
    _add_retrieval_args(parser)
    _add_simulator_args(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phonctx", description="Phonetic retrieval-based contextualization harness")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help=f"Logging level (default: {settings.LOG_LEVEL})")
    parser.add_argument("--classes", type=_csv, default=list(settings.ENTITY_CLASSES),
                        help=f"Comma-separated entity classes (default: {','.join(settings.ENTITY_CLASSES)})")
    sub = parser.add_subparsers(dest="command", required=True)

    lexicon = sub.add_parser("lexicon", help="Inspect or convert a pronunciation lexicon")
    _add_lexicon_args(lexicon, required=True)
    lexicon.add_argument("--word", action="append", default=[], help="Print pronunciations of this surface form")
    lexicon.add_argument("--out", help="Write the lexicon back out in TSV format")

    query = sub.add_parser("retrieve", help="Rank database entities by phonetic distance to a query")
    query.add_argument("--db", required=True, help="Entity database file")
    query.add_argument("--query", required=True, help="Query surface form")
    query.add_argument("--class", dest="entity_class", required=True, help="Entity class to search")
    _add_lexicon_args(query)
    _add_retrieval_args(query)

    run = sub.add_parser("run", help="Decode a corpus through one pipeline mode")
    _add_run_args(run)
    run.add_argument("--out", required=True, help="Results file")

    sweep = sub.add_parser("sweep", help="WER/NER for fixed numbers of retrieved candidates")
    _add_run_args(sweep)
    sweep.add_argument("--sizes", type=_sizes, default=[1, 5, 10, 20],
                       help="Comma-separated context sizes (default: 1,5,10,20)")
    sweep.add_argument("--out", help="Also write the table as JSON Lines")

    synth = sub.add_parser("synthdb", help="Synthesize per-utterance entity databases")
    synth.add_argument("--pool", required=True, help="Entity pool file of 'class surface weight' lines")
    synth.add_argument("--sizes", required=True, help="Size distribution file of 'class n probability' lines")
    synth.add_argument("--corpus", required=True, help="JSON Lines corpus of {id, transcript} records")
    synth.add_argument("--seed", type=int, default=settings.SEED, help=f"Random seed (default: {settings.SEED})")
    synth.add_argument("--uniform", action="store_true", help="Sample pool surfaces uniformly instead of by weight")
    synth.add_argument("--out", required=True, help="Output directory for <id>.jsonl databases")
    _add_lexicon_args(synth)

    train = sub.add_parser("traindata", help="Build training sequences from detection output")
    train.add_argument("--variant", required=True, choices=[v.value for v in TRAINING_VARIANTS], help="Model variant")
    train.add_argument("--db", required=True, help="Entity database file, or a directory of <id>.jsonl files")
    train.add_argument("--corpus", required=True, help="JSON Lines corpus of tagged references")
    train.add_argument("--detections", help="JSON Lines {id, transcript} detection outputs (default: simulated)")
    train.add_argument("--teacher-inject", action="store_true",
                       help="Query with reference entities when detection finds none")
    train.add_argument("--out", required=True, help="Training corpus file")
    _add_lexicon_args(train, required=True)
    _add_retrieval_args(train)
    _add_simulator_args(train)

    score = sub.add_parser("score", help="Pooled WER/NER per mode from results files")
    score.add_argument("--ref", "--corpus", dest="ref", required=True, help="JSON Lines corpus of tagged references")
    score.add_argument("--hyp", "--results", dest="hyp", required=True, nargs="+",
                       help="Results files written by 'run', or JSON Lines {id, transcript} hypotheses")
    score.add_argument("--label", help="Report row name for {id, transcript} hypotheses (default: file name)")
    score.add_argument("--policy", choices=[p.value for p in MatchPolicy], default=MatchPolicy.GREEDY.value,
                       help="Entity matching policy (default: greedy)")
    score.add_argument("--format", choices=["table", "jsonl"], default="table", help="Output format (default: table)")

    generate = sub.add_parser("generate", help="Write a synthetic benchmark")
    generate.add_argument("--out", required=True, help="Output directory")
    generate.add_argument("--seed", type=int, default=settings.SEED, help=f"Random seed (default: {settings.SEED})")
    generate.add_argument("--utterances", type=int, default=1000, help="Corpus size (default: 1000)")
    generate.add_argument("--contacts", type=int, default=1000, help="Contact pool size (default: 1000)")
    generate.add_argument("--contacts-per-db", type=int, default=300,
                          help="Contacts in each synthesized database (default: 300)")
    return parser


def _lexicon(args) -> Lexicon:
    if not getattr(args, "lexicon", None):
        return Lexicon.empty()
    return load_lexicon(args.lexicon, args.lexicon_format)


def _retrieval_config(args) -> RetrievalConfig:
    return parse_config(RetrievalConfig, relative_factor=args.relative_factor,
                        absolute_floor=args.absolute_floor, max_candidates=args.max_candidates)


def _simulator_config(args, seed: Optional[int] = None, corruption: Optional[str] = None) -> SimulatorConfig:
    return parse_config(SimulatorConfig, corruption=parse_histogram(corruption or args.corruption),
                        tag_drop=args.tag_drop, correction_limit=args.correction_limit,
                        seed=args.seed if seed is None else seed)


def _database_source(path: str, lexicon: Lexicon) -> Callable[[Utterance], EntityDatabase]:
    """One shared database, or one per utterance from a directory."""
    source = Path(path)
    if not source.is_dir():
        shared = load_database(source, lexicon)
        return lambda utterance: shared

    loaded: Dict[str, EntityDatabase] = {}

    def per_utterance(utterance: Utterance) -> EntityDatabase:
        if utterance.id not in loaded:
            db_path = source / f"{utterance.id}.jsonl"
            if not db_path.exists():
                raise InvalidInputError(f"No database {db_path} for utterance {utterance.id}")
            loaded[utterance.id] = load_database(db_path, lexicon)
        return loaded[utterance.id]

    return per_utterance


def _pipeline(args, lexicon: Lexicon) -> ContextualizationPipeline:
    template = PromptTemplate()
    decoder = SimulatedDecoder(_simulator_config(args), lexicon, args.classes, template)
    detector = None
    if args.detector_seed is not None or args.detector_corruption is not None:
        detector = SimulatedDecoder(_simulator_config(args, args.detector_seed, args.detector_corruption),
                                    lexicon, args.classes, template)
    return ContextualizationPipeline(decoder, lexicon=lexicon, cfg=_retrieval_config(args), template=template,
                                     known_classes=args.classes, detection_decoder=detector)


def cmd_lexicon(args) -> int:
    lexicon = _lexicon(args)
    for word in args.word:
        for pron in pronounce(lexicon, word):
            print(f"{word}\t{' '.join(pron)}")
    if args.out:
        count = write_lexicon(lexicon, args.out)
        logger.info(f"Wrote {count} pronunciations to {args.out}")
    if not args.word:
        print(json.dumps({"entries": len(lexicon), "phonemes": sorted(lexicon.inventory)}))
    return 0


def cmd_retrieve(args) -> int:
    lexicon = _lexicon(args)
    db = load_database(args.db, lexicon)
    result = retrieve(db, pronounce(lexicon, args.query), args.entity_class.lower(),
                      _retrieval_config(args), query_surface=args.query)
    print(result_to_json(result))
    return 0


def cmd_run(args) -> int:
    lexicon = _lexicon(args)
    pipeline = _pipeline(args, lexicon)
    corpus = load_utterances(args.corpus)
    outcomes = pipeline.run_corpus(mode_from_name(args.mode), corpus, _database_source(args.db, lexicon),
                                   jobs=args.jobs, use_context=not args.no_context)
    count = write_results(outcomes, args.out)
    logger.info(f"Wrote {count} results to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    lexicon = _lexicon(args)
    pipeline = _pipeline(args, lexicon)
    table = sweep_context_size(pipeline, mode_from_name(args.mode), load_utterances(args.corpus),
                               _database_source(args.db, lexicon), args.sizes, jobs=args.jobs)
    print(table.to_string(index=False, na_rep="-"))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(table.to_json(orient="records", lines=True) if not table.empty else "")
    return 0


def cmd_synthdb(args) -> int:
    lexicon = _lexicon(args)
    pool = load_pool(args.pool)
    sizes = load_sizes(args.sizes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for index, utterance in enumerate(load_utterances(args.corpus)):
        refs = reference_entities(parse_tagged(utterance.transcript, args.classes))
        db = synthesize(pool, sizes, refs, utterance_seed(args.seed, index), lexicon=lexicon, uniform=args.uniform)
        write_database(db, out / f"{utterance.id}.jsonl")
    logger.info(f"Wrote databases to {out}")
    return 0


def cmd_traindata(args) -> int:
    lexicon = _lexicon(args)
    corpus = load_utterances(args.corpus)
    db_for = _database_source(args.db, lexicon)
    cfg = _retrieval_config(args)
    variant = mode_from_name(args.variant)

    if args.detections:
        detections = {u.id: u.transcript for u in load_utterances(args.detections)}
    else:
        detector = SimulatedDecoder(_simulator_config(args), lexicon, args.classes)
        detections = {
            u.id: detector.decode(DecoderRequest(utterance=u, task=DecoderTask.FULL_ASR)) for u in corpus
        }

    examples = []
    for utterance in sorted(corpus, key=lambda u: u.id):
        if utterance.id not in detections:
            raise InvalidInputError(f"No detection output for utterance {utterance.id}")
        examples.append(build_example(
            variant, parse_tagged(utterance.transcript, args.classes),
            parse_tagged(detections[utterance.id], args.classes), db_for(utterance), cfg, lexicon,
            utterance_id=utterance.id, teacher_inject=args.teacher_inject,
        ))
    emit_corpus(examples, args.out)
    return 0


def _is_results_file(path: str) -> bool:
    with open(path, encoding="utf-8") as f:
        first = next((line for line in f if line.strip()), None)
    if first is None:
        return True
    try:
        return "final" in json.loads(first)
    except (ValueError, TypeError) as e:
        raise InvalidInputError(f"{path} line 1: not a JSON object") from e


def _hypotheses(path: str, label: Optional[str]) -> List[Tuple[str, str, str, Optional[str]]]:
    """(id, hypothesis, report row, stage-1 hypothesis) per line of a hypothesis file."""
    if not _is_results_file(path):
        name = label or Path(path).stem
        return [(u.id, u.transcript, name, None) for u in load_utterances(path)]

    rows = []
    for record in load_results(path):
        row = record.mode.value if record.context else f"{record.mode.value} (no context)"
        # NE-only detection is not a full hypothesis.
        stage1 = record.stage1 if record.mode != PipelineMode.NE_FULL else None
        rows.append((record.id, record.final, row, stage1))
    return rows


def cmd_score(args) -> int:
    references: Dict[str, str] = {u.id: u.transcript for u in load_utterances(args.ref)}
    pairs = []
    context_free: Dict[str, str] = {}
    for path in args.hyp:
        for uid, hypothesis, row, stage1 in _hypotheses(path, args.label):
            if uid not in references:
                raise InvalidInputError(f"{path}: utterance {uid} is not in the reference corpus")
            pairs.append((references[uid], hypothesis, row))
            if stage1 is not None:
                context_free.setdefault(uid, stage1)
    pairs.extend((references[uid], stage1, "context-free") for uid, stage1 in sorted(context_free.items()))

    report = corpus_report(pairs, known_classes=args.classes, policy=MatchPolicy(args.policy))
    if args.format == "table":
        print(format_report(report))
    else:
        sys.stdout.write(report_jsonl(report))
    return 0


def cmd_generate(args) -> int:
    generator = BenchmarkGenerator(seed=args.seed, contacts=args.contacts)
    paths = generator.generate_data(args.out, utterances=args.utterances, contacts_per_db=args.contacts_per_db)
    print(json.dumps({name: str(path) for name, path in paths.items()}))
    return 0


COMMANDS = {
    "lexicon": cmd_lexicon,
    "retrieve": cmd_retrieve,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "synthdb": cmd_synthdb,
    "traindata": cmd_traindata,
    "score": cmd_score,
    "generate": cmd_generate,
}


def _log_stage(event: StageEvent):
    logger.debug(f"[{event.seq}] {event.stage.value}: {event.data}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.log_level == "DEBUG":
        for stage in StageType:
            register_global_handler(stage, _log_stage)

    try:
        return COMMANDS[args.command](args)
    except PhonctxError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return 1
    except OSError as e:
        print(json.dumps({"error": type(e).__name__, "detail": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
