import pytest

from phonctx.app.cache import cache_manager
from phonctx.app.data_generator import BenchmarkGenerator
from phonctx.app.decoder import SimulatedDecoder
from phonctx.app.phoneme import load_lexicon
from phonctx.app.retrieval import EntityDatabase, make_entity
from phonctx.app.schemas import Utterance
from phonctx.app.synthdb import reference_entities, synthesize, utterance_seed
from phonctx.app.tags import parse_tagged
from phonctx.app.validation import SimulatorConfig

LEXICON_TSV = """\
;;; small test lexicon
THOMSON\tT AA1 M S AH0 N
THOMPSON\tT AA1 M P S AH0 N
WALKER\tW AO1 K ER0
TOM\tT AA1 M
A\tAH0
A\tEY1
SPOTIFY\tS P AA1 T IH0 F AY2
"""


@pytest.fixture(autouse=True)
def clear_cache():
    """Each test starts from an empty pronunciation cache"""
    cache_manager.clear()
    yield


@pytest.fixture
def lexicon_path(tmp_path):
    path = tmp_path / "lexicon.tsv"
    path.write_text(LEXICON_TSV, encoding="utf-8")
    return path


@pytest.fixture
def lexicon(lexicon_path):
    return load_lexicon(lexicon_path)


@pytest.fixture
def contact_db(lexicon):
    """The Thomson/Thompson/Walker contact database plus one app"""
    return EntityDatabase.from_entities([
        make_entity("1", "Thomson", "contact", lexicon),
        make_entity("2", "Thompson", "contact", lexicon),
        make_entity("3", "Walker", "contact", lexicon),
        make_entity("4", "Spotify", "app", lexicon),
    ])


@pytest.fixture
def db_path(tmp_path):
    path = tmp_path / "db.jsonl"
    path.write_text(
        '{"id": "1", "surface": "Thomson", "class": "contact"}\n'
        '{"id": "2", "surface": "Thompson", "class": "contact"}\n'
        '{"id": "3", "surface": "Walker", "class": "CONTACT"}\n'
        '{"id": "4", "surface": "Spotify", "class": "app"}\n',
        encoding="utf-8",
    )
    return path


@pytest.fixture
def corpus_path(tmp_path):
    path = tmp_path / "corpus.jsonl"
    utterances = [
        Utterance(id="u1", transcript="Call <contact> Thomson </contact>"),
        Utterance(id="u2", transcript="play some jazz"),
        Utterance(id="u3", transcript="text <contact> Walker </contact> on <app> Spotify </app>"),
    ]
    path.write_text("".join(u.model_dump_json() + "\n" for u in utterances), encoding="utf-8")
    return path


@pytest.fixture
def clean_decoder(lexicon):
    return SimulatedDecoder(SimulatorConfig(), lexicon)


@pytest.fixture(scope="session")
def benchmark():
    """Seed-7 synthetic benchmark: 1,000 utterances with 300-contact databases"""
    generator = BenchmarkGenerator(seed=7)
    pool = generator.generate_pool()
    lexicon = generator.lexicon_for(pool)
    sizes = generator.size_distribution(contacts=300)
    corpus = generator.generate_corpus(pool, utterances=1000)
    databases = {}
    for index, utterance in enumerate(corpus):
        refs = reference_entities(parse_tagged(utterance.transcript))
        databases[utterance.id] = synthesize(pool, sizes, refs, utterance_seed(7, index), lexicon=lexicon)
    return {
        "pool": pool,
        "lexicon": lexicon,
        "corpus": corpus,
        "db_for": lambda utterance: databases[utterance.id],
    }
