import logging

import numpy as np
import pytest

from phonctx.app.errors import ConfigError, InvalidInputError
from phonctx.app.retrieval import EntityDatabase, make_entity
from phonctx.app.synthdb import (
    EntityPool, SizeDistribution, estimate_pool, estimate_sizes, load_pool, load_sizes, synthesize,
    utterance_seed, weighted_sample, write_pool, write_sizes,
)
from phonctx.app.tags import parse_tagged

LETTERS = "bdfgklmnprstvz"


def small_pool(count=5, label="contact"):
    return EntityPool(classes={label: [(f"{LETTERS[i % 14]}a{LETTERS[i // 14]}o", 1.0) for i in range(count)]})


class TestWeightedSample:
    """Weighted sampling without replacement"""

    def test_uniform_inclusion_frequencies(self):
        """1,000 items, 200 drawn per trial: every item should appear in about 20% of trials"""
        rng = np.random.default_rng(0)
        trials, items, drawn = 10000, 1000, 200
        counts = np.zeros(items)
        for _ in range(trials):
            counts += np.bincount(weighted_sample(np.ones(items), drawn, rng, uniform=True), minlength=items)
        p = drawn / items
        sigma = np.sqrt(trials * p * (1 - p))
        deviation = np.abs(counts - trials * p)
        assert deviation.max() < 5 * sigma
        assert (deviation > 3 * sigma).mean() <= 0.01

    def test_single_draw_follows_weights(self):
        rng = np.random.default_rng(1)
        weights = np.array([1.0, 2.0, 3.0, 4.0])
        trials = 40000
        counts = np.bincount([weighted_sample(weights, 1, rng)[0] for _ in range(trials)], minlength=4)
        expected = weights / weights.sum()
        sigma = np.sqrt(trials * expected * (1 - expected))
        assert np.all(np.abs(counts - trials * expected) < 5 * sigma)

    def test_no_repeats(self):
        rng = np.random.default_rng(2)
        picked = weighted_sample(np.arange(1, 51, dtype=float), 50, rng)
        assert sorted(picked) == list(range(50))

    def test_degenerate_requests(self):
        rng = np.random.default_rng(3)
        assert len(weighted_sample(np.ones(5), 0, rng)) == 0
        assert len(weighted_sample(np.ones(0), 3, rng)) == 0


class TestSynthesize:
    """Per-utterance databases drawn from the pool, always holding the reference entities"""

    def test_sizes_are_drawn_per_class(self):
        pool = small_pool(20)
        sizes = SizeDistribution(classes={"contact": {3: 1.0}})
        db = synthesize(pool, sizes, [], seed=1)
        assert len(db.partition("contact")) == 3

    def test_zero_size_class_is_empty(self):
        db = synthesize(small_pool(), SizeDistribution(classes={"contact": {0: 1.0}}), [], seed=1)
        assert len(db) == 0

    def test_empty_pool_class(self):
        pool = EntityPool(classes={"contact": []})
        db = synthesize(pool, SizeDistribution(classes={"contact": {0: 1.0}}), [("contact", "Zed")], seed=1)
        assert [e.surface for e in db.partition("contact")] == ["Zed"]

    def test_oversized_draw_is_clamped(self, caplog):
        with caplog.at_level(logging.WARNING):
            db = synthesize(small_pool(3), SizeDistribution(classes={"contact": {5: 1.0}}), [], seed=1)
        assert len(db.partition("contact")) == 3
        assert "clamping" in caplog.text

    def test_reference_entities_are_always_present(self):
        pool = small_pool(5)
        sizes = SizeDistribution(classes={"contact": {2: 0.5, 4: 0.5}})
        surfaces = pool.surfaces("contact")
        for seed in range(10000):
            refs = [("contact", "Zed"), ("contact", surfaces[seed % 5])]
            db = synthesize(pool, sizes, refs, seed)
            names = [e.normalized for e in db.partition("contact")]
            assert "zed" in names
            assert surfaces[seed % 5].lower() in names
            assert len(names) == len(set(names))

    def test_draws_follow_pool_weights(self):
        """Across 10,000 databases a 3:1 weighted entity is drawn within 3 sigma of 75%"""
        pool = EntityPool(classes={"contact": [("Bob", 3.0), ("Ann", 1.0)]})
        sizes = SizeDistribution(classes={"contact": {1: 1.0}})
        trials = 10000
        bob = sum(
            synthesize(pool, sizes, [], utterance_seed(3, i)).partition("contact")[0].surface == "Bob"
            for i in range(trials)
        )
        sigma = np.sqrt(trials * 0.75 * 0.25)
        assert abs(bob - trials * 0.75) < 3 * sigma

    def test_reference_class_outside_the_pool(self):
        db = synthesize(small_pool(), SizeDistribution(classes={"contact": {1: 1.0}}), [("APP", "Spotify")], seed=4)
        assert [e.surface for e in db.partition("app")] == ["Spotify"]

    def test_same_seed_same_database(self, lexicon):
        pool = small_pool(30)
        sizes = SizeDistribution(classes={"contact": {5: 0.5, 10: 0.5}})
        first = synthesize(pool, sizes, [("contact", "Thomson")], utterance_seed(7, 3), lexicon=lexicon)
        second = synthesize(pool, sizes, [("contact", "Thomson")], utterance_seed(7, 3), lexicon=lexicon)
        assert [(e.id, e.surface) for e in first.entities()] == [(e.id, e.surface) for e in second.entities()]
        assert first.partition("contact")[-1].pronunciations == (("T", "AA", "M", "S", "AH", "N"),)

    def test_uniform_ignores_weights(self):
        pool = EntityPool(classes={"contact": [("Bob", 1e9), ("Ann", 1e-9)]})
        sizes = SizeDistribution(classes={"contact": {1: 1.0}})
        weighted = {synthesize(pool, sizes, [], seed).partition("contact")[0].surface for seed in range(200)}
        uniform = {synthesize(pool, sizes, [], seed, uniform=True).partition("contact")[0].surface for seed in range(200)}
        assert weighted == {"Bob"}
        assert uniform == {"Bob", "Ann"}


class TestEstimation:
    def test_pool_weights_are_counts(self):
        corpus = [
            parse_tagged("call <contact> Ann </contact>"),
            parse_tagged("call <contact> ann </contact> and <contact> Bob </contact>"),
            parse_tagged("open <app> Spotify </app>"),
        ]
        pool = estimate_pool(corpus)
        assert pool.classes == {"app": [("Spotify", 1.0)], "contact": [("Ann", 2.0), ("Bob", 1.0)]}

    def test_sizes_histogram(self):
        bob = make_entity("1", "Bob", "contact")
        ann = make_entity("2", "Ann", "contact")
        databases = [EntityDatabase.from_entities([bob]), EntityDatabase.from_entities([bob, ann]),
                     EntityDatabase.from_entities([ann])]
        sizes = estimate_sizes(databases, classes=["contact", "app"])
        assert sizes.classes["contact"] == {1: pytest.approx(2 / 3), 2: pytest.approx(1 / 3)}
        assert sizes.classes["app"] == {0: 1.0}

    def test_sizes_need_databases(self):
        with pytest.raises(InvalidInputError):
            estimate_sizes([])


class TestFiles:
    def test_pool_and_sizes_load_back(self, tmp_path):
        pool = EntityPool(classes={"contact": [("Anne Lee", 2.0), ("Bob", 0.5)]})
        sizes = SizeDistribution(classes={"contact": {0: 0.25, 3: 0.75}})
        write_pool(pool, tmp_path / "pool.txt")
        write_sizes(sizes, tmp_path / "sizes.txt")
        assert load_pool(tmp_path / "pool.txt") == pool
        assert load_sizes(tmp_path / "sizes.txt") == sizes

    @pytest.mark.parametrize("content", [
        "contact Bob\n",
        "contact Bob heavy\n",
        "contact Bob -1\n",
        "contact Bob 1\ncontact bob 2\n",
    ])
    def test_bad_pool_files(self, tmp_path, content):
        path = tmp_path / "pool.txt"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(ConfigError):
            load_pool(path)

    @pytest.mark.parametrize("content", ["contact 3 0.5\n", "contact -1 1.0\n", "contact three 1.0\n"])
    def test_bad_size_files(self, tmp_path, content):
        path = tmp_path / "sizes.txt"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(ConfigError):
            load_sizes(path)

    def test_comments_are_skipped(self, tmp_path):
        path = tmp_path / "sizes.txt"
        path.write_text("# class n p\ncontact 2 1.0\n", encoding="utf-8")
        assert load_sizes(path).classes == {"contact": {2: 1.0}}
