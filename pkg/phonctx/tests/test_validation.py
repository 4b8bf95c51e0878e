import pytest

from phonctx.app.config import Settings
from phonctx.app.errors import ConfigError
from phonctx.app.validation import PromptTemplate, RetrievalConfig, SimulatorConfig, parse_config, parse_histogram


class TestRetrievalConfig:
    def test_defaults(self):
        cfg = RetrievalConfig()
        assert (cfg.relative_factor, cfg.absolute_floor, cfg.max_candidates) == (1.2, 0.2, 10)
        assert cfg.cap == 10

    def test_fixed_count_sets_the_cap(self):
        assert RetrievalConfig(fixed_count=3).cap == 3

    @pytest.mark.parametrize("values", [
        {"relative_factor": 0},
        {"absolute_floor": -0.1},
        {"max_candidates": 0},
        {"fixed_count": 0},
    ])
    def test_rejects_out_of_range(self, values):
        with pytest.raises(ConfigError):
            parse_config(RetrievalConfig, **values)


class TestSimulatorConfig:
    def test_corruption_is_sorted(self):
        cfg = SimulatorConfig(corruption={2: 0.5, 1: 0.5})
        assert list(cfg.corruption) == [1, 2]

    @pytest.mark.parametrize("values", [
        {"corruption": {}},
        {"corruption": {1: 0.6}},
        {"corruption": {-1: 1.0}},
        {"corruption": {1: 1.5, 2: -0.5}},
        {"tag_drop": 1.5},
        {"seed": -1},
        {"correction_limit": 0},
    ])
    def test_invalid_values(self, values):
        with pytest.raises(ConfigError):
            parse_config(SimulatorConfig, **values)


class TestPromptTemplate:
    def test_default_delimiters(self):
        template = PromptTemplate()
        assert (template.open, template.close, template.separator) == ("<s>", "</s>", " ; ")

    @pytest.mark.parametrize("values", [{"open": ""}, {"close": "</ s>"}, {"separator": "  "}])
    def test_invalid_delimiters(self, values):
        with pytest.raises(ConfigError):
            parse_config(PromptTemplate, **values)


class TestParseHistogram:
    def test_pairs(self):
        assert parse_histogram("1:0.5, 2:0.5") == {1: 0.5, 2: 0.5}

    def test_repeated_keys_accumulate(self):
        assert parse_histogram("1:0.25,1:0.25,0:0.5") == {1: 0.5, 0: 0.5}

    @pytest.mark.parametrize("text", ["1", "a:0.5", "1:half"])
    def test_malformed(self, text):
        with pytest.raises(ConfigError):
            parse_histogram(text)


class TestSettings:
    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("PHONCTX_MAX_CANDIDATES", "5")
        monkeypatch.setenv("PHONCTX_ENTITY_CLASSES", '["contact", "song"]')
        settings = Settings()
        assert settings.MAX_CANDIDATES == 5
        assert settings.ENTITY_CLASSES == ["contact", "song"]

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("PHONCTX_SEED", raising=False)
        settings = Settings(_env_file=None)
        assert settings.SEED == 7
        assert settings.PRONUNCIATION_CAP == 4
