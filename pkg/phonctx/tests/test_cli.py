import json

import pytest

from phonctx.app import trace
from phonctx.app.main import main
from phonctx.app.pipeline import load_results, load_utterances
from phonctx.app.retrieval import load_database
from phonctx.app.trace import StageType
from phonctx.app.traindata import load_corpus


def _run_args(lexicon_path, db_path, corpus_path, out, mode="full-full"):
    return ["run", "--mode", mode, "--db", str(db_path), "--corpus", str(corpus_path), "--lexicon", str(lexicon_path),
            "--corruption", "1:0.5,2:0.5", "--out", str(out)]


class TestInspection:
    def test_lexicon_word(self, lexicon_path, capsys):
        assert main(["lexicon", "--lexicon", str(lexicon_path), "--word", "Thomson"]) == 0
        assert capsys.readouterr().out == "Thomson\tT AA M S AH N\n"

    def test_lexicon_summary(self, lexicon_path, capsys, tmp_path):
        out = tmp_path / "copy.tsv"
        assert main(["lexicon", "--lexicon", str(lexicon_path), "--out", str(out)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["entries"] == 6
        assert "AA" in summary["phonemes"]
        assert out.exists()

    def test_retrieve(self, lexicon_path, db_path, capsys):
        argv = ["retrieve", "--db", str(db_path), "--query", "Tom son", "--class", "Contact",
                "--lexicon", str(lexicon_path)]
        assert main(argv) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["class"] == "contact"
        assert [c["surface"] for c in result["candidates"]] == ["Thomson"]


class TestRun:
    """Decoding a corpus end to end"""

    def test_runs_are_reproducible(self, lexicon_path, db_path, corpus_path, tmp_path):
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert main(_run_args(lexicon_path, db_path, corpus_path, first)) == 0
        assert main(_run_args(lexicon_path, db_path, corpus_path, second) + ["--jobs", "2"]) == 0
        assert first.read_bytes() == second.read_bytes()
        assert [r.id for r in load_results(first)] == ["u1", "u2", "u3"]

    def test_no_context_flag(self, lexicon_path, db_path, corpus_path, tmp_path):
        out = tmp_path / "results.jsonl"
        assert main(_run_args(lexicon_path, db_path, corpus_path, out) + ["--no-context"]) == 0
        records = load_results(out)
        assert all(not r.context and r.prompt is None and r.final == r.stage1 for r in records)

    def test_score_includes_context_free_row(self, lexicon_path, db_path, corpus_path, tmp_path, capsys):
        out = tmp_path / "results.jsonl"
        main(_run_args(lexicon_path, db_path, corpus_path, out))
        capsys.readouterr()
        assert main(["score", "--results", str(out), "--corpus", str(corpus_path), "--format", "jsonl"]) == 0
        rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert [row["mode"] for row in rows] == ["full-full", "context-free"]
        assert all(row["ref_entities"] == 3 for row in rows)

    def test_score_table(self, lexicon_path, db_path, corpus_path, tmp_path, capsys):
        out = tmp_path / "results.jsonl"
        main(_run_args(lexicon_path, db_path, corpus_path, out, mode="full-ne"))
        capsys.readouterr()
        assert main(["score", "--results", str(out), "--corpus", str(corpus_path)]) == 0
        table = capsys.readouterr().out
        assert "WER %" in table
        assert "full-ne" in table

    def test_score_plain_transcripts(self, corpus_path, tmp_path, capsys):
        hyp = tmp_path / "asr.jsonl"
        hyp.write_text(
            '{"id": "u1", "transcript": "Call <contact> Tom son </contact>"}\n'
            '{"id": "u2", "transcript": "play some jazz"}\n'
            '{"id": "u3", "transcript": "text <contact> Walker </contact> on <app> Spotify </app>"}\n',
            encoding="utf-8",
        )
        assert main(["score", "--ref", str(corpus_path), "--hyp", str(hyp), "--format", "jsonl"]) == 0
        rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert [row["mode"] for row in rows] == ["asr"]
        assert (rows[0]["ref_words"], rows[0]["word_errors"]) == (9, 2)
        assert (rows[0]["ref_entities"], rows[0]["entity_errors"]) == (3, 1)

        assert main(["score", "--ref", str(corpus_path), "--hyp", str(hyp), "--label", "baseline",
                     "--format", "jsonl"]) == 0
        assert json.loads(capsys.readouterr().out)["mode"] == "baseline"

    def test_debug_logging_registers_stage_handlers_once(self, lexicon_path, db_path, corpus_path, tmp_path,
                                                         monkeypatch):
        monkeypatch.setattr(trace, "global_handlers", {})
        for name in ("a.jsonl", "b.jsonl"):
            argv = ["--log-level", "DEBUG"] + _run_args(lexicon_path, db_path, corpus_path, tmp_path / name)
            assert main(argv) == 0
        assert set(trace.global_handlers) == set(StageType)
        assert all(len(handlers) == 1 for handlers in trace.global_handlers.values())

    def test_sweep(self, lexicon_path, db_path, corpus_path, tmp_path, capsys):
        out = tmp_path / "sweep.jsonl"
        argv = ["sweep", "--mode", "full-full", "--db", str(db_path), "--corpus", str(corpus_path),
                "--lexicon", str(lexicon_path), "--sizes", "1,10", "--out", str(out)]
        assert main(argv) == 0
        assert "size" in capsys.readouterr().out
        rows = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
        assert [row["size"] for row in rows] == [1, 10]
        assert all(row["wer"] == 0.0 for row in rows)


class TestDataCommands:
    def test_synthdb(self, corpus_path, tmp_path):
        pool = tmp_path / "pool.txt"
        pool.write_text("contact Babo 1.0\ncontact Dalik 2.0\ncontact Fenut 0.5\napp Gomo 1.0\n", encoding="utf-8")
        sizes = tmp_path / "sizes.txt"
        sizes.write_text("contact 2 1.0\napp 0 0.5\napp 1 0.5\n", encoding="utf-8")
        out = tmp_path / "dbs"
        argv = ["synthdb", "--pool", str(pool), "--sizes", str(sizes), "--corpus", str(corpus_path), "--out", str(out)]
        assert main(argv) == 0
        assert sorted(p.name for p in out.iterdir()) == ["u1.jsonl", "u2.jsonl", "u3.jsonl"]
        u1 = load_database(out / "u1.jsonl")
        assert u1.contains_surface("contact", "Thomson")
        assert len(u1.partition("contact")) == 3
        assert load_database(out / "u3.jsonl").contains_surface("app", "Spotify")

    def test_traindata_is_deterministic(self, lexicon_path, db_path, corpus_path, tmp_path):
        paths = [tmp_path / "a.jsonl", tmp_path / "b.jsonl"]
        for path in paths:
            argv = ["traindata", "--variant", "full-full", "--db", str(db_path), "--corpus", str(corpus_path),
                    "--lexicon", str(lexicon_path), "--corruption", "1:1.0", "--out", str(path)]
            assert main(argv) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()
        assert [e.id for e in load_corpus(paths[0])] == ["u1", "u2", "u3"]

    def test_traindata_from_detection_file(self, lexicon_path, db_path, corpus_path, tmp_path):
        detections = tmp_path / "detections.jsonl"
        detections.write_text(
            '{"id": "u1", "transcript": "Call <contact> Tomson </contact>"}\n'
            '{"id": "u2", "transcript": "play some jazz"}\n'
            '{"id": "u3", "transcript": "text Walker on <app> Spotify </app>"}\n',
            encoding="utf-8",
        )
        out = tmp_path / "train.jsonl"
        argv = ["traindata", "--variant", "full-ne", "--db", str(db_path), "--corpus", str(corpus_path),
                "--detections", str(detections), "--lexicon", str(lexicon_path), "--out", str(out)]
        assert main(argv) == 0
        examples = {e.id: e for e in load_corpus(out)}
        assert examples["u1"].source == \
            "Call <contact> Tomson </contact> <s> Thomson </s> <contact> Thomson </contact>"
        assert examples["u2"].source == "play some jazz"
        assert examples["u3"].regions[1].text == "<s> Spotify </s>"

    def test_generate(self, tmp_path, capsys):
        out = tmp_path / "bench"
        argv = ["generate", "--out", str(out), "--contacts", "50", "--contacts-per-db", "20", "--utterances", "20"]
        assert main(argv) == 0
        paths = json.loads(capsys.readouterr().out)
        assert set(paths) == {"lexicon", "pool", "sizes", "corpus"}
        assert len(load_utterances(paths["corpus"])) == 20


class TestErrors:
    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["transcribe"])
        assert exc.value.code == 2

    def test_domain_error_is_reported_as_json(self, lexicon_path, db_path, tmp_path, capsys):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text('{"id": "u1", "transcript": "a"}\n{"id": "u1", "transcript": "b"}\n', encoding="utf-8")
        assert main(_run_args(lexicon_path, db_path, corpus, tmp_path / "out.jsonl")) == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "InvalidInputError"
        assert "duplicate" in error["detail"]

    def test_missing_file_exits_1(self, lexicon_path, corpus_path, tmp_path, capsys):
        assert main(_run_args(lexicon_path, tmp_path / "missing.jsonl", corpus_path, tmp_path / "out.jsonl")) == 1
        assert "FileNotFoundError" in capsys.readouterr().err

    def test_bad_histogram(self, lexicon_path, db_path, corpus_path, tmp_path, capsys):
        argv = _run_args(lexicon_path, db_path, corpus_path, tmp_path / "out.jsonl")
        argv[argv.index("1:0.5,2:0.5")] = "1:0.7"
        assert main(argv) == 1
        assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "ConfigError"
