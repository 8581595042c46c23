import csv
import json
from pathlib import Path

import pytest

from pplab import read_jsonl, write_jsonl
from pplab.cli import main

from synthdata import make_corpus

FIXTURES = Path(__file__).parent / "fixtures" / "chat"


@pytest.fixture(scope="module")
def corpus_jsonl(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    write_jsonl(make_corpus(n_per_group=3, seed=13, with_mmse=True), path)
    return path


@pytest.fixture(scope="module")
def corpus12_jsonl(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus12") / "corpus.jsonl"
    write_jsonl(make_corpus(n_per_group=6, seed=17, with_mmse=True), path)
    return path


LM_FLAGS = ["--embedding-dim", "16", "--layer-dims", "16",
            "--weight-drop", "0", "--batch-size", "4", "--bptt-window", "8",
            "--epochs", "2", "--learning-rate", "2.0", "--grad-clip", "0.5"]


class TestPreprocess:
    def test_chat_dir_to_jsonl(self, tmp_path, capsys):
        chat_dir = tmp_path / "chat"
        chat_dir.mkdir()
        for i, group in enumerate(["Control", "ProbableAD"]):
            (chat_dir / f"p{i}-0.cha").write_text(
                f"@ID:\teng|Pitt|PAR|70;|female||{group}||Participant|\n"
                "*PAR:\tthe boy is stealing cookies .\n")
        out = tmp_path / "corpus.jsonl"
        assert main(["preprocess", str(chat_dir), "--out", str(out)]) == 0
        corpus = read_jsonl(out)
        assert len(corpus) == 2
        assert {p.group for p in corpus.participants} == \
            {"control", "dementia"}
        assert "2 participants" in capsys.readouterr().out
        meta = json.loads((tmp_path / "corpus.jsonl.meta.json").read_text())
        assert meta["config"]["append_eos"] is True

    def test_metadata_csv_applied(self, tmp_path):
        chat_dir = tmp_path / "chat"
        chat_dir.mkdir()
        (chat_dir / "p0-0.cha").write_text(
            "@ID:\teng|Pitt|PAR|70;|female||Control||Participant|\n"
            "*PAR:\thello there .\n")
        meta = tmp_path / "meta.csv"
        meta.write_text("participant_id,group,age,education,visit,mmse\n"
                        "p0,dementia,71,12,0,19\n")
        out = tmp_path / "corpus.jsonl"
        assert main(["preprocess", str(chat_dir), "--metadata", str(meta),
                     "--out", str(out)]) == 0
        p = read_jsonl(out).get("p0")
        assert p.group == "dementia" and p.mmse_history == ((0, 19),)

    def test_missing_dir_is_reported(self, tmp_path, capsys):
        assert main(["preprocess", str(tmp_path / "nope"),
                     "--out", str(tmp_path / "o.jsonl")]) == 1
        assert "error:" in capsys.readouterr().err


class TestTrain:
    def test_writes_checkpoint_and_report(self, corpus_jsonl, tmp_path):
        out = tmp_path / "con.bin"
        assert main(["train", "--corpus", str(corpus_jsonl),
                     "--group", "control", "--out", str(out),
                     "--seed", "3"] + LM_FLAGS) == 0
        from pplab import load_checkpoint_file
        params = load_checkpoint_file(out)
        assert params.config.seed == 3
        report = json.loads(out.with_suffix(".train.json").read_text())
        assert report["report"]["epochs_run"] == 2

    def test_rerun_is_byte_identical(self, corpus_jsonl, tmp_path):
        args = ["train", "--corpus", str(corpus_jsonl), "--group", "dementia",
                "--seed", "4"] + LM_FLAGS
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_file_with_flag_override(self, corpus_jsonl, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "embedding_dim": 16, "layer_dims": [16], "weight_drop": 0.0,
            "batch_size": 4, "bptt_window": 8, "epochs": 2,
            "learning_rate": 2.0, "grad_clip": 0.5, "seed": 1}))
        out = tmp_path / "m.bin"
        assert main(["train", "--corpus", str(corpus_jsonl),
                     "--group", "control", "--out", str(out),
                     "--config", str(cfg), "--epochs", "1"]) == 0
        report = json.loads(out.with_suffix(".train.json").read_text())
        assert report["config"]["epochs"] == 1
        assert report["config"]["embedding_dim"] == 16


class TestLoocv:
    def test_outputs_and_figures(self, corpus_jsonl, tmp_path, capsys):
        out_dir = tmp_path / "run"
        assert main(["loocv", "--corpus", str(corpus_jsonl),
                     "--out-dir", str(out_dir), "--seed", "2", "--jobs", "2",
                     "--screening-mmse", "0", "--severity-mmse", "24"]
                    + LM_FLAGS) == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert set(report["aggregate"]) == {
            "auc_diff", "auc_p_con", "auc_p_model", "acc_eer_diff"}
        with open(out_dir / "scores.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        n_transcripts = sum(
            len(p.transcripts) for p in read_jsonl(corpus_jsonl).participants)
        assert len(rows) == n_transcripts
        assert (out_dir / "scores.csv.meta.json").exists()
        assert (out_dir / "score_separation.png").stat().st_size > 0
        assert (out_dir / "screening.json").exists()
        severity = json.loads((out_dir / "severity.json").read_text())
        assert severity["summary"]["mmse_ceiling"] == 24
        assert "auc_diff" in capsys.readouterr().out


def write_narratives(d):
    d.mkdir(parents=True, exist_ok=True)
    texts = {
        "baseline": "the ladder is leaning on the cupboard .",
        "0.5-1.0": "the ladder is leaning on the thing .",
        "1.0-1.5": "the thing is leaning on the thing .",
        "1.5-2.0": "the thing is going on the thing .",
        "2.0-2.5": "the thing is going the thing .",
        "2.5-3.0": "the thing going thing .",
    }
    for label, text in texts.items():
        (d / f"{label}.txt").write_text(text + "\n")


class TestInterrogate:
    def test_substitution_mode_trains_pair(self, corpus_jsonl, tmp_path):
        subs = tmp_path / "subs.csv"
        subs.write_text("word,band_low,band_high,replacement\n"
                        "cupboard,0.5,1.0,thing\n"
                        "ladder,1.5,2.0,\n")
        narrative = tmp_path / "base.txt"
        narrative.write_text("the ladder is leaning on the cupboard .\n"
                             "the boy is washing the kettle .\n")
        out_dir = tmp_path / "out"
        assert main(["interrogate", "--corpus", str(corpus_jsonl),
                     "--substitutions", str(subs),
                     "--baseline-narrative", str(narrative),
                     "--alphas", "0,1", "--out-dir", str(out_dir),
                     "--seed", "5"] + LM_FLAGS) == 0
        with open(out_dir / "perturbation_curve.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 6  # two alphas, six bands
        baseline = [r for r in rows if r["band"] == "baseline"]
        assert all(float(r["mean_px_minus_po"]) == 0.0 for r in baseline)
        assert (out_dir / "perturbation_curve.png").stat().st_size > 0

    def test_checkpoint_mode_identical_twins_flat(self, corpus_jsonl,
                                                  tmp_path):
        model = tmp_path / "m.bin"
        assert main(["train", "--corpus", str(corpus_jsonl),
                     "--group", "control", "--out", str(model),
                     "--seed", "3"] + LM_FLAGS) == 0
        narratives = tmp_path / "narr"
        write_narratives(narratives)
        out_dir = tmp_path / "out"
        assert main(["interrogate", "--con", str(model), "--dem", str(model),
                     "--narratives-dir", str(narratives),
                     "--alphas", "0,0.5,1", "--out-dir", str(out_dir)]) == 0
        with open(out_dir / "perturbation_curve.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        # identical twins: every interpolation is the same model, so the
        # curve varies with band only, not alpha
        by_band = {}
        for r in rows:
            by_band.setdefault(r["band"], set()).add(r["mean_px_minus_po"])
        assert all(len(v) == 1 for v in by_band.values())

    def test_missing_baseline_narrative_is_error(self, corpus_jsonl,
                                                 tmp_path, capsys):
        narratives = tmp_path / "narr"
        write_narratives(narratives)
        (narratives / "baseline.txt").unlink()
        assert main(["interrogate", "--corpus", str(corpus_jsonl),
                     "--narratives-dir", str(narratives),
                     "--out-dir", str(tmp_path / "out")] + LM_FLAGS) == 1
        assert "baseline" in capsys.readouterr().err


class TestLexfreq:
    def lexicon(self, tmp_path):
        p = tmp_path / "freq.tsv"
        p.write_text("ladder\t1000\ncupboard\t100\nthing\t10000\n"
                     "boy\t5000\nkettle\t50\nleaning\t200\ngoing\t20000\n"
                     "washing\t300\n")
        return p

    def test_narratives_mode_monotone_bands(self, tmp_path, capsys):
        narratives = tmp_path / "narr"
        write_narratives(narratives)
        out_dir = tmp_path / "out"
        nouns = tmp_path / "nouns.txt"
        nouns.write_text("ladder\ncupboard\nthing\nboy\nkettle\n")
        verbs = tmp_path / "verbs.txt"
        verbs.write_text("leaning\ngoing\nwashing\n")
        assert main(["lexfreq", "--lexicon", str(self.lexicon(tmp_path)),
                     "--narratives-dir", str(narratives),
                     "--nouns", str(nouns), "--verbs", str(verbs),
                     "--out-dir", str(out_dir)]) == 0
        report = json.loads((out_dir / "lexfreq.json").read_text())
        means = [r["mean_log_frequency"] for r in report["narratives"]]
        assert len(means) == 6
        assert (out_dir / "narrative_frequencies.csv").exists()
        assert (out_dir / "narrative_frequencies.png").stat().st_size > 0
        assert report["spearman_band_vs_frequency"] is not None

    def test_corpus_mode_with_regression(self, corpus12_jsonl, tmp_path):
        corpus_jsonl = corpus12_jsonl
        lex = tmp_path / "freq.tsv"
        # cover the synthetic vocabulary so every transcript gets a mean
        from synthdata import (POOR_NOUNS, POOR_VERBS, RICH_NOUNS,
                               RICH_VERBS, SHARED_NOUNS, SHARED_VERBS)
        lines = [f"{w}\t{100 + i}" for i, w in enumerate(
            RICH_NOUNS + RICH_VERBS + POOR_NOUNS + POOR_VERBS
            + SHARED_NOUNS + SHARED_VERBS)]
        lex.write_text("\n".join(lines) + "\n")
        nouns = tmp_path / "nouns.txt"
        nouns.write_text("\n".join(RICH_NOUNS + POOR_NOUNS + SHARED_NOUNS))
        verbs = tmp_path / "verbs.txt"
        verbs.write_text("\n".join(RICH_VERBS + POOR_VERBS + SHARED_VERBS))
        # loocv first, to produce the scores the regression consumes
        run_dir = tmp_path / "run"
        assert main(["loocv", "--corpus", str(corpus_jsonl),
                     "--out-dir", str(run_dir), "--seed", "2"]
                    + LM_FLAGS) == 0
        out_dir = tmp_path / "lex"
        assert main(["lexfreq", "--lexicon", str(lex),
                     "--corpus", str(corpus_jsonl),
                     "--nouns", str(nouns), "--verbs", str(verbs),
                     "--scores", str(run_dir / "scores.csv"),
                     "--out-dir", str(out_dir)]) == 0
        report = json.loads((out_dir / "lexfreq.json").read_text())
        reg = report["regression"]
        names = [p["name"] for p in reg["predictors"]]
        assert names == ["p_model", "p_con", "age", "education", "length",
                         "intercept"]
        assert reg["n"] >= 4
        with open(out_dir / "transcript_frequencies.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert all(r["mean_log_frequency"] for r in rows)


class TestGradcheck:
    def test_passes_at_default_threshold(self, capsys):
        assert main(["gradcheck", "--vocab-size", "10", "--dims", "6",
                     "--window", "4"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_fails_at_impossible_threshold(self, capsys):
        assert main(["gradcheck", "--vocab-size", "10", "--dims", "6",
                     "--window", "4", "--threshold", "1e-300"]) == 1
        assert "FAIL" in capsys.readouterr().out
