import json

import pytest
import yaml
from click.testing import CliRunner

from leaf.cli import main
from leaf.corpus import read_examples_jsonl


@pytest.fixture
def runner():
    return CliRunner()


def _squad(squad_file, n=8):
    articles = []
    for i in range(n):
        context = f"Item {i} sits in room {i}. The room {i} is large."
        articles.append((context, [(f"q{i}", f"Where is item {i}?", f"room {i}",
                                    context.index(f"room {i}"))]))
    return squad_file(articles)


def _race(race_file, n=4):
    articles = []
    for i in range(n):
        articles.append({
            "id": f"a{i}",
            "article": f"Passage {i} is about energy and motion in system {i}.",
            "questions": [f"What is passage {i} about?"],
            "options": [[f"energy {i}", f"color {i}", f"sound {i}", f"taste {i}"]],
            "answers": ["A"],
        })
    return race_file(articles)


class TestDataCompile:
    def test_qg_compile_and_determinism(self, runner, squad_file, tmp_path):
        corpus_path = _squad(squad_file)
        out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (out1, out2):
            result = runner.invoke(main, [
                "data", "compile", "--task", "qg", "--in", str(corpus_path),
                "--out", str(out), "--mask-prob", "0.3", "--seed", "11",
            ])
            assert result.exit_code == 0, result.output
        assert out1.read_bytes() == out2.read_bytes()
        examples = read_examples_jsonl(out1)
        assert len(examples) == 8
        assert {e.task for e in examples} == {"qa_generation"}

    def test_distractor_compile(self, runner, race_file, tmp_path):
        corpus_path = _race(race_file)
        out = tmp_path / "d.jsonl"
        result = runner.invoke(main, [
            "data", "compile", "--task", "distractor", "--in", str(corpus_path),
            "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        examples = read_examples_jsonl(out)
        assert len(examples) == 4
        assert all("[SEP]" in e.target for e in examples)


@pytest.fixture
def tiny_qg_checkpoint(runner, squad_file, tmp_path):
    corpus_path = _squad(squad_file)
    data = tmp_path / "train.jsonl"
    runner.invoke(main, ["data", "compile", "--task", "qg", "--in", str(corpus_path),
                         "--out", str(data), "--seed", "5"])
    config = tmp_path / "config.yaml"
    config.write_text(yaml.safe_dump({
        "model_id": "local:tiny", "learning_rate": 0.001, "batch_size": 4,
        "epochs": 2, "seed": 5,
    }))
    out_dir = tmp_path / "ckpt"
    result = runner.invoke(main, [
        "train", "--task", "qg", "--data", str(data), "--dev", str(data),
        "--config", str(config), "--out", str(out_dir),
    ])
    assert result.exit_code == 0, result.output
    return out_dir, data, corpus_path


class TestTrainAndEval:
    def test_train_writes_checkpoint(self, tiny_qg_checkpoint):
        out_dir, _, _ = tiny_qg_checkpoint
        metadata = json.loads((out_dir / "metadata.json").read_text())
        assert metadata["backend"] == "local"
        assert 1 <= metadata["best_epoch"] <= 2
        assert (out_dir / "weights.pt").exists()

    def test_eval_loss_report(self, runner, tiny_qg_checkpoint, tmp_path):
        out_dir, data, _ = tiny_qg_checkpoint
        report_path = tmp_path / "loss.json"
        result = runner.invoke(main, [
            "eval", "--task", "qg", "--model", str(out_dir), "--data", str(data),
            "--report", str(report_path),
        ])
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert report["metrics"]["cross_entropy"] > 0

    def test_eval_answer_report(self, runner, tiny_qg_checkpoint, tmp_path):
        out_dir, _, corpus_path = tiny_qg_checkpoint
        report_path = tmp_path / "answers.json"
        result = runner.invoke(main, [
            "eval", "--task", "answer", "--model", str(out_dir), "--data", str(corpus_path),
            "--report", str(report_path), "--limit", "4",
        ])
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert set(report["metrics"]) == {"exact_match", "f1"}
        assert report["n_examples"] == 4

    def test_eval_distractor_report(self, runner, race_file, tmp_path):
        corpus_path = _race(race_file)
        data = tmp_path / "d.jsonl"
        runner.invoke(main, ["data", "compile", "--task", "distractor",
                             "--in", str(corpus_path), "--out", str(data)])
        config = tmp_path / "config.yaml"
        config.write_text(yaml.safe_dump({
            "model_id": "local:tiny", "learning_rate": 0.001, "batch_size": 4,
            "epochs": 1, "seed": 5,
        }))
        ckpt = tmp_path / "dckpt"
        result = runner.invoke(main, [
            "train", "--task", "distractor", "--data", str(data), "--dev", str(data),
            "--config", str(config), "--out", str(ckpt),
        ])
        assert result.exit_code == 0, result.output
        report_path = tmp_path / "bleu.json"
        result = runner.invoke(main, [
            "eval", "--task", "distractor", "--model", str(ckpt),
            "--data", str(corpus_path), "--report", str(report_path),
        ])
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert set(report["metrics"]) == {"bleu1_slot1", "bleu1_slot2", "bleu1_slot3"}
        assert report["provenance"]["bleu_aggregation"] == "corpus"

    def test_unknown_config_key_fails(self, runner, squad_file, tmp_path):
        corpus_path = _squad(squad_file)
        data = tmp_path / "t.jsonl"
        runner.invoke(main, ["data", "compile", "--task", "qg", "--in", str(corpus_path),
                             "--out", str(data)])
        config = tmp_path / "bad.yaml"
        config.write_text(yaml.safe_dump({"learning_rte": 0.001}))
        result = runner.invoke(main, [
            "train", "--task", "qg", "--data", str(data), "--dev", str(data),
            "--config", str(config), "--out", str(tmp_path / "x"),
        ])
        assert result.exit_code != 0


SIX_SENTENCES = (
    "Oxygen makes up about a fifth of the atmosphere. Plants produce oxygen during"
    " photosynthesis. The mitochondria consume oxygen in respiration. Carbon moves"
    " through the food chain. Nitrogen dominates the remaining air volume. Helium"
    " escapes the atmosphere over time."
)


class TestGenerateCommand:
    def test_stub_generation_deterministic(self, runner, tmp_path):
        text_file = tmp_path / "input.txt"
        text_file.write_text(SIX_SENTENCES)
        outputs = []
        for name in ("o1.json", "o2.json"):
            out = tmp_path / name
            result = runner.invoke(main, [
                "generate", "--text-file", str(text_file), "--count", "3",
                "--out", str(out), "--stub",
            ])
            assert result.exit_code == 0, result.output
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
        items = json.loads(outputs[0])
        assert 1 <= len(items) <= 3
        for item in items:
            assert item["question"].endswith("?")
            assert item["answer"]
            assert 1 <= len(item["distractors"]) <= 3
            assert all(d["origin"] in ("model", "semantic") for d in item["distractors"])

    def test_no_semantic_fallback_flag(self, runner, tmp_path):
        text_file = tmp_path / "input.txt"
        text_file.write_text(SIX_SENTENCES)
        result = runner.invoke(main, [
            "generate", "--text-file", str(text_file), "--count", "2",
            "--stub", "--no-semantic-fallback",
        ])
        assert result.exit_code == 0, result.output
        items = json.loads(result.output[: result.output.rfind("]") + 1])
        assert all(d["origin"] == "model" for i in items for d in i["distractors"])

    def test_models_required_without_stub(self, runner, tmp_path):
        text_file = tmp_path / "input.txt"
        text_file.write_text("Some text.")
        result = runner.invoke(main, ["generate", "--text-file", str(text_file), "--count", "1"])
        assert result.exit_code != 0
        assert "--qg-model" in result.output
