import json
import math
import threading

import pytest

from leaf.corpus import QARecord, make_qg_dataset
from leaf.errors import CheckpointError, ConfigurationError
from leaf.seqformat import MASK, SEP
from leaf.textmodel import (
    DecodeParams,
    StubModel,
    TASK_DISTRACTOR,
    TASK_QG,
    TrainConfig,
    evaluate_loss,
    generate,
    load_handle,
    train,
)
from leaf.textmodel.local import Seq2SeqTransformer, _dataset_loss, _encode_examples
from leaf.textmodel.vocab import WordVocab


def memorization_examples(n=8):
    records = [
        QARecord(id=f"m{i}", context=f"Fact {i}: item {i} weighs {i * 3} grams.",
                 question=f"What does item {i} weigh?", answer=f"{i * 3} grams")
        for i in range(n)
    ]
    return make_qg_dataset(records, 0.5, seed=3)


def tiny_config(**overrides):
    defaults = dict(model_id="local:tiny", learning_rate=1e-3, batch_size=4,
                    epochs=60, seed=7)
    return TrainConfig.qg_defaults(**{**defaults, **overrides})


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt") / "qg-tiny"
    examples = memorization_examples()
    handle = train(tiny_config(), examples, examples, out)
    return handle, examples, out


class TestTrainConfig:
    def test_qg_defaults_match_contract(self):
        c = TrainConfig.qg_defaults()
        assert (c.learning_rate, c.batch_size) == (1e-4, 16)
        assert (c.max_source_tokens, c.max_target_tokens) == (300, 80)
        assert c.epochs == 5

    def test_distractor_defaults_match_contract(self):
        c = TrainConfig.distractor_defaults()
        assert (c.max_source_tokens, c.max_target_tokens) == (512, 64)
        assert (c.learning_rate, c.batch_size, c.epochs) == (1e-4, 16, 5)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            TrainConfig.qg_defaults(batch_size=0).validate()
        with pytest.raises(ConfigurationError):
            TrainConfig.qg_defaults(mask_probability=1.5).validate()
        with pytest.raises(ConfigurationError):
            TrainConfig.from_dict({"learning_rte": 1e-4})

    def test_dict_round_trip(self):
        c = TrainConfig.distractor_defaults(seed=99)
        assert TrainConfig.from_dict(c.to_dict()) == c


class TestDecodeParams:
    def test_validation(self):
        DecodeParams().validate()
        with pytest.raises(ConfigurationError):
            DecodeParams(strategy="greedy").validate()
        with pytest.raises(ConfigurationError):
            DecodeParams(beam_width=0).validate()
        with pytest.raises(ConfigurationError):
            DecodeParams(strategy="sample", temperature=0).validate()

    def test_width_follows_strategy(self):
        assert DecodeParams(strategy="beam", beam_width=2, num_samples=9).width == 2
        assert DecodeParams(strategy="sample", beam_width=2, num_samples=9).width == 9


class TestWordVocab:
    def test_sentinels_are_atomic(self):
        vocab = WordVocab.build([f"a b {MASK} c {SEP}"])
        ids = vocab.encode(f"{MASK} {SEP}")
        assert vocab.decode(ids) == f"{MASK} {SEP}"

    def test_frequency_order_with_lexicographic_ties(self):
        vocab = WordVocab.build(["b b a a c"])
        encoded = vocab.encode("a b c")
        assert encoded[0] < encoded[1] or vocab.decode([encoded[0]]) == "a"

    def test_unknown_maps_to_unk(self):
        vocab = WordVocab.build(["known words"])
        ids = vocab.encode("unknown")
        assert ids == [vocab.unk_id]

    def test_max_size_cap(self):
        vocab = WordVocab.build(["a b c d e f g h"], max_size=8)
        assert len(vocab) == 8

    def test_save_load(self, tmp_path):
        vocab = WordVocab.build(["some words here"])
        vocab.save(tmp_path / "v.json")
        back = WordVocab.load(tmp_path / "v.json")
        assert back.encode("some words") == vocab.encode("some words")

    def test_encode_limit(self):
        vocab = WordVocab.build(["a b c d e"])
        assert len(vocab.encode("a b c d e", limit=3)) == 3
        ids = vocab.encode("a b c d e", limit=3, add_eos=True)
        assert len(ids) == 3 and ids[-1] == vocab.eos_id


class TestStubModel:
    def test_scripted(self):
        stub = StubModel(TASK_QG, {"src": ["out1", "out2"]})
        cands = stub.generate("src", DecodeParams(beam_width=2))
        assert [c.text for c in cands] == ["out1", "out2"]
        assert cands[0].score >= cands[1].score

    def test_unscripted_template_has_keyed_fields(self):
        stub = StubModel(TASK_QG)
        cands = stub.generate("context: The mitochondria produce energy. answer: [MASK]",
                              DecodeParams(beam_width=3))
        assert cands
        for c in cands:
            assert "question:" in c.text and "answer:" in c.text

    def test_unscripted_distractor_template_is_sep_joined(self):
        stub = StubModel(TASK_DISTRACTOR)
        cands = stub.generate(
            "question: Q? answer: steam context: Watt improved the engine design.",
            DecodeParams(beam_width=1),
        )
        assert len(cands) == 1
        assert cands[0].text.count(SEP) == 2

    def test_width_respected(self):
        stub = StubModel(TASK_QG, {"s": ["a", "b", "c", "d", "e"]})
        assert len(stub.generate("s", DecodeParams(beam_width=2))) == 2


class TestUniformInitLoss:
    def test_fresh_model_cross_entropy_is_ln_vocab(self):
        examples = memorization_examples()
        config = tiny_config()
        vocab = WordVocab.build(
            text for ex in examples for text in (ex.source, ex.target)
        )
        model = Seq2SeqTransformer(
            vocab_size=len(vocab), pad_id=vocab.pad_id, d_model=64, nhead=4,
            encoder_layers=2, decoder_layers=2, dim_feedforward=128, dropout=0.0,
            max_positions=400,
        )
        encoded = _encode_examples(vocab, examples, config)
        loss = _dataset_loss(model, vocab, encoded, batch_size=4)
        assert loss == pytest.approx(math.log(len(vocab)), rel=1e-6)


class TestTraining:
    def test_handle_invariants_and_metadata(self, trained):
        handle, examples, out = trained
        assert 1 <= handle.best_epoch <= handle.config.epochs
        assert handle.best_val_loss >= 0
        metadata = json.loads((out / "metadata.json").read_text())
        assert metadata["backend"] == "local"
        assert metadata["task"] == TASK_QG
        assert metadata["optimizer"]["name"] == "Adam"
        assert metadata["optimizer"]["lr_schedule"] == "constant"
        assert len(metadata["history"]) == handle.config.epochs

    def test_loss_decreases_on_memorization(self, trained):
        handle, _, _ = trained
        history = handle.metadata["history"]
        assert history[-1]["train_loss"] < history[0]["train_loss"]
        assert handle.best_val_loss < history[0]["dev_loss"]

    def test_evaluate_loss_deterministic(self, trained):
        handle, examples, _ = trained
        assert evaluate_loss(handle, examples[:1]) == evaluate_loss(handle, examples[:1])

    def test_evaluate_loss_rejects_empty(self, trained):
        handle, _, _ = trained
        with pytest.raises(ValueError):
            evaluate_loss(handle, [])

    def test_empty_split_rejected(self):
        with pytest.raises(ValueError):
            train(tiny_config(), [], [], "/tmp/never")

    def test_unknown_local_model_id(self):
        with pytest.raises(ConfigurationError):
            train(tiny_config(model_id="local:huge"), memorization_examples(),
                  memorization_examples(), "/tmp/never")

    def test_out_of_memory_is_fatal_with_batch_size_hint(self, tmp_path, monkeypatch):
        import torch

        from leaf.textmodel import local as local_mod

        oom_type = getattr(torch, "OutOfMemoryError", None) or torch.cuda.OutOfMemoryError

        def blow_up(*args, **kwargs):
            raise oom_type("CUDA out of memory")

        monkeypatch.setattr(local_mod, "_batch_loss", blow_up)
        examples = memorization_examples()
        with pytest.raises(MemoryError, match="batch_size"):
            train(tiny_config(), examples, examples, tmp_path / "oom")


class TestGenerate:
    def test_beam_one_returns_exactly_one(self, trained):
        handle, examples, _ = trained
        cands = generate(handle, examples[0].source, DecodeParams(beam_width=1))
        assert len(cands) == 1

    def test_beam_candidates_sorted_and_bounded(self, trained):
        handle, examples, _ = trained
        params = DecodeParams(beam_width=5, max_new_tokens=20)
        cands = generate(handle, examples[0].source, params)
        assert 1 <= len(cands) <= 5
        scores = [c.score for c in cands]
        assert scores == sorted(scores, reverse=True)
        for c in cands:
            assert len(c.text.split()) <= 20

    def test_beam_deterministic(self, trained):
        handle, examples, _ = trained
        params = DecodeParams(beam_width=4)
        assert generate(handle, examples[1].source, params) == generate(
            handle, examples[1].source, params
        )

    def test_sampling_seeded_determinism(self, trained):
        handle, examples, _ = trained
        params = DecodeParams(strategy="sample", num_samples=3, seed=123, temperature=0.8)
        first = generate(handle, examples[0].source, params)
        second = generate(handle, examples[0].source, params)
        assert first == second
        assert len(first) == 3

    def test_memorized_source_decodes_to_target(self, trained):
        handle, examples, _ = trained
        best = generate(handle, examples[0].source, DecodeParams(beam_width=4))[0]
        assert best.text == examples[0].target

    def test_empty_source_rejected(self, trained):
        handle, _, _ = trained
        with pytest.raises(ValueError):
            generate(handle, "", DecodeParams())


class TestCheckpointRoundTrip:
    def test_reload_gives_identical_generate_output(self, trained):
        handle, examples, out = trained
        reloaded = load_handle(out)
        assert reloaded.best_epoch == handle.best_epoch
        assert reloaded.best_val_loss == handle.best_val_loss
        params = DecodeParams(beam_width=4)
        for ex in examples[:3]:
            assert generate(reloaded, ex.source, params) == generate(handle, ex.source, params)

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_handle(tmp_path / "nope")

    def test_missing_weights_file(self, tmp_path, trained):
        _, _, out = trained
        broken = tmp_path / "broken"
        broken.mkdir()
        (broken / "metadata.json").write_text((out / "metadata.json").read_text())
        with pytest.raises(CheckpointError):
            load_handle(broken).generate("x", DecodeParams())


class TestConcurrentAccess:
    def test_parallel_generate_calls_are_safe_and_consistent(self, trained):
        handle, examples, _ = trained
        params = DecodeParams(beam_width=2)
        expected = [generate(handle, ex.source, params) for ex in examples[:4]]
        results = [None] * 8
        errors = []

        def worker(i):
            try:
                results[i] = generate(handle, examples[i % 4].source, params)
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        for i, result in enumerate(results):
            assert result == expected[i % 4]


class TestInterfaceSubstitutability:
    def test_no_module_outside_textmodel_names_a_concrete_backend(self):
        from pathlib import Path

        import leaf.distractors
        import leaf.metrics
        import leaf.pipeline
        import leaf.qag
        import leaf.service

        for mod in (leaf.qag, leaf.distractors, leaf.pipeline, leaf.metrics, leaf.service):
            source = Path(mod.__file__).read_text(encoding="utf-8")
            assert "textmodel.local" not in source, mod.__name__
            assert "textmodel.hf" not in source, mod.__name__
            assert "local:" not in source, mod.__name__
            assert "Seq2SeqTransformer" not in source, mod.__name__


class TestRandomInitThroughPublicSurface:
    def test_near_zero_lr_training_keeps_uniform_loss(self, tmp_path):
        examples = memorization_examples()
        config = tiny_config(learning_rate=1e-12, epochs=1)
        handle = train(config, examples, examples, tmp_path / "frozen")
        vocab_size = handle.metadata["vocab_size"]
        assert evaluate_loss(handle, examples) == pytest.approx(
            math.log(vocab_size), rel=0.05
        )
