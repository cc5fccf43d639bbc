"""The ``leaf`` command line: data compilation, training, evaluation,
generation, and the REST server.
"""

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path

import click
import yaml

from .errors import ConfigurationError


@click.group()
def main():
    """Generate multiple-choice questions from educational text."""
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )


@main.group()
def data():
    """Dataset compilation."""


@data.command("compile")
@click.option("--task", type=click.Choice(["qg", "distractor"]), required=True)
@click.option("--in", "in_path", type=click.Path(exists=True), required=True,
              help="QA corpus JSON (qg) or article file/directory (distractor).")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--mask-prob", type=float, default=0.3, show_default=True)
@click.option("--seed", type=int, default=13, show_default=True)
@click.option("--max-source-tokens", type=int, default=None)
@click.option("--max-target-tokens", type=int, default=None)
def data_compile(task, in_path, out_path, mask_prob, seed, max_source_tokens, max_target_tokens):
    """Compile a corpus into a task-specific example JSONL."""
    from . import corpus

    if task == "qg":
        records = corpus.load_qa_corpus(in_path)
        examples = corpus.make_qg_dataset(
            records, mask_prob, seed,
            max_source_tokens or corpus.QG_MAX_SOURCE_TOKENS,
            max_target_tokens or corpus.QG_MAX_TARGET_TOKENS,
        )
    else:
        records = corpus.load_distractor_corpus(in_path)
        examples = corpus.make_distractor_dataset(
            records,
            max_source_tokens or corpus.DISTRACTOR_MAX_SOURCE_TOKENS,
            max_target_tokens or corpus.DISTRACTOR_MAX_TARGET_TOKENS,
        )
    corpus.write_examples_jsonl(examples, out_path)
    click.echo(f"wrote {len(examples)} examples to {out_path}")


def _train_config(task: str, overrides: dict):
    from .textmodel import TrainConfig

    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigurationError(f"unknown training config keys: {sorted(unknown)}")
    if task == "qg":
        config = TrainConfig.qg_defaults(**overrides)
    else:
        config = TrainConfig.distractor_defaults(**overrides)
    config.validate()
    return config


@main.command()
@click.option("--task", type=click.Choice(["qg", "distractor"]), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--dev", "dev_path", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="YAML file with TrainConfig overrides.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def train(task, data_path, dev_path, config_path, out_dir):
    """Train on compiled JSONL and persist the best-epoch checkpoint."""
    from . import corpus
    from . import textmodel

    overrides = {}
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            overrides = yaml.safe_load(fh) or {}
    config = _train_config(task, overrides)
    train_examples = corpus.read_examples_jsonl(data_path)
    dev_examples = corpus.read_examples_jsonl(dev_path)
    handle = textmodel.train(config, train_examples, dev_examples, out_dir)
    click.echo(
        f"checkpoint {out_dir}: best epoch {handle.best_epoch}, "
        f"dev cross-entropy {handle.best_val_loss:.4f}"
    )


@main.command("eval")
@click.option("--task", type=click.Choice(["answer", "qg", "distractor"]), required=True)
@click.option("--model", "model_dir", type=click.Path(exists=True), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True), required=True,
              help="answer: QA corpus JSON; distractor: article corpus; qg: compiled JSONL.")
@click.option("--report", "report_path", type=click.Path(), required=True)
@click.option("--split-name", default=None)
@click.option("--limit", type=int, default=None, help="Evaluate only the first N records.")
def eval_cmd(task, model_dir, data_path, report_path, split_name, limit):
    """Evaluate a checkpoint and write an EvalReport JSON."""
    from . import corpus, metrics
    from .textmodel import load_handle

    handle = load_handle(model_dir)
    if task == "answer":
        records = corpus.load_qa_corpus(data_path)[:limit]
        report = metrics.evaluate_answer_generation(handle, records, split_name=split_name or "dev")
    elif task == "distractor":
        records = corpus.load_distractor_corpus(data_path)[:limit]
        report = metrics.evaluate_distractors(handle, records, split_name=split_name or "test")
    else:
        examples = corpus.read_examples_jsonl(data_path)[:limit]
        report = metrics.report_loss(handle, examples, split_name=split_name or "dev")
    Path(report_path).write_text(report.to_json(), encoding="utf-8")
    shown = report.metrics_pct() or report.metrics
    click.echo(f"{task} on {report.n_examples} examples: {shown}")


@main.command()
@click.option("--text-file", type=click.Path(exists=True), required=True)
@click.option("--count", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the JSON item list here instead of stdout.")
@click.option("--k", type=int, default=3, show_default=True,
              help="Distractors per question.")
@click.option("--qg-model", "qg_model_dir", type=click.Path(), default=None)
@click.option("--distractor-model", "distractor_model_dir", type=click.Path(), default=None)
@click.option("--semantic-index", "semantic_index_path", type=click.Path(), default=None)
@click.option("--no-semantic-fallback", is_flag=True)
@click.option("--stub", is_flag=True, help="Use deterministic stub models (demo mode).")
@click.option("--beam-width", type=int, default=4, show_default=True)
def generate(text_file, count, out_path, k, qg_model_dir, distractor_model_dir,
             semantic_index_path, no_semantic_fallback, stub, beam_width):
    """Generate MCQs from a text file as a JSON list of items."""
    from .distractors import SemanticNeighborIndex, demo_semantic_index
    from .exports import canonical_json
    from .pipeline import generate_mcqs
    from .textmodel import DecodeParams, StubModel, TASK_DISTRACTOR, TASK_QG

    if stub:
        models = {"qg": StubModel(TASK_QG), "distractor": StubModel(TASK_DISTRACTOR)}
        index = demo_semantic_index()
    else:
        if not qg_model_dir or not distractor_model_dir:
            raise click.UsageError("--qg-model and --distractor-model are required without --stub")
        from .textmodel import load_handle

        models = {"qg": load_handle(qg_model_dir), "distractor": load_handle(distractor_model_dir)}
        index = SemanticNeighborIndex.load(semantic_index_path) if semantic_index_path else None

    text = Path(text_file).read_text(encoding="utf-8")
    items = generate_mcqs(
        models, index, text, count, k=k,
        params=DecodeParams(beam_width=beam_width),
        use_semantic_fallback=not no_semantic_fallback,
    )
    payload = canonical_json([item.to_wire() for item in items])
    if out_path:
        Path(out_path).write_text(payload, encoding="utf-8")
        click.echo(f"wrote {len(items)} items to {out_path}")
    else:
        click.echo(payload, nl=False)
    if len(items) < count:
        click.echo(f"note: produced {len(items)} of {count} requested items", err=True)


@main.command()
@click.option("--port", type=int, default=None)
@click.option("--host", default=None)
@click.option("--model-dir", type=click.Path(), default=None,
              help="Directory holding qg/ and distractor/ checkpoints (and optional s2v.npz).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--stub", is_flag=True, help="Serve deterministic stub models.")
def serve(port, host, model_dir, config_path, stub):
    """Run the REST service."""
    import uvicorn

    from .service import create_app
    from .settings import load_settings

    overrides: dict = {}
    if port is not None:
        overrides["port"] = port
    if host is not None:
        overrides["host"] = host
    if stub:
        overrides["stub_models"] = True
    if model_dir:
        base = Path(model_dir)
        overrides["qg_model_dir"] = str(base / "qg")
        overrides["distractor_model_dir"] = str(base / "distractor")
        s2v = base / "s2v.npz"
        if s2v.exists():
            overrides["semantic_index_path"] = str(s2v)
    settings = load_settings(config_path, **overrides)
    uvicorn.run(create_app(settings), host=settings.host, port=settings.port, log_level="info")


if __name__ == "__main__":
    main()
