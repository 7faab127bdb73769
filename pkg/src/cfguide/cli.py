"""Command-line front end.

Subcommands: ingest, eval, ablate, report, serve, synth. Every flag has a
config-file (manifest) equivalent; a flag given on the command line overrides
the file. Exit codes: 0 ok, 1 validation error, 2 runtime error.
"""

import json
import os
import sys

import click

from cfguide.errors import ConfigurationError, ContractViolation


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Guided-decoding evaluation and review tooling."""


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True),
              help="Corpus JSONL (optionally .gz), one knowledge record per line.")
@click.option("--out", required=True, type=click.Path(),
              help="Directory for the persisted store.")
def ingest(corpus, out):
    """Ingest a corpus JSONL into a persisted knowledge store."""
    from cfguide.retrieval import ingest as build_store
    from cfguide.retrieval import load_corpus_jsonl, save_store

    try:
        records = load_corpus_jsonl(corpus)
        store = build_store(records)
    except ContractViolation as exc:
        _fail(1, str(exc))
    save_store(store, out)
    click.echo(f"ingested {len(store)} records into {out}")


def _manifest_from(config, overrides):
    from cfguide.harness import RunManifest

    if config:
        manifest = RunManifest.from_file(config)
    else:
        if "dataset" not in overrides or "model" not in overrides:
            raise ContractViolation("either --config or both --dataset and --model are required")
        manifest = RunManifest(dataset=overrides.pop("dataset"), model=overrides.pop("model"))
    for key, value in overrides.items():
        if value is not None:
            setattr(manifest, key, value)
    return manifest


_shared_eval_options = [
    click.option("--config", type=click.Path(exists=True), help="Manifest JSON file."),
    click.option("--dataset", type=click.Path(exists=True)),
    click.option("--model", "model_path", type=click.Path(exists=True)),
    click.option("--corpus", type=click.Path(exists=True)),
    click.option("--out", type=click.Path()),
    click.option("--seed", type=int),
    click.option("--policy", help="Gate policy as kind:value, e.g. top_percent:5."),
    click.option("--k", type=int, help="Retrieval depth."),
    click.option("--strategy", type=click.Choice(["image", "text", "sum", "union"])),
]


def _apply_eval_options(fn):
    for opt in reversed(_shared_eval_options):
        fn = opt(fn)
    return fn


def _collect_overrides(dataset, model_path, corpus, out, seed, policy, k, strategy):
    overrides = {}
    if dataset:
        overrides["dataset"] = dataset
    if model_path:
        overrides["model"] = model_path
    if corpus:
        overrides["corpus"] = corpus
    if out:
        overrides["out"] = out
    if seed is not None:
        overrides["seed"] = seed
    if policy:
        kind, _, value = policy.partition(":")
        overrides["policy"] = {"kind": kind, "value": float(value)}
    retrieval = {}
    if k is not None:
        retrieval["k"] = k
    if strategy:
        retrieval["strategy"] = strategy
    if retrieval:
        overrides["retrieval"] = retrieval
    return overrides


@main.command("eval")
@_apply_eval_options
def eval_cmd(config, dataset, model_path, corpus, out, seed, policy, k, strategy):
    """Run the arm-comparison evaluation and write the metrics bundle."""
    from cfguide.harness import emit_report, run_eval

    try:
        manifest = _manifest_from(
            config, _collect_overrides(dataset, model_path, corpus, out, seed, policy, k, strategy)
        )
        bundle = run_eval(manifest)
    except (ContractViolation, ConfigurationError, FileNotFoundError) as exc:
        _fail(1, str(exc))
    except Exception as exc:  # noqa: BLE001
        _fail(2, str(exc))
    emit_report(bundle, manifest.out)
    for name, scores in bundle["arms"].items():
        click.echo(f"{name}: overall={scores['overall']:.4f}")
    click.echo(f"metrics written to {manifest.out}")


@main.command()
@_apply_eval_options
@click.option("--grid", help='Grid spec like "alpha=0,0.01,0.1;beta=1,3,5;gamma=1,1.3,1.5".')
def ablate(config, dataset, model_path, corpus, out, seed, policy, k, strategy, grid):
    """Run the hyperparameter ablation grid."""
    from cfguide.harness import emit_ablation, run_ablation

    try:
        overrides = _collect_overrides(dataset, model_path, corpus, out, seed, policy, k, strategy)
        manifest = _manifest_from(config, overrides)
        if grid:
            parsed = {}
            for part in grid.split(";"):
                name, _, values = part.partition("=")
                parsed[name.strip()] = [float(v) for v in values.split(",")]
            manifest.grid = parsed
        table = run_ablation(manifest)
    except (ContractViolation, ConfigurationError, FileNotFoundError) as exc:
        _fail(1, str(exc))
    except Exception as exc:  # noqa: BLE001
        _fail(2, str(exc))
    emit_ablation(table, manifest.out)
    for cell in table["cells"]:
        marker = " *" if cell["is_default"] else ""
        click.echo(f"({cell['alpha']}, {cell['beta']}, {cell['gamma']}) -> "
                   f"{cell['overall']:.4f}{marker}")


@main.command()
@click.option("--metrics", required=True, type=click.Path(exists=True),
              help="metrics.json produced by eval.")
@click.option("--out", required=True, type=click.Path())
def report(metrics, out):
    """Re-emit the plot-data CSVs from a saved metrics bundle."""
    from cfguide.harness import emit_report

    try:
        with open(metrics, encoding="utf-8") as fh:
            bundle = json.load(fh)
    except json.JSONDecodeError as exc:
        _fail(1, f"malformed metrics bundle: {exc}")
    written = emit_report(bundle, out)
    for path in written:
        click.echo(path)


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True),
              help="Service config JSON (see cfguide.service.config).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True, type=int)
def serve(config, host, port):
    """Launch the review service."""
    import uvicorn

    from cfguide.service.app import create_app_from_config
    from cfguide.service.config import ServiceConfig

    try:
        app = create_app_from_config(ServiceConfig.from_file(config))
    except (ConfigurationError, ContractViolation, FileNotFoundError) as exc:
        _fail(1, str(exc))
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.option("--out", required=True, type=click.Path())
@click.option("--hard", default=100, show_default=True, type=int)
@click.option("--easy", default=100, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def synth(out, hard, easy, seed):
    """Generate a steerable synthetic bundle: dataset, corpus, model, manifest."""
    from cfguide.model_io import save_model
    from cfguide.scenarios import build_suite

    suite = build_suite(n_hard=hard, n_easy=easy, seed=seed)
    os.makedirs(out, exist_ok=True)
    dataset_path = os.path.join(out, "dataset.jsonl")
    with open(dataset_path, "w", encoding="utf-8") as fh:
        for case in suite.cases:
            fh.write(json.dumps({
                "question": case.question,
                "answer": case.answer,
                "type": case.question_type,
                "visual_ref": {"corpus_id": case.record_id},
                "corpus_answer_keywords": case.keywords,
            }) + "\n")
    corpus_path = os.path.join(out, "corpus.jsonl")
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for rec in suite.records:
            fh.write(json.dumps(rec.to_dict()) + "\n")
    model_path = os.path.join(out, "model")
    save_model(suite.model, model_path)
    manifest = {
        "dataset": dataset_path,
        "model": model_path,
        "corpus": corpus_path,
        "out": os.path.join(out, "results"),
        "seed": seed,
        "max_answer_tokens": 1,
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    click.echo(f"wrote bundle to {out} ({len(suite.cases)} cases, {len(suite.records)} records)")


if __name__ == "__main__":
    main()
