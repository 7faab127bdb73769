import json
import os

import pytest

from cfguide.harness import (
    REPORT_COLUMNS,
    RunManifest,
    emit_ablation,
    emit_report,
    load_dataset,
    run_ablation,
    run_eval,
)
from cfguide.errors import ContractViolation
from cfguide.model_io import save_model
from cfguide.scenarios import build_suite


@pytest.fixture(scope="module")
def bundle_dir(tmp_path_factory):
    """Small on-disk dataset/corpus/model bundle built from the scenario suite."""
    root = tmp_path_factory.mktemp("bundle")
    suite = build_suite(n_hard=10, n_easy=10, seed=4)
    with open(root / "dataset.jsonl", "w") as fh:
        for case in suite.cases:
            fh.write(json.dumps({
                "question": case.question,
                "answer": case.answer,
                "type": case.question_type,
                "visual_ref": {"corpus_id": case.record_id},
                "corpus_answer_keywords": case.keywords,
            }) + "\n")
    with open(root / "corpus.jsonl", "w") as fh:
        for rec in suite.records:
            fh.write(json.dumps(rec.to_dict()) + "\n")
    save_model(suite.model, root / "model")
    return root


def _manifest(bundle_dir, **kw):
    kw.setdefault("max_answer_tokens", 1)
    kw.setdefault("label_prob_samples", 2)
    return RunManifest(
        dataset=str(bundle_dir / "dataset.jsonl"),
        model=str(bundle_dir / "model"),
        corpus=str(bundle_dir / "corpus.jsonl"),
        out=str(bundle_dir / "out"),
        **kw,
    )


def test_load_dataset_reports_malformed_rows(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text('{"question": "q", "answer": "a"}\n'
                    "not json\n"
                    '{"answer": "a"}\n'
                    '{"question": "q", "answer": "a", "type": "weird"}\n')
    rows, errors = load_dataset(path)
    assert len(rows) == 1
    assert [line for line, _ in errors] == [2, 3, 4]


def test_manifest_rejects_unknown_keys(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"dataset": "d", "model": "m", "bogus": 1}))
    with pytest.raises(ContractViolation):
        RunManifest.from_file(path)


def test_empty_dataset_zeroed_bundle(tmp_path, bundle_dir):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    manifest = _manifest(bundle_dir)
    manifest.dataset = str(empty)
    bundle = run_eval(manifest)
    assert bundle["row_count"] == 0
    assert bundle["arms"]["plain"]["overall"] == 0.0


def test_arm_comparison_on_toy_suite(bundle_dir):
    bundle = run_eval(_manifest(bundle_dir, policy={"kind": "top_percent", "value": 100.0}))
    arms = bundle["arms"]
    # guidance wins by construction of the steering scenarios
    assert arms["expert_cfg"]["overall"] >= arms["plain"]["overall"]
    assert arms["expert_cfg"]["overall"] > arms["rag"]["overall"]
    assert bundle["row_count"] == 20


def test_gated_arm_tracks_gate_count(bundle_dir):
    bundle = run_eval(_manifest(bundle_dir, policy={"kind": "top_percent", "value": 25.0}))
    assert bundle["gate"]["flagged"] == 5  # ceil(25% of 20)


def test_accuracy_vs_percent_rows(bundle_dir):
    bundle = run_eval(_manifest(bundle_dir))
    from cfguide.harness import PERCENT_SWEEP

    assert [r["percent"] for r in bundle["accuracy_vs_percent"]] == list(PERCENT_SWEEP)


def test_threshold_sweep_flag_counts_nondecreasing(bundle_dir):
    bundle = run_eval(_manifest(bundle_dir))
    counts = [r["flagged"] for r in bundle["accuracy_vs_threshold"]]
    assert counts == sorted(counts)


def test_hitrate_vs_k_monotone(bundle_dir):
    bundle = run_eval(_manifest(bundle_dir))
    rates = [r["hit_rate"] for r in bundle["hitrate_vs_k"]]
    assert rates == sorted(rates)


def test_singleton_grid_matches_run_eval(bundle_dir):
    manifest = _manifest(bundle_dir, grid={"alpha": [0.01], "beta": [3.0], "gamma": [1.3]})
    table = run_ablation(manifest)
    assert len(table["cells"]) == 1
    direct = run_eval(RunManifest(**{**manifest.to_dict(),
                                     "policy": {"kind": "top_percent", "value": 100.0},
                                     "label_prob_samples": 0}))
    assert table["cells"][0]["overall"] == direct["arms"]["expert_cfg"]["overall"]
    assert table["cells"][0]["is_default"] is True


def test_ablation_gamma_13_at_least_10(bundle_dir):
    manifest = _manifest(bundle_dir, grid={"alpha": [0.01], "beta": [3.0],
                                           "gamma": [1.0, 1.3]})
    cells = {c["gamma"]: c["overall"] for c in run_ablation(manifest)["cells"]}
    assert cells[1.3] >= cells[1.0]


def test_emit_report_golden_headers(bundle_dir, tmp_path):
    bundle = run_eval(_manifest(bundle_dir))
    out = tmp_path / "report"
    written = emit_report(bundle, out)
    assert sorted(os.path.basename(p) for p in written) == sorted(REPORT_COLUMNS)
    for path in written:
        header = open(path).readline().strip()
        assert header == ",".join(REPORT_COLUMNS[os.path.basename(path)])
    assert (out / "metrics.json").exists()


def test_emit_ablation_files(bundle_dir, tmp_path):
    manifest = _manifest(bundle_dir, grid={"alpha": [0.01], "beta": [3.0], "gamma": [1.3]})
    table = run_ablation(manifest)
    emit_ablation(table, tmp_path / "abl")
    assert (tmp_path / "abl" / "ablation.json").exists()
    header = open(tmp_path / "abl" / "ablation.csv").readline().strip()
    assert header == "alpha,beta,gamma,overall,is_default"


def test_uncertainty_metrics_present(bundle_dir):
    bundle = run_eval(_manifest(bundle_dir))
    for method in ("entropy", "label_prob", "is_true"):
        metrics = bundle["uncertainty_metrics"][method]
        assert set(metrics) == {"auc", "ece", "ece_t", "bs_t", "temperature"}
    # entropy confidence separates right from wrong answers on this suite
    assert bundle["uncertainty_metrics"]["entropy"]["auc"] == 1.0
