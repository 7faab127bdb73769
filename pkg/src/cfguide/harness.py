"""Batch evaluation harness: arm comparison, ablation grids, report emission.

Dataset rows are JSONL objects {question, answer, type: open|closed,
visual_ref?, corpus_answer_keywords?}. Arms mirror the service pipeline:

  plain          greedy decode on the question alone
  rag            top-1 retrieved caption appended to the prompt
  rag_gated      rag applied only to gate-flagged rows
  expert_rag     flagged rows get an expert-checked reference appended
  expert_cfg     flagged rows get the reference with highlight guidance
"""

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from cfguide.annotation import auto_highlight, find_keyword_spans, mask_from_spans, merge_spans
from cfguide.decode import greedy_decode
from cfguide.errors import ContractViolation
from cfguide.evaluation import (
    ScoredSample,
    ece,
    hit_rate,
    normalize_text,
    roc_auc,
    roc_curve_points,
    temperature_fit_and_rescore,
    vqa_score,
)
from cfguide.guidance import GuidanceConfig, HighlightMask, guided_decode
from cfguide.model_io import load_model
from cfguide.retrieval import QueryEmbedding, ingest, load_corpus_jsonl, load_store
from cfguide.uncertainty import (
    GatePolicy,
    gate,
    is_true_prob_estimator,
    label_prob_estimator,
    predictive_entropy,
)

ARM_NAMES = ("plain", "rag", "rag_gated", "expert_rag", "expert_cfg")
PERCENT_SWEEP = (0, 1, 2, 5, 10, 20, 50, 100)
THRESHOLD_SWEEP = tuple(round(t * 0.05, 2) for t in range(20, -1, -1))
CORRECT_CUTOFF = 0.5  # a row counts as correct when its score reaches this


@dataclass
class RunManifest:
    dataset: str
    model: object  # path string or {"scenario_seed": int}
    corpus: str = None
    out: str = "out"
    seed: int = 0
    policy: dict = field(default_factory=lambda: {"kind": "top_percent", "value": 5.0})
    guidance: dict = field(default_factory=dict)
    retrieval: dict = field(default_factory=lambda: {"k": 4, "strategy": "union"})
    grid: dict = field(default_factory=lambda: {
        "alpha": [0.0, 0.01, 0.1], "beta": [1.0, 3.0, 5.0], "gamma": [1.0, 1.3, 1.5],
    })
    max_answer_tokens: int = 1
    label_prob_samples: int = 10

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ContractViolation(f"unknown manifest keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def load_dataset(path):
    """Rows plus a list of (line_number, error) for malformed lines."""
    rows, errors = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                if "question" not in row or "answer" not in row:
                    raise KeyError("question/answer required")
                if row.get("type", "open") not in ("open", "closed"):
                    raise ValueError(f"bad type {row.get('type')!r}")
                rows.append(row)
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                errors.append((lineno, str(exc)))
    return rows, errors


def _load_model(spec):
    if isinstance(spec, dict) and "scenario_seed" in spec:
        from cfguide.scenarios import build_suite

        suite = build_suite(seed=spec["scenario_seed"],
                            n_hard=spec.get("n_hard", 100), n_easy=spec.get("n_easy", 100))
        return suite.model
    return load_model(spec)


def _load_corpus(path):
    if path is None:
        return None
    if os.path.isdir(path):
        return load_store(path)
    return ingest(load_corpus_jsonl(path))


def _query_for(row, knowledge):
    ref = row.get("visual_ref") or {}
    if "corpus_id" in ref and knowledge is not None:
        rec = knowledge.records.get(ref["corpus_id"])
        if rec is None:
            return None
        return QueryEmbedding(
            image_embedding=None if rec.image_embedding is None else rec.image_embedding.copy(),
            text_embedding=None if rec.text_embedding is None else rec.text_embedding.copy(),
        )
    if "image_embedding" in ref or "text_embedding" in ref:
        return QueryEmbedding(ref.get("image_embedding"), ref.get("text_embedding"))
    return None


def _answer_text(vocab, seq):
    gen = seq.generated_slice()
    return vocab.detokenize(type(seq)(seq.tokens[gen], seq.roles[gen]))


def _expert_reference(caption, answer):
    # the expert reviews the retrieved caption and adds the answer when missing
    if normalize_text(answer) in normalize_text(caption):
        return caption
    return caption.rstrip(". ") + f" , consistent with {answer} ."


class _RowResult:
    __slots__ = ("row", "report", "scores", "captions", "conf")

    def __init__(self, row):
        self.row = row
        self.report = None
        self.scores = {}
        self.captions = []
        self.conf = {}


def run_eval(manifest):
    """Evaluate all arms on the manifest's dataset; deterministic under the seed."""
    model = _load_model(manifest.model)
    vocab = model.vocab
    knowledge = _load_corpus(manifest.corpus)
    rows, row_errors = load_dataset(manifest.dataset)
    policy = GatePolicy(manifest.policy["kind"], manifest.policy["value"])
    cfg = GuidanceConfig.from_dict(manifest.guidance)
    k = manifest.retrieval.get("k", 4)
    strategy = manifest.retrieval.get("strategy", "union")
    max_len = manifest.max_answer_tokens

    results = []
    for row in rows:
        res = _RowResult(row)
        q_seq = vocab.tokenize(row["question"])
        seq, steps = greedy_decode(model, q_seq, max_len)
        res.report = predictive_entropy(steps, seq)
        plain_answer = _answer_text(vocab, seq)
        res.scores["plain"] = vqa_score(plain_answer, row["answer"], row.get("type", "open"))

        query = _query_for(row, knowledge)
        caption = None
        if query is not None and knowledge is not None:
            hits = knowledge.knn(query, k, strategy)
            res.captions = [knowledge.get(h.record_id).caption for h in hits]
            caption = res.captions[0] if res.captions else None

        if caption is None:
            res.scores["rag"] = res.scores["plain"]
            res.scores["expert_rag"] = res.scores["plain"]
            res.scores["expert_cfg"] = res.scores["plain"]
        else:
            rag_prompt = q_seq.concat(vocab.tokenize(caption))
            rag_seq, _ = greedy_decode(model, rag_prompt, max_len)
            res.scores["rag"] = vqa_score(_answer_text(vocab, rag_seq), row["answer"],
                                          row.get("type", "open"))

            reference = _expert_reference(caption, row["answer"])
            ref_seq = vocab.tokenize(reference)
            exp_prompt = q_seq.concat(ref_seq)
            exp_seq, _ = greedy_decode(model, exp_prompt, max_len)
            res.scores["expert_rag"] = vqa_score(_answer_text(vocab, exp_seq), row["answer"],
                                                 row.get("type", "open"))

            keywords = row.get("corpus_answer_keywords") or [row["answer"]]
            spans = auto_highlight(keywords, row["question"], reference, row["answer"])
            if not spans:
                spans = merge_spans(find_keyword_spans(row["answer"], reference))
            if spans:
                mask_bits = np.concatenate([
                    np.zeros(len(q_seq), dtype=np.int8),
                    mask_from_spans(reference, spans, ref_seq).bits,
                ])
                guided_seq, _ = guided_decode(model, exp_prompt, HighlightMask(mask_bits),
                                              cfg, max_len)
                res.scores["expert_cfg"] = vqa_score(_answer_text(vocab, guided_seq),
                                                     row["answer"], row.get("type", "open"))
            else:
                res.scores["expert_cfg"] = res.scores["expert_rag"]

        res.conf["entropy"] = 1.0 - res.report.normalized_pe
        if manifest.label_prob_samples > 0:
            res.conf["label_prob"] = label_prob_estimator(
                model, q_seq, samples=manifest.label_prob_samples, temperature=1.0,
                seed=manifest.seed, max_len=max_len)
        else:
            res.conf["label_prob"] = res.conf["entropy"]
        try:
            res.conf["is_true"] = is_true_prob_estimator(
                model, q_seq, vocab.tokenize(plain_answer))
        except Exception:
            res.conf["is_true"] = 0.5
        results.append(res)

    decisions = gate([r.report for r in results], policy) if results else []
    flagged = [d.verdict == "review" for d in decisions]

    def arm_score(name, flags):
        per_row = []
        for res, is_flagged in zip(results, flags):
            if name == "plain":
                per_row.append(res.scores["plain"])
            elif name == "rag":
                per_row.append(res.scores["rag"])
            else:
                base = {"rag_gated": "rag", "expert_rag": "expert_rag",
                        "expert_cfg": "expert_cfg"}[name]
                per_row.append(res.scores[base] if is_flagged else res.scores["plain"])
        return per_row

    def summarize(per_row):
        opens = [s for s, r in zip(per_row, results) if r.row.get("type", "open") == "open"]
        closed = [s for s, r in zip(per_row, results) if r.row.get("type", "open") == "closed"]
        return {
            "open": float(np.mean(opens)) if opens else None,
            "closed": float(np.mean(closed)) if closed else None,
            "overall": float(np.mean(per_row)) if per_row else 0.0,
        }

    arms = {name: summarize(arm_score(name, flagged)) for name in ARM_NAMES}

    # calibration of the three confidence baselines against plain correctness
    correctness = [1 if r.scores["plain"] >= CORRECT_CUTOFF else 0 for r in results]
    uncertainty_metrics = {}
    for method in ("entropy", "label_prob", "is_true"):
        confs = [r.conf[method] for r in results]
        samples = [ScoredSample(c, y) for c, y in zip(confs, correctness)]
        logits = np.array([math.log(max(c, 1e-6) / max(1 - c, 1e-6)) for c in confs])
        try:
            auc = roc_auc(samples)
        except Exception:
            auc = None
        summary = temperature_fit_and_rescore(logits, np.array(correctness, dtype=float))
        uncertainty_metrics[method] = {
            "auc": auc,
            "ece": ece(samples),
            "ece_t": summary.ece_t,
            "bs_t": summary.bs_t,
            "temperature": summary.temperature,
        }

    # sweeps reuse per-row scores: expert_cfg when flagged, plain otherwise
    order = sorted(range(len(results)),
                   key=lambda i: (-results[i].report.normalized_pe, i))
    accuracy_vs_percent = []
    for pct in PERCENT_SWEEP:
        n_flag = math.ceil(pct * len(results) / 100.0) if pct else 0
        chosen = set(order[:n_flag])
        scores = [r.scores["expert_cfg"] if i in chosen else r.scores["plain"]
                  for i, r in enumerate(results)]
        accuracy_vs_percent.append({
            "percent": pct, "flagged": n_flag,
            "overall": float(np.mean(scores)) if scores else 0.0,
        })
    accuracy_vs_threshold = []
    for tau in THRESHOLD_SWEEP:
        chosen = {i for i, r in enumerate(results) if r.report.normalized_pe >= tau}
        scores = [r.scores["expert_cfg"] if i in chosen else r.scores["plain"]
                  for i, r in enumerate(results)]
        accuracy_vs_threshold.append({
            "threshold": tau, "flagged": len(chosen),
            "overall": float(np.mean(scores)) if scores else 0.0,
        })

    open_rows = [r for r in results if r.row.get("type", "open") == "open" and r.captions]
    hitrate_vs_k = [
        {"k": kk, "hit_rate": hit_rate([r.captions for r in open_rows],
                                       [r.row["answer"] for r in open_rows], kk)
         if open_rows else 0.0}
        for kk in range(1, k + 1)
    ]

    roc_samples = [ScoredSample(r.conf["entropy"], y) for r, y in zip(results, correctness)]
    try:
        roc_points = roc_curve_points(roc_samples)
    except Exception:
        roc_points = []

    return {
        "manifest": manifest.to_dict(),
        "row_count": len(results),
        "row_errors": [{"line": ln, "error": err} for ln, err in row_errors],
        "arms": arms,
        "gate": {
            "policy": manifest.policy,
            "flagged": int(sum(flagged)),
            "entropies": [r.report.normalized_pe for r in results],
        },
        "uncertainty_metrics": uncertainty_metrics,
        "accuracy_vs_percent": accuracy_vs_percent,
        "accuracy_vs_threshold": accuracy_vs_threshold,
        "hitrate_vs_k": hitrate_vs_k,
        "roc_points": [{"fpr": p[0], "tpr": p[1], "threshold": p[2]} for p in roc_points],
    }


def run_ablation(manifest):
    """Grid over (alpha, beta, gamma); every row guided (100% application)."""
    grid = manifest.grid
    alphas = grid.get("alpha", [0.01])
    betas = grid.get("beta", [3.0])
    gammas = grid.get("gamma", [1.0, 1.3, 1.5])
    cells = []
    for alpha in alphas:
        for beta in betas:
            for gamma in gammas:
                sub = RunManifest(**{**manifest.to_dict(),
                                     "guidance": {"alpha": alpha, "beta": beta, "gamma": gamma},
                                     "policy": {"kind": "top_percent", "value": 100.0},
                                     "label_prob_samples": 0})
                bundle = run_eval(sub)
                cells.append({
                    "alpha": alpha, "beta": beta, "gamma": gamma,
                    "overall": bundle["arms"]["expert_cfg"]["overall"],
                    "is_default": (alpha, beta, gamma) == (0.01, 3.0, 1.3),
                })
    return {"manifest": manifest.to_dict(), "cells": cells}


# -- report emission ---------------------------------------------------------

REPORT_COLUMNS = {
    "roc_points.csv": ("fpr", "tpr", "threshold"),
    "accuracy_vs_percent.csv": ("percent", "flagged", "overall"),
    "accuracy_vs_threshold.csv": ("threshold", "flagged", "overall"),
    "hitrate_vs_k.csv": ("k", "hit_rate"),
}


def _write_csv(path, columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[c] for c in columns])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def emit_report(bundle, out_dir):
    """Write metrics.json plus the plot-data CSVs with frozen column order."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(bundle, fh, indent=2, sort_keys=True)
        fh.write("\n")
    sources = {
        "roc_points.csv": bundle.get("roc_points", []),
        "accuracy_vs_percent.csv": bundle.get("accuracy_vs_percent", []),
        "accuracy_vs_threshold.csv": bundle.get("accuracy_vs_threshold", []),
        "hitrate_vs_k.csv": bundle.get("hitrate_vs_k", []),
    }
    written = []
    for name, rows in sources.items():
        path = os.path.join(out_dir, name)
        _write_csv(path, REPORT_COLUMNS[name], rows)
        written.append(path)
    return written


def emit_ablation(table, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "ablation.json"), "w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_csv(os.path.join(out_dir, "ablation.csv"),
               ("alpha", "beta", "gamma", "overall", "is_default"), table["cells"])
