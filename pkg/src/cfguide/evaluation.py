"""Calibration and task metrics: AUC, ECE, temperature rescaling, VQA scoring, hit rate."""

import math
import re
import string
from dataclasses import dataclass

import numpy as np

from cfguide.errors import ContractViolation, UndefinedMetricError

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})
_WS = re.compile(r"\s+")


def normalize_text(text):
    """Canonical form for answer comparison: lowercase, no punctuation, single spaces."""
    return _WS.sub(" ", text.lower().translate(_PUNCT_TABLE)).strip()


@dataclass
class ScoredSample:
    confidence: float
    correct: int

    def __post_init__(self):
        if not (math.isfinite(self.confidence) and 0.0 <= self.confidence <= 1.0):
            raise ContractViolation("confidence must be finite in [0, 1]")
        self.correct = int(bool(self.correct))


@dataclass
class CalibrationSummary:
    ece: float
    ece_t: float
    bs_t: float
    auc: float
    temperature: float
    degenerate: bool = False


def _ranks(values):
    """Average ranks (1-based) with ties sharing their mean rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(samples):
    """Mann-Whitney statistic: P(conf_correct > conf_incorrect) + 0.5 P(equal)."""
    labels = np.array([s.correct for s in samples])
    confs = np.array([s.confidence for s in samples])
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both correct and incorrect samples")
    ranks = _ranks(confs)
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_curve_points(samples):
    """(fpr, tpr, threshold) triples sweeping the confidence thresholds."""
    confs = np.array([s.confidence for s in samples])
    labels = np.array([s.correct for s in samples])
    n_pos = labels.sum()
    n_neg = len(labels) - n_pos
    points = [(0.0, 0.0, 1.0)]
    for t in sorted(set(confs), reverse=True):
        predicted_pos = confs >= t
        tp = int((predicted_pos & (labels == 1)).sum())
        fp = int((predicted_pos & (labels == 0)).sum())
        points.append((fp / n_neg if n_neg else 0.0, tp / n_pos if n_pos else 0.0, float(t)))
    points.append((1.0, 1.0, 0.0))
    return points


def ece(samples, bins=10):
    """Expected calibration error with equal-width bins over [0, 1]."""
    if bins < 1:
        raise ContractViolation("bins must be >= 1")
    confs = np.array([s.confidence for s in samples])
    labels = np.array([s.correct for s in samples], dtype=np.float64)
    if len(confs) == 0:
        return 0.0
    idx = np.minimum((confs * bins).astype(int), bins - 1)
    total = 0.0
    for b in range(bins):
        members = idx == b
        n_b = int(members.sum())
        if n_b == 0:
            continue
        acc = labels[members].mean()
        conf = confs[members].mean()
        total += (n_b / len(confs)) * abs(acc - conf)
    return float(total)


def brier(samples):
    confs = np.array([s.confidence for s in samples])
    labels = np.array([s.correct for s in samples], dtype=np.float64)
    return float(((confs - labels) ** 2).mean())


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _nll(logits, labels, temperature):
    p = np.clip(_sigmoid(logits / temperature), 1e-12, 1.0 - 1e-12)
    return float(-(labels * np.log(p) + (1 - labels) * np.log(1 - p)).sum())


def temperature_fit_and_rescore(logits, labels, bins=10):
    """Fit a scalar temperature by golden-section NLL search, then rescore.

    logits are raw confidence log-odds; labels are binary correctness. Returns
    a CalibrationSummary with pre- and post-rescaling calibration metrics.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if logits.shape != labels.shape:
        raise ContractViolation("logits and labels must align")
    if logits.size == 0:
        return CalibrationSummary(0.0, 0.0, 0.0, float("nan"), 1.0, degenerate=True)

    raw_samples = [ScoredSample(float(c), int(y)) for c, y in zip(_sigmoid(logits), labels)]
    degenerate = bool(np.all(logits == logits[0]))
    if degenerate:
        temperature = 1.0
    else:
        lo, hi = 0.05, 20.0
        phi = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        c = b - phi * (b - a)
        d = a + phi * (b - a)
        fc, fd = _nll(logits, labels, c), _nll(logits, labels, d)
        for _ in range(200):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - phi * (b - a)
                fc = _nll(logits, labels, c)
            else:
                a, c, fc = c, d, fd
                d = a + phi * (b - a)
                fd = _nll(logits, labels, d)
            if b - a < 1e-7:
                break
        temperature = (a + b) / 2.0

    rescaled = [
        ScoredSample(float(c), int(y))
        for c, y in zip(_sigmoid(logits / temperature), labels)
    ]
    try:
        auc = roc_auc(raw_samples)
    except UndefinedMetricError:
        auc = float("nan")
    return CalibrationSummary(
        ece=ece(raw_samples, bins),
        ece_t=ece(rescaled, bins),
        bs_t=brier(rescaled),
        auc=auc,
        temperature=float(temperature),
        degenerate=degenerate,
    )


def sensitivity_specificity(samples, threshold):
    """Review-flagging quality at a confidence threshold.

    The positive (to-review) class is "answer incorrect"; a sample is flagged
    when its confidence falls below the threshold.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ContractViolation("threshold must lie in [0, 1]")
    tp = fn = tn = fp = 0
    for s in samples:
        flagged = s.confidence < threshold
        if s.correct == 0:
            tp, fn = (tp + 1, fn) if flagged else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if flagged else (fp, tn + 1)
    if tp + fn == 0 or tn + fp == 0:
        raise UndefinedMetricError("both correct and incorrect samples are required")
    return tp / (tp + fn), tn / (tn + fp)


def vqa_score(prediction, truth, question_type):
    """Closed: exact match on normalized strings. Open: ground-truth token recall."""
    if not truth.strip():
        raise ContractViolation("truth must be non-empty")
    pred_norm = normalize_text(prediction)
    truth_norm = normalize_text(truth)
    if question_type == "closed":
        return 1.0 if pred_norm == truth_norm else 0.0
    if question_type != "open":
        raise ContractViolation(f"unknown question type {question_type!r}")
    truth_tokens = set(truth_norm.split())
    pred_tokens = set(pred_norm.split())
    if not truth_tokens:
        raise ContractViolation("truth must contain at least one token")
    return len(truth_tokens & pred_tokens) / len(truth_tokens)


def hit_rate(retrieved_captions, answers, k):
    """Fraction of queries whose normalized answer appears in a top-k caption."""
    if k < 1:
        raise ContractViolation("k must be >= 1")
    if len(retrieved_captions) != len(answers):
        raise ContractViolation("one caption list per answer required")
    if not answers:
        return 0.0
    hits = 0
    for captions, answer in zip(retrieved_captions, answers):
        needle = normalize_text(answer)
        if any(needle in normalize_text(c) for c in captions[:k]):
            hits += 1
    return hits / len(answers)
