"""Length-normalized predictive entropy, gating policies and confidence baselines."""

import json
import math
from dataclasses import dataclass

import numpy as np

from cfguide.decode import forward_step, greedy_decode, sample_decode
from cfguide.errors import ConfigurationError, ContractViolation
from cfguide.types import Role, StepDistribution

IS_TRUE_TEMPLATE = "is the answer true ?"
TRUE_SURFACE = "true"
FALSE_SURFACE = "false"


@dataclass
class EntropyReport:
    """Per-step entropies (nats), their mean, and the ln(V)-normalized value."""

    per_step_entropy: list
    pe: float
    normalized_pe: float
    seq_logprob_mean: float = None

    def to_dict(self):
        return {
            "per_step_entropy": list(self.per_step_entropy),
            "pe": self.pe,
            "normalized_pe": self.normalized_pe,
            "seq_logprob_mean": self.seq_logprob_mean,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            per_step_entropy=list(data["per_step_entropy"]),
            pe=data["pe"],
            normalized_pe=data["normalized_pe"],
            seq_logprob_mean=data.get("seq_logprob_mean"),
        )


@dataclass
class GatePolicy:
    """Either the top `value` percent of a batch, or a fixed normalized-PE threshold."""

    kind: str  # top_percent | fixed_threshold
    value: float

    def __post_init__(self):
        if self.kind == "top_percent":
            if not 0 < self.value <= 100:
                raise ContractViolation("percent must lie in (0, 100]")
        elif self.kind == "fixed_threshold":
            if not 0 <= self.value <= 1:
                raise ContractViolation("threshold must lie in [0, 1]")
        else:
            raise ContractViolation(f"unknown policy kind {self.kind!r}")


@dataclass
class GateDecision:
    verdict: str  # deliver | review
    entropy: float


def _step_probs(step):
    if isinstance(step, StepDistribution):
        return step.probabilities
    probs = np.asarray(step, dtype=np.float64)
    if abs(probs.sum() - 1.0) > 1e-6:
        raise ContractViolation("step distribution is not normalized")
    return probs


def _emitted_tokens(emitted):
    gen = emitted.generated_slice()
    tokens = emitted.tokens[gen] if gen.start < len(emitted) else emitted.tokens
    return tokens


def sequence_logprob_normalized(steps, emitted):
    """Mean log-probability of the emitted tokens under their step distributions."""
    tokens = _emitted_tokens(emitted)
    if len(steps) != len(tokens):
        raise ContractViolation("one step distribution per emitted token required")
    total = 0.0
    for step, tok in zip(steps, tokens):
        probs = _step_probs(step)
        p = probs[tok.id]
        total += math.log(p) if p > 0 else -1e9
    return total / len(tokens)


def step_entropy(probs):
    probs = np.asarray(probs, dtype=np.float64)
    nonzero = probs[probs > 0]
    return float(-(nonzero * np.log(nonzero)).sum())


def predictive_entropy(steps, emitted=None):
    """Mean per-step Shannon entropy of the decode, normalized by ln(vocab_size)."""
    if not steps:
        raise ContractViolation("at least one step distribution required")
    per_step = []
    vocab_size = None
    for step in steps:
        probs = _step_probs(step)
        vocab_size = len(probs)
        per_step.append(step_entropy(probs))
    pe = float(np.mean(per_step))
    normalized = pe / math.log(vocab_size) if vocab_size > 1 else 0.0
    normalized = min(max(normalized, 0.0), 1.0)
    seq_lp = sequence_logprob_normalized(steps, emitted) if emitted is not None else None
    return EntropyReport(per_step, pe, normalized, seq_lp)


def minmax_normalize(reports):
    """Alternative batch normalizer: rescale pe to [0,1] by batch min/max."""
    pes = np.array([r.pe for r in reports])
    lo, hi = pes.min(), pes.max()
    span = hi - lo
    out = []
    for r in reports:
        norm = 0.0 if span == 0 else float((r.pe - lo) / span)
        out.append(EntropyReport(r.per_step_entropy, r.pe, norm, r.seq_logprob_mean))
    return out


def gate(reports, policy):
    """Decide deliver-vs-review for a batch of entropy reports.

    top_percent flags exactly ceil(p*N/100) highest-entropy items, ties broken
    toward review in stable input order; fixed_threshold flags items with
    normalized_pe >= tau.
    """
    if policy.kind == "top_percent":
        if not reports:
            raise ContractViolation("top_percent gating requires a non-empty batch")
        n_review = math.ceil(policy.value * len(reports) / 100.0)
        order = sorted(range(len(reports)), key=lambda i: (-reports[i].normalized_pe, i))
        review = set(order[:n_review])
        return [
            GateDecision("review" if i in review else "deliver", r.normalized_pe)
            for i, r in enumerate(reports)
        ]
    return [
        GateDecision("review" if r.normalized_pe >= policy.value else "deliver", r.normalized_pe)
        for r in reports
    ]


def label_prob_estimator(model, prompt, samples=10, temperature=1.0, seed=0, max_len=8,
                         visual_vectors=None):
    """Fraction of sampled decodes whose normalized answer matches the greedy answer."""
    from cfguide.evaluation import normalize_text

    if samples < 1:
        raise ContractViolation("samples must be >= 1")
    greedy_seq, _ = greedy_decode(model, prompt, max_len, visual_vectors)
    target = normalize_text(model.vocab.detokenize(
        type(greedy_seq)(greedy_seq.tokens[greedy_seq.generated_slice()],
                         greedy_seq.roles[greedy_seq.generated_slice()])
    ))
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(samples):
        seq, _ = sample_decode(model, prompt, max_len, rng, temperature, visual_vectors)
        gen = seq.generated_slice()
        answer = normalize_text(model.vocab.detokenize(
            type(seq)(seq.tokens[gen], seq.roles[gen])
        ))
        if answer == target:
            hits += 1
    return hits / samples


def is_true_prob_estimator(model, prompt, answer, visual_vectors=None,
                           template=IS_TRUE_TEMPLATE,
                           true_surface=TRUE_SURFACE, false_surface=FALSE_SURFACE):
    """P(true) / (P(true) + P(false)) after appending the verification template."""
    vocab = model.vocab
    if true_surface not in vocab or false_surface not in vocab:
        raise ConfigurationError(
            f"vocabulary lacks verdict tokens {true_surface!r}/{false_surface!r}"
        )
    answer_as_prompt = type(answer)(
        answer.tokens, [Role.PROMPT] * len(answer), answer.offsets
    )
    seq = prompt.concat(answer_as_prompt).concat(vocab.tokenize(template))
    ctx = model.embed_sequence(seq, visual_vectors)
    dist = forward_step(model, ctx)
    p_true = dist.probabilities[vocab.id_of(true_surface)]
    p_false = dist.probabilities[vocab.id_of(false_surface)]
    return float(p_true / (p_true + p_false))


def report_to_json(report):
    return json.dumps(report.to_dict())


def load_trace_jsonl(lines):
    """Decode-trace ingestion: one step distribution per JSONL line.

    Dense form: {"probs": [...]}. Sparse form: {"vocab_size": V,
    "topk": {"ids": [...], "probs": [...]}, "remainder": r} with the
    remainder mass spread uniformly over unlisted token ids.
    """
    if isinstance(lines, str):
        lines = lines.splitlines()
    steps = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        row = json.loads(line)
        if "probs" in row:
            probs = np.asarray(row["probs"], dtype=np.float64)
        else:
            vocab_size = row["vocab_size"]
            ids = row["topk"]["ids"]
            probs = np.zeros(vocab_size)
            probs[ids] = row["topk"]["probs"]
            rest = vocab_size - len(ids)
            if rest > 0 and row.get("remainder", 0) > 0:
                fill = row["remainder"] / rest
                unlisted = np.ones(vocab_size, dtype=bool)
                unlisted[ids] = False
                probs[unlisted] = fill
        if abs(probs.sum() - 1.0) > 1e-6:
            raise ContractViolation("trace line does not describe a normalized distribution")
        steps.append(StepDistribution.from_probs(probs))
    return steps
