"""Classifier-free guidance decoding steered by a token-level highlight mask.

The decode keeps two context branches: the normal branch sees the full
context with highlighted attention scores activated (+ln(beta) per
highlighted key), while the unconditional branch sees the same context with
highlighted embeddings rescaled by alpha and their attention deactivated
(-delta per highlighted key). The two next-token distributions are combined
in log space with guidance strength gamma.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from cfguide.decode import forward_step
from cfguide.errors import ContractViolation
from cfguide.types import Role, Token


class HighlightMask:
    """Binary per-position mask aligned to a token sequence.

    Visual-prefix and generated positions are never highlightable; bits there
    must be zero.
    """

    __slots__ = ("bits",)

    def __init__(self, bits):
        bits = np.asarray(bits, dtype=np.int8)
        if bits.ndim != 1 or not np.all((bits == 0) | (bits == 1)):
            raise ContractViolation("mask must be a binary vector")
        self.bits = bits

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n, dtype=np.int8))

    def validate_against(self, seq):
        if len(self.bits) != len(seq):
            raise ContractViolation(
                f"mask length {len(self.bits)} != sequence length {len(seq)}"
            )
        for bit, role in zip(self.bits, seq.roles):
            if bit and role in (Role.VISUAL_PREFIX, Role.GENERATED):
                raise ContractViolation(f"mask bit set on non-highlightable {role.value} position")

    def __len__(self):
        return len(self.bits)

    def any(self):
        return bool(self.bits.any())


@dataclass
class GuidanceConfig:
    """Guidance knobs: embedding rescale alpha, attention activation beta,
    logit guidance gamma and unconditional deactivation delta.

    delta defaults to ln(beta) + 2 when not given explicitly.
    """

    alpha: float = 0.01
    beta: float = 3.0
    gamma: float = 1.3
    delta: float = None

    def __post_init__(self):
        if self.delta is None:
            self.delta = math.log(self.beta) + 2.0
        for name in ("alpha", "beta", "gamma", "delta"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ContractViolation(f"{name} must be finite")
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractViolation("alpha must lie in [0, 1]")
        if self.alpha == 0.0:
            warnings.warn(
                "alpha=0 fully masks highlighted context in the unconditional branch; "
                "expect degraded behaviour",
                stacklevel=2,
            )
        if self.beta < 1.0:
            raise ContractViolation("beta must be >= 1")
        if self.gamma < 1.0:
            raise ContractViolation("gamma must be >= 1")
        if self.delta < 0.0:
            raise ContractViolation("delta must be >= 0")

    def to_json(self):
        return json.dumps(
            {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma, "delta": self.delta}
        )

    @classmethod
    def from_dict(cls, data):
        return cls(
            alpha=data.get("alpha", 0.01),
            beta=data.get("beta", 3.0),
            gamma=data.get("gamma", 1.3),
            delta=data.get("delta"),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class GuidedStep:
    """One guided decode step: both branch distributions and the combined choice."""

    cond: object
    uncond: object
    guided_logits: np.ndarray
    chosen: Token
    chosen_prob: float

    def summary(self):
        return {
            "token_id": self.chosen.id,
            "surface": self.chosen.surface,
            "prob": self.chosen_prob,
            "cond_prob": float(self.cond.probabilities[self.chosen.id]),
            "uncond_prob": float(self.uncond.probabilities[self.chosen.id]),
        }


def build_uncond_context(ctx, mask, alpha):
    """Rescale highlighted embedding vectors by alpha; others pass through."""
    if len(mask) != len(ctx):
        raise ContractViolation("mask and context lengths differ")
    factor = 1.0 + (alpha - 1.0) * mask.bits.astype(np.float64)
    from cfguide.types import ContextEmbeddings

    return ContextEmbeddings(ctx.vectors * factor[:, None])


def cond_attention_bias(mask, beta):
    """Additive attention bias ln(beta) on highlighted key positions."""
    if beta <= 0:
        raise ContractViolation("beta must be positive")
    return math.log(beta) * mask.bits.astype(np.float64)


def uncond_attention_bias(mask, delta):
    """Deactivation bias -delta on highlighted key positions."""
    if delta < 0:
        raise ContractViolation("delta must be >= 0")
    return -delta * mask.bits.astype(np.float64)


def cfg_combine(cond, uncond, gamma):
    """gamma * log P_cond - (gamma - 1) * log P_uncond, elementwise."""
    if cond.vocab_size != uncond.vocab_size:
        raise ContractViolation("branch vocabulary sizes differ")
    if gamma < 1.0:
        raise ContractViolation("gamma must be >= 1")
    return gamma * cond.log_probs - (gamma - 1.0) * uncond.log_probs


def branch_decode(model, prompt, mask, bias_per_unit, visual_vectors=None, max_len=16, ctx=None):
    """Greedy decode of a single biased branch (used as the gamma=1 oracle)."""
    mask.validate_against(prompt)
    if ctx is None:
        ctx = model.embed_sequence(prompt, visual_vectors)
    bias = bias_per_unit * mask.bits.astype(np.float64)
    seq = prompt
    steps = []
    for _ in range(max_len):
        dist = forward_step(model, ctx, bias)
        steps.append(dist)
        token_id = dist.argmax()
        seq = seq.append(Token(token_id, model.vocab.surface_of(token_id)), Role.GENERATED)
        if token_id == model.eos_id:
            break
        ctx = ctx.append(model.embed(token_id))
        bias = np.append(bias, 0.0)
    return seq, steps


def guided_decode(model, prompt, mask, cfg, max_len, visual_vectors=None):
    """Two-branch classifier-free-guidance decoding.

    Generated tokens are appended to both branches unscaled with mask bit 0,
    so the branches always observe identical generated prefixes.
    """
    if max_len < 1:
        raise ContractViolation("max_len must be >= 1")
    mask.validate_against(prompt)

    cond_ctx = model.embed_sequence(prompt, visual_vectors)
    uncond_ctx = build_uncond_context(cond_ctx, mask, cfg.alpha)
    cond_bias = cond_attention_bias(mask, cfg.beta)
    uncond_bias = uncond_attention_bias(mask, cfg.delta)

    seq = prompt
    steps = []
    for _ in range(max_len):
        cond = forward_step(model, cond_ctx, cond_bias)
        uncond = forward_step(model, uncond_ctx, uncond_bias)
        combined = cfg_combine(cond, uncond, cfg.gamma)
        token_id = int(np.argmax(combined))
        z = combined - combined.max()
        probs = np.exp(z)
        probs /= probs.sum()
        token = Token(token_id, model.vocab.surface_of(token_id))
        steps.append(GuidedStep(cond, uncond, combined, token, float(probs[token_id])))
        seq = seq.append(token, Role.GENERATED)
        if token_id == model.eos_id:
            break
        vec = model.embed(token_id)
        cond_ctx = cond_ctx.append(vec)
        uncond_ctx = uncond_ctx.append(vec)
        cond_bias = np.append(cond_bias, 0.0)
        uncond_bias = np.append(uncond_bias, 0.0)
    return seq, steps


def trace_to_jsonl(steps):
    """One GuidedStep summary per line, for the review-UI colormap."""
    return "\n".join(json.dumps(s.summary()) for s in steps)
