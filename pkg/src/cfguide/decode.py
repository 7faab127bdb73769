"""Plain (unguided) decoding primitives."""

import numpy as np

from cfguide.errors import ContractViolation
from cfguide.types import Role, Token


def forward_step(model, ctx, bias=None):
    """One next-token forward pass with an optional per-position bias."""
    if len(ctx) == 0:
        raise ContractViolation("empty context")
    if bias is None:
        bias = np.zeros(len(ctx))
    bias = np.asarray(bias, dtype=np.float64)
    if bias.shape != (len(ctx),):
        raise ContractViolation(
            f"bias length {bias.shape} does not match context length {len(ctx)}"
        )
    return model.forward(ctx, bias)


def greedy_decode(model, prompt, max_len, visual_vectors=None):
    """Greedy argmax decoding (lowest token id wins ties).

    Returns the full sequence (prompt + generated suffix) and the per-step
    next-token distributions, which downstream entropy and colormap code
    consume.
    """
    if len(prompt) == 0:
        raise ContractViolation("prompt must be non-empty")
    if max_len < 1:
        raise ContractViolation("max_len must be >= 1")
    seq = prompt
    ctx = model.embed_sequence(prompt, visual_vectors)
    steps = []
    for _ in range(max_len):
        dist = forward_step(model, ctx)
        steps.append(dist)
        token_id = dist.argmax()
        token = Token(token_id, model.vocab.surface_of(token_id))
        seq = seq.append(token, Role.GENERATED)
        if token_id == model.eos_id:
            break
        ctx = ctx.append(model.embed(token_id))
    return seq, steps


def sample_decode(model, prompt, max_len, rng, temperature=1.0, visual_vectors=None):
    """Temperature-scaled multinomial decoding (used by the label-prob baseline)."""
    if temperature <= 0:
        raise ContractViolation("temperature must be positive")
    if max_len < 1:
        raise ContractViolation("max_len must be >= 1")
    seq = prompt
    ctx = model.embed_sequence(prompt, visual_vectors)
    steps = []
    for _ in range(max_len):
        dist = forward_step(model, ctx)
        steps.append(dist)
        scaled = dist.logits / temperature
        z = scaled - scaled.max()
        probs = np.exp(z)
        probs /= probs.sum()
        token_id = int(rng.choice(len(probs), p=probs))
        token = Token(token_id, model.vocab.surface_of(token_id))
        seq = seq.append(token, Role.GENERATED)
        if token_id == model.eos_id:
            break
        ctx = ctx.append(model.embed(token_id))
    return seq, steps
