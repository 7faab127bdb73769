import math

import numpy as np
import pytest

from cfguide.decode import greedy_decode
from cfguide.errors import ContractViolation
from cfguide.models import MicroTransformer, OneLayerToy, TableModel, softmax
from cfguide.types import ContextEmbeddings
from cfguide.vocab import Vocabulary

# recorded from the first verified run of this configuration; regression-pinned
GOLDEN_LOGITS = [
    0.0925388217, 0.6383994306, -2.1630693697, 0.5066568325,
    -0.4388095282, -0.7177178746, -1.7410288512, 0.5311799832,
]


def test_micro_transformer_golden_logits():
    vocab = Vocabulary.build(["what", "is", "free", "air", "?"])
    model = MicroTransformer(vocab, dim=16, n_layers=2, n_heads=4, seed=42)
    ctx = model.embed_sequence(vocab.tokenize("free air ?"))
    dist = model.forward(ctx, np.zeros(3))
    np.testing.assert_allclose(dist.logits, GOLDEN_LOGITS, atol=1e-9)


def test_micro_transformer_deterministic_across_instances():
    vocab = Vocabulary.build(["a", "b"])
    m1 = MicroTransformer(vocab, dim=8, n_heads=2, seed=7)
    m2 = MicroTransformer(vocab, dim=8, n_heads=2, seed=7)
    ctx = m1.embed_sequence(vocab.tokenize("a b"))
    np.testing.assert_array_equal(
        m1.forward(ctx, np.zeros(2)).logits, m2.forward(ctx, np.zeros(2)).logits
    )


def test_micro_transformer_bias_length_checked():
    vocab = Vocabulary.build(["a"])
    model = MicroTransformer(vocab, dim=8, n_heads=2)
    ctx = model.embed_sequence(vocab.tokenize("a"))
    with pytest.raises(ContractViolation):
        model.forward(ctx, np.zeros(2))


def test_toy_attention_biased_softmax_hand_case():
    # two positions with equal raw scores; bias ln 3 on the first
    vocab = Vocabulary.build(["a", "b"])
    model = OneLayerToy(vocab)
    ctx = ContextEmbeddings(np.zeros((2, len(vocab))))
    p = model.attention(ctx, np.array([math.log(3.0), 0.0]))
    np.testing.assert_allclose(p, [0.75, 0.25], atol=1e-12)


def test_toy_attention_matches_closed_form(rng):
    vocab = Vocabulary.build([f"t{i}" for i in range(5)])
    v = len(vocab)
    u = rng.standard_normal(v)
    model = OneLayerToy(vocab, score_vector=u)
    for _ in range(50):
        n = int(rng.integers(1, 8))
        ctx = ContextEmbeddings(rng.standard_normal((n, v)))
        bias = rng.standard_normal(n)
        e = ctx.vectors @ u
        expected = np.exp(e + bias) / np.exp(e + bias).sum()
        np.testing.assert_allclose(model.attention(ctx, bias), expected, atol=1e-12)


def test_toy_forward_pools_votes():
    vocab = Vocabulary.build(["a", "b"])
    v = len(vocab)
    vote = np.zeros((v, v))
    a = vocab.id_of("a")
    vote[a, a] = 2.0  # token "a" votes for itself
    model = OneLayerToy(vocab, vote_matrix=vote)
    seq, _ = greedy_decode(model, vocab.tokenize("a"), max_len=1)
    assert seq.tokens[-1].id == a


def test_table_model_emits_yes_then_eos():
    vocab = Vocabulary.build(["yes", "no"])
    yes = vocab.id_of("yes")
    probs = np.full(len(vocab), 0.1 / (len(vocab) - 1))
    probs[yes] = 0.9
    eos_probs = np.full(len(vocab), 0.1 / (len(vocab) - 1))
    eos_probs[vocab.eos_id] = 0.9
    model = TableModel(vocab, probs, table={yes: eos_probs})
    seq, _ = greedy_decode(model, vocab.tokenize("no"), max_len=8)
    gen = seq.tokens[seq.generated_slice()]
    assert [t.id for t in gen] == [yes, vocab.eos_id]


def test_embed_sequence_rejects_vector_count_mismatch():
    vocab = Vocabulary.build(["a"])
    model = OneLayerToy(vocab)
    seq = vocab.tokenize("a")
    with pytest.raises(ContractViolation):
        model.embed_sequence(seq, visual_vectors=np.zeros((1, len(vocab))))


def test_softmax_sums_to_one(rng):
    x = rng.standard_normal(10) * 50
    assert softmax(x).sum() == pytest.approx(1.0, abs=1e-12)
