"""Guidable reference models.

All models expose the same three hooks the guidance layer relies on:
an embedding function, a forward pass accepting a per-position additive
attention bias, and deterministic logits. They are immutable after
construction and safe for concurrent read-only use.
"""

import abc

import numpy as np

from cfguide.backends import causal_attention
from cfguide.errors import ContractViolation
from cfguide.types import ContextEmbeddings, Role, StepDistribution


def softmax(x):
    z = x - np.max(x)
    e = np.exp(z)
    return e / e.sum()


class GuidableModel(abc.ABC):
    """Autoregressive model with embedding and attention-bias hooks."""

    def __init__(self, vocab):
        self.vocab = vocab

    @property
    def vocab_size(self):
        return len(self.vocab)

    @property
    def eos_id(self):
        return self.vocab.eos_id

    @property
    @abc.abstractmethod
    def embedding_dim(self):
        ...

    @abc.abstractmethod
    def embed(self, token_id):
        """Token-to-embedding function; returns a (dim,) vector."""

    @abc.abstractmethod
    def forward(self, ctx, bias):
        """Next-token StepDistribution for the position after the context."""

    def embed_sequence(self, seq, visual_vectors=None):
        """Context embeddings for a token sequence.

        Visual-prefix positions take their vectors from visual_vectors (in
        order); all other positions go through embed().
        """
        n_vis = sum(1 for r in seq.roles if r is Role.VISUAL_PREFIX)
        if visual_vectors is None:
            visual_vectors = np.zeros((0, self.embedding_dim))
        visual_vectors = np.asarray(visual_vectors, dtype=np.float64)
        if visual_vectors.ndim == 1 and visual_vectors.size == 0:
            visual_vectors = visual_vectors.reshape(0, self.embedding_dim)
        if n_vis != visual_vectors.shape[0]:
            raise ContractViolation(
                f"sequence has {n_vis} visual positions but {visual_vectors.shape[0]} vectors given"
            )
        if n_vis and visual_vectors.shape[1] != self.embedding_dim:
            raise ContractViolation("visual vector dimension mismatch")
        rows = []
        vi = 0
        for tok, role in zip(seq.tokens, seq.roles):
            if role is Role.VISUAL_PREFIX:
                rows.append(visual_vectors[vi])
                vi += 1
            else:
                rows.append(self.embed(tok.id))
        return ContextEmbeddings(np.array(rows, dtype=np.float64))


def _layer_norm(x, gamma, beta, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gamma + beta


def _gelu(x):
    return 0.5 * x * (1.0 + np.tanh(np.sqrt(2.0 / np.pi) * (x + 0.044715 * x**3)))


class MicroTransformer(GuidableModel):
    """Small decoder-only transformer with seeded pseudo-random weights.

    The per-position bias is added to the pre-softmax attention scores of
    every layer and every head (at the key positions).
    """

    def __init__(self, vocab, dim=32, n_layers=2, n_heads=4, seed=42, max_positions=256):
        super().__init__(vocab)
        if dim % n_heads:
            raise ContractViolation("dim must be divisible by n_heads")
        self.dim = dim
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.seed = seed
        self.max_positions = max_positions
        rng = np.random.default_rng(seed)
        s = 1.0 / np.sqrt(dim)
        v = len(vocab)
        self.embedding = rng.normal(0.0, s, size=(v, dim))
        self.positional = rng.normal(0.0, s, size=(max_positions, dim))
        self.layers = []
        for _ in range(n_layers):
            self.layers.append(
                {
                    "ln1_g": np.ones(dim),
                    "ln1_b": np.zeros(dim),
                    "wq": rng.normal(0.0, s, size=(dim, dim)),
                    "wk": rng.normal(0.0, s, size=(dim, dim)),
                    "wv": rng.normal(0.0, s, size=(dim, dim)),
                    "wo": rng.normal(0.0, s, size=(dim, dim)),
                    "ln2_g": np.ones(dim),
                    "ln2_b": np.zeros(dim),
                    "w1": rng.normal(0.0, s, size=(dim, 4 * dim)),
                    "b1": np.zeros(4 * dim),
                    "w2": rng.normal(0.0, s, size=(4 * dim, dim)),
                    "b2": np.zeros(dim),
                }
            )
        self.lnf_g = np.ones(dim)
        self.lnf_b = np.zeros(dim)
        self.w_out = rng.normal(0.0, s, size=(dim, v))

    @property
    def embedding_dim(self):
        return self.dim

    def embed(self, token_id):
        return self.embedding[token_id]

    def _split_heads(self, x):
        n = x.shape[0]
        return x.reshape(n, self.n_heads, -1).transpose(1, 0, 2)

    def forward(self, ctx, bias):
        bias = np.asarray(bias, dtype=np.float64)
        n = len(ctx)
        if n == 0:
            raise ContractViolation("empty context")
        if n > self.max_positions:
            raise ContractViolation("context exceeds max positions")
        if bias.shape != (n,):
            raise ContractViolation("bias length must equal context length")
        x = ctx.vectors + self.positional[:n]
        scale = 1.0 / np.sqrt(self.dim // self.n_heads)
        for layer in self.layers:
            h = _layer_norm(x, layer["ln1_g"], layer["ln1_b"])
            q = self._split_heads(h @ layer["wq"])
            k = self._split_heads(h @ layer["wk"])
            v = self._split_heads(h @ layer["wv"])
            out, _ = causal_attention(q, k, v, bias, scale)
            merged = out.transpose(1, 0, 2).reshape(n, self.dim)
            x = x + merged @ layer["wo"]
            m = _layer_norm(x, layer["ln2_g"], layer["ln2_b"])
            x = x + _gelu(m @ layer["w1"] + layer["b1"]) @ layer["w2"] + layer["b2"]
        final = _layer_norm(x[-1], self.lnf_g, self.lnf_b)
        return StepDistribution(final @ self.w_out)

    def weight_arrays(self):
        """(name, array) pairs in serialization order."""
        items = [("embedding", self.embedding), ("positional", self.positional)]
        for i, layer in enumerate(self.layers):
            for key in ("ln1_g", "ln1_b", "wq", "wk", "wv", "wo", "ln2_g", "ln2_b", "w1", "b1", "w2", "b2"):
                items.append((f"layer{i}.{key}", layer[key]))
        items += [("lnf_g", self.lnf_g), ("lnf_b", self.lnf_b), ("w_out", self.w_out)]
        return items


class OneLayerToy(GuidableModel):
    """Single-layer, single-head attention-pooling model.

    Attention scores are analytically simple: e_i = u . c_i, plus a recency
    bonus on the last position. Each context vector casts a logit vote
    vote_matrix @ c_i, pooled by the attention probabilities. This makes the
    biased-softmax attention rule exactly checkable and lets tests hand-set
    scores by constructing raw context vectors.
    """

    def __init__(
        self,
        vocab,
        dim=None,
        embedding=None,
        vote_matrix=None,
        score_vector=None,
        recency_weight=0.0,
        base_logits=None,
        logit_scale=1.0,
    ):
        super().__init__(vocab)
        v = len(vocab)
        if embedding is None:
            dim = dim or v
            if dim != v:
                raise ContractViolation("identity embedding requires dim == vocab_size")
            embedding = np.eye(v)
        embedding = np.asarray(embedding, dtype=np.float64)
        self.dim = embedding.shape[1] if dim is None else dim
        if embedding.shape != (v, self.dim):
            raise ContractViolation("embedding must be (vocab, dim)")
        self.embedding = embedding
        self.vote_matrix = (
            np.zeros((v, self.dim)) if vote_matrix is None else np.asarray(vote_matrix, dtype=np.float64)
        )
        if self.vote_matrix.shape != (v, self.dim):
            raise ContractViolation("vote matrix must be (vocab, dim)")
        self.score_vector = (
            np.zeros(self.dim) if score_vector is None else np.asarray(score_vector, dtype=np.float64)
        )
        self.recency_weight = float(recency_weight)
        self.base_logits = (
            np.zeros(v) if base_logits is None else np.asarray(base_logits, dtype=np.float64)
        )
        self.logit_scale = float(logit_scale)

    @property
    def embedding_dim(self):
        return self.dim

    def embed(self, token_id):
        return self.embedding[token_id]

    def attention(self, ctx, bias):
        """Attention probabilities over the context for the next-token query."""
        bias = np.asarray(bias, dtype=np.float64)
        if bias.shape != (len(ctx),):
            raise ContractViolation("bias length must equal context length")
        e = ctx.vectors @ self.score_vector
        e = e.copy()
        e[-1] += self.recency_weight
        return softmax(e + bias)

    def forward(self, ctx, bias):
        if len(ctx) == 0:
            raise ContractViolation("empty context")
        p = self.attention(ctx, bias)
        votes = ctx.vectors @ self.vote_matrix.T  # (n, vocab)
        logits = self.base_logits + self.logit_scale * (p @ votes)
        return StepDistribution(logits)


class TableModel(GuidableModel):
    """Test model: next-token distribution looked up by the last context token.

    Embeddings are one-hot so the forward pass can recover the last token id
    from the raw context. The attention-bias hook is accepted and ignored;
    use OneLayerToy when bias sensitivity matters.
    """

    def __init__(self, vocab, default_probs, table=None):
        super().__init__(vocab)
        self.default_probs = np.asarray(default_probs, dtype=np.float64)
        if self.default_probs.shape != (len(vocab),):
            raise ContractViolation("default_probs must cover the vocabulary")
        self.table = {k: np.asarray(p, dtype=np.float64) for k, p in (table or {}).items()}

    @property
    def embedding_dim(self):
        return len(self.vocab)

    def embed(self, token_id):
        row = np.zeros(len(self.vocab))
        row[token_id] = 1.0
        return row

    def forward(self, ctx, bias):
        bias = np.asarray(bias, dtype=np.float64)
        if bias.shape != (len(ctx),):
            raise ContractViolation("bias length must equal context length")
        last = int(np.argmax(ctx.vectors[-1]))
        probs = self.table.get(last, self.default_probs)
        return StepDistribution.from_probs(probs)
