"""Core value types shared by the decoding, guidance and uncertainty layers."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from cfguide.errors import ContractViolation


class Role(str, Enum):
    VISUAL_PREFIX = "visual_prefix"
    PROMPT = "prompt"
    GENERATED = "generated"


@dataclass(frozen=True)
class Token:
    id: int
    surface: str = ""


class TokenSequence:
    """Ordered tokens with per-position roles and optional character offsets.

    Visual-prefix positions must form a contiguous prefix and generated
    positions a contiguous suffix; both are enforced at construction.
    """

    __slots__ = ("tokens", "roles", "offsets")

    def __init__(self, tokens, roles, offsets=None):
        tokens = list(tokens)
        roles = list(roles)
        if len(tokens) != len(roles):
            raise ContractViolation("tokens and roles length mismatch")
        if offsets is None:
            offsets = [None] * len(tokens)
        offsets = list(offsets)
        if len(offsets) != len(tokens):
            raise ContractViolation("tokens and offsets length mismatch")
        self._check_contiguity(roles)
        self.tokens = tokens
        self.roles = roles
        self.offsets = offsets

    @staticmethod
    def _check_contiguity(roles):
        seen_non_vis = False
        seen_non_gen_after_gen = False
        in_gen = False
        for role in roles:
            if role is Role.VISUAL_PREFIX:
                if seen_non_vis:
                    raise ContractViolation("visual prefix must be contiguous at the start")
            else:
                seen_non_vis = True
            if role is Role.GENERATED:
                in_gen = True
            elif in_gen:
                seen_non_gen_after_gen = True
        if seen_non_gen_after_gen:
            raise ContractViolation("generated positions must form a contiguous suffix")

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def ids(self):
        return [t.id for t in self.tokens]

    def append(self, token, role, offset=None):
        """New sequence with one more position (sequences are value-like)."""
        return TokenSequence(
            self.tokens + [token], self.roles + [role], self.offsets + [offset]
        )

    def concat(self, other):
        return TokenSequence(
            self.tokens + other.tokens, self.roles + other.roles, self.offsets + other.offsets
        )

    def generated_slice(self):
        start = len(self)
        for i, role in enumerate(self.roles):
            if role is Role.GENERATED:
                start = i
                break
        return slice(start, len(self))

    def __eq__(self, other):
        return (
            isinstance(other, TokenSequence)
            and self.ids() == other.ids()
            and self.roles == other.roles
        )

    def __repr__(self):
        return f"TokenSequence({[t.surface or t.id for t in self.tokens]})"


@dataclass
class StepDistribution:
    """Next-token logits and their softmax for one decode step."""

    logits: np.ndarray
    _probs: np.ndarray = field(default=None, repr=False, compare=False)
    _logprobs: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 1:
            raise ContractViolation("logits must be a vector")
        if not np.all(np.isfinite(self.logits)):
            raise ContractViolation("logits must be finite")

    @classmethod
    def from_probs(cls, probs):
        probs = np.asarray(probs, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return cls(np.where(probs > 0, np.log(np.maximum(probs, 1e-300)), -1e9))

    @property
    def log_probs(self):
        if self._logprobs is None:
            z = self.logits - self.logits.max()
            self._logprobs = z - np.log(np.exp(z).sum())
        return self._logprobs

    @property
    def probabilities(self):
        if self._probs is None:
            self._probs = np.exp(self.log_probs)
        return self._probs

    @property
    def vocab_size(self):
        return self.logits.shape[0]

    def argmax(self):
        # np.argmax returns the first maximum, i.e. the lowest token id
        return int(np.argmax(self.logits))


class ContextEmbeddings:
    """Per-position embedding vectors fed to a model forward pass."""

    __slots__ = ("vectors",)

    def __init__(self, vectors):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ContractViolation("context embeddings must be (positions, dim)")
        if not np.all(np.isfinite(vectors)):
            raise ContractViolation("context embeddings must be finite")
        self.vectors = vectors

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    def append(self, vector):
        vector = np.asarray(vector, dtype=np.float64).reshape(1, -1)
        return ContextEmbeddings(np.concatenate([self.vectors, vector], axis=0))
