"""Vocabulary and the reference whitespace/punctuation tokenizer.

The tokenizer is deliberately simple: lowercased alphanumeric runs and single
punctuation marks. It records character offsets so expert highlight spans can
be mapped onto token positions later.
"""

import re
from dataclasses import dataclass

from cfguide.types import Role, Token, TokenSequence

UNK = "<unk>"
EOS = "<eos>"
VIS = "<vis>"
RESERVED = (UNK, EOS, VIS)

_TOKEN_RE = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")


@dataclass(frozen=True)
class Vocabulary:
    """Token table; line number in the serialized form equals the token id."""

    tokens: tuple

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate vocabulary entries")
        for reserved in RESERVED:
            if reserved not in self.tokens:
                raise ValueError(f"missing reserved token {reserved}")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    @classmethod
    def build(cls, words):
        """Vocabulary from an iterable of surfaces; reserved tokens prepended."""
        seen = list(RESERVED)
        for w in words:
            w = w.lower()
            if w not in seen:
                seen.append(w)
        return cls(tuple(seen))

    @classmethod
    def from_text(cls, text):
        return cls(tuple(line for line in text.splitlines() if line))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.tokens) + "\n")

    def __len__(self):
        return len(self.tokens)

    @property
    def unk_id(self):
        return self._index[UNK]

    @property
    def eos_id(self):
        return self._index[EOS]

    @property
    def vis_id(self):
        return self._index[VIS]

    def id_of(self, surface):
        return self._index.get(surface.lower(), self.unk_id)

    def surface_of(self, token_id):
        return self.tokens[token_id]

    def __contains__(self, surface):
        return surface.lower() in self._index

    def tokenize(self, text, role=Role.PROMPT):
        """Split text into tokens with character offsets; OOV maps to <unk>."""
        tokens, roles, offsets = [], [], []
        for m in _TOKEN_RE.finditer(text.lower()):
            surface = m.group(0)
            tokens.append(Token(self.id_of(surface), surface))
            roles.append(role)
            offsets.append((m.start(), m.end()))
        return TokenSequence(tokens, roles, offsets)

    def detokenize(self, seq):
        """Space-joined surfaces of non-special positions."""
        parts = []
        for tok, role in zip(seq.tokens, seq.roles):
            if role is Role.VISUAL_PREFIX or tok.id == self.eos_id:
                continue
            parts.append(tok.surface)
        return " ".join(parts)
