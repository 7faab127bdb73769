"""Embedding-indexed knowledge store with exact k-nearest-neighbor search.

Search is exhaustive cosine similarity over L2-normalized vectors; the four
query strategies (image, text, sum, union) differ only in which feature
matrices are scanned and how per-record similarities are merged.
"""

import gzip
import json
import os
from dataclasses import dataclass, field

import numpy as np

from cfguide.errors import ContractViolation

MODALITIES = ("radiology", "pathology", "other")
STRATEGIES = ("image", "text", "sum", "union")
DEFAULT_CLIP_THRESHOLD = 0.6


def _normalize(vec, what):
    vec = np.asarray(vec, dtype=np.float64)
    norm = np.linalg.norm(vec)
    if norm == 0 or not np.all(np.isfinite(vec)):
        raise ContractViolation(f"{what} embedding must be finite and non-zero")
    return vec / norm


@dataclass
class KnowledgeRecord:
    id: str
    caption: str
    keywords: list = field(default_factory=list)
    image_embedding: np.ndarray = None
    text_embedding: np.ndarray = None
    modality: str = "other"

    def __post_init__(self):
        if self.image_embedding is None and self.text_embedding is None:
            raise ContractViolation(f"record {self.id!r} has no embeddings")
        if self.image_embedding is not None:
            self.image_embedding = _normalize(self.image_embedding, "image")
        if self.text_embedding is not None:
            self.text_embedding = _normalize(self.text_embedding, "text")
        if self.modality not in MODALITIES:
            raise ContractViolation(f"unknown modality {self.modality!r}")

    @classmethod
    def from_dict(cls, row):
        return cls(
            id=str(row["id"]),
            caption=row.get("caption", ""),
            keywords=list(row.get("keywords", [])),
            image_embedding=row.get("image_embedding"),
            text_embedding=row.get("text_embedding"),
            modality=row.get("modality", "other"),
        )

    def to_dict(self):
        return {
            "id": self.id,
            "caption": self.caption,
            "keywords": self.keywords,
            "image_embedding": None if self.image_embedding is None else self.image_embedding.tolist(),
            "text_embedding": None if self.text_embedding is None else self.text_embedding.tolist(),
            "modality": self.modality,
        }


@dataclass
class QueryEmbedding:
    image_embedding: np.ndarray = None
    text_embedding: np.ndarray = None

    def __post_init__(self):
        if self.image_embedding is None and self.text_embedding is None:
            raise ContractViolation("query needs at least one embedding")
        if self.image_embedding is not None:
            self.image_embedding = _normalize(self.image_embedding, "image")
        if self.text_embedding is not None:
            self.text_embedding = _normalize(self.text_embedding, "text")


@dataclass
class RetrievalResult:
    record_id: str
    similarity: float
    matched_feature: str


class KnowledgeStore:
    """Immutable store over ingested records; safe for concurrent queries."""

    def __init__(self, records):
        self.records = {}
        duplicates = []
        ordered = []
        for rec in records:
            if rec.id in self.records:
                duplicates.append(rec.id)
                continue
            self.records[rec.id] = rec
            ordered.append(rec)
        if duplicates:
            raise ContractViolation(f"duplicate record ids: {duplicates}")
        self.ids = [r.id for r in ordered]
        dims = {
            r.image_embedding.shape[0] for r in ordered if r.image_embedding is not None
        } | {r.text_embedding.shape[0] for r in ordered if r.text_embedding is not None}
        if len(dims) > 1:
            raise ContractViolation("mixed embedding dimensions in corpus")
        self.dim = dims.pop() if dims else 0
        n = len(ordered)
        self._image = np.zeros((n, self.dim))
        self._text = np.zeros((n, self.dim))
        self._has_image = np.zeros(n, dtype=bool)
        self._has_text = np.zeros(n, dtype=bool)
        for i, rec in enumerate(ordered):
            if rec.image_embedding is not None:
                self._image[i] = rec.image_embedding
                self._has_image[i] = True
            if rec.text_embedding is not None:
                self._text[i] = rec.text_embedding
                self._has_text[i] = True

    def __len__(self):
        return len(self.ids)

    def get(self, record_id):
        return self.records[record_id]

    def _scan(self, matrix, present, query, feature, k):
        sims = matrix @ query
        hits = [
            (float(sims[i]), self.ids[i])
            for i in range(len(self.ids))
            if present[i]
        ]
        hits.sort(key=lambda t: (-t[0], t[1]))
        return [RetrievalResult(rid, sim, feature) for sim, rid in hits[:k]]

    def knn(self, query, k, strategy="union"):
        """Top-k records by cosine similarity under the chosen fusion strategy."""
        if k < 1:
            raise ContractViolation("k must be >= 1")
        if strategy not in STRATEGIES:
            raise ContractViolation(f"unknown strategy {strategy!r}")
        if strategy == "image":
            if query.image_embedding is None:
                raise ContractViolation("image strategy requires an image embedding")
            return self._scan(self._image, self._has_image, query.image_embedding, "image", k)
        if strategy == "text":
            if query.text_embedding is None:
                raise ContractViolation("text strategy requires a text embedding")
            return self._scan(self._text, self._has_text, query.text_embedding, "text", k)
        if query.image_embedding is None or query.text_embedding is None:
            raise ContractViolation(f"{strategy} strategy requires both embeddings")
        if strategy == "sum":
            combined_query = _normalize(query.image_embedding + query.text_embedding, "sum")
            both = self._has_image & self._has_text
            combined = self._image + self._text
            norms = np.linalg.norm(combined, axis=1)
            norms[norms == 0] = 1.0
            sims = (combined / norms[:, None]) @ combined_query
            hits = [(float(sims[i]), self.ids[i]) for i in range(len(self.ids)) if both[i]]
            hits.sort(key=lambda t: (-t[0], t[1]))
            return [RetrievalResult(rid, sim, "sum") for sim, rid in hits[:k]]
        # union: per-feature searches merged by max similarity per record
        merged = {}
        for res in self._scan(self._image, self._has_image, query.image_embedding, "union-image", len(self.ids)):
            merged[res.record_id] = res
        for res in self._scan(self._text, self._has_text, query.text_embedding, "union-text", len(self.ids)):
            prev = merged.get(res.record_id)
            if prev is None or res.similarity > prev.similarity:
                merged[res.record_id] = res
        out = sorted(merged.values(), key=lambda r: (-r.similarity, r.record_id))
        return out[:k]


def clip_score_filter(results, threshold=DEFAULT_CLIP_THRESHOLD):
    """Drop results whose similarity falls below the relevance threshold."""
    if not -1.0 <= threshold <= 1.0:
        raise ContractViolation("threshold must lie in [-1, 1]")
    return [r for r in results if r.similarity >= threshold]


def ingest(records):
    """Build a store from an iterable of records; duplicate or empty records reject."""
    return KnowledgeStore(records)


def load_corpus_jsonl(path):
    """Read KnowledgeRecords from a (optionally gzipped) JSONL file."""
    opener = gzip.open if str(path).endswith(".gz") else open
    records = []
    with opener(path, "rt", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(KnowledgeRecord.from_dict(json.loads(line)))
    return records


def save_store(store, path):
    """Persist as a directory: header JSON, record metadata, flat binary matrices."""
    os.makedirs(path, exist_ok=True)
    header = {
        "count": len(store),
        "dim": store.dim,
        "dtype": "<f8",
        "ids": store.ids,
        "has_image": store._has_image.tolist(),
        "has_text": store._has_text.tolist(),
    }
    with open(os.path.join(path, "header.json"), "w", encoding="utf-8") as fh:
        json.dump(header, fh)
    store._image.astype("<f8").tofile(os.path.join(path, "image.bin"))
    store._text.astype("<f8").tofile(os.path.join(path, "text.bin"))
    with open(os.path.join(path, "records.jsonl"), "w", encoding="utf-8") as fh:
        for rid in store.ids:
            rec = store.records[rid]
            fh.write(json.dumps({
                "id": rec.id,
                "caption": rec.caption,
                "keywords": rec.keywords,
                "modality": rec.modality,
            }) + "\n")


def load_store(path):
    with open(os.path.join(path, "header.json"), encoding="utf-8") as fh:
        header = json.load(fh)
    n, dim = header["count"], header["dim"]
    image = np.fromfile(os.path.join(path, "image.bin"), dtype=header["dtype"]).reshape(n, dim)
    text = np.fromfile(os.path.join(path, "text.bin"), dtype=header["dtype"]).reshape(n, dim)
    meta = {}
    with open(os.path.join(path, "records.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            row = json.loads(line)
            meta[row["id"]] = row
    records = []
    for i, rid in enumerate(header["ids"]):
        row = meta[rid]
        records.append(KnowledgeRecord(
            id=rid,
            caption=row["caption"],
            keywords=row["keywords"],
            image_embedding=image[i] if header["has_image"][i] else None,
            text_embedding=text[i] if header["has_text"][i] else None,
            modality=row["modality"],
        ))
    return KnowledgeStore(records)
