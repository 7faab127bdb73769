"""Review items, their state machine and the append-only session store."""

import json
import os
import threading
from dataclasses import dataclass, field

from cfguide.errors import ConflictError, NotFoundError

STATUSES = ("pending", "annotated", "regenerated", "delivered")
_TRANSITIONS = {
    ("pending", "annotated"),
    ("annotated", "regenerated"),
    ("regenerated", "delivered"),
    ("pending", "delivered"),
}


@dataclass
class ReviewItem:
    item_id: str
    question: str
    visual_ref: dict = None
    initial_answer: str = ""
    initial_token_probs: list = field(default_factory=list)
    entropy: dict = None
    references: list = field(default_factory=list)
    status: str = "pending"
    annotation: dict = None
    mask_preview: list = None
    regenerated_answer: str = None
    regenerated_token_probs: list = None
    guidance_config: dict = None

    def to_dict(self):
        return {
            "item_id": self.item_id,
            "question": self.question,
            "visual_ref": self.visual_ref,
            "initial_answer": self.initial_answer,
            "initial_token_probs": self.initial_token_probs,
            "entropy": self.entropy,
            "references": self.references,
            "status": self.status,
            "annotation": self.annotation,
            "mask_preview": self.mask_preview,
            "regenerated_answer": self.regenerated_answer,
            "regenerated_token_probs": self.regenerated_token_probs,
            "guidance_config": self.guidance_config,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def summary(self):
        return {
            "item_id": self.item_id,
            "question": self.question,
            "entropy": self.entropy["normalized_pe"] if self.entropy else None,
            "status": self.status,
        }


class SessionStore:
    """Append-only event log with a snapshot index; replaying the log rebuilds
    the snapshot exactly. Per-item mutations are serialized by a single lock
    (desk-scale traffic does not warrant finer granularity)."""

    def __init__(self, log_path=None):
        self.items = {}
        self.events = []
        self.log_path = log_path
        self._lock = threading.Lock()
        if log_path and os.path.exists(log_path):
            with open(log_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._apply(json.loads(line))

    def _persist(self, event):
        if self.log_path:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event) + "\n")

    def _apply(self, event):
        kind = event["type"]
        if kind == "answered":
            item = ReviewItem.from_dict(event["item"])
            self.items[item.item_id] = item
        elif kind == "annotated":
            item = self.items[event["item_id"]]
            item.annotation = event["annotation"]
            item.mask_preview = event["mask_preview"]
            item.status = "annotated"
        elif kind == "regenerated":
            item = self.items[event["item_id"]]
            item.regenerated_answer = event["answer"]
            item.regenerated_token_probs = event["token_probs"]
            item.guidance_config = event["guidance_config"]
            item.status = "regenerated"
        elif kind == "delivered":
            self.items[event["item_id"]].status = "delivered"
        else:
            raise ValueError(f"unknown event type {kind!r}")
        self.events.append(event)

    def record(self, event):
        with self._lock:
            self._apply(event)
            self._persist(event)

    def get(self, item_id):
        try:
            return self.items[item_id]
        except KeyError:
            raise NotFoundError(item_id) from None

    def check_transition(self, item, new_status):
        if (item.status, new_status) not in _TRANSITIONS:
            raise ConflictError(
                f"item {item.item_id} cannot move {item.status} -> {new_status}"
            )

    def list_items(self, status=None, page=0, page_size=50):
        """Summaries ordered by entropy descending, then id; deterministic paging."""
        items = [
            it for it in self.items.values() if status is None or it.status == status
        ]
        items.sort(key=lambda it: (-(it.entropy["normalized_pe"] if it.entropy else -1.0), it.item_id))
        start = page * page_size
        return [it.summary() for it in items[start : start + page_size]]

    def snapshot(self):
        return {item_id: item.to_dict() for item_id, item in self.items.items()}

    @classmethod
    def replay(cls, events):
        store = cls()
        for event in events:
            store._apply(event)
        return store

    def export_events(self):
        return list(self.events)
