"""Service-side orchestration: answer, gate, annotate, regenerate, export."""

import itertools
import json

import numpy as np

from cfguide.annotation import ExpertAnnotation, mask_from_spans
from cfguide.decode import greedy_decode
from cfguide.errors import ContractViolation, NotFoundError
from cfguide.guidance import GuidanceConfig, HighlightMask, guided_decode
from cfguide.retrieval import QueryEmbedding
from cfguide.service.store import ReviewItem, SessionStore
from cfguide.types import Role
from cfguide.uncertainty import GatePolicy, gate, predictive_entropy


def _generated_text(vocab, seq):
    gen = seq.generated_slice()
    sub = type(seq)(seq.tokens[gen], seq.roles[gen])
    return vocab.detokenize(sub)


class ReviewEngine:
    """Answers questions, gates them by entropy and drives the review loop."""

    def __init__(self, model, knowledge_store=None, policy=None, guidance_defaults=None,
                 retrieval_k=4, retrieval_strategy="union", max_answer_tokens=8,
                 session_store=None, show_initial_answer=True):
        self.model = model
        self.vocab = model.vocab
        self.knowledge = knowledge_store
        self.policy = policy or GatePolicy("top_percent", 5.0)
        self.guidance_defaults = guidance_defaults or GuidanceConfig()
        self.retrieval_k = retrieval_k
        self.retrieval_strategy = retrieval_strategy
        self.max_answer_tokens = max_answer_tokens
        self.store = session_store or SessionStore()
        self.show_initial_answer = show_initial_answer
        self._ids = itertools.count()

    # -- answering -----------------------------------------------------------

    def _decode_one(self, question, visual_ref):
        prompt = self.vocab.tokenize(question)
        if len(prompt) == 0:
            raise ContractViolation("question must contain at least one token")
        visual_vectors = None
        if visual_ref and "vectors" in visual_ref:
            from cfguide.types import Token, TokenSequence

            visual_vectors = np.asarray(visual_ref["vectors"], dtype=np.float64)
            vis_seq = TokenSequence(
                [Token(self.vocab.vis_id) for _ in range(len(visual_vectors))],
                [Role.VISUAL_PREFIX] * len(visual_vectors),
            )
            prompt = vis_seq.concat(prompt)
        seq, steps = greedy_decode(self.model, prompt, self.max_answer_tokens, visual_vectors)
        report = predictive_entropy(steps, seq)
        token_probs = []
        gen_tokens = seq.tokens[seq.generated_slice()]
        for step, tok in zip(steps, gen_tokens):
            token_probs.append({"surface": tok.surface, "token_id": tok.id,
                                "prob": float(step.probabilities[tok.id])})
        return seq, report, token_probs

    def _query_embedding(self, visual_ref):
        if not visual_ref:
            return None
        if "corpus_id" in visual_ref:
            if self.knowledge is None:
                raise NotFoundError("no corpus configured")
            rec = self.knowledge.records.get(visual_ref["corpus_id"])
            if rec is None:
                raise NotFoundError(f"corpus id {visual_ref['corpus_id']!r}")
            return QueryEmbedding(
                image_embedding=None if rec.image_embedding is None else rec.image_embedding.copy(),
                text_embedding=None if rec.text_embedding is None else rec.text_embedding.copy(),
            )
        if "image_embedding" in visual_ref or "text_embedding" in visual_ref:
            return QueryEmbedding(
                image_embedding=visual_ref.get("image_embedding"),
                text_embedding=visual_ref.get("text_embedding"),
            )
        return None

    def _retrieve(self, visual_ref):
        query = self._query_embedding(visual_ref)
        if query is None or self.knowledge is None or len(self.knowledge) == 0:
            return []
        results = self.knowledge.knn(query, self.retrieval_k, self.retrieval_strategy)
        refs = []
        for res in results:
            rec = self.knowledge.get(res.record_id)
            refs.append({
                "record_id": rec.id,
                "caption": rec.caption,
                "keywords": rec.keywords,
                "similarity": res.similarity,
                "matched_feature": res.matched_feature,
            })
        return refs

    def answer_batch(self, requests):
        """Answer a batch of {question, visual_ref} requests and gate them jointly."""
        decoded = []
        for req in requests:
            question = req["question"]
            visual_ref = req.get("visual_ref")
            decoded.append((question, visual_ref) + self._decode_one(question, visual_ref))
        decisions = gate([d[3] for d in decoded], self.policy)
        items = []
        for (question, visual_ref, seq, report, token_probs), decision in zip(decoded, decisions):
            item = ReviewItem(
                item_id=f"item{next(self._ids)}",
                question=question,
                visual_ref=_jsonable(visual_ref),
                initial_answer=_generated_text(self.vocab, seq),
                initial_token_probs=token_probs,
                entropy=report.to_dict(),
                status="pending",
            )
            if decision.verdict == "deliver":
                item.status = "delivered"
            else:
                item.references = self._retrieve(visual_ref)
            self.store.record({"type": "answered", "item": item.to_dict()})
            items.append(self.store.get(item.item_id))
        return items

    def answer(self, question, visual_ref=None):
        return self.answer_batch([{"question": question, "visual_ref": visual_ref}])[0]

    # -- review loop ---------------------------------------------------------

    def submit_annotation(self, item_id, annotation):
        item = self.store.get(item_id)
        self.store.check_transition(item, "annotated")
        ref_seq = self.vocab.tokenize(annotation.reference_text)
        mask = mask_from_spans(annotation.reference_text, annotation.spans, ref_seq)
        preview = mask.bits.tolist()
        flags = [] if annotation.spans else ["no guidance signal"]
        self.store.record({
            "type": "annotated",
            "item_id": item_id,
            "annotation": {**annotation.to_dict(), "flags": flags},
            "mask_preview": preview,
        })
        return self.store.get(item_id)

    def regenerate(self, item_id, cfg=None):
        item = self.store.get(item_id)
        self.store.check_transition(item, "regenerated")
        cfg = cfg or self.guidance_defaults
        annotation = ExpertAnnotation.from_dict(item.annotation)
        q_seq = self.vocab.tokenize(item.question)
        r_seq = self.vocab.tokenize(annotation.reference_text)
        r_mask = mask_from_spans(annotation.reference_text, annotation.spans, r_seq)
        prompt = q_seq.concat(r_seq)
        bits = np.concatenate([np.zeros(len(q_seq), dtype=np.int8), r_mask.bits])
        seq, steps = guided_decode(self.model, prompt, HighlightMask(bits), cfg,
                                   self.max_answer_tokens)
        token_probs = [s.summary() for s in steps]
        self.store.record({
            "type": "regenerated",
            "item_id": item_id,
            "answer": _generated_text(self.vocab, seq),
            "token_probs": token_probs,
            "guidance_config": json.loads(cfg.to_json()),
        })
        return self.store.get(item_id)

    def deliver(self, item_id):
        item = self.store.get(item_id)
        self.store.check_transition(item, "delivered")
        self.store.record({"type": "delivered", "item_id": item_id})
        return self.store.get(item_id)

    def list_items(self, status=None, page=0, page_size=50):
        return self.store.list_items(status, page, page_size)

    def export_session(self):
        """JSONL event log plus a small metrics header."""
        counts = {}
        for item in self.store.items.values():
            counts[item.status] = counts.get(item.status, 0) + 1
        header = {"type": "header", "item_count": len(self.store.items), "status_counts": counts}
        lines = [json.dumps(header)]
        lines += [json.dumps(e) for e in self.store.export_events()]
        return "\n".join(lines) + "\n"


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value
