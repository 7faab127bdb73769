"""Synthetic steerable scenario generation.

Produces a shared attention-pooling model plus question/answer cases where the
model's prior (keyed by a region word in the question) favors a wrong answer,
while the retrievable reference caption contains the correct one. Highlighting
the evidence and decoding with guidance flips the answer; plain greedy stays
wrong by construction. Case difficulty is drawn so that guidance strength 1.0
fixes only part of the cases while 1.3 fixes essentially all of them.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from cfguide.models import OneLayerToy
from cfguide.retrieval import KnowledgeRecord
from cfguide.vocab import Vocabulary

# Vote strengths, in units of the evidence vote. Plain decoding is wrong when
# the prior exceeds the evidence; the conditional branch (attention x beta=3)
# alone flips cases with prior < 3; guidance at 1.3 also covers the rest.
EVIDENCE_VOTE = 1.0
HARD_PRIOR_RANGE = (1.3, 3.6)
EASY_PRIOR = 5.0
LOGIT_SCALE = 10.0
EMBED_DIM = 16


@dataclass
class ScenarioCase:
    case_id: str
    question: str
    answer: str
    wrong_answer: str
    question_type: str  # open | closed
    reference: str
    record_id: str
    keywords: list
    hard: bool


@dataclass
class ScenarioSuite:
    vocab: Vocabulary
    model: OneLayerToy
    cases: list
    records: list
    query_embeddings: dict = field(default_factory=dict)  # case_id -> (image, text)

    def hard_cases(self):
        return [c for c in self.cases if c.hard]


def _unit(rng, dim):
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def build_suite(n_hard=100, n_easy=100, seed=0, n_closed_easy=None):
    """Deterministic scenario suite: hard (wrong-prior) plus easy control cases."""
    rng = np.random.default_rng(seed)
    n_closed_easy = n_easy // 4 if n_closed_easy is None else n_closed_easy
    n_total = n_hard + n_easy

    findings = [f"finding{i}" for i in range(n_total)]
    wrongs = [f"lesion{i}" for i in range(n_total)]
    regions = [f"region{i}" for i in range(n_total)]
    base_words = [
        "what", "is", "in", "there", "the", "scan", "shows", "at", "?", ".",
        "yes", "no", "true", "false",
    ]
    vocab = Vocabulary.build(base_words + findings + wrongs + regions)
    v = len(vocab)

    vote = np.zeros((v, v))
    priors = {}
    cases = []
    records = []
    query_embeddings = {}

    for i in range(n_total):
        hard = i < n_hard
        finding = findings[i]
        wrong = wrongs[i]
        region = regions[i]
        f_id = vocab.id_of(finding)
        w_id = vocab.id_of(wrong)
        r_id = vocab.id_of(region)

        closed = (not hard) and (i - n_hard) < n_closed_easy
        if hard:
            prior = float(rng.uniform(*HARD_PRIOR_RANGE))
            vote[w_id, r_id] = prior
            question = f"what is in {region} ?"
            answer = finding
        elif closed:
            prior = EASY_PRIOR
            yes_id = vocab.id_of("yes")
            vote[yes_id, r_id] = prior
            question = f"is there {finding} in {region} ?"
            answer = "yes"
        else:
            prior = EASY_PRIOR
            vote[f_id, r_id] = prior
            question = f"what is in {region} ?"
            answer = finding
        priors[region] = prior
        # evidence channel: an answer token present in context votes for itself
        vote[f_id, f_id] = EVIDENCE_VOTE

        # the region word must not reappear in the reference: each occurrence
        # of a token re-casts its votes, which would double the wrong prior
        reference = f"the scan shows {finding} ."
        record_id = f"rec{i}"
        image_emb = _unit(rng, EMBED_DIM)
        text_emb = _unit(rng, EMBED_DIM)
        records.append(
            KnowledgeRecord(
                id=record_id,
                caption=reference,
                keywords=[finding],
                image_embedding=image_emb,
                text_embedding=text_emb,
                modality="radiology",
            )
        )
        query_embeddings[f"case{i}"] = (image_emb.copy(), text_emb.copy())
        cases.append(
            ScenarioCase(
                case_id=f"case{i}",
                question=question,
                answer=answer,
                wrong_answer=wrong,
                question_type="closed" if closed else "open",
                reference=reference,
                record_id=record_id,
                keywords=[finding],
                hard=hard,
            )
        )

    # distractor corpus entries that match nothing in particular
    for j in range(n_total // 2):
        records.append(
            KnowledgeRecord(
                id=f"distractor{j}",
                caption="the scan shows no acute process .",
                keywords=[],
                image_embedding=_unit(rng, EMBED_DIM),
                text_embedding=_unit(rng, EMBED_DIM),
                modality="other",
            )
        )

    model = OneLayerToy(vocab, vote_matrix=vote, logit_scale=LOGIT_SCALE)
    return ScenarioSuite(vocab, model, cases, records, query_embeddings)


def modality_disagreement_corpus(seed=1, n=12):
    """Corpus + queries where image and text features point at different records.

    For each query the correct record matches on exactly one modality while a
    decoy matches better on the combined (sum) feature, so union retrieval
    achieves a hit rate at least as high as sum retrieval.
    """
    rng = np.random.default_rng(seed)
    dim = EMBED_DIM
    records = []
    queries = []  # (QueryEmbedding args, answer string, correct record id)
    for i in range(n):
        answer = f"finding{i}"
        img_dir = _unit(rng, dim)
        txt_dir = _unit(rng, dim)
        decoy_txt = _unit(rng, dim)
        # correct record: perfect image match, orthogonal-ish text
        records.append(KnowledgeRecord(
            id=f"good{i}", caption=f"scan shows {answer} .",
            image_embedding=img_dir, text_embedding=txt_dir,
        ))
        # decoy: moderate match on both features, wrong caption
        mix_img = 0.8 * img_dir + 0.6 * _unit(rng, dim)
        records.append(KnowledgeRecord(
            id=f"decoy{i}", caption="unremarkable study .",
            image_embedding=mix_img, text_embedding=decoy_txt,
        ))
        queries.append(
            ({"image_embedding": img_dir.copy(), "text_embedding": decoy_txt.copy()},
             answer, f"good{i}")
        )
    return records, queries


def expected_step_margin(prior, beta=3.0, gamma=1.3, n_positions=11):
    """Rough analytic guided-logit margin (correct minus wrong), for sanity checks."""
    d = n_positions
    cond = gamma * LOGIT_SCALE * (beta * EVIDENCE_VOTE - prior) / (d + beta - 1)
    uncond = (gamma - 1.0) * LOGIT_SCALE * prior / (d - 1 + math.exp(-(math.log(beta) + 2)))
    return cond + uncond
