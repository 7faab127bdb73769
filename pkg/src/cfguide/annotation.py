"""Expert highlight spans, token-mask construction, and the external-LLM client.

The LLM client covers three offline-capable tasks: converting QA pairs into
captions, extracting keywords from captions, and matching keywords to a
query. In offline mode responses come from a canned-response directory keyed
by request hash, which keeps the whole pipeline byte-deterministic.
"""

import hashlib
import json
import os
import re
import time
import urllib.error
import urllib.request
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from cfguide.errors import ConfigurationError, ContractViolation, LlmParseError, LlmTransportError
from cfguide.evaluation import normalize_text
from cfguide.guidance import HighlightMask
from cfguide.types import Role

PROMPT_NAMES = ("caption_conversion", "keyword_extraction", "highlight_matching")
_STOPWORDS = {
    "a", "an", "the", "is", "are", "was", "were", "of", "in", "on", "at", "to",
    "what", "which", "where", "when", "how", "why", "who", "does", "do", "did",
    "this", "that", "there", "with", "and", "or", "not", "no", "yes", "it", "be",
    "any", "present", "shown", "seen", "image", "picture",
}


@dataclass(frozen=True)
class HighlightSpan:
    """Character span [start, end) into a reference text."""

    start: int
    end: int
    source: str = "expert"  # expert | auto | llm

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ContractViolation(f"invalid span [{self.start}, {self.end})")
        if self.source not in ("expert", "auto", "llm"):
            raise ContractViolation(f"unknown span source {self.source!r}")


@dataclass
class ExpertAnnotation:
    reference_text: str
    spans: list
    editor: str = "unknown"
    timestamp: float = field(default_factory=time.time)

    def __post_init__(self):
        for span in self.spans:
            if span.end > len(self.reference_text):
                raise ContractViolation(
                    f"span [{span.start}, {span.end}) exceeds reference length "
                    f"{len(self.reference_text)}"
                )

    def to_dict(self):
        return {
            "reference_text": self.reference_text,
            "spans": [[s.start, s.end, s.source] for s in self.spans],
            "editor": self.editor,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            reference_text=data["reference_text"],
            spans=[HighlightSpan(s[0], s[1], s[2]) for s in data["spans"]],
            editor=data.get("editor", "unknown"),
            timestamp=data.get("timestamp", 0.0),
        )


def merge_spans(spans):
    """Union of overlapping or touching spans, sorted by start offset."""
    if not spans:
        return []
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    merged = [ordered[0]]
    for span in ordered[1:]:
        last = merged[-1]
        if span.start <= last.end:
            merged[-1] = HighlightSpan(last.start, max(last.end, span.end), last.source)
        else:
            merged.append(span)
    return merged


def mask_from_spans(text, spans, seq):
    """Token mask: bit i set iff token i's character range overlaps any span.

    seq must be the tokenization of text (offsets aligned); visual-prefix and
    generated positions are forced to zero. A span overlapping no token at
    all raises rather than being silently dropped.
    """
    for span in spans:
        if span.end > len(text):
            raise ContractViolation(f"span [{span.start}, {span.end}) outside text")
    bits = np.zeros(len(seq), dtype=np.int8)
    covered = [False] * len(spans)
    for i, (role, offset) in enumerate(zip(seq.roles, seq.offsets)):
        if role in (Role.VISUAL_PREFIX, Role.GENERATED) or offset is None:
            continue
        tok_start, tok_end = offset
        for si, span in enumerate(spans):
            if tok_start < span.end and span.start < tok_end:
                bits[i] = 1
                covered[si] = True
    for si, got in enumerate(covered):
        if not got:
            raise ContractViolation(
                f"span [{spans[si].start}, {spans[si].end}) overlaps no token"
            )
    return HighlightMask(bits)


def _content_words(text):
    return {w for w in normalize_text(text).split() if w not in _STOPWORDS}


def find_keyword_spans(keyword, reference, source="auto"):
    """Case-insensitive whole-word occurrences of a (possibly multi-word) keyword."""
    pattern = r"(?<![a-z0-9])" + re.escape(keyword.lower()).replace(r"\ ", r"\s+") + r"(?![a-z0-9])"
    return [
        HighlightSpan(m.start(), m.end(), source)
        for m in re.finditer(pattern, reference.lower())
    ]


def auto_highlight(keywords, question, reference, answer=None):
    """Automatic highlight spans via entity string matching.

    A keyword is kept when it shares a content word with the question, or
    appears in the supplied ground-truth answer. Matching is whole-word and
    case-insensitive; overlapping spans are merged.
    """
    question_words = _content_words(question)
    answer_norm = normalize_text(answer) if answer else ""
    spans = []
    for keyword in keywords:
        kw_words = _content_words(keyword) or set(normalize_text(keyword).split())
        relevant = bool(kw_words & question_words)
        if not relevant and answer_norm:
            relevant = normalize_text(keyword) in answer_norm or answer_norm in normalize_text(keyword)
        if not relevant:
            continue
        spans.extend(find_keyword_spans(keyword, reference))
    return merge_spans(spans)


def load_prompt_template(name):
    if name not in PROMPT_NAMES:
        raise ConfigurationError(f"unknown prompt template {name!r}")
    return (
        resources.files("cfguide")
        .joinpath("data", "prompts", f"{name}.txt")
        .read_text(encoding="utf-8")
    )


@dataclass
class LlmClientConfig:
    endpoint: str = None
    api_key_env: str = "CFGUIDE_LLM_API_KEY"
    offline_mode: bool = True
    canned_dir: str = None
    max_retries: int = 3

    def __post_init__(self):
        if self.offline_mode and self.canned_dir is None:
            # canned_dir may stay unset when only rule-based fallbacks are used
            pass
        if not self.offline_mode and not self.endpoint:
            raise ConfigurationError("online mode requires an endpoint")


class LlmClient:
    """External LLM access with caching, canned offline responses and retry."""

    def __init__(self, config=None):
        self.config = config or LlmClientConfig()
        self._cache = {}
        self.call_count = 0

    @staticmethod
    def _request_hash(task, payload):
        blob = json.dumps({"task": task, "payload": payload}, sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def _canned_response(self, key):
        if self.config.canned_dir is None:
            return None
        path = os.path.join(self.config.canned_dir, f"{key}.json")
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def _http_call(self, task, payload):
        template = load_prompt_template(task)
        body = json.dumps({"prompt": template, "input": payload}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error = None
        for _ in range(self.config.max_retries):
            try:
                req = urllib.request.Request(self.config.endpoint, data=body, headers=headers)
                with urllib.request.urlopen(req, timeout=30) as resp:
                    raw = resp.read().decode("utf-8")
                self.call_count += 1
                try:
                    return json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise LlmParseError(f"unparseable service reply: {raw[:200]}") from exc
            except (urllib.error.URLError, TimeoutError) as exc:
                last_error = exc
        raise LlmTransportError(f"endpoint unreachable after retries: {last_error}")

    def _invoke(self, task, payload, fallback):
        key = self._request_hash(task, payload)
        if key in self._cache:
            return self._cache[key]
        if self.config.offline_mode:
            canned = self._canned_response(key)
            result = fallback() if canned is None else canned
        else:
            result = self._http_call(task, payload)
        self._cache[key] = result
        return result

    def convert_qa_to_caption(self, question, answer):
        """Caption text for a QA pair; rule-based fallback strips interrogatives."""
        def fallback():
            words = [w for w in normalize_text(question).split() if w not in _STOPWORDS]
            return {"caption": " ".join(words + normalize_text(answer).split()).strip()}

        result = self._invoke("caption_conversion", {"question": question, "answer": answer}, fallback)
        if "caption" not in result:
            raise LlmParseError("caption conversion reply lacks 'caption'")
        return result["caption"]

    def extract_keywords(self, caption):
        """Keyword list for a caption; fallback returns content-word n-grams."""
        def fallback():
            return {"keywords": sorted(_content_words(caption))}

        result = self._invoke("keyword_extraction", {"caption": caption}, fallback)
        if "keywords" not in result:
            raise LlmParseError("keyword extraction reply lacks 'keywords'")
        return list(result["keywords"])

    def match_highlights(self, keywords, query):
        """Subset of keywords relevant to the query; fallback is word overlap."""
        def fallback():
            query_words = _content_words(query)
            return {"keywords": [k for k in keywords if _content_words(k) & query_words]}

        result = self._invoke(
            "highlight_matching", {"keywords": list(keywords), "query": query}, fallback
        )
        if "keywords" not in result:
            raise LlmParseError("highlight matching reply lacks 'keywords'")
        allowed = set(keywords)
        kept = []
        for k in result["keywords"]:
            if k in allowed:
                kept.append(k)
            else:
                warnings.warn(f"service returned unknown keyword {k!r}; dropped", stacklevel=2)
        return kept


def llm_extract_keywords(client, caption):
    return client.extract_keywords(caption)


def llm_match_highlights(client, keywords, query):
    return client.match_highlights(keywords, query)
