"""Service configuration: JSON file schema plus environment overrides.

Schema (all keys optional unless noted):
{
  "model_path": "path to a saved reference model directory"  (required unless
                "scenario_seed" is given, which builds the synthetic suite),
  "scenario_seed": 0,
  "corpus_path": "path to a persisted knowledge store or corpus JSONL",
  "policy": {"kind": "top_percent"|"fixed_threshold", "value": 5.0},
  "guidance": {"alpha":..., "beta":..., "gamma":..., "delta":...},
  "retrieval": {"k": 4, "strategy": "union"},
  "max_answer_tokens": 8,
  "session_log": "path for the append-only event log",
  "static_dir": "directory served at /ui for the review frontend",
  "auth_token": "shared secret; requests must send X-Auth-Token",
  "show_initial_answer": true
}
"""

import json
import os
from dataclasses import dataclass, field

from cfguide.errors import ConfigurationError
from cfguide.guidance import GuidanceConfig
from cfguide.model_io import load_model
from cfguide.retrieval import ingest, load_corpus_jsonl, load_store
from cfguide.service.engine import ReviewEngine
from cfguide.service.store import SessionStore
from cfguide.uncertainty import GatePolicy


@dataclass
class ServiceConfig:
    model_path: str = None
    scenario_seed: int = None
    corpus_path: str = None
    policy: dict = field(default_factory=lambda: {"kind": "top_percent", "value": 5.0})
    guidance: dict = field(default_factory=dict)
    retrieval: dict = field(default_factory=lambda: {"k": 4, "strategy": "union"})
    max_answer_tokens: int = 8
    session_log: str = None
    static_dir: str = None
    auth_token: str = None
    show_initial_answer: bool = True

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.auth_token = os.environ.get("CFGUIDE_AUTH_TOKEN", cfg.auth_token)
        return cfg

    def build_engine(self):
        if self.scenario_seed is not None:
            from cfguide.scenarios import build_suite

            suite = build_suite(seed=self.scenario_seed)
            model = suite.model
            knowledge = ingest(suite.records)
        elif self.model_path:
            model = load_model(self.model_path)
            knowledge = None
        else:
            raise ConfigurationError("config needs model_path or scenario_seed")
        if self.corpus_path:
            if os.path.isdir(self.corpus_path):
                knowledge = load_store(self.corpus_path)
            else:
                knowledge = ingest(load_corpus_jsonl(self.corpus_path))
        return ReviewEngine(
            model,
            knowledge_store=knowledge,
            policy=GatePolicy(self.policy["kind"], self.policy["value"]),
            guidance_defaults=GuidanceConfig.from_dict(self.guidance),
            retrieval_k=self.retrieval.get("k", 4),
            retrieval_strategy=self.retrieval.get("strategy", "union"),
            max_answer_tokens=self.max_answer_tokens,
            session_store=SessionStore(self.session_log),
            show_initial_answer=self.show_initial_answer,
        )
