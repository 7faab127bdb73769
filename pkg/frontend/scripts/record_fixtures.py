"""Record service responses as JSON fixtures for the frontend contract tests.

Run from the repo root:  python3 frontend/scripts/record_fixtures.py

Drives the real review service in-process through its HTTP interface and
captures the exact payloads the UI will see, so the vitest suite runs against
recorded truth rather than hand-written mocks.
"""

import json
import os

from fastapi.testclient import TestClient

from cfguide.retrieval import ingest
from cfguide.scenarios import build_suite
from cfguide.service.app import create_app
from cfguide.service.engine import ReviewEngine
from cfguide.uncertainty import GatePolicy

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")


def save(name, payload):
    path = os.path.join(OUT_DIR, f"{name}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path}")


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    suite = build_suite(n_hard=3, n_easy=1, seed=42)
    engine = ReviewEngine(
        suite.model,
        knowledge_store=ingest(suite.records),
        policy=GatePolicy("fixed_threshold", 0.1),
        max_answer_tokens=1,
    )
    http = TestClient(create_app(engine))

    save("queue_empty", http.get("/v1/items").json())

    batch = [{"question": c.question, "visual_ref": {"corpus_id": c.record_id}}
             for c in suite.cases]
    answered = http.post("/v1/answer", json={"batch": batch}).json()
    save("answer_batch", answered)
    save("queue_three", http.get("/v1/items", params={"status": "pending"}).json())

    pending = next(i for i in answered["items"] if i["status"] == "pending")
    case = next(c for c in suite.cases if c.question == pending["question"])
    item_id = pending["item_id"]
    save("item_pending", http.get(f"/v1/items/{item_id}").json())

    keyword = case.keywords[0]
    start = case.reference.index(keyword)
    annotated = http.post(f"/v1/items/{item_id}/annotation", json={
        "reference_text": case.reference,
        "spans": [[start, start + len(keyword), "expert"]],
        "editor": "fixture-recorder",
    })
    save("item_annotated", annotated.json())

    regenerated = http.post(f"/v1/items/{item_id}/regenerate",
                            json={"alpha": 0.01, "beta": 3.0, "gamma": 1.3})
    save("item_regenerated", regenerated.json())

    bad_span = http.post(f"/v1/items/{item_id}/annotation", json={
        "reference_text": case.reference, "spans": [[0, 9999]],
    })
    save("error_validation", {"status": bad_span.status_code, "body": bad_span.json()})

    # the reference text and expected offsets, for the selection-offset oracle
    save("selection_oracle", {
        "reference_text": case.reference,
        "keyword": keyword,
        "span": [start, start + len(keyword)],
    })


if __name__ == "__main__":
    main()
