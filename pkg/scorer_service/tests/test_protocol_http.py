from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from scorer_service import create_app

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def client(session):
    return TestClient(create_app(session))


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_info(client, session):
    data = client.get("/info").json()
    assert data["model_id"] == session.model_id
    assert data["vocab_hash"] == session.vocab_hash()
    assert data["lowercase"] is True


def test_vocab_membership(client):
    data = client.get("/vocab", params={"words": "laughs,zarp,qzxv"}).json()
    assert data == {"laughs": True, "zarp": False, "qzxv": False}
    assert client.get("/vocab").json() == {}


def test_score_golden_body(client):
    body = json.loads((FIXTURES / "golden_http_score_body.json").read_text())
    resp = client.post("/score", json=body)
    assert resp.status_code == 200
    responses = resp.json()["responses"]
    assert [r["id"] for r in responses] == ["item-1", "item-err"]
    assert list(responses[0]) == ["id", "scores"]
    assert len(responses[0]["scores"]) == 2
    assert responses[1]["error"]["code"] == "candidate_not_in_vocab"


def test_score_batch_order_preserved(client):
    requests = [{"id": f"b{i}", "tokens": ["the", "cats", "[MASK]", "."],
                 "mask_index": 2, "candidates": ["chase", "chases"]}
                for i in range(7)]
    responses = client.post("/score", json={"requests": requests}).json()["responses"]
    assert [r["id"] for r in responses] == [f"b{i}" for i in range(7)]


def test_debug_mask_endpoint(client):
    body = {"id": "m", "tokens": ["the", "boy", "[MASK]", "."], "mask_index": 2,
            "candidates": ["laughs", "laugh"]}
    data = client.post("/debug/mask", json=body).json()
    assert data["model_tokens"][data["mask_position"]] == "[MASK]"
    assert data["model_tokens"][1:3] == ["the", "boy"]
    # candidates are optional for the debug endpoint
    del body["candidates"]
    data = client.post("/debug/mask", json=body).json()
    assert data["model_tokens"][data["mask_position"]] == "[MASK]"


def test_malformed_body_is_422(client):
    assert client.post("/score", json={"nope": []}).status_code == 422
