"""Golden request/response conformance under the deterministic stub."""

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from scorer_shim.app import create_app
from scorer_shim.providers import StubProvider

GOLDENS = Path(__file__).parent / "goldens" / "conformance.jsonl"


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(StubProvider()))


def load_goldens():
    with open(GOLDENS, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def test_golden_suite_is_64_mixed_requests():
    goldens = load_goldens()
    assert len(goldens) == 64
    paths = {g["path"] for g in goldens}
    assert paths == {"/v1/causal/next", "/v1/causal/seq", "/v1/infill"}


@pytest.mark.parametrize("case", load_goldens(), ids=lambda c: c["path"].rsplit("/", 1)[-1])
def test_golden_byte_exact(client, case):
    response = client.post(case["path"], json=case["request"])
    assert response.status_code == case["status"]
    assert response.content == case["response_bytes"].encode("utf-8")


def test_results_arrive_in_request_order(client):
    items = [{"context": [], "continuation": [f"t{i % 10}"] * (i + 1)} for i in range(8)]
    response = client.post("/v1/causal/seq", json={"schema": 1, "items": items})
    logprobs = [r["logprob"] for r in response.json()["results"]]
    import math

    expected = [(i + 1) * math.log(0.1) for i in range(8)]
    assert logprobs == pytest.approx(expected)
