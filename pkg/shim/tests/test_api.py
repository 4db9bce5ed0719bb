"""Endpoint behavior: validation, failure mapping, overload, health."""

import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from infodistill.scoring import TokenDistribution

from scorer_shim.app import create_app
from scorer_shim.providers import StubProvider, truncate_top_k


@pytest.fixture()
def client():
    return TestClient(create_app(StubProvider()), raise_server_exceptions=False)


def test_malformed_request_is_400(client):
    response = client.post("/v1/causal/seq", json={"schema": 1, "items": [{"context": []}]})
    assert response.status_code == 400
    assert "error" in response.json()


def test_bad_json_is_400(client):
    response = client.post("/v1/causal/next", content=b"{not json", headers={"content-type": "application/json"})
    assert response.status_code == 400


def test_inconsistent_masked_view_is_400(client):
    item = {"visible": ["a", "b"], "spans": [{"start": 0, "tokens": ["a"]}], "mask_fraction": 0.5}
    response = client.post("/v1/infill", json={"schema": 1, "items": [item]})
    assert response.status_code == 400


def test_provider_failure_is_500():
    class Exploding(StubProvider):
        def sequence_logprob(self, context, continuation):
            raise RuntimeError("weights on fire")

    client = TestClient(create_app(Exploding()), raise_server_exceptions=False)
    response = client.post("/v1/causal/seq", json={"schema": 1, "items": [{"context": [], "continuation": ["t1"]}]})
    assert response.status_code == 500
    assert response.json()["error"]["code"] == "model_failure"


def test_overload_is_429_with_retry_after():
    client = TestClient(create_app(StubProvider(), max_concurrency=0), raise_server_exceptions=False)
    response = client.post("/v1/causal/next", json={"schema": 1, "items": [{"context": []}]})
    assert response.status_code == 429
    assert "retry-after" in response.headers


def test_health(client):
    body = client.get("/v1/health").json()
    assert body == {"status": "ok", "model_id": "stub-uniform", "stub": True, "schema": 1}


def test_next_top_k_and_tail(client):
    response = client.post("/v1/causal/next", json={"schema": 1, "items": [{"context": []}], "top_k": 4})
    result = response.json()["results"][0]
    assert len(result["tokens"]) == 4
    assert result["tail_mass"] == pytest.approx(0.6)
    assert result["logprobs"] == pytest.approx([math.log(0.1)] * 4)


def test_infill_with_and_without_condition(client):
    item = {
        "visible": ["t1", None, "t3"],
        "spans": [{"start": 1, "tokens": ["t2"]}],
        "mask_fraction": 0.4,
        "condition": ["t3"],
        "include_unconditional": True,
    }
    result = client.post("/v1/infill", json={"schema": 1, "items": [item]}).json()["results"][0]
    assert result["logprob"] == pytest.approx(math.log(0.1))
    assert result["unconditional_logprob"] == pytest.approx(math.log(0.1))


def test_truncation_preserves_nucleus_support():
    # when K >= the nucleus size, top-p support over the truncated
    # distribution is identical to the full-distribution support
    rng = np.random.default_rng(0)
    for _ in range(50):
        probs = rng.dirichlet(np.ones(12))
        dist = TokenDistribution(tuple(f"w{i}" for i in range(12)), np.log(probs))
        order = np.argsort(-probs, kind="stable")
        cum = np.cumsum(probs[order])
        nucleus = int(np.searchsorted(cum, 0.9)) + 1
        support_full = {dist.tokens[i] for i in order[:nucleus]}
        for k in range(nucleus, 13):
            tokens, logprobs, tail = truncate_top_k(dist, k)
            t_order = np.argsort(-np.array(logprobs), kind="stable")
            t_cum = np.cumsum(np.exp(np.array(logprobs)[t_order]))
            t_nucleus = int(np.searchsorted(t_cum, 0.9)) + 1
            support_trunc = {tokens[i] for i in t_order[:t_nucleus]}
            assert support_trunc == support_full
