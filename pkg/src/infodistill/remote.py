"""HTTP client for remote scorer backends.

Wire protocol (JSON over HTTP, natural-log everywhere, schema version 1):

* ``POST /v1/causal/next``  {schema, items: [{context}], top_k?}
  -> {schema, model_id, results: [{tokens, logprobs, tail_mass}]}
* ``POST /v1/causal/seq``   {schema, items: [{context, continuation}]}
  -> {schema, model_id, results: [{logprob}]}
* ``POST /v1/infill``       {schema, items: [{visible, spans, condition?,
  include_unconditional?}]} -> {schema, model_id, results:
  [{logprob, unconditional_logprob?}]}
* ``GET /v1/health``        -> {status, model_id, stub, schema}

Responses carry one result per request item, in order. The client validates
shapes and value ranges; transient failures (connection errors, timeouts,
429, 5xx) are retried with exponential backoff up to a bounded attempt
count.
"""

from __future__ import annotations

import math
import time
from typing import TYPE_CHECKING, Callable, Sequence

import httpx
import numpy as np

from .scoring import TokenDistribution

if TYPE_CHECKING:
    from .critics import MaskedView

SCHEMA_VERSION = 1

NEXT_PATH = "/v1/causal/next"
SEQ_PATH = "/v1/causal/seq"
INFILL_PATH = "/v1/infill"
HEALTH_PATH = "/v1/health"


class RemoteError(Exception):
    """Base class for remote scorer failures."""


class ProtocolError(RemoteError):
    """The server's request or response violated the wire schema."""


class TransportError(RemoteError):
    """Transient failures exhausted the retry budget."""


class DataError(RemoteError):
    """The response parsed but carried invalid values (e.g. non-finite)."""


def masked_view_payload(view: "MaskedView") -> dict:
    return {
        "visible": list(view.visible),
        "spans": [{"start": s.start, "tokens": list(s.tokens)} for s in view.spans],
        "mask_fraction": view.mask_fraction,
    }


class RemoteScorer:
    """CausalScorer + InfillScorer speaking the model-shim wire protocol."""

    def __init__(
        self,
        endpoint: str,
        auth_token: str | None = None,
        timeout: float = 30.0,
        max_attempts: int = 4,
        backoff_base: float = 0.25,
        top_k: int | None = None,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.top_k = top_k
        self._sleep = sleep
        headers = {"authorization": f"Bearer {auth_token}"} if auth_token else {}
        self._client = client or httpx.Client(base_url=self.endpoint, timeout=timeout, headers=headers)

    # -- transport ---------------------------------------------------------

    def _post(self, path: str, payload: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                response = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last = exc
                self._sleep(self.backoff_base * (2**attempt))
                continue
            if response.status_code == 200:
                try:
                    return response.json()
                except ValueError as exc:
                    raise ProtocolError(f"unparseable response body: {exc}") from exc
            if response.status_code == 429 or response.status_code >= 500:
                last = ProtocolError(f"status {response.status_code}")
                retry_after = response.headers.get("retry-after")
                pause = float(retry_after) if retry_after else self.backoff_base * (2**attempt)
                self._sleep(pause)
                continue
            raise ProtocolError(f"server rejected request: status {response.status_code}: {response.text[:200]}")
        raise TransportError(f"{path}: no response after {self.max_attempts} attempts: {last}")

    def _results(self, path: str, payload: dict, expected: int) -> list[dict]:
        body = self._post(path, payload)
        if not isinstance(body, dict) or "results" not in body:
            raise ProtocolError(f"{path}: response missing 'results'")
        results = body["results"]
        if not isinstance(results, list) or len(results) != expected:
            raise ProtocolError(f"{path}: expected {expected} results, got {len(results) if isinstance(results, list) else type(results)}")
        return results

    def health(self) -> dict:
        try:
            response = self._client.get(HEALTH_PATH)
        except httpx.HTTPError as exc:
            raise TransportError(f"health check failed: {exc}") from exc
        if response.status_code != 200:
            raise ProtocolError(f"health endpoint returned {response.status_code}")
        return response.json()

    # -- causal contract ----------------------------------------------------

    def next_token_distribution(self, context: Sequence[str]) -> TokenDistribution:
        payload = {"schema": SCHEMA_VERSION, "items": [{"context": list(context)}]}
        if self.top_k is not None:
            payload["top_k"] = self.top_k
        result = self._results(NEXT_PATH, payload, 1)[0]
        return self._parse_distribution(result)

    def _parse_distribution(self, result: dict) -> TokenDistribution:
        try:
            tokens = tuple(result["tokens"])
            logprobs = np.array(result["logprobs"], dtype=float)
            tail = float(result.get("tail_mass", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed distribution result: {exc}") from exc
        if len(tokens) != len(logprobs):
            raise ProtocolError("tokens and logprobs length mismatch")
        if not np.all(np.isfinite(logprobs)) or np.any(logprobs > 0) or not math.isfinite(tail):
            raise DataError("non-finite or positive log-probabilities in response")
        return TokenDistribution(tokens=tokens, logprobs=logprobs, tail_mass=tail)

    def unconditional_logprobs(self) -> TokenDistribution:
        return self.next_token_distribution(())

    def sequence_logprob(self, context: Sequence[str], continuation: Sequence[str]) -> float:
        if not continuation:
            raise ValueError("continuation must be nonempty")
        return self.sequence_logprob_batch([(context, continuation)])[0]

    def sequence_logprob_batch(self, items: Sequence[tuple[Sequence[str], Sequence[str]]]) -> list[float]:
        payload = {
            "schema": SCHEMA_VERSION,
            "items": [{"context": list(ctx), "continuation": list(cont)} for ctx, cont in items],
        }
        results = self._results(SEQ_PATH, payload, len(items))
        return [self._logprob_field(r, "logprob") for r in results]

    # -- infill contract -------------------------------------------------------

    def infill_logprob(self, view: "MaskedView", condition: Sequence[str] | None = None) -> float:
        if not view.spans:
            raise ValueError("masked view has no answer spans")
        item = masked_view_payload(view)
        item["condition"] = list(condition) if condition is not None else None
        payload = {"schema": SCHEMA_VERSION, "items": [item]}
        result = self._results(INFILL_PATH, payload, 1)[0]
        return self._logprob_field(result, "logprob")

    def infill_logprob_both(self, view: "MaskedView", condition: Sequence[str]) -> tuple[float, float]:
        """Fused conditioned/unconditioned scores in one request."""
        if not view.spans:
            raise ValueError("masked view has no answer spans")
        item = masked_view_payload(view)
        item["condition"] = list(condition)
        item["include_unconditional"] = True
        payload = {"schema": SCHEMA_VERSION, "items": [item]}
        result = self._results(INFILL_PATH, payload, 1)[0]
        return (
            self._logprob_field(result, "logprob"),
            self._logprob_field(result, "unconditional_logprob"),
        )

    def infill_batch(self, items: Sequence[dict]) -> list[dict]:
        payload = {"schema": SCHEMA_VERSION, "items": list(items)}
        results = self._results(INFILL_PATH, payload, len(items))
        for r in results:
            self._logprob_field(r, "logprob")
        return results

    def _logprob_field(self, result: dict, field: str) -> float:
        try:
            value = float(result[field])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"result missing numeric {field!r}: {exc}") from exc
        if not math.isfinite(value) or value > 0:
            raise DataError(f"{field} out of range: {value}")
        return value

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "RemoteScorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
