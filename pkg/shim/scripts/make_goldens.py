#!/usr/bin/env python3
"""Regenerate the committed conformance goldens: 64 mixed requests against
the stub provider, with the exact response bytes recorded."""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from scorer_shim.app import create_app
from scorer_shim.providers import StubProvider

OUT = Path(__file__).resolve().parent.parent / "tests" / "goldens" / "conformance.jsonl"


def requests_64():
    reqs = []
    vocab = [f"t{i}" for i in range(10)]
    # 20 next-token requests: varying contexts and top_k
    for i in range(20):
        body = {"schema": 1, "items": [{"context": vocab[: i % 5]}]}
        if i % 3 == 1:
            body["top_k"] = 1 + i % 7
        if i % 5 == 4:
            body["items"].append({"context": vocab[2 : 2 + i % 4]})
        reqs.append(("/v1/causal/next", body))
    # 20 sequence requests
    for i in range(20):
        items = [{"context": vocab[: i % 3], "continuation": vocab[: 1 + i % 6]}]
        if i % 4 == 2:
            items.append({"context": [], "continuation": [vocab[i % 10]]})
        reqs.append(("/v1/causal/seq", {"schema": 1, "items": items}))
    # 24 infill requests
    for i in range(24):
        width = 4 + i % 4
        visible = [vocab[(i + j) % 10] for j in range(width)]
        masked = [j for j in range(width) if (i + j) % 3 == 0] or [0]
        spans = []
        run = []
        for j in masked:
            if run and j == run[-1] + 1:
                run.append(j)
            else:
                if run:
                    spans.append({"start": run[0], "tokens": [visible[k] for k in run]})
                run = [j]
        spans.append({"start": run[0], "tokens": [visible[k] for k in run]})
        shown = [None if j in masked else visible[j] for j in range(width)]
        item = {"visible": shown, "spans": spans, "mask_fraction": 0.5}
        if i % 2:
            item["condition"] = vocab[: 1 + i % 4]
        if i % 4 == 3:
            item["include_unconditional"] = True
        reqs.append(("/v1/infill", {"schema": 1, "items": [item]}))
    assert len(reqs) == 64
    return reqs


def main():
    client = TestClient(create_app(StubProvider()))
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", encoding="utf-8") as fh:
        for path, body in requests_64():
            response = client.post(path, json=body)
            fh.write(
                json.dumps(
                    {
                        "path": path,
                        "request": body,
                        "status": response.status_code,
                        "response_bytes": response.content.decode("utf-8"),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    print(f"wrote 64 goldens to {OUT}")


if __name__ == "__main__":
    main()
