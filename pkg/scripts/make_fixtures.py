#!/usr/bin/env python3
"""Regenerate the committed test fixtures from the bundled corpus.

* tests/fixtures/pairs_200.jsonl: 200 candidate pairs of mixed quality,
  120 from the base teacher and 80 from a one-iteration teacher, so the
  critic-fidelity suite sees accepts and all rejection kinds.
* tests/fixtures/summaries_20.jsonl: 20 summary/document pairs for the
  annotation-exactness suite.
"""

import json
from pathlib import Path

from infodistill import text as T
from infodistill.critics import CriticConfig, apply_critics
from infodistill.generation import DecodeParams, Discard, PrefixSpec, generate_pair
from infodistill.pipeline import NgramTrainer, stage_rng
from infodistill.scoring import train_ngram

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"

ORDER, K, LAM = 4, 0.001, 0.8


def batch(backend, spec, params, n, stage):
    pairs = []
    for i in range(n):
        for attempt in range(50):
            rng = stage_rng(params.seed, stage, i, attempt)
            result = generate_pair(backend, spec, params, rng, pair_id=i)
            if not isinstance(result, Discard):
                pairs.append(result)
                break
    return pairs


def main():
    corpus_path = ROOT / "src/infodistill/data/synthetic_corpus.txt"
    docs = [T.tokenize(line).tokens for line in corpus_path.read_text().splitlines() if line.strip()]
    stats = T.CorpusStats.from_corpus([T.TokenSeq.from_tokens(d) for d in docs])
    teacher = train_ngram(docs, order=ORDER, smoothing=K, condition_weight=LAM)
    spec = PrefixSpec.bundled()
    cfg = CriticConfig()

    base_params = DecodeParams(alpha=1.0, max_doc_tokens=120, seed=303)
    base_pairs = batch(teacher, spec, base_params, 600, "fixt0")
    accepted = [
        p
        for p in base_pairs
        if apply_critics(p.document, p.summary, cfg, teacher, stats, short_circuit=True).pass_all
    ]
    print(f"base pool: {len(base_pairs)} pairs, {len(accepted)} accepted")
    seqs = [
        list(T.tokenize(p.prefix).tokens)
        + list(T.tokenize(p.summary).tokens)
        + list(T.tokenize(p.document).tokens)
        for p in accepted
    ]
    improved = NgramTrainer(base=teacher, mode="update", weight=150).fit(seqs)
    improved_pairs = batch(improved, spec, DecodeParams(alpha=1.0, max_doc_tokens=120, seed=404), 80, "fixt1")

    mixed = base_pairs[:120] + improved_pairs[:80]
    assert len(mixed) == 200, len(mixed)
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with open(FIXTURES / "pairs_200.jsonl", "w", encoding="utf-8") as fh:
        for pair in mixed:
            fh.write(
                json.dumps(
                    {"prefix": pair.prefix, "summary": pair.summary, "document": pair.document},
                    sort_keys=True,
                )
                + "\n"
            )

    with open(FIXTURES / "summaries_20.jsonl", "w", encoding="utf-8") as fh:
        for pair in (improved_pairs + base_pairs)[:20]:
            fh.write(
                json.dumps({"summary": pair.summary, "document": pair.document}, sort_keys=True) + "\n"
            )

    verdicts = [
        apply_critics(p.document, p.summary, cfg, teacher, stats, short_circuit=False) for p in mixed
    ]
    accepted_n = sum(v.pass_all for v in verdicts)
    print(f"fixture: 200 pairs, {accepted_n} accepted under default thresholds")


if __name__ == "__main__":
    main()
