"""Stage orchestration: over-generate, filter, self-train, annotate, export.

Every stage is resumable (the store counts what exists), idempotent (stage
watermarks in the manifest) and parallelism-invariant: work is mapped over
candidate ids in order, each candidate owns an rng stream derived from
(seed, stage, index, attempt), and the single writer appends results in id
order, so 1 worker and W workers persist byte-identical records.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from . import control as C
from . import text as T
from .critics import CriticConfig, CriticVerdict, apply_critics, faithfulness_pmi, saliency_pmi
from .generation import CandidatePair, DecodeParams, Discard, PrefixSpec, generate_pair
from .scoring import CausalScorer, InfillScorer, NgramBackend
from .store import Store, file_digest

REJECTION_ORDER = ("brevity", "saliency", "faithfulness")

MAX_ATTEMPTS_PER_CANDIDATE = 100


def stage_name(round_tag: int) -> str:
    return "init" if round_tag == 0 else f"round{round_tag}"


def _stable_hash(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "big")


def stage_rng(seed: int, stage: str, index: int, attempt: int = 0) -> np.random.Generator:
    """Private rng stream for one candidate attempt; stable across machines."""
    return np.random.default_rng(np.random.SeedSequence([seed, _stable_hash(stage), index, attempt]))


@dataclass
class RunStats:
    """Accounting for one stage run."""

    generated: int = 0
    accepted: int = 0
    rejected: dict = field(default_factory=dict)
    errored: int = 0
    discarded: dict = field(default_factory=dict)
    efficiency: float | None = None
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        return {
            "generated": self.generated,
            "accepted": self.accepted,
            "rejected": dict(self.rejected),
            "errored": self.errored,
            "discarded": dict(self.discarded),
            "efficiency": self.efficiency,
            "wall_clock": self.wall_clock,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunStats":
        return cls(**d)


@dataclass(frozen=True)
class DatasetRecord:
    """One persisted candidate with whatever later stages have added."""

    pair: CandidatePair
    stage: str
    verdict: CriticVerdict | None = None
    attrs: C.ControlAttributes | None = None
    style_bucket: int | None = None
    error: str | None = None

    @property
    def accepted(self) -> bool:
        return bool(self.verdict and self.verdict.pass_all)

    def to_dict(self) -> dict:
        d = self.pair.to_dict()
        d["stage"] = self.stage
        d["verdict"] = self.verdict.to_dict() if self.verdict else None
        d["attrs"] = self.attrs.to_dict() if self.attrs else None
        d["style_bucket"] = self.style_bucket
        if self.error is not None:
            d["error"] = self.error
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetRecord":
        return cls(
            pair=CandidatePair.from_dict(d),
            stage=d["stage"],
            verdict=CriticVerdict.from_dict(d["verdict"]) if d.get("verdict") else None,
            attrs=C.ControlAttributes.from_dict(d["attrs"]) if d.get("attrs") else None,
            style_bucket=d.get("style_bucket"),
            error=d.get("error"),
        )


def _map_ordered(fn: Callable, items: Sequence, workers: int) -> Iterable:
    """Apply fn over items preserving order, optionally with a worker pool."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- generation stage ----------------------------------------------------------


def run_generation_stage(
    backend: CausalScorer,
    spec: PrefixSpec,
    params: DecodeParams,
    n_candidates: int,
    store: Store,
    round_tag: int = 0,
    workers: int = 1,
) -> RunStats:
    """Generate exactly n_candidates pairs for this round's stage tag.

    Resumable: existing records of the stage are kept and only the remainder
    is generated. Discarded attempts (empty summary or document) are retried
    on a fresh substream and counted by reason.
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    stage = stage_name(round_tag)
    stage_key = f"generate:{stage}"
    started = time.perf_counter()

    existing = store.stage_records(stage)
    if len(existing) >= n_candidates:
        stats = RunStats.from_dict(store.load_manifest()["stages"][stage_key]["stats"])
        return stats

    id_base = min((r["id"] for r in existing), default=store.max_id() + 1)

    def make(index: int) -> tuple[CandidatePair, dict]:
        discards: dict[str, int] = {}
        for attempt in range(MAX_ATTEMPTS_PER_CANDIDATE):
            rng = stage_rng(params.seed, stage, index, attempt)
            result = generate_pair(
                backend, spec, params, rng, pair_id=id_base + index, round_tag=round_tag
            )
            if isinstance(result, Discard):
                discards[result.reason] = discards.get(result.reason, 0) + 1
                continue
            return result, discards
        raise RuntimeError(f"candidate {index}: no valid pair in {MAX_ATTEMPTS_PER_CANDIDATE} attempts")

    indices = list(range(len(existing), n_candidates))
    results = _map_ordered(make, indices, workers)

    discard_totals: dict[str, int] = {}
    records = []
    for pair, discards in results:
        for reason, count in discards.items():
            discard_totals[reason] = discard_totals.get(reason, 0) + count
        records.append(DatasetRecord(pair=pair, stage=stage).to_dict())
    store.append_records(records)

    stats = RunStats(
        generated=n_candidates,
        discarded=discard_totals,
        wall_clock=time.perf_counter() - started,
    )
    store.record_stage(stage_key, {"count": n_candidates, "stats": stats.to_dict()})
    return stats


# -- filter stage -----------------------------------------------------------------


def first_rejection(verdict: CriticVerdict) -> str | None:
    """Attribution in evaluation order: brevity, saliency, faithfulness."""
    if not verdict.pass_b:
        return "brevity"
    if not verdict.pass_s:
        return "saliency"
    if not verdict.pass_f:
        return "faithfulness"
    return None


def run_filter_stage(
    store: Store,
    cfg: CriticConfig,
    infill: InfillScorer,
    stats: T.CorpusStats,
    round_tag: int | None = None,
    workers: int = 1,
    short_circuit: bool = True,
    limit: int | None = None,
) -> RunStats:
    """Attach a CriticVerdict to every unfiltered candidate.

    Output is identical to a sequential brute-force application of
    apply_critics over ids, whatever the worker count. With `limit`, only
    that many pending candidates are judged this run and the completion
    watermark is withheld, so a later run picks up the rest.
    """
    stage = None if round_tag is None else stage_name(round_tag)
    stage_key = f"filter:{stage or 'all'}"
    started = time.perf_counter()

    if store.stage_done(stage_key):
        return RunStats.from_dict(store.load_manifest()["stages"][stage_key]["stats"])

    pending = [
        DatasetRecord.from_dict(rec)
        for rec in store.view().values()
        if rec.get("verdict") is None and "error" not in rec and (stage is None or rec["stage"] == stage)
    ]
    partial = limit is not None and limit < len(pending)
    if limit is not None:
        pending = pending[:limit]

    def judge(record: DatasetRecord) -> DatasetRecord:
        try:
            verdict = apply_critics(
                record.pair.document,
                record.pair.summary,
                cfg,
                infill,
                stats,
                short_circuit=short_circuit,
            )
        except ValueError as exc:
            return DatasetRecord(pair=record.pair, stage=record.stage, error=str(exc))
        return DatasetRecord(pair=record.pair, stage=record.stage, verdict=verdict)

    judged = list(_map_ordered(judge, pending, workers))
    store.append_records(rec.to_dict() for rec in judged)

    run = RunStats(generated=len(judged), wall_clock=time.perf_counter() - started)
    run.rejected = {name: 0 for name in REJECTION_ORDER}
    for rec in judged:
        if rec.error is not None:
            run.errored += 1
        elif rec.verdict and rec.verdict.pass_all:
            run.accepted += 1
        else:
            run.rejected[first_rejection(rec.verdict)] += 1
    run.efficiency = run.accepted / run.generated if run.generated else 0.0
    if not partial:
        store.record_stage(stage_key, {"count": run.generated, "stats": run.to_dict()})
    return run


# -- expert iteration ---------------------------------------------------------------


class TrainingBackend(Protocol):
    def fit(self, sequences: Sequence[Sequence[str]]) -> CausalScorer: ...


@dataclass(frozen=True)
class NgramTrainer:
    """Reference trainer: re-estimates counts from the accepted sequences.

    mode "replace" fits fresh count tables over the base vocabulary (strong
    alignment with the accepted set); "update" adds the sequences on top of
    the base counts, `weight` times, which plays the role of fine-tuning
    epochs: high enough to re-shape the generator, while the base counts
    keep it from collapsing onto verbatim chains. The base is never mutated.
    """

    base: NgramBackend
    mode: str = "update"
    weight: int = 1

    def fit(self, sequences: Sequence[Sequence[str]]) -> NgramBackend:
        if not sequences:
            raise ValueError("no sequences to fit")
        if self.weight < 1:
            raise ValueError("weight must be >= 1")
        repeated = [seq for seq in sequences for _ in range(self.weight)]
        if self.mode == "replace":
            fresh = NgramBackend(
                order=self.base.order,
                k=self.base.k,
                vocab=self.base.vocab,
                condition_weight=self.base.condition_weight,
            )
            return fresh.fit_increment(repeated)
        if self.mode == "update":
            return self.base.fit_increment(repeated)
        raise ValueError(f"unknown trainer mode {self.mode!r}")


@dataclass(frozen=True)
class IdentityTrainer:
    """Null trainer: hands the base backend straight back."""

    base: CausalScorer

    def fit(self, sequences: Sequence[Sequence[str]]) -> CausalScorer:
        return self.base


def render_training_sequence(record: DatasetRecord) -> list[str]:
    """prefix + summary + document as one token stream."""
    pair = record.pair
    return (
        list(T.tokenize(pair.prefix).tokens)
        + list(T.tokenize(pair.summary).tokens)
        + list(T.tokenize(pair.document).tokens)
    )


def expert_iterate(store: Store, trainer: TrainingBackend, round_tag: int | None = None) -> CausalScorer:
    """Fit the trainer on accepted records only; returns the improved teacher."""
    stage = None if round_tag is None else stage_name(round_tag)
    accepted = [
        DatasetRecord.from_dict(rec)
        for rec in store.view().values()
        if rec.get("verdict") and CriticVerdict.from_dict(rec["verdict"]).pass_all
        and (stage is None or rec["stage"] == stage)
    ]
    if not accepted:
        raise ValueError("expert iteration needs at least one accepted record")
    sequences = [render_training_sequence(rec) for rec in accepted]
    return trainer.fit(sequences)


# -- re-ranking -----------------------------------------------------------------------


@dataclass(frozen=True)
class RankedChoice:
    index: int
    summary: str
    scores: tuple[tuple[float, float], ...]  # (saliency, faithfulness) per candidate

    @property
    def total(self) -> float:
        s, f = self.scores[self.index]
        return s + f


def best_of_n(
    document: str,
    candidates: Sequence[str],
    cfg: CriticConfig,
    infill: InfillScorer,
    stats: T.CorpusStats,
) -> RankedChoice:
    """Pick the candidate with the largest saliency + faithfulness sum.

    Ties break toward the lowest candidate index.
    """
    if not candidates:
        raise ValueError("need at least one candidate summary")
    scores = []
    for cand in candidates:
        s = saliency_pmi(document, cand, infill, cfg, stats)
        f = faithfulness_pmi(document, cand, infill, cfg, stats)
        scores.append((s, f))
    best = max(range(len(candidates)), key=lambda i: (scores[i][0] + scores[i][1], -i))
    return RankedChoice(index=best, summary=candidates[best], scores=tuple(scores))


# -- annotation -------------------------------------------------------------------------


def run_annotate_stage(
    store: Store,
    stats: T.CorpusStats,
    thresholds: C.ControlThresholds | None = None,
    keyword_count: int = 2,
    workers: int = 1,
    limit: int | None = None,
) -> RunStats:
    """Annotate accepted records with control attributes and style buckets."""
    stage_key = "annotate:all"
    started = time.perf_counter()
    if store.stage_done(stage_key):
        return RunStats.from_dict(store.load_manifest()["stages"][stage_key]["stats"])

    pending = [
        DatasetRecord.from_dict(rec)
        for rec in store.view().values()
        if rec.get("verdict") and rec.get("attrs") is None and "error" not in rec
        and CriticVerdict.from_dict(rec["verdict"]).pass_all
    ]
    partial = limit is not None and limit < len(pending)
    if limit is not None:
        pending = pending[:limit]

    def tag(record: DatasetRecord) -> DatasetRecord:
        try:
            attrs = C.annotate(
                record.pair.summary, record.pair.document, stats, thresholds, keyword_count
            )
        except ValueError as exc:
            return DatasetRecord(
                pair=record.pair, stage=record.stage, verdict=record.verdict, error=str(exc)
            )
        return DatasetRecord(
            pair=record.pair,
            stage=record.stage,
            verdict=record.verdict,
            attrs=attrs,
            style_bucket=C.style_bucket(attrs),
        )

    tagged = list(_map_ordered(tag, pending, workers))
    store.append_records(rec.to_dict() for rec in tagged)

    run = RunStats(generated=len(tagged), wall_clock=time.perf_counter() - started)
    run.errored = sum(1 for rec in tagged if rec.error is not None)
    run.accepted = run.generated - run.errored
    if not partial:
        store.record_stage(stage_key, {"count": run.generated, "stats": run.to_dict()})
    return run


# -- balancing and export ------------------------------------------------------------------


def downsample_balance(records: Iterable[DatasetRecord], target: int, rng: np.random.Generator) -> list[DatasetRecord]:
    """Uniform sample of min(target, available) records per style bucket."""
    by_bucket: dict[int, list[DatasetRecord]] = {}
    for rec in records:
        if rec.style_bucket is None:
            raise ValueError("records must be annotated with style buckets")
        by_bucket.setdefault(rec.style_bucket, []).append(rec)
    out: list[DatasetRecord] = []
    for bucket in sorted(by_bucket):
        pool = sorted(by_bucket[bucket], key=lambda r: r.pair.pair_id)
        if len(pool) <= target:
            out.extend(pool)
        else:
            picks = rng.choice(len(pool), size=target, replace=False)
            out.extend(pool[i] for i in sorted(int(i) for i in picks))
    return sorted(out, key=lambda r: r.pair.pair_id)


def export_distillation(
    store: Store,
    mode: str,
    sink: str,
    target_per_bucket: int | None = None,
    seed: int = 0,
) -> dict:
    """Write {input, target} JSON lines for the accepted (annotated) records.

    plain mode: input is the document; controlled mode: input is the control
    instruction rendered from the record's attributes, then the document.
    """
    if mode not in ("plain", "controlled"):
        raise ValueError(f"unknown export mode {mode!r}")
    records = [
        DatasetRecord.from_dict(rec)
        for rec in store.view().values()
        if rec.get("verdict") and "error" not in rec and CriticVerdict.from_dict(rec["verdict"]).pass_all
    ]
    if mode == "controlled":
        missing = [rec.pair.pair_id for rec in records if rec.attrs is None]
        if missing:
            raise ValueError(f"controlled export needs annotations; missing for ids {missing[:5]}")
        if target_per_bucket:
            records = downsample_balance(records, target_per_bucket, stage_rng(seed, "downsample", 0))

    with open(sink, "w", encoding="utf-8") as fh:
        for rec in sorted(records, key=lambda r: r.pair.pair_id):
            if mode == "plain":
                item = {"input": rec.pair.document, "target": rec.pair.summary}
            else:
                instruction = C.render_control_code_for(rec.attrs)
                item = {"input": instruction + "\n\n" + rec.pair.document, "target": rec.pair.summary}
            fh.write(json.dumps(item, sort_keys=True) + "\n")

    manifest = {"mode": mode, "count": len(records), "sha256": file_digest(sink)}
    full = store.load_manifest()
    full.setdefault("exports", {})[mode] = manifest
    store.save_manifest(full)
    return manifest


# -- diversity / figure data -----------------------------------------------------------------


def dataset_statistics(store: Store, msttr_window: int = 100) -> dict:
    """Diversity and style statistics over the accepted summaries."""
    records = [
        DatasetRecord.from_dict(rec)
        for rec in store.view().values()
        if rec.get("verdict") and "error" not in rec and CriticVerdict.from_dict(rec["verdict"]).pass_all
    ]
    summaries = [T.tokenize(rec.pair.summary) for rec in records]
    lengths = [len(s) for s in summaries]
    histogram = [0] * C.STYLE_BUCKET_COUNT
    for rec in records:
        if rec.style_bucket is not None:
            histogram[rec.style_bucket] += 1

    def safe(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValueError:
            return None

    manifest = store.load_manifest()
    efficiencies = {
        key.split(":", 1)[1]: info["stats"].get("efficiency")
        for key, info in manifest["stages"].items()
        if key.startswith("filter:")
    }
    return {
        "pairs": len(records),
        "h2": safe(T.ngram_entropy, summaries, 2),
        "h3": safe(T.ngram_entropy, summaries, 3),
        "msttr": safe(T.msttr, summaries, msttr_window),
        "msttr_window": msttr_window,
        "length_median": float(np.median(lengths)) if lengths else None,
        "length_std": float(np.std(lengths)) if lengths else None,
        "style_histogram": histogram,
        "sampling_efficiency": efficiencies,
    }
