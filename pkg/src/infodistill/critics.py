"""The three acceptance critics: saliency, faithfulness, brevity.

Saliency and faithfulness are mutual-information estimates: mask the salient
tokens of one side, then compare the infill likelihood with and without the
other side as condition. Brevity is a plain compression-ratio gate. A pair
is accepted only when all three pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from . import text as T
from .scoring import InfillScorer, infill_logprob_pair

DEFAULT_TAU_S = math.log(14.0)
DEFAULT_TAU_F = math.log(1.7)
DEFAULT_TAU_B = 0.2


@dataclass(frozen=True)
class MaskSpan:
    start: int
    tokens: tuple[str, ...]

    @property
    def end(self) -> int:
        return self.start + len(self.tokens)


@dataclass(frozen=True)
class MaskedView:
    """A token sequence with spans removed; answers restore it exactly."""

    visible: tuple[str | None, ...]  # None marks a masked position
    spans: tuple[MaskSpan, ...]
    mask_fraction: float

    def __post_init__(self):
        if not 0.0 < self.mask_fraction < 1.0:
            raise ValueError("mask fraction must be in (0, 1)")
        prev_end = -1
        for span in self.spans:
            if span.start <= prev_end:
                raise ValueError("mask spans must be sorted and non-overlapping")
            prev_end = span.end - 1
            for off in range(len(span.tokens)):
                if self.visible[span.start + off] is not None:
                    raise ValueError("masked position still visible")

    def restore(self) -> tuple[str, ...]:
        out = list(self.visible)
        for span in self.spans:
            out[span.start : span.end] = span.tokens
        return tuple(out)  # type: ignore[arg-type]

    @property
    def masked_count(self) -> int:
        return sum(len(s.tokens) for s in self.spans)


@dataclass(frozen=True)
class CriticConfig:
    """Thresholds and masking policy; defaults follow the shipped settings."""

    tau_s_log: float = DEFAULT_TAU_S
    tau_f_log: float = DEFAULT_TAU_F
    tau_b: float = DEFAULT_TAU_B
    mask_fraction: float = 0.25
    mask_policy: str = "tfidf"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.tau_b <= 1.0:
            raise ValueError("tau_b must be in (0, 1]")
        if not 0.0 < self.mask_fraction < 1.0:
            raise ValueError("mask_fraction must be in (0, 1)")
        if not (math.isfinite(self.tau_s_log) and math.isfinite(self.tau_f_log)):
            raise ValueError("thresholds must be finite")
        if self.mask_policy not in ("tfidf", "random"):
            raise ValueError(f"unknown mask policy {self.mask_policy!r}")


@dataclass(frozen=True)
class CriticVerdict:
    """Per-pair critic outcome. PMI fields are None when short-circuited."""

    pmi_saliency: float | None
    pmi_faithfulness: float | None
    compression: float
    pass_s: bool | None
    pass_f: bool | None
    pass_b: bool
    pass_all: bool = field(default=False)

    def to_dict(self) -> dict:
        return {
            "pmi_s": self.pmi_saliency,
            "pmi_f": self.pmi_faithfulness,
            "compression": self.compression,
            "pass_s": self.pass_s,
            "pass_f": self.pass_f,
            "pass_b": self.pass_b,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CriticVerdict":
        return cls(
            pmi_saliency=d["pmi_s"],
            pmi_faithfulness=d["pmi_f"],
            compression=d["compression"],
            pass_s=d["pass_s"],
            pass_f=d["pass_f"],
            pass_b=d["pass_b"],
            pass_all=bool(d["pass_b"] and d["pass_s"] and d["pass_f"]),
        )


def mask_by_tfidf(
    tokens: Sequence[str],
    stats: T.CorpusStats,
    fraction: float,
    seed: int = 0,
    policy: str = "tfidf",
) -> MaskedView:
    """Mask the ceil(fraction * content-count) highest TF-IDF content tokens.

    Punctuation and stopwords are never masked; adjacent masked positions
    merge into one span. The "random" policy instead draws content positions
    uniformly from the seed, for ablations.
    """
    toks = tuple(tokens)
    if not toks:
        raise ValueError("cannot mask empty text")
    content = T.content_positions(toks)
    if not content:
        raise ValueError("no maskable content tokens")
    target = math.ceil(fraction * len(content))

    if policy == "tfidf":
        ranked = tfidf_mask_order(toks, stats)
        chosen = sorted(ranked[:target])
    elif policy == "random":
        import numpy as np

        rng = np.random.default_rng(seed)
        chosen = sorted(rng.choice(len(content), size=target, replace=False))
        chosen = [content[i] for i in chosen]
    else:
        raise ValueError(f"unknown mask policy {policy!r}")

    visible: list[str | None] = list(toks)
    for i in chosen:
        visible[i] = None
    spans: list[MaskSpan] = []
    run: list[int] = []
    for i in chosen:
        if run and i == run[-1] + 1:
            run.append(i)
        else:
            if run:
                spans.append(MaskSpan(run[0], tuple(toks[j] for j in run)))
            run = [i]
    if run:
        spans.append(MaskSpan(run[0], tuple(toks[j] for j in run)))
    applied = target / len(content)
    # fraction==1 cannot happen (fraction<1 and ceil<=len), keep it in range
    return MaskedView(visible=tuple(visible), spans=tuple(spans), mask_fraction=min(applied, 0.999999))


def tfidf_mask_order(tokens: Sequence[str], stats: T.CorpusStats) -> list[int]:
    """Content-token positions ordered by (type TF-IDF desc, position asc)."""
    toks = tuple(tokens)
    stop = T.stopwords()
    content = [i for i, tok in enumerate(toks) if T.is_content_token(tok, stop)]
    doc = T.TokenSeq.from_tokens(toks)
    rank_of = {tok: r for r, (tok, _) in enumerate(T.tfidf_rank(doc, stats))}
    return sorted(content, key=lambda i: (rank_of[toks[i]], i))


def _masked_pmi(
    target: Sequence[str],
    condition: Sequence[str],
    infill: InfillScorer,
    cfg: CriticConfig,
    stats: T.CorpusStats,
) -> float:
    """Shared-mask likelihood ratio: one view, scored with and without condition."""
    view = mask_by_tfidf(target, stats, cfg.mask_fraction, seed=cfg.seed, policy=cfg.mask_policy)
    with_cond, without = infill_logprob_pair(infill, view, condition)
    return with_cond - without


def saliency_pmi(
    document: str,
    summary: str,
    infill: InfillScorer,
    cfg: CriticConfig,
    stats: T.CorpusStats,
) -> float:
    """log p(x | x_mask, y) - log p(x | x_mask), one shared mask."""
    x = T.tokenize(document).tokens
    y = T.tokenize(summary).tokens
    if not x or not y:
        raise ValueError("document and summary must be nonempty")
    return _masked_pmi(x, y, infill, cfg, stats)


def faithfulness_pmi(
    document: str,
    summary: str,
    infill: InfillScorer,
    cfg: CriticConfig,
    stats: T.CorpusStats,
) -> float:
    """log p(y | y_mask, x) - log p(y | y_mask): the reverse direction."""
    x = T.tokenize(document).tokens
    y = T.tokenize(summary).tokens
    if not x or not y:
        raise ValueError("document and summary must be nonempty")
    return _masked_pmi(y, x, infill, cfg, stats)


def apply_critics(
    document: str,
    summary: str,
    cfg: CriticConfig,
    infill: InfillScorer,
    stats: T.CorpusStats,
    short_circuit: bool = False,
) -> CriticVerdict:
    """Run all three critics on a pair.

    With ``short_circuit`` the critics run cheapest-first (brevity, saliency,
    faithfulness) and later PMIs are skipped once the pair is rejected; the
    accept/reject decision is identical either way.
    """
    x = T.tokenize(document).tokens
    y = T.tokenize(summary).tokens
    if not x:
        raise ValueError("document has no tokens")
    if not y:
        raise ValueError("summary has no tokens")
    compression = len(y) / len(x)
    pass_b = compression < cfg.tau_b

    pmi_s: float | None = None
    pmi_f: float | None = None
    pass_s: bool | None = None
    pass_f: bool | None = None

    if pass_b or not short_circuit:
        pmi_s = _masked_pmi(x, y, infill, cfg, stats)
        pass_s = pmi_s > cfg.tau_s_log * compression
    if (pass_b and pass_s) or not short_circuit:
        pmi_f = _masked_pmi(y, x, infill, cfg, stats)
        pass_f = pmi_f > cfg.tau_f_log

    return CriticVerdict(
        pmi_saliency=pmi_s,
        pmi_faithfulness=pmi_f,
        compression=compression,
        pass_s=pass_s,
        pass_f=pass_f,
        pass_b=pass_b,
        pass_all=bool(pass_b and pass_s and pass_f),
    )
