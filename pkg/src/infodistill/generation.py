"""Candidate generation: summary-first autoregressive sampling with a
product-of-experts penalty on the document stream.

The summary is sampled conditioned on a news-style prefix; the document is
then sampled step by step from the conditional next-token distribution
penalized by the teacher's unconditional (context-free marginal) token
distribution raised to ``-alpha``, which steers the document toward tokens
that are informative about the summary rather than merely frequent.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
import numpy as np

from . import text as T
from .scoring import BOS, EOS, SEP, UNK, CausalScorer, TokenDistribution

_TERMINAL_TOKENS = frozenset({".", "!", "?"})
_NON_LEXICAL = frozenset({BOS, UNK, SEP})


@dataclass(frozen=True)
class PrefixSpec:
    """City/media lists rendered into the fixed news-style prefix template."""

    cities: tuple[str, ...]
    media: tuple[str, ...]
    template: str = "{city}, ({media}) --"

    def __post_init__(self):
        if not self.cities or not self.media:
            raise ValueError("city and media lists must be nonempty")

    @classmethod
    def from_files(cls, cities_path, media_path) -> "PrefixSpec":
        return cls(cities=_read_list(cities_path), media=_read_list(media_path))

    @classmethod
    def bundled(cls) -> "PrefixSpec":
        data = resources.files("infodistill.data")
        return cls(
            cities=_parse_list(data.joinpath("cities.txt").read_text(encoding="utf-8")),
            media=_parse_list(data.joinpath("media.txt").read_text(encoding="utf-8")),
        )


def _read_list(path) -> tuple[str, ...]:
    with open(path, encoding="utf-8") as fh:
        return _parse_list(fh.read())


def _parse_list(raw: str) -> tuple[str, ...]:
    items = tuple(line.strip() for line in raw.splitlines() if line.strip() and not line.startswith("#"))
    if not items:
        raise ValueError("empty list file")
    return items


@dataclass(frozen=True)
class DecodeParams:
    """Sampling knobs; defaults match the shipped generation settings."""

    alpha: float = 1.0
    top_p: float = 0.9
    temperature: float = 1.0
    max_doc_tokens: int = 1024
    summary_sentences: int | None = None  # None: draw uniformly from 1..5
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.max_doc_tokens < 1:
            raise ValueError("max_doc_tokens must be >= 1")
        if self.summary_sentences is not None and not 1 <= self.summary_sentences <= 5:
            raise ValueError("summary_sentences must be in [1, 5]")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "top_p": self.top_p,
            "temperature": self.temperature,
            "max_doc_tokens": self.max_doc_tokens,
            "summary_sentences": self.summary_sentences,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecodeParams":
        return cls(**d)


@dataclass(frozen=True)
class CandidatePair:
    """One generated (document, summary) candidate plus its provenance."""

    pair_id: int
    prefix: str
    summary: str
    document: str
    params: DecodeParams
    round_tag: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.pair_id,
            "prefix": self.prefix,
            "summary": self.summary,
            "document": self.document,
            "params": self.params.to_dict(),
            "round": self.round_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CandidatePair":
        return cls(
            pair_id=d["id"],
            prefix=d["prefix"],
            summary=d["summary"],
            document=d["document"],
            params=DecodeParams.from_dict(d["params"]),
            round_tag=d.get("round", 0),
        )


@dataclass(frozen=True)
class Discard:
    """A rejected generation attempt; counted by the pipeline, never raised."""

    reason: str


def render_prefix(spec: PrefixSpec, rng: np.random.Generator) -> str:
    """Uniform random city x media rendered into the template."""
    city = spec.cities[int(rng.integers(len(spec.cities)))]
    media = spec.media[int(rng.integers(len(spec.media)))]
    return spec.template.format(city=city, media=media)


def poe_next_distribution(
    cond: TokenDistribution, uncond: TokenDistribution, alpha: float
) -> TokenDistribution:
    """Renormalized product of experts: cond * uncond^(-alpha).

    alpha == 0 returns ``cond`` unchanged (exact identity). The result is
    invariant to constant shifts of either input's log-probs.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if cond.tokens != uncond.tokens:
        raise ValueError("product of experts requires matching vocabularies")
    if alpha == 0.0:
        return cond
    weights = cond.logprobs - alpha * uncond.logprobs
    m = weights.max()
    logz = m + np.log(np.exp(weights - m).sum())
    return TokenDistribution(tokens=cond.tokens, logprobs=weights - logz)


def nucleus_sample(
    dist: TokenDistribution,
    top_p: float,
    temperature: float,
    rng: np.random.Generator,
) -> str:
    """Temperature then top-p truncation then one draw.

    The nucleus is the smallest prefix of descending-probability tokens whose
    mass reaches top_p, ties broken by vocabulary index.
    """
    if not 0.0 < top_p <= 1.0:
        raise ValueError("top_p must be in (0, 1]")
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    logits = dist.logprobs / temperature
    logits = logits - logits.max()
    probs = np.exp(logits)
    probs /= probs.sum()
    order = np.argsort(-probs, kind="stable")
    sorted_probs = probs[order]
    cum = np.cumsum(sorted_probs)
    cutoff = int(np.searchsorted(cum, top_p, side="left"))
    cutoff = min(cutoff, len(cum) - 1)
    kept = sorted_probs[: cutoff + 1]
    kept = kept / kept.sum()
    pick = int(np.searchsorted(np.cumsum(kept), rng.random(), side="right"))
    pick = min(pick, cutoff)
    return dist.tokens[int(order[pick])]


def generate_pair(
    teacher: CausalScorer,
    spec: PrefixSpec,
    params: DecodeParams,
    rng: np.random.Generator,
    pair_id: int = 0,
    round_tag: int = 0,
) -> CandidatePair | Discard:
    """Sample one candidate: prefix, then summary, then PoE-decoded document.

    Deterministic given (rng state, spec, params, teacher). Empty summary or
    document yields a Discard with a reason instead of an error.

    Sampling is restricted to the teacher's observed continuations (its
    ``generation_support``) minus reserved symbols; smoothing mass is for
    scoring, not sampling. The end marker is exempt from the PoE penalty:
    the penalty targets document content, and a marginal-rare terminator
    would otherwise be boosted into ending every document early.
    """
    prefix = render_prefix(spec, rng)
    n_sentences = params.summary_sentences or int(rng.integers(1, 6))

    vocab = teacher.next_token_distribution(()).tokens
    lexical_mask = np.array([tok not in _NON_LEXICAL for tok in vocab])
    all_idx = np.arange(len(vocab), dtype=np.intp)
    support_of = getattr(teacher, "generation_support", lambda context: all_idx)
    eos_pos = vocab.index(EOS) if EOS in vocab else -1

    def step(context: list[str], alpha: float) -> str:
        idx = support_of(context)
        idx = idx[lexical_mask[idx]]
        tokens = tuple(vocab[i] for i in idx)
        cond = TokenDistribution(tokens, teacher.next_token_distribution(context).logprobs[idx])
        if alpha > 0.0:
            penalty = teacher.unconditional_logprobs().logprobs[idx].copy()
            penalty[idx == eos_pos] = 0.0  # terminator exempt from the penalty
            cond = poe_next_distribution(cond, TokenDistribution(tokens, penalty), alpha)
        return nucleus_sample(cond, params.top_p, params.temperature, rng)

    context: list[str] = list(T.tokenize(prefix).tokens)

    summary_tokens: list[str] = []
    done = 0
    while done < n_sentences and len(summary_tokens) < params.max_doc_tokens:
        tok = step(context, 0.0)
        if tok == EOS:
            break
        summary_tokens.append(tok)
        context.append(tok)
        if tok in _TERMINAL_TOKENS:
            done += 1
    if not summary_tokens:
        return Discard("empty_summary")

    doc_tokens: list[str] = []
    while len(doc_tokens) < params.max_doc_tokens:
        tok = step(context, params.alpha)
        if tok == EOS:
            break
        doc_tokens.append(tok)
        context.append(tok)
    if not doc_tokens:
        return Discard("empty_document")

    return CandidatePair(
        pair_id=pair_id,
        prefix=prefix,
        summary=T.detokenize(summary_tokens),
        document=T.detokenize(doc_tokens),
        params=replace(params, summary_sentences=n_sentences),
        round_tag=round_tag,
    )
