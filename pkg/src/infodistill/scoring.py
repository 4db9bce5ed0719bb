"""Scorer contracts and the deterministic n-gram reference backend.

Two contracts drive the whole pipeline:

* ``CausalScorer`` -- next-token log-prob distributions and sequence
  log-probs (the generation side).
* ``InfillScorer`` -- log-likelihood of masked answer spans, optionally
  conditioned on auxiliary text (the critic side).

``NgramBackend`` implements both with add-k smoothed count tables so that
every number in the pipeline is exactly enumerable at desk scale. A masked
token is scored as an interpolation of two channels:

* the bidirectional channel: the mean of its left-context causal
  probability and its right-context probability under a model trained on
  reversed sequences (weight ``1 - condition_weight``);
* the auxiliary channel (weight ``condition_weight``): a smoothed unigram
  distribution over the condition text when one is given, and the uniform
  distribution otherwise.

Both sides of a likelihood ratio therefore share identical context windows
and differ only in the auxiliary channel, so conditioning on text that
mentions a masked token raises its score and conditioning on irrelevant
text lowers it, which is exactly the property the critics estimate.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

if TYPE_CHECKING:  # structural use only; masking lives in critics
    from .critics import MaskedView

BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"
SEP = "<sep>"
RESERVED = (BOS, EOS, UNK, SEP)

FORMAT_TAG = "infodistill-ngram"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class TokenDistribution:
    """Log-probabilities over an explicit token support.

    ``tail_mass`` is the probability mass outside the support; it is 0 for
    full-vocabulary backends and may be positive for remote top-K results.
    """

    tokens: tuple[str, ...]
    logprobs: np.ndarray
    tail_mass: float = 0.0

    def validate(self, tol: float = 1e-6) -> None:
        if len(self.tokens) != len(self.logprobs):
            raise ValueError("support and logprobs length mismatch")
        if not np.all(np.isfinite(self.logprobs)):
            raise ValueError("non-finite log-probabilities")
        total = float(np.exp(self.logprobs).sum()) + self.tail_mass
        if abs(total - 1.0) > tol:
            raise ValueError(f"distribution mass {total} not within {tol} of 1")

    def logprob_of(self, token: str) -> float:
        idx = self.tokens.index(token)
        return float(self.logprobs[idx])


@runtime_checkable
class CausalScorer(Protocol):
    def next_token_distribution(self, context: Sequence[str]) -> TokenDistribution: ...

    def sequence_logprob(self, context: Sequence[str], continuation: Sequence[str]) -> float: ...

    def unconditional_logprobs(self) -> TokenDistribution: ...


@runtime_checkable
class InfillScorer(Protocol):
    def infill_logprob(self, view: "MaskedView", condition: Sequence[str] | None = None) -> float: ...


def infill_logprob_pair(
    scorer: InfillScorer, view: "MaskedView", condition: Sequence[str]
) -> tuple[float, float]:
    """(conditioned, unconditioned) infill scores over the same view.

    Scorers may override this with a fused implementation (the remote client
    does, to halve round-trips); the fallback is two independent calls.
    """
    fused = getattr(scorer, "infill_logprob_both", None)
    if fused is not None:
        return fused(view, condition)
    return scorer.infill_logprob(view, condition), scorer.infill_logprob(view, None)


class NgramBackend:
    """Fixed-order add-k n-gram model over a closed vocabulary.

    Implements both scorer contracts. All counts are integers; probabilities
    are ``(count + k) / (total + k * |V|)``, strictly positive for every
    vocabulary token. Construction is single-writer; afterwards the backend
    is read-only and safe for concurrent scoring (the internal distribution
    cache only ever inserts fully-built arrays).
    """

    def __init__(
        self,
        order: int,
        k: float,
        vocab: Sequence[str],
        condition_weight: float = 0.5,
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        if k <= 0:
            raise ValueError("smoothing constant must be > 0")
        if not 0.0 <= condition_weight < 1.0:
            raise ValueError("condition_weight must be in [0, 1)")
        self.order = order
        self.k = k
        self.condition_weight = condition_weight
        lexical = sorted(set(vocab) - set(RESERVED))
        self.vocab: tuple[str, ...] = RESERVED + tuple(lexical)
        self._index = {tok: i for i, tok in enumerate(self.vocab)}
        self._fwd: dict[tuple[str, ...], dict[str, int]] = {}
        self._fwd_total: dict[tuple[str, ...], int] = {}
        self._rev: dict[tuple[str, ...], dict[str, int]] = {}
        self._rev_total: dict[tuple[str, ...], int] = {}
        self._unigram: dict[str, int] = {}
        self._unigram_total = 0
        self._dist_cache: dict[tuple[str, ...], np.ndarray] = {}
        self._support_cache: dict[tuple[str, ...], np.ndarray] = {}
        self._marginal: TokenDistribution | None = None

    # -- construction ------------------------------------------------------

    @classmethod
    def train(
        cls,
        corpus: Iterable[Sequence[str]],
        order: int = 3,
        k: float = 0.1,
        condition_weight: float = 0.5,
    ) -> "NgramBackend":
        docs = [tuple(doc) for doc in corpus]
        if not docs:
            raise ValueError("cannot train on an empty corpus")
        vocab = sorted({tok for doc in docs for tok in doc})
        backend = cls(order=order, k=k, vocab=vocab, condition_weight=condition_weight)
        for doc in docs:
            backend._count_doc(doc)
        return backend

    def _count_doc(self, tokens: Sequence[str]) -> None:
        mapped = [self._map(t) for t in tokens]
        self._count_into(self._fwd, self._fwd_total, mapped)
        self._count_into(self._rev, self._rev_total, list(reversed(mapped)))
        for tok in mapped:
            self._unigram[tok] = self._unigram.get(tok, 0) + 1
        self._unigram[EOS] = self._unigram.get(EOS, 0) + 1
        self._unigram_total += len(mapped) + 1
        self._dist_cache.clear()
        self._support_cache.clear()
        self._marginal = None

    def _count_into(
        self,
        table: dict[tuple[str, ...], dict[str, int]],
        totals: dict[tuple[str, ...], int],
        mapped: list[str],
    ) -> None:
        seq = [BOS] * (self.order - 1) + mapped + [EOS]
        for i in range(self.order - 1, len(seq)):
            ctx = tuple(seq[i - self.order + 1 : i])
            tok = seq[i]
            row = table.setdefault(ctx, {})
            row[tok] = row.get(tok, 0) + 1
            totals[ctx] = totals.get(ctx, 0) + 1

    def fit_increment(self, corpus: Iterable[Sequence[str]]) -> "NgramBackend":
        """New backend with these documents counted on top of a copy of self."""
        clone = NgramBackend(self.order, self.k, self.vocab, self.condition_weight)
        clone._fwd = {ctx: dict(row) for ctx, row in self._fwd.items()}
        clone._fwd_total = dict(self._fwd_total)
        clone._rev = {ctx: dict(row) for ctx, row in self._rev.items()}
        clone._rev_total = dict(self._rev_total)
        clone._unigram = dict(self._unigram)
        clone._unigram_total = self._unigram_total
        for doc in corpus:
            clone._count_doc(tuple(doc))
        return clone

    # -- causal contract ----------------------------------------------------

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def _map(self, token: str) -> str:
        return token if token in self._index else UNK

    def _context(self, context: Sequence[str]) -> tuple[str, ...]:
        need = self.order - 1
        mapped = [self._map(t) for t in context[-need:]] if need else []
        if len(mapped) < need:
            mapped = [BOS] * (need - len(mapped)) + mapped
        return tuple(mapped)

    def next_token_distribution(self, context: Sequence[str]) -> TokenDistribution:
        ctx = self._context(context)
        cached = self._dist_cache.get(ctx)
        if cached is None:
            counts = np.zeros(len(self.vocab))
            for tok, c in self._fwd.get(ctx, {}).items():
                counts[self._index[tok]] = c
            total = self._fwd_total.get(ctx, 0)
            cached = np.log((counts + self.k) / (total + self.k * len(self.vocab)))
            self._dist_cache[ctx] = cached
        return TokenDistribution(tokens=self.vocab, logprobs=cached)

    def _smoothed(
        self,
        table: dict[tuple[str, ...], dict[str, int]],
        totals: dict[tuple[str, ...], int],
        ctx: tuple[str, ...],
        token: str,
    ) -> float:
        c = table.get(ctx, _EMPTY).get(token, 0)
        return (c + self.k) / (totals.get(ctx, 0) + self.k * len(self.vocab))

    def token_logprob(self, context: Sequence[str], token: str) -> float:
        return math.log(self._smoothed(self._fwd, self._fwd_total, self._context(context), self._map(token)))

    def sequence_logprob(self, context: Sequence[str], continuation: Sequence[str]) -> float:
        if not continuation:
            raise ValueError("continuation must be nonempty")
        running = [self._map(t) for t in context]
        total = 0.0
        for tok in continuation:
            total += self.token_logprob(running, tok)
            running.append(self._map(tok))
        return total

    def unconditional_logprobs(self) -> TokenDistribution:
        """Smoothed unigram marginal; the PoE penalty stream."""
        if self._marginal is None:
            counts = np.zeros(len(self.vocab))
            for tok, c in self._unigram.items():
                counts[self._index[tok]] = c
            logp = np.log((counts + self.k) / (self._unigram_total + self.k * len(self.vocab)))
            self._marginal = TokenDistribution(tokens=self.vocab, logprobs=logp)
        return self._marginal

    def generation_support(self, context: Sequence[str]) -> np.ndarray:
        """Vocabulary indices with observed continuations of this context.

        Smoothing mass exists so anything can be scored; sampling from it
        would inject noise, so generation sticks to observed continuations
        and falls back to the unigram support when the context is unseen.
        """
        ctx = self._context(context)
        cached = self._support_cache.get(ctx)
        if cached is None:
            row = self._fwd.get(ctx)
            source = row if row else self._unigram
            cached = np.array(sorted(self._index[tok] for tok in source), dtype=np.intp)
            self._support_cache[ctx] = cached
        return cached

    # -- infill contract ----------------------------------------------------

    def infill_logprob(self, view: "MaskedView", condition: Sequence[str] | None = None) -> float:
        if not view.spans:
            raise ValueError("masked view has no answer spans")
        cond_counts: Counter | None = None
        cache_denom = 0.0
        if condition:
            cond_counts = Counter(self._map(t) for t in condition)
            cache_denom = sum(cond_counts.values()) + self.k * len(self.vocab)
        lam = self.condition_weight
        uniform = 1.0 / len(self.vocab)
        total = 0.0
        for span in view.spans:
            for off, raw in enumerate(span.tokens):
                i = span.start + off
                tok = self._map(raw)
                p_fwd = self._smoothed(self._fwd, self._fwd_total, self._left_context(view, i), tok)
                p_rev = self._smoothed(self._rev, self._rev_total, self._right_context(view, i), tok)
                if cond_counts is None:
                    aux = uniform
                else:
                    aux = (cond_counts.get(tok, 0) + self.k) / cache_denom
                total += math.log((1.0 - lam) * 0.5 * (p_fwd + p_rev) + lam * aux)
        return total

    def _left_context(self, view: "MaskedView", i: int) -> tuple[str, ...]:
        need = self.order - 1
        ctx: list[str] = []
        pos = i - 1
        while len(ctx) < need and pos >= 0 and view.visible[pos] is not None:
            ctx.append(self._map(view.visible[pos]))
            pos -= 1
        ctx.reverse()
        if len(ctx) < need:
            pad = BOS if pos < 0 else UNK  # true start vs. another masked span
            ctx = [pad] * (need - len(ctx)) + ctx
        return tuple(ctx)

    def _right_context(self, view: "MaskedView", i: int) -> tuple[str, ...]:
        need = self.order - 1
        ctx: list[str] = []
        pos = i + 1
        while len(ctx) < need and pos < len(view.visible) and view.visible[pos] is not None:
            ctx.append(self._map(view.visible[pos]))
            pos += 1
        if len(ctx) < need:
            pad = BOS if pos >= len(view.visible) else UNK
            ctx.extend([pad] * (need - len(ctx)))
        ctx.reverse()  # reversed-model contexts run farthest-first
        return tuple(ctx)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        def dump(table: dict[tuple[str, ...], dict[str, int]]) -> list:
            return [
                [list(ctx), sorted(row.items())]
                for ctx, row in sorted(table.items())
            ]

        return {
            "format": FORMAT_TAG,
            "version": FORMAT_VERSION,
            "order": self.order,
            "k": self.k,
            "condition_weight": self.condition_weight,
            "vocab": list(self.vocab),
            "forward": dump(self._fwd),
            "reverse": dump(self._rev),
            "unigram": sorted(self._unigram.items()),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NgramBackend":
        if payload.get("format") != FORMAT_TAG:
            raise ValueError(f"not a {FORMAT_TAG} artifact")
        if payload.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported artifact version {payload.get('version')}")
        backend = cls(
            order=payload["order"],
            k=payload["k"],
            vocab=payload["vocab"],
            condition_weight=payload["condition_weight"],
        )

        def load(entries: list) -> tuple[dict, dict]:
            table: dict[tuple[str, ...], dict[str, int]] = {}
            totals: dict[tuple[str, ...], int] = {}
            for ctx_list, row in entries:
                ctx = tuple(ctx_list)
                table[ctx] = {tok: int(c) for tok, c in row}
                totals[ctx] = sum(table[ctx].values())
            return table, totals

        backend._fwd, backend._fwd_total = load(payload["forward"])
        backend._rev, backend._rev_total = load(payload["reverse"])
        backend._unigram = {tok: int(c) for tok, c in payload["unigram"]}
        backend._unigram_total = sum(backend._unigram.values())
        return backend

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, separators=(",", ":"), sort_keys=True)

    @classmethod
    def load(cls, path) -> "NgramBackend":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


_EMPTY: dict[str, int] = {}


def train_ngram(
    corpus: Iterable[Sequence[str]],
    order: int = 3,
    smoothing: float = 0.1,
    condition_weight: float = 0.5,
) -> NgramBackend:
    """Train the reference backend; see :meth:`NgramBackend.train`."""
    return NgramBackend.train(corpus, order=order, k=smoothing, condition_weight=condition_weight)


class UniformBackend:
    """Deterministic stub: uniform over a fixed token list, condition-blind.

    Used by conformance tests and as the shim's stub model; every next-token
    entry is ``-log(F)`` for support size F, sequence and infill scores are
    exact multiples of it.
    """

    def __init__(self, tokens: Sequence[str]):
        if not tokens:
            raise ValueError("stub needs at least one token")
        self.vocab: tuple[str, ...] = tuple(tokens)
        self._logp = math.log(1.0 / len(self.vocab))

    def next_token_distribution(self, context: Sequence[str]) -> TokenDistribution:
        arr = np.full(len(self.vocab), self._logp)
        return TokenDistribution(tokens=self.vocab, logprobs=arr)

    def sequence_logprob(self, context: Sequence[str], continuation: Sequence[str]) -> float:
        if not continuation:
            raise ValueError("continuation must be nonempty")
        total = 0.0
        for _ in continuation:
            total += self._logp
        return total

    def unconditional_logprobs(self) -> TokenDistribution:
        return self.next_token_distribution(())

    def infill_logprob(self, view: "MaskedView", condition: Sequence[str] | None = None) -> float:
        if not view.spans:
            raise ValueError("masked view has no answer spans")
        total = 0.0
        for span in view.spans:
            total += self._logp * len(span.tokens)
        return total
