"""Model providers behind the scoring endpoints.

Three modes: a deterministic uniform stub (conformance tests), an n-gram
artifact (exact reference scoring), and real neural models via transformers
(loaded lazily; causal LM for next-token/sequence scores, an encoder-decoder
MLM for masked infilling).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from infodistill.critics import MaskedView, MaskSpan
from infodistill.scoring import NgramBackend, TokenDistribution, UniformBackend


def view_from_parts(visible: Sequence[str | None], spans, mask_fraction: float) -> MaskedView:
    return MaskedView(
        visible=tuple(visible),
        spans=tuple(MaskSpan(start=s.start, tokens=tuple(s.tokens)) for s in spans),
        mask_fraction=mask_fraction,
    )


class StubProvider:
    """Uniform over a fixed vocabulary; condition-blind; fully deterministic."""

    stub = True

    def __init__(self, vocab_size: int = 10, model_id: str = "stub-uniform"):
        self.model_id = model_id
        self._backend = UniformBackend([f"t{i}" for i in range(vocab_size)])

    def next_distribution(self, context: Sequence[str]) -> TokenDistribution:
        return self._backend.next_token_distribution(context)

    def sequence_logprob(self, context: Sequence[str], continuation: Sequence[str]) -> float:
        return self._backend.sequence_logprob(context, continuation)

    def infill_logprob(self, view: MaskedView, condition: Sequence[str] | None) -> float:
        return self._backend.infill_logprob(view, condition)


class NgramProvider:
    """Serves a serialized reference backend artifact bit-exactly."""

    stub = False

    def __init__(self, backend: NgramBackend, model_id: str = "ngram-reference"):
        self.model_id = model_id
        self._backend = backend

    @classmethod
    def from_artifact(cls, path, model_id: str | None = None) -> "NgramProvider":
        backend = NgramBackend.load(path)
        return cls(backend, model_id=model_id or f"ngram-o{backend.order}")

    def next_distribution(self, context: Sequence[str]) -> TokenDistribution:
        return self._backend.next_token_distribution(context)

    def sequence_logprob(self, context: Sequence[str], continuation: Sequence[str]) -> float:
        return self._backend.sequence_logprob(context, continuation)

    def infill_logprob(self, view: MaskedView, condition: Sequence[str] | None) -> float:
        return self._backend.infill_logprob(view, condition)


class HFProvider:
    """Real neural scoring via transformers.

    The causal model provides next-token and sequence log-probs over its own
    subword pieces; the MLM (an encoder-decoder with sentinel infilling, T5
    style) scores masked answer spans, with the condition text prepended to
    the masked input when present. Context/continuation word tokens are
    joined with spaces before subword encoding.
    """

    stub = False

    def __init__(self, causal_model, causal_tokenizer, mlm_model=None, mlm_tokenizer=None, model_id: str = "hf"):
        self.model_id = model_id
        self._model = causal_model
        self._tok = causal_tokenizer
        self._mlm = mlm_model
        self._mlm_tok = mlm_tokenizer
        import torch  # deferred; only needed for this provider

        self._torch = torch
        self._model.eval()
        if self._mlm is not None:
            self._mlm.eval()

    @classmethod
    def from_pretrained(cls, causal_path: str, mlm_path: str | None = None, model_id: str | None = None) -> "HFProvider":
        try:
            from transformers import (
                AutoModelForCausalLM,
                AutoModelForSeq2SeqLM,
                AutoTokenizer,
            )
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise RuntimeError("hf mode needs the transformers/torch extra installed") from exc
        causal = AutoModelForCausalLM.from_pretrained(causal_path)
        causal_tok = AutoTokenizer.from_pretrained(causal_path)
        mlm = mlm_tok = None
        if mlm_path:
            mlm = AutoModelForSeq2SeqLM.from_pretrained(mlm_path)
            mlm_tok = AutoTokenizer.from_pretrained(mlm_path)
        return cls(causal, causal_tok, mlm, mlm_tok, model_id=model_id or causal_path)

    def _encode(self, words: Sequence[str]):
        text = " ".join(words)
        ids = self._tok.encode(text) if text else []
        if not ids:
            bos = getattr(self._tok, "bos_token_id", None)
            ids = [bos] if bos is not None else [0]
        return ids

    def next_distribution(self, context: Sequence[str]) -> TokenDistribution:
        torch = self._torch
        ids = self._encode(context)
        with torch.no_grad():
            logits = self._model(torch.tensor([ids])).logits[0, -1]
            logprobs = torch.log_softmax(logits, dim=-1).cpu().numpy()
        tokens = tuple(self._tok.convert_ids_to_tokens(range(len(logprobs))))
        return TokenDistribution(tokens=tokens, logprobs=logprobs)

    def sequence_logprob(self, context: Sequence[str], continuation: Sequence[str]) -> float:
        if not continuation:
            raise ValueError("continuation must be nonempty")
        torch = self._torch
        ctx_ids = self._encode(context)
        full_ids = self._encode(list(context) + list(continuation))
        if full_ids[: len(ctx_ids)] != ctx_ids:  # tokenizer merged across the boundary
            ctx_ids = full_ids[: max(1, len(ctx_ids))]
        with torch.no_grad():
            logits = self._model(torch.tensor([full_ids])).logits[0]
            logprobs = torch.log_softmax(logits, dim=-1)
        total = 0.0
        for pos in range(len(ctx_ids), len(full_ids)):
            total += float(logprobs[pos - 1, full_ids[pos]])
        return total

    def infill_logprob(self, view: MaskedView, condition: Sequence[str] | None) -> float:
        if self._mlm is None:
            raise RuntimeError("no MLM configured; pass mlm_path to enable infilling")
        torch = self._torch
        sentinel = lambda k: f"<extra_id_{k}>"
        pieces: list[str] = []
        span_iter = 0
        i = 0
        visible = view.visible
        while i < len(visible):
            if visible[i] is None:
                pieces.append(sentinel(span_iter))
                span_iter += 1
                while i < len(visible) and visible[i] is None:
                    i += 1
            else:
                pieces.append(visible[i])
                i += 1
        source = " ".join(pieces)
        if condition:
            source = " ".join(condition) + " " + source
        target = ""
        for k, span in enumerate(view.spans):
            target += sentinel(k) + " " + " ".join(span.tokens) + " "
        src_ids = self._mlm_tok.encode(source, return_tensors="pt")
        tgt_ids = self._mlm_tok.encode(target.strip(), return_tensors="pt")
        with torch.no_grad():
            logits = self._mlm(input_ids=src_ids, labels=tgt_ids).logits[0]
            logprobs = torch.log_softmax(logits, dim=-1)
        total = 0.0
        for pos, tok_id in enumerate(tgt_ids[0].tolist()):
            total += float(logprobs[pos, tok_id])
        return total


def truncate_top_k(dist: TokenDistribution, top_k: int | None) -> tuple[list[str], list[float], float]:
    """Descending-probability truncation with an explicit tail mass."""
    order = np.argsort(-dist.logprobs, kind="stable")
    if top_k is not None:
        order = order[:top_k]
    kept = dist.logprobs[order]
    tail = max(0.0, 1.0 - float(np.exp(kept).sum()))
    return [dist.tokens[i] for i in order], [float(x) for x in kept], tail
