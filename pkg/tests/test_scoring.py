import json
import math

import numpy as np
import pytest

from infodistill.critics import MaskedView, MaskSpan
from infodistill.scoring import (
    BOS,
    EOS,
    SEP,
    UNK,
    NgramBackend,
    TokenDistribution,
    UniformBackend,
    train_ngram,
)


def view_of(tokens, masked_positions, fraction=0.25):
    toks = tuple(tokens)
    visible = [None if i in masked_positions else t for i, t in enumerate(toks)]
    spans = []
    run = []
    for i in sorted(masked_positions):
        if run and i == run[-1] + 1:
            run.append(i)
        else:
            if run:
                spans.append(MaskSpan(run[0], tuple(toks[j] for j in run)))
            run = [i]
    if run:
        spans.append(MaskSpan(run[0], tuple(toks[j] for j in run)))
    return MaskedView(visible=tuple(visible), spans=tuple(spans), mask_fraction=fraction)


# -- training ------------------------------------------------------------------

def test_train_empty_corpus_errors():
    with pytest.raises(ValueError):
        train_ngram([], order=2)


def test_train_hand_counted_bigram():
    backend = train_ngram([["a", "b", "a", "b"]], order=2, smoothing=0.1)
    # vocabulary: 4 reserved symbols + {a, b}
    assert backend.vocab_size == 6
    # count(a -> b) = 2, total after 'a' = 2
    p = math.exp(backend.token_logprob(["a"], "b"))
    assert p == pytest.approx((2 + 0.1) / (2 + 0.1 * 6), abs=1e-12)


def test_unseen_context_is_uniform():
    backend = train_ngram([["a", "b"]], order=2, smoothing=0.1)
    dist = backend.next_token_distribution(["zzz"])  # unk context, untrained
    probs = np.exp(dist.logprobs)
    assert np.allclose(probs, 1.0 / backend.vocab_size, atol=1e-12)


def test_doubled_counts_converge_to_same_distribution():
    doc = ["a", "b", "a", "c"]
    once = train_ngram([doc], order=2, smoothing=1e-6)
    twice = train_ngram([doc, doc], order=2, smoothing=1e-6)
    d1 = np.exp(once.next_token_distribution(["a"]).logprobs)
    d2 = np.exp(twice.next_token_distribution(["a"]).logprobs)
    assert np.abs(d1 - d2).max() < 1e-4


def test_training_order_insensitive():
    docs = [["a", "b"], ["b", "c"], ["c", "a"]]
    fwd = train_ngram(docs, order=2)
    rev = train_ngram(list(reversed(docs)), order=2)
    assert fwd.to_dict() == rev.to_dict()


# -- distributions ---------------------------------------------------------------

def test_distributions_normalize_and_are_negative():
    backend = train_ngram([["a", "b", "a"], ["b", "c", "d"]], order=3)
    for ctx in ((), ("a",), ("a", "b"), ("zzz", "qqq")):
        dist = backend.next_token_distribution(ctx)
        dist.validate(tol=1e-6)
        assert np.all(dist.logprobs < 0)
    backend.unconditional_logprobs().validate(tol=1e-6)


def test_chain_rule_bit_identical():
    backend = train_ngram([["a", "b", "a", "c", "b"]], order=2)
    ctx, cont = ["a"], ["b", "a", "c"]
    total = 0.0
    running = list(ctx)
    for tok in cont:
        total += backend.token_logprob(running, tok)
        running.append(tok)
    assert backend.sequence_logprob(ctx, cont) == total


def test_sequence_logprob_matches_distribution_lookups():
    backend = train_ngram([["a", "b", "a", "c", "b"]], order=2)
    ctx, cont = ["a"], ["b", "a", "c"]
    total = 0.0
    running = list(ctx)
    for tok in cont:
        dist = backend.next_token_distribution(running)
        total += dist.logprob_of(tok)
        running.append(tok)
    assert backend.sequence_logprob(ctx, cont) == pytest.approx(total, abs=1e-9)


def test_sequence_logprob_empty_continuation_errors():
    backend = train_ngram([["a", "b"]], order=2)
    with pytest.raises(ValueError):
        backend.sequence_logprob(["a"], [])


def test_out_of_vocabulary_maps_to_unk():
    backend = train_ngram([["a", "b"]], order=2)
    assert backend.token_logprob(["a"], "zzz") == backend.token_logprob(["a"], UNK)
    # never an error
    assert math.isfinite(backend.sequence_logprob([], ["zzz", "qqq"]))


def test_training_monotonicity_vs_uniform():
    docs = [["the", "volcano", "erupted", "."], ["the", "ash", "cloud", "rose", "."]]
    trained = train_ngram(docs, order=2)
    untrained = NgramBackend(order=2, k=0.1, vocab=[t for d in docs for t in d])
    for doc in docs:
        assert trained.sequence_logprob([], doc) >= untrained.sequence_logprob([], doc)


# -- infill ----------------------------------------------------------------------

def test_uniform_infill_single_mask():
    stub = UniformBackend([f"t{i}" for i in range(10)])
    view = view_of(["t1", "t2", "t3"], {1})
    assert stub.infill_logprob(view) == pytest.approx(-math.log(10))


def test_uniform_infill_condition_blind():
    stub = UniformBackend(["a", "b", "c"])
    view = view_of(["a", "b", "a"], {1})
    assert stub.infill_logprob(view, ["a"]) == stub.infill_logprob(view, None)


def test_infill_no_spans_errors():
    stub = UniformBackend(["a"])
    view = view_of(["a", "b"], set())
    with pytest.raises(ValueError):
        stub.infill_logprob(view)


def test_infill_bidirectional_mean_hand_computed():
    backend = train_ngram([["a", "b", "a"]], order=2, smoothing=0.1)
    view = view_of(["a", "b", "a"], {1})
    v = backend.vocab_size  # 6
    p_fwd = (1 + 0.1) / (2 + 0.1 * v)  # count(a->b)=1, total(a)=2
    p_rev = (1 + 0.1) / (2 + 0.1 * v)  # reversed text is identical
    lam = backend.condition_weight
    expected = math.log((1 - lam) * 0.5 * (p_fwd + p_rev) + lam / v)
    assert backend.infill_logprob(view) == pytest.approx(expected, abs=1e-12)


def test_infill_condition_uses_auxiliary_channel():
    backend = train_ngram([["a", "b", "a"]], order=2, smoothing=0.1)
    view = view_of(["a", "b", "a"], {1})
    v = backend.vocab_size
    p_bi = (1 + 0.1) / (2 + 0.1 * v)
    p_cache = (1 + 0.1) / (1 + 0.1 * v)  # condition ["b"]: count 1 of 1
    lam = backend.condition_weight
    expected = math.log((1 - lam) * p_bi + lam * p_cache)
    assert backend.infill_logprob(view, ["b"]) == pytest.approx(expected, abs=1e-12)
    # the condition mentions the masked token, so it must beat the plain score
    assert backend.infill_logprob(view, ["b"]) > backend.infill_logprob(view)


def test_infill_none_equals_empty_condition():
    backend = train_ngram([["a", "b", "a"]], order=2)
    view = view_of(["a", "b", "a"], {1})
    assert backend.infill_logprob(view, None) == backend.infill_logprob(view, [])


def test_infill_condition_on_relevant_text_raises_likelihood():
    docs = [
        ["the", "volcano", "erupted", "near", "the", "city", "."],
        ["officials", "said", "the", "flood", "damaged", "roads", "."],
    ]
    backend = train_ngram(docs, order=3)
    tokens = docs[0]
    view = view_of(tokens, {1, 5})  # mask "volcano" and "city"
    with_cond = backend.infill_logprob(view, tokens)  # condition repeats the doc
    without = backend.infill_logprob(view, None)
    assert with_cond > without


def test_infill_logprob_nonpositive():
    backend = train_ngram([["a", "b", "a"]], order=2)
    view = view_of(["a", "b", "a"], {0, 2})
    assert backend.infill_logprob(view) <= 0
    assert backend.infill_logprob(view, ["b"]) <= 0


# -- serialization -----------------------------------------------------------------

def test_roundtrip_bit_exact(tmp_path):
    backend = train_ngram(
        [["the", "volcano", "erupted", "."], ["ash", "fell", "on", "the", "city", "."]],
        order=3,
        smoothing=0.1,
    )
    path = tmp_path / "backend.json"
    backend.save(path)
    loaded = NgramBackend.load(path)
    assert loaded.to_dict() == backend.to_dict()
    ctx, cont = ["the"], ["volcano", "erupted"]
    assert loaded.sequence_logprob(ctx, cont) == backend.sequence_logprob(ctx, cont)
    # saving again produces identical bytes
    path2 = tmp_path / "backend2.json"
    loaded.save(path2)
    assert path.read_bytes() == path2.read_bytes()


def test_load_rejects_wrong_format(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"format": "something-else", "version": 1}))
    with pytest.raises(ValueError):
        NgramBackend.load(path)


def test_vocab_has_reserved_symbols_first():
    backend = train_ngram([["b", "a"]], order=2)
    assert backend.vocab[:4] == (BOS, EOS, UNK, SEP)
    assert set(backend.vocab[4:]) == {"a", "b"}


# -- fit_increment ------------------------------------------------------------------

def test_fit_increment_leaves_original_untouched():
    backend = train_ngram([["a", "b"]], order=2)
    before = backend.to_dict()
    grown = backend.fit_increment([["a", "b"], ["b", "a"]])
    assert backend.to_dict() == before
    assert grown.to_dict() != before
    p_old = backend.token_logprob(["b"], "a")
    p_new = grown.token_logprob(["b"], "a")
    assert p_new > p_old
