import math

import pytest

from infodistill import text as T
from infodistill.critics import (
    CriticConfig,
    CriticVerdict,
    MaskedView,
    MaskSpan,
    apply_critics,
    faithfulness_pmi,
    mask_by_tfidf,
    saliency_pmi,
)
from infodistill.scoring import UniformBackend, train_ngram


class FixedPmi:
    """Infill stub scripted per direction: recognizes which side is masked."""

    def __init__(self, x_tokens, s_with, s_without, f_with, f_without):
        self.x_tokens = tuple(x_tokens)
        self.values = {
            (True, True): s_with,
            (True, False): s_without,
            (False, True): f_with,
            (False, False): f_without,
        }

    def infill_logprob(self, view, condition=None):
        is_doc = view.restore() == self.x_tokens
        return self.values[(is_doc, condition is not None)]


class DoublingScorer:
    """Conditioning doubles every masked-token probability."""

    def __init__(self, base=-2.0):
        self.base = base

    def infill_logprob(self, view, condition=None):
        per_token = self.base + (math.log(2.0) if condition is not None else 0.0)
        return per_token * view.masked_count


def make_stats(docs):
    return T.CorpusStats.from_corpus([T.tokenize(d) for d in docs])


CORPUS = [
    "The volcano erupted near the city on Monday.",
    "Officials said the flood damaged several bridges.",
    "The museum opened a new exhibit about rivers.",
    "Rescue crews searched the village after the storm.",
]


@pytest.fixture(scope="module")
def stats():
    return make_stats(CORPUS)


@pytest.fixture(scope="module")
def backend():
    return train_ngram([T.tokenize(d).tokens for d in CORPUS], order=3)


# -- masking -------------------------------------------------------------------

def test_mask_single_clear_winner(stats):
    # four content tokens, fraction 0.25 -> exactly one masked: the rarest
    tokens = T.tokenize("volcano city museum sparkle").tokens
    view = mask_by_tfidf(tokens, stats, fraction=0.25)
    assert view.masked_count == 1
    assert view.spans[0].tokens == ("sparkle",)  # df 0: top TF-IDF


def test_mask_all_punctuation_errors(stats):
    with pytest.raises(ValueError):
        mask_by_tfidf(T.tokenize("... !! ,").tokens, stats, fraction=0.5)


def test_mask_twelve_token_fixture(stats):
    # 12 content tokens; ceil(0.25 * 12) = 3 masked: the three df-0 tokens
    text = "volcano city museum sparkle flood storm glimmer village bridges whisper crews officials"
    tokens = T.tokenize(text).tokens
    view = mask_by_tfidf(tokens, stats, fraction=0.25)
    masked = {s.tokens[0] for s in view.spans}
    assert view.masked_count == 3
    assert masked == {"sparkle", "glimmer", "whisper"}


def test_mask_adjacent_positions_merge_into_one_span(stats):
    tokens = T.tokenize("the sparkle glimmer whisper storm came").tokens
    view = mask_by_tfidf(tokens, stats, fraction=0.6)  # 3 of 5 content tokens
    assert view.masked_count == 3
    assert len(view.spans) == 1  # sparkle glimmer whisper are adjacent
    assert view.spans[0].tokens == ("sparkle", "glimmer", "whisper")


def test_mask_deterministic(stats):
    tokens = T.tokenize(CORPUS[0]).tokens
    a = mask_by_tfidf(tokens, stats, fraction=0.3, seed=7)
    b = mask_by_tfidf(tokens, stats, fraction=0.3, seed=7)
    assert a == b


def test_mask_restores_original(stats):
    tokens = T.tokenize(CORPUS[1]).tokens
    view = mask_by_tfidf(tokens, stats, fraction=0.4)
    assert view.restore() == tokens


def test_masked_view_invariants():
    with pytest.raises(ValueError):
        MaskedView(visible=("a", "b"), spans=(MaskSpan(0, ("a",)),), mask_fraction=0.5)
    with pytest.raises(ValueError):
        MaskedView(visible=(None, "b"), spans=(MaskSpan(0, ("a",)),), mask_fraction=1.5)


# -- pmi scores -----------------------------------------------------------------

def test_condition_blind_scorer_gives_zero_pmi(stats):
    stub = UniformBackend(["a", "b", "c"])
    cfg = CriticConfig()
    doc, summ = CORPUS[0], "The volcano erupted."
    assert saliency_pmi(doc, summ, stub, cfg, stats) == 0.0
    assert faithfulness_pmi(doc, summ, stub, cfg, stats) == 0.0


def test_doubling_scorer_gives_m_ln2(stats):
    cfg = CriticConfig(mask_fraction=0.4)
    doc = CORPUS[0]
    x_tokens = T.tokenize(doc).tokens
    view = mask_by_tfidf(x_tokens, stats, cfg.mask_fraction, seed=cfg.seed)
    m = view.masked_count
    got = saliency_pmi(doc, "The volcano erupted.", DoublingScorer(), cfg, stats)
    assert got == pytest.approx(m * math.log(2.0), abs=1e-12)


def test_identity_summary_has_positive_saliency(stats, backend):
    cfg = CriticConfig()
    doc = CORPUS[0]
    assert saliency_pmi(doc, doc, backend, cfg, stats) > 0.0


def test_extractive_summary_has_positive_faithfulness(stats, backend):
    cfg = CriticConfig()
    doc = CORPUS[0]
    summary = "The volcano erupted near the city."  # substring of the document
    assert faithfulness_pmi(doc, summary, backend, cfg, stats) > 0.0


def test_gibberish_summary_has_nonpositive_faithfulness(stats, backend):
    cfg = CriticConfig()
    doc = CORPUS[0]
    summary = "Zorp blik qwerty flumox."
    assert faithfulness_pmi(doc, summary, backend, cfg, stats) <= 0.0


# -- apply_critics -----------------------------------------------------------------

def _pair(x_count, y_count):
    doc = " ".join(f"dword{i}" for i in range(x_count))
    summ = " ".join(f"sword{i}" for i in range(y_count))
    return doc, summ


def test_brevity_arithmetic(stats):
    doc, summ = _pair(100, 10)
    stub = FixedPmi(T.tokenize(doc).tokens, 1.0, 0.0, 1.0, 0.0)
    verdict = apply_critics(doc, summ, CriticConfig(), stub, stats)
    assert verdict.compression == pytest.approx(0.1)
    assert verdict.pass_b is True


def test_saliency_threshold_scales_with_compression(stats):
    doc, summ = _pair(100, 10)
    x_tokens = T.tokenize(doc).tokens
    cfg = CriticConfig()
    # threshold is ln(14) * 0.1 = 0.2639...; 0.30 passes, 0.20 fails
    passing = FixedPmi(x_tokens, 0.30, 0.0, 5.0, 0.0)
    failing = FixedPmi(x_tokens, 0.20, 0.0, 5.0, 0.0)
    assert apply_critics(doc, summ, cfg, passing, stats).pass_s is True
    assert apply_critics(doc, summ, cfg, failing, stats).pass_s is False


def test_faithfulness_threshold_is_strict(stats):
    doc, summ = _pair(100, 10)
    x_tokens = T.tokenize(doc).tokens
    exact = FixedPmi(x_tokens, 5.0, 0.0, math.log(1.7), 0.0)
    verdict = apply_critics(doc, summ, CriticConfig(), exact, stats)
    assert verdict.pass_f is False  # ties reject


def test_conjunction_law(stats):
    doc, summ = _pair(50, 5)
    x_tokens = T.tokenize(doc).tokens
    for s, f in [(5.0, 5.0), (5.0, 0.0), (0.0, 5.0), (0.0, 0.0)]:
        v = apply_critics(doc, summ, CriticConfig(), FixedPmi(x_tokens, s, 0.0, f, 0.0), stats)
        assert v.pass_all == (v.pass_s and v.pass_f and v.pass_b)


def test_zero_pmi_rejected_for_any_positive_threshold(stats):
    stub = UniformBackend(["a"])
    doc, summ = _pair(100, 5)
    verdict = apply_critics(doc, summ, CriticConfig(), stub, stats)
    assert verdict.pmi_saliency == 0.0
    assert verdict.pmi_faithfulness == 0.0
    assert not verdict.pass_s and not verdict.pass_f


def test_threshold_monotonicity(stats):
    doc, summ = _pair(80, 8)
    x_tokens = T.tokenize(doc).tokens
    stub = FixedPmi(x_tokens, 0.5, 0.0, 1.0, 0.0)
    base = CriticConfig()
    accepted = apply_critics(doc, summ, base, stub, stats)
    for cfg in [
        CriticConfig(tau_s_log=base.tau_s_log * 3),
        CriticConfig(tau_f_log=base.tau_f_log * 3),
        CriticConfig(tau_b=base.tau_b / 4),
    ]:
        stricter = apply_critics(doc, summ, cfg, stub, stats)
        if not accepted.pass_all:
            assert not stricter.pass_all


def test_short_circuit_same_decision_pmis_may_be_skipped(stats):
    doc, summ = _pair(10, 9)  # compression 0.9: brevity fails
    x_tokens = T.tokenize(doc).tokens
    stub = FixedPmi(x_tokens, 5.0, 0.0, 5.0, 0.0)
    full = apply_critics(doc, summ, CriticConfig(), stub, stats)
    fast = apply_critics(doc, summ, CriticConfig(), stub, stats, short_circuit=True)
    assert full.pass_all == fast.pass_all is False
    assert fast.pmi_saliency is None and fast.pmi_faithfulness is None
    assert full.pmi_saliency == 5.0


def test_empty_document_errors(stats):
    with pytest.raises(ValueError):
        apply_critics("", "a summary.", CriticConfig(), UniformBackend(["a"]), stats)


def test_verdict_roundtrip(stats):
    doc, summ = _pair(100, 10)
    stub = FixedPmi(T.tokenize(doc).tokens, 1.0, 0.0, 1.0, 0.0)
    v = apply_critics(doc, summ, CriticConfig(), stub, stats)
    assert CriticVerdict.from_dict(v.to_dict()) == v


def test_critic_config_validation():
    with pytest.raises(ValueError):
        CriticConfig(tau_b=0.0)
    with pytest.raises(ValueError):
        CriticConfig(mask_fraction=1.0)
    with pytest.raises(ValueError):
        CriticConfig(mask_policy="nonsense")


def test_random_mask_policy_deterministic(stats):
    tokens = T.tokenize(CORPUS[0]).tokens
    a = mask_by_tfidf(tokens, stats, fraction=0.3, seed=5, policy="random")
    b = mask_by_tfidf(tokens, stats, fraction=0.3, seed=5, policy="random")
    c = mask_by_tfidf(tokens, stats, fraction=0.3, seed=6, policy="random")
    assert a == b
    assert a.masked_count == c.masked_count
    assert a.restore() == tokens
