"""Control-attribute annotation: length, extractiveness, specificity and
keywords, plus control-code rendering, style buckets and control correlation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import text as T

LENGTH_LEVELS = ("short", "medium", "long")
EXT_LEVELS = ("low", "medium", "high")
SPEC_LEVELS = ("medium", "high")

PLAIN_INSTRUCTION = "Generate a summary."


@dataclass(frozen=True)
class ControlThresholds:
    """Bucket boundaries; defaults come from the shipped annotation table."""

    len_tau1: float = 38.0
    len_tau2: float = 69.0
    ext_tau1: float = 0.34
    ext_tau2: float = 0.51
    spe_tau2: float = 4.8

    def __post_init__(self):
        if self.len_tau1 >= self.len_tau2:
            raise ValueError("length thresholds must satisfy tau1 < tau2")
        if self.ext_tau1 >= self.ext_tau2:
            raise ValueError("extractiveness thresholds must satisfy tau1 < tau2")


@dataclass(frozen=True)
class ControlAttributes:
    """Annotated buckets plus the raw metric values they were derived from."""

    length: str
    extractiveness: str
    specificity: str
    keywords: tuple[str, ...]
    m_len: float
    m_ext: float
    m_spe: float

    def __post_init__(self):
        if self.length not in LENGTH_LEVELS:
            raise ValueError(f"bad length bucket {self.length!r}")
        if self.extractiveness not in EXT_LEVELS:
            raise ValueError(f"bad extractiveness bucket {self.extractiveness!r}")
        if self.specificity not in SPEC_LEVELS:
            raise ValueError(f"bad specificity bucket {self.specificity!r}")
        if not 1 <= len(self.keywords) <= 2:
            raise ValueError("keywords must hold 1 or 2 entries")

    def to_dict(self) -> dict:
        return {
            "len_bucket": self.length,
            "ext_bucket": self.extractiveness,
            "spec_bucket": self.specificity,
            "keywords": list(self.keywords),
            "m_len": self.m_len,
            "m_ext": self.m_ext,
            "m_spe": self.m_spe,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ControlAttributes":
        return cls(
            length=d["len_bucket"],
            extractiveness=d["ext_bucket"],
            specificity=d["spec_bucket"],
            keywords=tuple(d["keywords"]),
            m_len=d["m_len"],
            m_ext=d["m_ext"],
            m_spe=d["m_spe"],
        )


def m_len(summary: str | Sequence[str]) -> int:
    """Token count of the summary."""
    tokens = T.tokenize(summary).tokens if isinstance(summary, str) else tuple(summary)
    return len(tokens)


def m_ext(summary: str | Sequence[str], document: str | Sequence[str]) -> float:
    """Mean of clipped 2-gram and 3-gram precision against the document."""
    y = T.tokenize(summary).tokens if isinstance(summary, str) else tuple(summary)
    x = T.tokenize(document).tokens if isinstance(document, str) else tuple(document)
    if not x:
        raise ValueError("document must be nonempty")
    return (T.ngram_precision(y, x, 2) + T.ngram_precision(y, x, 3)) / 2


def m_spe(summary: str) -> float:
    """Weighted POS density per sentence:
    (0.1*vb + 0.2*tok + 0.3*nn + 0.4*cd) / sentences.
    """
    sentences = len(T.split_sentences(summary))
    if sentences == 0:
        raise ValueError("summary has no sentences")
    counts = T.pos_counts(T.tokenize(summary), sentence_count=sentences)
    weighted = 0.1 * counts.vb + 0.2 * counts.tok + 0.3 * counts.nn + 0.4 * counts.cd
    return weighted / counts.sent


def extract_keywords(summary: str | Sequence[str], stats: T.CorpusStats, k: int = 2) -> tuple[str, ...]:
    """Top-k content tokens by TF-IDF, ties by first occurrence."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    tokens = T.tokenize(summary).tokens if isinstance(summary, str) else tuple(summary)
    stop = T.stopwords()
    content = [tok for tok in tokens if T.is_content_token(tok, stop)]
    if not content:
        raise ValueError("summary has no content tokens")
    ranked = T.tfidf_rank(T.TokenSeq.from_tokens(tokens), stats)
    keywords = [tok for tok, _ in ranked if T.is_content_token(tok, stop)]
    return tuple(keywords[:k])


def bucketize(
    m_len_value: float,
    m_ext_value: float,
    m_spe_value: float,
    thresholds: ControlThresholds | None = None,
) -> tuple[str, str, str]:
    """Map raw metric values to (length, extractiveness, specificity) buckets.

    value < tau1 -> low/short; tau1 <= value < tau2 -> medium; value >= tau2
    -> high/long. Specificity only distinguishes medium (< tau2) from high.
    """
    th = thresholds or ControlThresholds()
    if m_len_value < th.len_tau1:
        length = "short"
    elif m_len_value < th.len_tau2:
        length = "medium"
    else:
        length = "long"
    if m_ext_value < th.ext_tau1:
        ext = "low"
    elif m_ext_value < th.ext_tau2:
        ext = "medium"
    else:
        ext = "high"
    spe = "medium" if m_spe_value < th.spe_tau2 else "high"
    return length, ext, spe


def annotate(
    summary: str,
    document: str,
    stats: T.CorpusStats,
    thresholds: ControlThresholds | None = None,
    keyword_count: int = 2,
) -> ControlAttributes:
    """Full annotation of one summary against its document."""
    len_val = float(m_len(summary))
    ext_val = m_ext(summary, document)
    spe_val = m_spe(summary)
    length, ext, spe = bucketize(len_val, ext_val, spe_val, thresholds)
    keywords = extract_keywords(summary, stats, k=keyword_count)
    return ControlAttributes(
        length=length,
        extractiveness=ext,
        specificity=spe,
        keywords=keywords,
        m_len=len_val,
        m_ext=ext_val,
        m_spe=spe_val,
    )


def render_control_code(
    length: str | None = None,
    extractiveness: str | None = None,
    specificity: str | None = None,
    keywords: Sequence[str] | None = None,
) -> str:
    """Instruction string for a (possibly partial) set of control attributes.

    Full form: "Generate a long summary with low extractiveness and high
    specificity, focusing on given keywords: budget." Attribute subsets render
    only their clauses; no attributes yields the plain instruction.
    """
    if length is None and extractiveness is None and specificity is None and not keywords:
        return PLAIN_INSTRUCTION
    head = f"Generate a {length} summary" if length else "Generate a summary"
    qualifiers = []
    if extractiveness:
        qualifiers.append(f"{extractiveness} extractiveness")
    if specificity:
        qualifiers.append(f"{specificity} specificity")
    if qualifiers:
        head += " with " + " and ".join(qualifiers)
    if keywords:
        head += ", focusing on given keywords: " + ", ".join(keywords)
    return head + "."


def render_control_code_for(attrs: ControlAttributes) -> str:
    return render_control_code(
        length=attrs.length,
        extractiveness=attrs.extractiveness,
        specificity=attrs.specificity,
        keywords=attrs.keywords,
    )


_LEVELS = {
    "length": LENGTH_LEVELS,
    "extractiveness": EXT_LEVELS,
    "specificity": SPEC_LEVELS,
}


def bucket_distance(attribute: str, v1: str, v2: str) -> int:
    """Signed level difference from v1 to v2, e.g. short->medium = 1."""
    levels = _LEVELS[attribute]
    if v1 not in levels or v2 not in levels:
        raise ValueError(f"unknown {attribute} values {v1!r}, {v2!r}")
    return levels.index(v2) - levels.index(v1)


def control_correlation(
    pairs: Iterable[tuple[str, str, float, float]],
    attribute: str,
) -> float:
    """Mean CC over (v1, v2, metric(y1), metric(y2)) observations.

    CC for one pair is (m(y2) - m(y1)) / d(v1 -> v2), positive when the
    metric moves the same way as the requested control change.
    """
    total = 0.0
    count = 0
    for v1, v2, m1, m2 in pairs:
        d = bucket_distance(attribute, v1, v2)
        if d == 0:
            raise ValueError(f"control values must differ, got {v1!r} -> {v2!r}")
        total += (m2 - m1) / d
        count += 1
    if count == 0:
        raise ValueError("no control pairs given")
    return total / count


_METRICS = {
    "length": lambda summary, document: float(m_len(summary)),
    "extractiveness": lambda summary, document: m_ext(summary, document),
    "specificity": lambda summary, document: m_spe(summary),
}


def evaluate_cc_records(records: Iterable[dict], attribute: str) -> float:
    """Mean CC over JSON records of
    {document, control, summary_a, control_b, summary_b} for one attribute.
    """
    if attribute not in _METRICS:
        raise ValueError(f"unknown attribute {attribute!r}")
    metric = _METRICS[attribute]
    observations = []
    for rec in records:
        v1, v2 = rec["control"], rec["control_b"]
        d = bucket_distance(attribute, v1, v2)
        if d == 0:
            raise ValueError(f"control values must differ, got {v1!r} -> {v2!r}")
        m1 = metric(rec["summary_a"], rec["document"])
        m2 = metric(rec["summary_b"], rec["document"])
        observations.append((m2 - m1) / d)
    if not observations:
        raise ValueError("no control pairs given")
    return sum(observations) / len(observations)


def evaluate_cc_file(path, attribute: str) -> float:
    with open(path, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    return evaluate_cc_records(records, attribute)


def style_bucket(attrs: ControlAttributes) -> int:
    """Index in the lexicographic product length x extractiveness x specificity."""
    return style_bucket_id(attrs.length, attrs.extractiveness, attrs.specificity)


def style_bucket_id(length: str, extractiveness: str, specificity: str) -> int:
    li = LENGTH_LEVELS.index(length)
    ei = EXT_LEVELS.index(extractiveness)
    si = SPEC_LEVELS.index(specificity)
    return li * len(EXT_LEVELS) * len(SPEC_LEVELS) + ei * len(SPEC_LEVELS) + si


STYLE_BUCKET_COUNT = len(LENGTH_LEVELS) * len(EXT_LEVELS) * len(SPEC_LEVELS)
