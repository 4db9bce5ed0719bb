"""Deterministic text primitives: tokenization, sentence splitting, TF-IDF,
shallow POS counts, n-gram overlap, and corpus diversity metrics.

Everything here is a pure function over immutable inputs; token counts
produced by :func:`tokenize` are the unit used by every other module.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable, Sequence

__all__ = [
    "TokenSeq",
    "CorpusStats",
    "PosCounts",
    "tokenize",
    "detokenize",
    "split_sentences",
    "sentence_texts",
    "tfidf_rank",
    "pos_counts",
    "ngram_precision",
    "ngram_entropy",
    "msttr",
    "is_content_token",
    "content_positions",
    "stopwords",
    "abbreviations",
]

# Word runs, apostrophe suffixes attached to a preceding word ("farrell's"
# -> "farrell", "'s"), every other non-space character on its own.
_TOKEN_RE = re.compile(r"(?<=\w)'\w+|\w+|[^\w\s]")

_NUMERAL_RE = re.compile(r"^\d+(?:[.,]\d+)*$")

_WORDCHAR_RE = re.compile(r"\w")

_TERMINALS = frozenset(".!?")
_CLOSERS = frozenset("\"')]”’")

# Suffix rules back up the closed lexicons; order matters (first match wins).
_VERB_SUFFIXES = ("ing", "ed")
_NOUN_SUFFIXES = ("tion", "sion", "ment", "ness", "ity", "ship", "ence", "ance", "ism", "ogy")


def _load_wordlist(name: str) -> frozenset[str]:
    raw = resources.files("infodistill.data").joinpath(name).read_text(encoding="utf-8")
    entries = set()
    for line in raw.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line.lower())
    return frozenset(entries)


_CACHE: dict[str, frozenset[str]] = {}


def _wordlist(name: str) -> frozenset[str]:
    if name not in _CACHE:
        _CACHE[name] = _load_wordlist(name)
    return _CACHE[name]


def stopwords() -> frozenset[str]:
    """Bundled stop-list used for content-token selection."""
    return _wordlist("stopwords.txt")


def abbreviations() -> frozenset[str]:
    """Bundled abbreviation stop-list used by the sentence splitter."""
    return _wordlist("abbreviations.txt")


@dataclass(frozen=True)
class TokenSeq:
    """Lowercased surface tokens plus their character offsets in the source."""

    tokens: tuple[str, ...]
    offsets: tuple[tuple[int, int], ...] = ()

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "TokenSeq":
        toks = tuple(tokens)
        return cls(tokens=toks, offsets=tuple((0, 0) for _ in toks))


def tokenize(text: str) -> TokenSeq:
    """Split on whitespace, detach punctuation, lowercase.

    Offsets index into the original text, so slicing the source with them
    recovers the original (cased) surface of each token.
    """
    tokens: list[str] = []
    offsets: list[tuple[int, int]] = []
    for m in _TOKEN_RE.finditer(text):
        tokens.append(m.group(0).lower())
        offsets.append((m.start(), m.end()))
    return TokenSeq(tokens=tuple(tokens), offsets=tuple(offsets))


_NO_SPACE_BEFORE = frozenset(".,!?;:)]}%")
_NO_SPACE_AFTER = frozenset("([{$")


def detokenize(tokens: Sequence[str]) -> str:
    """Render tokens back to display text.

    Inverse of :func:`tokenize` up to whitespace: punctuation re-attaches,
    apostrophe suffixes join their host word, and the first word of each
    sentence is capitalized so the sentence splitter can find boundaries.
    """
    out: list[str] = []
    capitalize_next = True
    for tok in tokens:
        if out and (tok[0] == "'" or tok in _NO_SPACE_BEFORE or out[-1] and out[-1][-1] in _NO_SPACE_AFTER):
            out[-1] = out[-1] + tok
        else:
            out.append(tok)
        if capitalize_next and _WORDCHAR_RE.search(tok):
            piece = out[-1]
            idx = len(piece) - len(tok)
            out[-1] = piece[:idx] + piece[idx:].capitalize()
            capitalize_next = False
        if tok in _TERMINALS:
            capitalize_next = True
    return " ".join(out)


def split_sentences(text: str, abbrev: frozenset[str] | None = None) -> list[tuple[int, int]]:
    """Rule-based sentence spans covering the text without overlap.

    A boundary is a terminal (. ! ?), optionally followed by closing quotes,
    then whitespace and an uppercase letter or digit. A period does not end
    a sentence when the preceding word is on the abbreviation stop-list.
    """
    if not text.strip():
        return []
    if abbrev is None:
        abbrev = abbreviations()

    spans: list[tuple[int, int]] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in _TERMINALS:
            j = i + 1
            while j < n and text[j] in _CLOSERS:
                j += 1
            k = j
            while k < n and text[k].isspace():
                k += 1
            if k > j and k < n and (text[k].isupper() or text[k].isdigit()):
                if not (ch == "." and _word_before(text, i).lower() in abbrev):
                    spans.append((start, k))
                    start = k
                    i = k
                    continue
        i += 1
    spans.append((start, n))
    return spans


def _word_before(text: str, dot: int) -> str:
    j = dot
    while j > 0 and (text[j - 1].isalnum() or text[j - 1] == "."):
        j -= 1
    return text[j:dot].rstrip(".")


def sentence_texts(text: str, abbrev: frozenset[str] | None = None) -> list[str]:
    """Sentence substrings, stripped of surrounding whitespace."""
    return [text[a:b].strip() for a, b in split_sentences(text, abbrev)]


@dataclass
class CorpusStats:
    """Document frequencies and pooled n-gram tables for a background corpus."""

    doc_freq: dict[str, int] = field(default_factory=dict)
    total_docs: int = 0
    ngram_freq: dict[int, Counter] = field(default_factory=dict)

    @classmethod
    def from_corpus(cls, docs: Iterable[TokenSeq], ngram_orders: Sequence[int] = (2, 3)) -> "CorpusStats":
        doc_freq: dict[str, int] = {}
        ngram_freq: dict[int, Counter] = {n: Counter() for n in ngram_orders}
        total = 0
        for doc in docs:
            total += 1
            for tok in set(doc.tokens):
                doc_freq[tok] = doc_freq.get(tok, 0) + 1
            for n in ngram_orders:
                ngram_freq[n].update(_ngrams(doc.tokens, n))
        return cls(doc_freq=doc_freq, total_docs=total, ngram_freq=ngram_freq)

    def idf(self, token: str) -> float:
        return math.log((1 + self.total_docs) / (1 + self.doc_freq.get(token, 0)))


def tfidf_rank(doc: TokenSeq, stats: CorpusStats) -> list[tuple[str, float]]:
    """Distinct tokens of `doc` ordered by descending TF-IDF.

    score(t) = tf(t) * log((1 + N) / (1 + df(t))); ties break by first
    occurrence position, so the order is stable and deterministic.
    """
    if stats.total_docs < 1:
        raise ValueError("corpus stats must cover at least one document")
    tf = Counter(doc.tokens)
    first: dict[str, int] = {}
    for i, tok in enumerate(doc.tokens):
        if tok not in first:
            first[tok] = i
    scored = [(tok, tf[tok] * stats.idf(tok)) for tok in first]
    scored.sort(key=lambda ts: (-ts[1], first[ts[0]]))
    return scored


@dataclass(frozen=True)
class PosCounts:
    """Shallow POS tallies: verbs, nouns, numerals, tokens, sentences."""

    vb: int
    nn: int
    cd: int
    tok: int
    sent: int


def classify_token(token: str) -> str | None:
    """Reference tagger: numeral regex, closed lexicons, then suffix rules."""
    if _NUMERAL_RE.match(token):
        return "cd"
    if not _WORDCHAR_RE.search(token):
        return None
    if token in _wordlist("pos_verbs.txt"):
        return "vb"
    if token in _wordlist("pos_nouns.txt"):
        return "nn"
    for suf in _VERB_SUFFIXES:
        if len(token) > len(suf) + 1 and token.endswith(suf):
            return "vb"
    for suf in _NOUN_SUFFIXES:
        if len(token) > len(suf) + 1 and token.endswith(suf):
            return "nn"
    return None


def pos_counts(
    tokens: TokenSeq | Sequence[str],
    sentence_count: int | None = None,
    classify: Callable[[str], str | None] = classify_token,
) -> PosCounts:
    """Count verbs, nouns and numerals with the (pluggable) tagger.

    `sentence_count` is recorded as given; when omitted it defaults to 1 for
    nonempty input because a bare token sequence carries no sentence bounds.
    """
    toks = tuple(tokens)
    tally = {"vb": 0, "nn": 0, "cd": 0}
    for tok in toks:
        cls = classify(tok)
        if cls in tally:
            tally[cls] += 1
    if sentence_count is None:
        sentence_count = 1 if toks else 0
    return PosCounts(vb=tally["vb"], nn=tally["nn"], cd=tally["cd"], tok=len(toks), sent=sentence_count)


def _ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    if len(tokens) < n:
        return []
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def ngram_precision(candidate: TokenSeq | Sequence[str], reference: TokenSeq | Sequence[str], n: int) -> float:
    """Clipped n-gram precision of candidate against reference, in [0, 1]."""
    if n < 1:
        raise ValueError("n-gram order must be >= 1")
    cand = _ngrams(tuple(candidate), n)
    if not cand:
        return 0.0
    ref_counts = Counter(_ngrams(tuple(reference), n))
    cand_counts = Counter(cand)
    matched = sum(min(c, ref_counts.get(g, 0)) for g, c in cand_counts.items())
    return matched / len(cand)


def ngram_entropy(corpus: Iterable[TokenSeq | Sequence[str]], n: int) -> float:
    """Shannon entropy (bits) of the n-gram distribution pooled over the corpus."""
    pool: Counter = Counter()
    for doc in corpus:
        pool.update(_ngrams(tuple(doc), n))
    total = sum(pool.values())
    if total == 0:
        raise ValueError("no n-grams in corpus; entropy undefined")
    entropy = 0.0
    for count in pool.values():
        p = count / total
        entropy -= p * math.log2(p)
    return entropy


def msttr(corpus: Iterable[TokenSeq | Sequence[str]], window: int = 100) -> float:
    """Mean segmented token type ratio over fixed windows, as a percentage.

    Tokens pool in corpus order; the trailing partial window is dropped.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    pooled: list[str] = []
    for doc in corpus:
        pooled.extend(tuple(doc))
    if len(pooled) < window:
        raise ValueError(f"need at least {window} tokens, got {len(pooled)}")
    ratios = []
    for start in range(0, len(pooled) - window + 1, window):
        seg = pooled[start : start + window]
        ratios.append(len(set(seg)) / window)
    return 100.0 * sum(ratios) / len(ratios)


def is_content_token(token: str, stop: frozenset[str] | None = None) -> bool:
    """True for tokens that carry content: not punctuation, not a stopword."""
    if stop is None:
        stop = stopwords()
    return bool(_WORDCHAR_RE.search(token)) and token not in stop


def content_positions(tokens: Sequence[str], stop: frozenset[str] | None = None) -> list[int]:
    """Indices of content tokens, in order."""
    if stop is None:
        stop = stopwords()
    return [i for i, tok in enumerate(tokens) if is_content_token(tok, stop)]
