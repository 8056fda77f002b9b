"""Small tf-idf featuriser.

Vocabulary is the ``vocab_size`` terms with the highest document frequency
(ties by term), idf is the smoothed ``ln((1 + N) / (1 + df)) + 1`` and every
vector is L2-normalised.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from ..errors import EmptyVocabulary

TOKEN_PATTERN = r"[^\W_]+"


@lru_cache(maxsize=1)
def english_stopwords() -> frozenset:
    text = resources.files("dataext.dataio").joinpath("english_stopwords.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


@dataclass(frozen=True)
class TfidfSpec:
    vocab_size: int = 1000
    stopwords: frozenset = field(default_factory=english_stopwords)
    lowercase: bool = True
    token_pattern: str = TOKEN_PATTERN

    def __post_init__(self):
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be at least 1")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))

    def tokens(self, text: str) -> list[str]:
        if self.lowercase:
            text = text.lower()
        return [t for t in re.findall(self.token_pattern, text) if t not in self.stopwords]


@dataclass(frozen=True, eq=False)
class TfidfVectorizer:
    vocabulary: tuple
    idf: np.ndarray
    spec: TfidfSpec

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.vocabulary)})

    @property
    def dim(self) -> int:
        return len(self.vocabulary)

    def apply(self, text: str) -> np.ndarray:
        v = np.zeros(self.dim)
        for t, c in Counter(self.spec.tokens(text)).items():
            j = self._index.get(t)
            if j is not None:
                v[j] = c * self.idf[j]
        norm = np.linalg.norm(v)
        return v / norm if norm > 0 else v

    def transform(self, texts) -> np.ndarray:
        return np.array([self.apply(t) for t in texts]).reshape(-1, self.dim)

    def to_dict(self) -> dict:
        return {"vocabulary": list(self.vocabulary), "idf": [float(v) for v in self.idf]}


def fit_tfidf(corpus, spec: TfidfSpec = None) -> TfidfVectorizer:
    spec = spec or TfidfSpec()
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus must be non-empty")
    df = Counter()
    for doc in corpus:
        df.update(set(spec.tokens(doc)))
    if not df:
        raise EmptyVocabulary("no tokens left after stopword removal")
    top = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[: spec.vocab_size]
    vocab = tuple(sorted(t for t, _ in top))
    n = len(corpus)
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in vocab])
    return TfidfVectorizer(vocab, idf, spec)


def apply_tfidf(vectorizer: TfidfVectorizer, text: str) -> np.ndarray:
    return vectorizer.apply(text)
