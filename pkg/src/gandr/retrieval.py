"""Exemplar store and hybrid input/output retrieval.

An :class:`ExemplarStore` keeps (utterance, parse) pairs and two TF-IDF
indexes over them: one over utterance word tokens, one over the intent and
slot labels of the parse. A query is scored against every exemplar as

    relevance = (1 - alpha) * input_sim + alpha * output_sim

where ``input_sim`` compares the query utterance with exemplar utterances
and ``output_sim`` compares a preliminary parse of the query with exemplar
parses. ``alpha`` is the mixing weight: 0 ranks purely by input text, 1
purely by parse structure.

Candidates are ordered by descending relevance with ties broken by
ascending exemplar id. ``retrieve_topk`` takes the head of that ordering;
``retrieve_sampled`` draws from it with geometrically decaying rank
probabilities (used to diversify training data, not at inference).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Collection, Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import (
    ConfigError,
    DuplicateId,
    EmptyCorpus,
    RecordNotFound,
    StoreTooSmall,
)
from .tfidf import SparseVector, TfidfConfig, TfidfVectorizer, tokenize_text
from .top_parse import parse_top, structure_tokens


@dataclass(frozen=True)
class Exemplar:
    """One training pair: an utterance and its bracketed parse."""

    exemplar_id: int
    utterance: str
    parse: str
    domain: str | None = None


@dataclass(frozen=True)
class ScoredExemplar:
    """A retrieval hit: similarities, their mix, and 0-based rank."""

    exemplar_id: int
    relevance: float
    input_sim: float
    output_sim: float
    rank: int


def validate_alpha(alpha: float) -> float:
    if not isinstance(alpha, (int, float)) or isinstance(alpha, bool):
        raise ConfigError(f"alpha must be a number, got {alpha!r}")
    alpha = float(alpha)
    if math.isnan(alpha) or not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


class InvertedIndex:
    """TF-IDF postings in CSR layout plus the per-document vectors.

    ``post_indptr[t]:post_indptr[t+1]`` slices the (doc, weight) postings of
    term ``t``; doc ids within a slice ascend. The postings and the stored
    document vectors carry the same weights, just transposed.
    """

    def __init__(self, token_docs: Sequence[Sequence[str]],
                 config: TfidfConfig = TfidfConfig()):
        self.vectorizer = TfidfVectorizer(config)
        self.doc_vectors: list[SparseVector] = self.vectorizer.fit_transform(token_docs)
        self.n_docs = len(self.doc_vectors)
        n_terms = len(self.vectorizer.vocabulary_)

        counts = np.zeros(n_terms, dtype=np.int64)
        for vec in self.doc_vectors:
            counts[vec.term_ids] += 1
        indptr = np.zeros(n_terms + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        nnz = int(indptr[-1])
        doc_ids = np.zeros(nnz, dtype=np.int64)
        weights = np.zeros(nnz, dtype=np.float64)
        cursor = indptr[:-1].copy()
        for doc_id, vec in enumerate(self.doc_vectors):
            for k in range(vec.nnz):
                t = int(vec.term_ids[k])
                pos = int(cursor[t])
                doc_ids[pos] = doc_id
                weights[pos] = vec.weights[k]
                cursor[t] += 1
        self.post_indptr = indptr
        self.post_doc_ids = doc_ids
        self.post_weights = weights

    def query_vector(self, tokens: Iterable[str]) -> SparseVector:
        return self.vectorizer.transform(tokens)

    def scores(self, tokens: Iterable[str]) -> np.ndarray:
        """Similarity of the query against every document, dense float64.

        Each document's score accumulates term contributions in ascending
        term-id order, identically under both kernel backends.
        """
        q = self.query_vector(tokens)
        return _kernels.score_postings(q.term_ids, q.weights,
                                       self.post_indptr, self.post_doc_ids,
                                       self.post_weights, self.n_docs)


class ExemplarStore:
    """Exemplars plus lazily built input/output indexes.

    Parses are validated on insertion, so every stored parse is well
    formed. Mutation marks the indexes stale; they are rebuilt on first
    use. Rebuilding is a pure function of the exemplar set, so a store
    reloaded from disk scores identically.
    """

    def __init__(self, config: TfidfConfig = TfidfConfig()):
        self.config = config
        self._exemplars: dict[int, Exemplar] = {}
        self._dirty = True
        self._ids: np.ndarray = np.empty(0, dtype=np.int64)
        self._input_index: InvertedIndex | None = None
        self._output_index: InvertedIndex | None = None

    def add(self, exemplar: Exemplar) -> None:
        if exemplar.exemplar_id in self._exemplars:
            raise DuplicateId(f"exemplar id {exemplar.exemplar_id} already present")
        parse_top(exemplar.parse)
        self._exemplars[exemplar.exemplar_id] = exemplar
        self._dirty = True

    def add_many(self, exemplars: Iterable[Exemplar]) -> None:
        for exemplar in exemplars:
            self.add(exemplar)

    def __len__(self) -> int:
        return len(self._exemplars)

    def __contains__(self, exemplar_id: int) -> bool:
        return exemplar_id in self._exemplars

    def get(self, exemplar_id: int) -> Exemplar:
        try:
            return self._exemplars[exemplar_id]
        except KeyError:
            raise RecordNotFound(f"no exemplar with id {exemplar_id}") from None

    @property
    def exemplars(self) -> list[Exemplar]:
        """All exemplars in ascending id order."""
        return [self._exemplars[i] for i in sorted(self._exemplars)]

    def build(self) -> None:
        """Fit both indexes now. Implicit on first retrieval."""
        if not self._exemplars:
            raise EmptyCorpus("store has no exemplars")
        ordered = self.exemplars
        self._ids = np.array([e.exemplar_id for e in ordered], dtype=np.int64)
        self._input_index = InvertedIndex(
            [tokenize_text(e.utterance) for e in ordered], self.config)
        self._output_index = InvertedIndex(
            [structure_tokens(e.parse) for e in ordered], self.config)
        self._dirty = False

    def ensure_built(self) -> None:
        if self._dirty:
            self.build()

    @property
    def input_index(self) -> InvertedIndex:
        self.ensure_built()
        assert self._input_index is not None
        return self._input_index

    @property
    def output_index(self) -> InvertedIndex:
        self.ensure_built()
        assert self._output_index is not None
        return self._output_index

    def score_all(self, query: str, alpha: float,
                  preliminary: str | None) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Score every exemplar; returns (ids, relevance, input_sim, output_sim)."""
        alpha = validate_alpha(alpha)
        self.ensure_built()
        if alpha > 0.0 and preliminary is None:
            raise ConfigError("alpha > 0 requires a preliminary parse")
        n = len(self._exemplars)
        in_sims = self.input_index.scores(tokenize_text(query))
        if preliminary is not None:
            out_sims = self.output_index.scores(structure_tokens(preliminary))
        else:
            out_sims = np.zeros(n, dtype=np.float64)
        relevance = (1.0 - alpha) * in_sims + alpha * out_sims
        return self._ids, relevance, in_sims, out_sims


def _candidate_order(ids: np.ndarray, relevance: np.ndarray,
                     exclude: frozenset[int]) -> np.ndarray:
    """Indices into ids/relevance, best first, ties by ascending id."""
    order = np.lexsort((ids, -relevance))
    if exclude:
        keep = np.array([ids[i] not in exclude for i in order], dtype=bool)
        order = order[keep]
    return order


def _check_k(k: int, available: int) -> None:
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k!r}")
    if k > available:
        raise StoreTooSmall(
            f"requested {k} exemplars but only {available} are available")


def retrieve_topk(store: ExemplarStore, query: str, k: int,
                  alpha: float = 0.0, preliminary: str | None = None,
                  exclude_ids: Collection[int] = ()) -> list[ScoredExemplar]:
    """The k most relevant exemplars, best first."""
    exclude = frozenset(exclude_ids)
    ids, relevance, in_sims, out_sims = store.score_all(query, alpha, preliminary)
    order = _candidate_order(ids, relevance, exclude)
    _check_k(k, order.shape[0])
    return [
        ScoredExemplar(
            exemplar_id=int(ids[i]),
            relevance=float(relevance[i]),
            input_sim=float(in_sims[i]),
            output_sim=float(out_sims[i]),
            rank=rank,
        )
        for rank, i in enumerate(order[:k])
    ]


def sample_geometric_ranks(n: int, k: int, p: float,
                           rng: np.random.Generator) -> list[int]:
    """Draw k distinct ranks from [0, n) without replacement.

    Each draw follows a geometric distribution over the ranks still
    available, truncated to the remaining count and renormalized:
    P(pick the r-th remaining rank) = p * (1-p)**r / (1 - (1-p)**m) for m
    remaining. Draws use the closed-form inverse CDF, one uniform each.
    Returned ranks are positions in the original [0, n) ordering. p >= 1
    degenerates to always taking the best remaining rank.
    """
    if not 0.0 < p:
        raise ConfigError(f"sampling decay p must be positive, got {p}")
    if k > n:
        raise StoreTooSmall(f"requested {k} draws from {n} candidates")
    remaining = list(range(n))
    picks: list[int] = []
    for _ in range(k):
        m = len(remaining)
        if p >= 1.0:
            r = 0
        else:
            u = rng.random()
            z = -math.expm1(m * math.log1p(-p))
            r = math.ceil(math.log1p(-u * z) / math.log1p(-p)) - 1
            r = min(max(r, 0), m - 1)
        picks.append(remaining.pop(r))
    return picks


def retrieve_sampled(store: ExemplarStore, query: str, k: int, p: float,
                     rng: np.random.Generator, alpha: float = 0.0,
                     preliminary: str | None = None,
                     exclude_ids: Collection[int] = ()) -> list[ScoredExemplar]:
    """Draw k exemplars with geometrically decaying rank probabilities.

    Ranks refer to the same relevance ordering ``retrieve_topk`` uses, and
    the reported ``rank`` of each hit is its position in that full
    ordering. Results are in draw order, not rank order.
    """
    exclude = frozenset(exclude_ids)
    ids, relevance, in_sims, out_sims = store.score_all(query, alpha, preliminary)
    order = _candidate_order(ids, relevance, exclude)
    _check_k(k, order.shape[0])
    picks = sample_geometric_ranks(order.shape[0], k, p, rng)
    out: list[ScoredExemplar] = []
    for rank in picks:
        i = order[rank]
        out.append(ScoredExemplar(
            exemplar_id=int(ids[i]),
            relevance=float(relevance[i]),
            input_sim=float(in_sims[i]),
            output_sim=float(out_sims[i]),
            rank=int(rank),
        ))
    return out
