"""Benchmark the two scoring kernels: numba JIT vs pure numpy.

Builds synthetic stores of increasing size, checks that both kernels
produce bitwise-identical scores, then times the raw kernel and the full
retrieve_topk path under each. Run from the repo root:

    python3 benchmarks/bench_retrieval.py
    python3 benchmarks/bench_retrieval.py --docs 2000,20000 --queries 100

If numba is unavailable (or GANDR_DISABLE_NUMBA is set) only the numpy
path is timed.
"""

import argparse
import time

import numpy as np

from gandr import _kernels
from gandr.retrieval import Exemplar, ExemplarStore, retrieve_topk
from gandr.tfidf import tokenize_text

INTENTS = [f"IN:INTENT_{i}" for i in range(12)]
SLOTS = [f"SL:SLOT_{i}" for i in range(20)]


def synthetic_store(rng: np.random.Generator, n_docs: int,
                    vocab: int) -> ExemplarStore:
    words = [f"w{i}" for i in range(vocab)]
    store = ExemplarStore()
    for i in range(n_docs):
        utterance = " ".join(
            words[j] for j in rng.integers(0, vocab, size=rng.integers(4, 16)))
        intent = INTENTS[int(rng.integers(len(INTENTS)))]
        parts = ["[" + intent]
        for _ in range(int(rng.integers(0, 4))):
            slot = SLOTS[int(rng.integers(len(SLOTS)))]
            value = words[int(rng.integers(vocab))]
            parts.extend(["[" + slot, value, "]"])
        parts.append("]")
        store.add(Exemplar(i, utterance, " ".join(parts)))
    store.build()
    return store


def kernel_inputs(store: ExemplarStore, rng: np.random.Generator,
                  n_queries: int, vocab: int):
    words = [f"w{i}" for i in range(vocab)]
    index = store.input_index
    queries = []
    for _ in range(n_queries):
        text = " ".join(
            words[j] for j in rng.integers(0, vocab, size=rng.integers(4, 16)))
        vector = index.query_vector(tokenize_text(text))
        queries.append((text, vector))
    return index, queries


def time_kernel(kernel, index, queries, repeats: int) -> float:
    """Best-of-N wall time for scoring every query once, in seconds."""
    n_docs = index.n_docs
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for _, vector in queries:
            kernel(vector.term_ids, vector.weights, index.post_indptr,
                   index.post_doc_ids, index.post_weights, n_docs)
        best = min(best, time.perf_counter() - start)
    return best


def time_retrieval(store, queries, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for text, _ in queries:
            retrieve_topk(store, text, 4)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--docs", default="2000,10000,30000",
                        help="comma-separated store sizes")
    parser.add_argument("--vocab", type=int, default=4000)
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.docs.split(",") if s.strip()]

    numba_kernel = _kernels.score_postings if _kernels.NUMBA_ENABLED else None
    numpy_kernel = _kernels.score_postings_numpy
    print(f"active backend: {_kernels.backend_name()}")
    if numba_kernel is None:
        print("numba path unavailable; timing numpy only")

    rng = np.random.default_rng(7)
    header = (f"{'docs':>8} {'postings':>10} {'numpy ms/q':>12} "
              f"{'numba ms/q':>12} {'speedup':>8}  retrieve_topk ms/q")
    print(header)
    print("-" * len(header))

    for n_docs in sizes:
        store = synthetic_store(rng, n_docs, args.vocab)
        index, queries = kernel_inputs(store, rng, args.queries, args.vocab)
        n_queries = len(queries)

        if numba_kernel is not None:
            # first call pays for compilation; keep it out of the timings
            text, vector = queries[0]
            expect = numpy_kernel(vector.term_ids, vector.weights,
                                  index.post_indptr, index.post_doc_ids,
                                  index.post_weights, index.n_docs)
            got = numba_kernel(vector.term_ids, vector.weights,
                               index.post_indptr, index.post_doc_ids,
                               index.post_weights, index.n_docs)
            if not np.array_equal(expect, got):
                raise SystemExit("kernels disagree; refusing to time them")

        numpy_s = time_kernel(numpy_kernel, index, queries, args.repeats)
        numpy_ms = 1000.0 * numpy_s / n_queries
        if numba_kernel is not None:
            numba_s = time_kernel(numba_kernel, index, queries, args.repeats)
            numba_ms = 1000.0 * numba_s / n_queries
            speedup = f"{numpy_s / numba_s:7.2f}x"
        else:
            numba_ms, speedup = float("nan"), "      --"

        end_to_end_s = time_retrieval(store, queries, args.repeats)
        end_to_end_ms = 1000.0 * end_to_end_s / n_queries

        print(f"{n_docs:>8} {index.post_doc_ids.shape[0]:>10} "
              f"{numpy_ms:>12.4f} {numba_ms:>12.4f} {speedup:>8}  "
              f"{end_to_end_ms:.4f} ({_kernels.backend_name()})")


if __name__ == "__main__":
    main()
