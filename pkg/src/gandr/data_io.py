"""Dataset loading, store persistence, record files, and splits.

Datasets arrive as TSV (``utterance<TAB>parse[<TAB>domain]``) or JSONL
(``{"utterance": ..., "parse": ..., "domain": ...}``). Loading is total
by default: rows that cannot become exemplars are collected as issues
with their line numbers instead of aborting the load; ``strict=True``
raises on the first bad row.

All writers go through a temp-file-plus-rename so a crash never leaves a
half-written artifact, and all serialization uses fixed key order so a
save/load/save cycle is byte-identical.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .augment import check_separator_safe
from .errors import (
    ConfigError,
    CorruptFile,
    CountExceedsCorpus,
    MalformedParse,
    MalformedRow,
    SeparatorCollision,
    VersionMismatch,
)
from .pipeline import PredictionRecord, Sample, TrainingPair
from .retrieval import Exemplar, ExemplarStore
from .tfidf import TfidfConfig
from .top_parse import parse_top

STORE_FORMAT = "gandr-store"
STORE_VERSION = 1


@dataclass(frozen=True)
class LoadIssue:
    """One rejected input row and why it was rejected."""

    line: int
    message: str


@dataclass(frozen=True)
class LoadResult:
    exemplars: list[Exemplar]
    issues: list[LoadIssue]


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".",
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _validate_fields(utterance: str, parse: str, line: int) -> None:
    if not utterance.strip():
        raise MalformedRow("empty utterance", line)
    if not parse.strip():
        raise MalformedRow("empty parse", line)
    check_separator_safe(utterance, line)
    check_separator_safe(parse, line)
    try:
        parse_top(parse)
    except MalformedParse as exc:
        raise MalformedRow(f"bad parse: {exc}", line) from exc


def _load(path: str | Path, parse_line, skip_first: bool,
          strict: bool) -> LoadResult:
    """Assign sequential ids to good rows; bad rows become issues."""
    exemplars: list[Exemplar] = []
    issues: list[LoadIssue] = []
    next_id = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if skip_first and lineno == 1:
                continue
            try:
                parsed = parse_line(lineno, raw)
                if parsed is None:
                    continue
                utterance, parse, domain = parsed
                _validate_fields(utterance, parse, lineno)
            except MalformedRow as exc:
                if strict:
                    raise
                issues.append(LoadIssue(line=lineno, message=str(exc)))
                continue
            exemplars.append(Exemplar(exemplar_id=next_id, utterance=utterance,
                                      parse=parse, domain=domain or None))
            next_id += 1
    return LoadResult(exemplars=exemplars, issues=issues)


def read_tsv(path: str | Path, has_header: bool = False,
             strict: bool = False) -> LoadResult:
    """Load utterance/parse[/domain] rows from a tab-separated file."""

    def parse_line(lineno: int, raw: str):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            return None
        cols = line.split("\t")
        if len(cols) == 2:
            return cols[0], cols[1], None
        if len(cols) == 3:
            return cols[0], cols[1], cols[2]
        raise MalformedRow(
            f"expected 2 or 3 tab-separated columns, got {len(cols)}", lineno)

    return _load(path, parse_line, skip_first=has_header, strict=strict)


def read_jsonl(path: str | Path, strict: bool = False) -> LoadResult:
    """Load {"utterance", "parse", "domain"?} objects, one per line."""

    def parse_line(lineno: int, raw: str):
        line = raw.strip()
        if not line:
            return None
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRow(f"not JSON: {exc}", lineno) from exc
        if not isinstance(obj, dict) or "utterance" not in obj \
                or "parse" not in obj:
            raise MalformedRow(
                "object needs 'utterance' and 'parse' keys", lineno)
        domain = obj.get("domain")
        return str(obj["utterance"]), str(obj["parse"]), \
            (str(domain) if domain is not None else None)

    return _load(path, parse_line, skip_first=False, strict=strict)


def load_dataset(path: str | Path, fmt: str | None = None,
                 has_header: bool = False, strict: bool = False) -> LoadResult:
    """Dispatch on explicit format or file extension (.tsv / .jsonl)."""
    if fmt is None:
        suffix = Path(path).suffix.lower()
        fmt = {".tsv": "tsv", ".jsonl": "jsonl", ".json": "jsonl"}.get(suffix)
        if fmt is None:
            raise ConfigError(
                f"cannot infer dataset format from {path}; pass tsv or jsonl")
    if fmt == "tsv":
        return read_tsv(path, has_header=has_header, strict=strict)
    if fmt == "jsonl":
        return read_jsonl(path, strict=strict)
    raise ConfigError(f"unknown dataset format {fmt!r}")


def samples_from_exemplars(exemplars: Iterable[Exemplar]) -> list[Sample]:
    """View dataset rows as pipeline samples; the parse becomes the gold."""
    return [Sample(sample_id=e.exemplar_id, utterance=e.utterance,
                   gold=e.parse, domain=e.domain) for e in exemplars]


@dataclass(frozen=True)
class Full:
    """Keep every exemplar."""


@dataclass(frozen=True)
class FixedCount:
    """Keep exactly n exemplars, sampled without replacement."""

    n: int


@dataclass(frozen=True)
class Fraction:
    """Keep floor(fraction * N) exemplars, sampled without replacement."""

    fraction: float


SplitSpec = Full | FixedCount | Fraction


def apply_split(items: Sequence, spec: SplitSpec, seed: int = 0) -> list:
    """Subsample items per the spec; selection order follows the input order."""
    n_total = len(items)
    if isinstance(spec, Full):
        return list(items)
    if isinstance(spec, FixedCount):
        n = spec.n
        if n < 1:
            raise ConfigError(f"split count must be positive, got {n}")
        if n > n_total:
            raise CountExceedsCorpus(
                f"split asks for {n} of {n_total} exemplars")
    elif isinstance(spec, Fraction):
        if not 0.0 < spec.fraction <= 1.0:
            raise ConfigError(
                f"split fraction must lie in (0, 1], got {spec.fraction}")
        n = math.floor(spec.fraction * n_total)
        if n < 1:
            raise ConfigError(
                f"fraction {spec.fraction} of {n_total} items selects nothing")
    else:
        raise ConfigError(f"unknown split spec {spec!r}")
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(n_total, size=n, replace=False).tolist())
    return [items[i] for i in chosen]


def parse_split_spec(text: str) -> SplitSpec:
    """Parse 'full', 'count:N', or 'fraction:F'."""
    if text == "full":
        return Full()
    kind, sep, value = text.partition(":")
    if sep:
        if kind == "count":
            try:
                return FixedCount(int(value))
            except ValueError:
                pass
        elif kind == "fraction":
            try:
                return Fraction(float(value))
            except ValueError:
                pass
    raise ConfigError(f"bad split spec {text!r}; "
                      "use full, count:N, or fraction:F")


def _dump(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def save_store(store: ExemplarStore, path: str | Path) -> None:
    """Persist exemplars as a versioned header line plus one JSON row each."""
    header = _dump({
        "format": STORE_FORMAT,
        "version": STORE_VERSION,
        "count": len(store),
        "config": {"sublinear_tf": store.config.sublinear_tf,
                   "normalize": store.config.normalize},
    })
    rows = [
        _dump({"exemplar_id": e.exemplar_id, "utterance": e.utterance,
               "parse": e.parse, "domain": e.domain})
        for e in store.exemplars
    ]
    atomic_write_text(path, "\n".join([header] + rows) + "\n")


def load_store(path: str | Path) -> ExemplarStore:
    """Rebuild a store from disk; indexes are refit from the rows."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CorruptFile(f"{path}: empty store file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"{path}: bad header line: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != STORE_FORMAT:
        raise VersionMismatch(f"{path}: not a {STORE_FORMAT} file")
    if header.get("version") != STORE_VERSION:
        raise VersionMismatch(
            f"{path}: version {header.get('version')!r}, "
            f"expected {STORE_VERSION}")
    config = header.get("config", {})
    store = ExemplarStore(TfidfConfig(
        sublinear_tf=bool(config.get("sublinear_tf", False)),
        normalize=bool(config.get("normalize", True))))
    count = 0
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            exemplar = Exemplar(
                exemplar_id=int(row["exemplar_id"]),
                utterance=row["utterance"], parse=row["parse"],
                domain=row.get("domain"))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CorruptFile(f"{path}: line {lineno}: {exc}") from exc
        store.add(exemplar)
        count += 1
    if count != header.get("count"):
        raise CorruptFile(
            f"{path}: header promises {header.get('count')} rows, found {count}")
    return store


def write_records(records: Sequence[PredictionRecord], path: str | Path) -> None:
    lines = [json.dumps(r.to_dict(), ensure_ascii=False) for r in records]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_records(path: str | Path) -> list[PredictionRecord]:
    records: list[PredictionRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(PredictionRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorruptFile(f"{path}: line {lineno}: {exc}") from exc
    return records


def write_training_pairs(pairs: Sequence[TrainingPair],
                         path: str | Path) -> None:
    """Emit fine-tuning pairs as replay-compatible {"input","output"} lines."""
    lines = [
        json.dumps({"input": p.text, "output": p.target}, ensure_ascii=False)
        for p in pairs
    ]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))
