"""Scoring predictions and sweeping pipeline settings.

Two metrics: exact match (whitespace-normalized string equality between
final prediction and gold parse) and template recall at K (did any of the
top-K retrieved exemplars share the gold parse's template, i.e. its
multiset of intent/slot labels). Failed samples count against both
denominators; a pipeline that skips half its inputs scores accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, MissingGold
from .pipeline import PipelineConfig, PredictionRecord, Sample, run_pipeline
from .retrieval import ExemplarStore
from .top_parse import extract_template, parse_top


def normalize_for_match(text: str) -> str:
    """Collapse runs of whitespace and strip the ends; case is kept."""
    return " ".join(text.split())


def exact_match(prediction: str | None, gold: str, casefold: bool = False) -> bool:
    """Whitespace-normalized equality; a missing prediction never matches."""
    if prediction is None:
        return False
    a, b = normalize_for_match(prediction), normalize_for_match(gold)
    if casefold:
        return a.casefold() == b.casefold()
    return a == b


def record_template_hit(record: PredictionRecord, store: ExemplarStore,
                        k: int | None = None, multiset: bool = True) -> bool:
    """Did any top-k exemplar feeding the final pass match gold's template?"""
    if record.gold is None:
        raise MissingGold(f"sample {record.sample_id} has no gold parse")
    gold_template = extract_template(parse_top(record.gold))
    hits = record.pass2_retrievals
    if hits is None:
        hits = record.pass1_retrievals
    if k is not None:
        hits = hits[:k]
    for hit in hits:
        exemplar = store.get(hit.exemplar_id)
        template = extract_template(parse_top(exemplar.parse))
        if gold_template.matches(template, multiset=multiset):
            return True
    return False


@dataclass(frozen=True)
class DomainStats:
    n: int
    exact_match: float
    template_recall: float


@dataclass(frozen=True)
class EvalReport:
    n: int
    exact_match: float
    template_recall: float
    n_failed: int
    per_domain: Mapping[str, DomainStats]


def evaluate(records: Sequence[PredictionRecord], store: ExemplarStore,
             k: int | None = None, multiset: bool = True,
             casefold: bool = False) -> EvalReport:
    """Aggregate exact match and template recall, overall and per domain."""
    if not records:
        raise ConfigError("nothing to evaluate: no records")
    em_flags: list[bool] = []
    recall_flags: list[bool] = []
    domains: dict[str, list[int]] = {}
    n_failed = 0
    for i, record in enumerate(records):
        if record.gold is None:
            raise MissingGold(f"sample {record.sample_id} has no gold parse")
        if record.final is None:
            n_failed += 1
        em_flags.append(exact_match(record.final, record.gold, casefold))
        recall_flags.append(record_template_hit(record, store, k, multiset))
        if record.domain_tag is not None:
            domains.setdefault(record.domain_tag, []).append(i)

    def mean(flags: Sequence[bool]) -> float:
        return sum(flags) / len(flags)

    per_domain = {
        domain: DomainStats(
            n=len(idx),
            exact_match=mean([em_flags[i] for i in idx]),
            template_recall=mean([recall_flags[i] for i in idx]),
        )
        for domain, idx in sorted(domains.items())
    }
    return EvalReport(n=len(records), exact_match=mean(em_flags),
                      template_recall=mean(recall_flags), n_failed=n_failed,
                      per_domain=per_domain)


class SweepAxis(Enum):
    ALPHA = "alpha"
    K = "k"


@dataclass(frozen=True)
class SweepRow:
    value: float | int
    seed: int
    exact_match: float
    template_recall: float


def _subsample(samples: Sequence[Sample], fraction: float,
               seed: int) -> list[Sample]:
    n = int(np.floor(fraction * len(samples)))
    if n < 1:
        raise ConfigError(
            f"sample fraction {fraction} of {len(samples)} samples is empty")
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(len(samples), size=n, replace=False).tolist())
    return [samples[i] for i in chosen]


def run_sweep(store: ExemplarStore, samples: Sequence[Sample],
              preliminary_generator, final_generator,
              base_config: PipelineConfig, axis: SweepAxis,
              values: Sequence[float | int], seeds: Sequence[int],
              recall_k: int | None = None,
              sample_fraction: float | None = None) -> list[SweepRow]:
    """Re-run the pipeline per (value, seed) and score each run.

    The axis value overrides alpha or k in the base config. The seed
    subsamples the evaluation set when ``sample_fraction`` is given;
    otherwise runs are deterministic and the seed is a row label only.
    """
    if not values or not seeds:
        raise ConfigError("sweep needs at least one value and one seed")
    rows: list[SweepRow] = []
    for value in values:
        if axis is SweepAxis.ALPHA:
            config = replace(base_config, alpha=float(value))
        else:
            config = replace(base_config, k=int(value))
        for seed in seeds:
            chosen = samples
            if sample_fraction is not None:
                chosen = _subsample(samples, sample_fraction, seed)
            records = run_pipeline(store, chosen, preliminary_generator,
                                   final_generator, config)
            report = evaluate(records, store, k=recall_k)
            rows.append(SweepRow(value=value, seed=int(seed),
                                 exact_match=report.exact_match,
                                 template_recall=report.template_recall))
    return rows


def format_sweep_tsv(rows: Sequence[SweepRow], config_note: str = "") -> str:
    """Render sweep rows as TSV with a leading comment echoing the config."""
    lines = []
    if config_note:
        lines.append("# config: " + config_note)
    lines.append("value\tseed\texact_match\ttemplate_recall")
    for row in rows:
        lines.append(f"{row.value}\t{row.seed}\t"
                     f"{row.exact_match:.6f}\t{row.template_recall:.6f}")
    return "\n".join(lines) + "\n"
