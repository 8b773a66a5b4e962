"""Command line front end.

Subcommands: index, retrieve, run, eval, sweep, emit-train, trace.

Settings resolve in precedence order: command-line flag, then environment
(GANDR_PRELIMINARY_URL, GANDR_FINAL_URL, GANDR_TIMEOUT), then a JSON
config file passed with --config, then built-in defaults.

Generation endpoints are named by spec strings:

* ``static:TEXT``   always answers TEXT
* ``oracle:PATH``   answers with the gold parse from dataset PATH
* ``replay:PATH``   answers from a recorded JSONL log
* ``http(s)://..``  POSTs {"inputs": [...]} and reads {"outputs": [...]}

Exit codes: 0 on success, 1 for runtime failures (generation errors,
corrupt files, too-small stores), 2 for usage problems (bad flags, bad
config, missing input files).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .data_io import (
    LoadResult,
    apply_split,
    load_dataset,
    load_store,
    parse_split_spec,
    read_records,
    samples_from_exemplars,
    save_store,
    write_records,
    write_training_pairs,
    atomic_write_text,
)
from .errors import ConfigError, GandrError
from .evaluation import (
    SweepAxis,
    evaluate,
    format_sweep_tsv,
    run_sweep,
)
from .generator import (
    Generator,
    OracleLookupGenerator,
    RecordingGenerator,
    RemoteGenerator,
    ReplayGenerator,
    StaticGenerator,
)
from .pipeline import (
    FailurePolicy,
    PipelineConfig,
    PipelineMode,
    Sample,
    emit_training_pairs,
    run_pipeline,
)
from .retrieval import ExemplarStore, retrieve_topk
from .tfidf import TfidfConfig

ENV_PRELIMINARY_URL = "GANDR_PRELIMINARY_URL"
ENV_FINAL_URL = "GANDR_FINAL_URL"
ENV_TIMEOUT = "GANDR_TIMEOUT"

DEFAULT_ALPHA = 0.75
DEFAULT_K = 4
DEFAULT_P = 0.5
DEFAULT_TIMEOUT = 30.0


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return config


def _resolve(flag, env_name: str | None, config: dict, key: str,
             default=None, cast=None):
    """flag > environment > config file > default."""
    if flag is not None:
        return flag
    if env_name and os.environ.get(env_name):
        raw = os.environ[env_name]
    elif key in config:
        raw = config[key]
    else:
        return default
    if cast is not None:
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


def _build_endpoint(spec: str, timeout: float,
                    record_path: str | None = None,
                    max_batch: int | None = None) -> Generator:
    if spec.startswith(("http://", "https://")):
        endpoint: Generator = RemoteGenerator(spec, timeout=timeout,
                                              max_batch=max_batch)
    elif spec.startswith("static:"):
        endpoint = StaticGenerator(spec[len("static:"):])
    elif spec.startswith("replay:"):
        endpoint = ReplayGenerator.from_path(spec[len("replay:"):])
    elif spec.startswith("oracle:"):
        loaded = load_dataset(spec[len("oracle:"):])
        endpoint = OracleLookupGenerator.from_exemplars(loaded.exemplars)
    else:
        raise ConfigError(
            f"unknown endpoint spec {spec!r}; use static:TEXT, oracle:PATH, "
            "replay:PATH, or an http(s) URL")
    if record_path:
        endpoint = RecordingGenerator(endpoint, record_path)
    return endpoint


def _endpoint_pair(args, config: dict) -> tuple[Generator, Generator, dict]:
    timeout = _resolve(args.timeout, ENV_TIMEOUT, config, "timeout",
                       DEFAULT_TIMEOUT, float)
    preliminary_spec = _resolve(args.preliminary_endpoint,
                                ENV_PRELIMINARY_URL, config,
                                "preliminary_endpoint")
    final_spec = _resolve(args.final_endpoint, ENV_FINAL_URL, config,
                          "final_endpoint")
    if final_spec is None:
        raise ConfigError("no final endpoint configured; pass "
                          "--final-endpoint, set " + ENV_FINAL_URL +
                          ", or put final_endpoint in the config file")
    if preliminary_spec is None:
        preliminary_spec = final_spec
    max_batch = getattr(args, "max_batch", None)
    preliminary = _build_endpoint(preliminary_spec, timeout,
                                  getattr(args, "record_preliminary", None),
                                  max_batch)
    final = _build_endpoint(final_spec, timeout,
                            getattr(args, "record_final", None), max_batch)
    echo = {"preliminary_endpoint": preliminary_spec,
            "final_endpoint": final_spec, "timeout": timeout}
    return preliminary, final, echo


def _pipeline_config(args, config: dict) -> PipelineConfig:
    mode = PipelineMode(_resolve(args.mode, None, config, "mode", "gandr"))
    if mode is PipelineMode.INPUT_ONLY and args.alpha is not None:
        raise ConfigError("--alpha has no effect in input-only mode; "
                          "drop the flag")
    return PipelineConfig(
        mode=mode,
        alpha=_resolve(args.alpha, None, config, "alpha", DEFAULT_ALPHA, float),
        k=_resolve(args.k, None, config, "k", DEFAULT_K, int),
        budget=_resolve(args.budget, None, config, "budget", None, int),
        failure_policy=FailurePolicy(
            _resolve(args.failure_policy, None, config, "failure_policy",
                     "skip")),
        jobs=_resolve(args.jobs, None, config, "jobs", 1, int),
    )


def _report_issues(loaded: LoadResult, path) -> None:
    for issue in loaded.issues:
        print(f"{path}: skipped {issue.message}", file=sys.stderr)


def _load_samples(path: str, fmt: str | None, has_header: bool,
                  strict: bool) -> list[Sample]:
    loaded = load_dataset(path, fmt=fmt, has_header=has_header, strict=strict)
    _report_issues(loaded, path)
    return samples_from_exemplars(loaded.exemplars)


def _comma_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def _comma_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


def cmd_index(args, config: dict) -> int:
    loaded = load_dataset(args.data, fmt=args.format,
                          has_header=args.has_header, strict=args.strict)
    _report_issues(loaded, args.data)
    exemplars = apply_split(loaded.exemplars, parse_split_spec(args.split),
                            seed=args.seed)
    store = ExemplarStore(TfidfConfig(sublinear_tf=args.sublinear_tf,
                                      normalize=not args.no_normalize))
    store.add_many(exemplars)
    store.build()
    save_store(store, args.out)
    print(f"indexed {len(store)} exemplars "
          f"({len(loaded.issues)} rows skipped) -> {args.out}")
    return 0


def cmd_retrieve(args, config: dict) -> int:
    store = load_store(args.store)
    alpha = _resolve(args.alpha, None, config, "alpha", 0.0, float)
    k = _resolve(args.k, None, config, "k", DEFAULT_K, int)
    hits = retrieve_topk(store, args.query, k, alpha=alpha,
                         preliminary=args.preliminary)
    if args.json:
        for hit in hits:
            print(json.dumps(vars(hit), ensure_ascii=False))
        return 0
    print("rank\tid\trelevance\tinput_sim\toutput_sim\tutterance\tparse")
    for hit in hits:
        exemplar = store.get(hit.exemplar_id)
        print(f"{hit.rank}\t{hit.exemplar_id}\t{hit.relevance:.6f}\t"
              f"{hit.input_sim:.6f}\t{hit.output_sim:.6f}\t"
              f"{exemplar.utterance}\t{exemplar.parse}")
    return 0


def cmd_run(args, config: dict) -> int:
    store = load_store(args.store)
    samples = _load_samples(args.data, args.format, args.has_header,
                            args.strict)
    pipeline_config = _pipeline_config(args, config)
    preliminary, final, endpoint_echo = _endpoint_pair(args, config)
    records = run_pipeline(store, samples, preliminary, final,
                           pipeline_config)
    write_records(records, args.out)
    echo = {
        "command": "run",
        "store": args.store,
        "data": args.data,
        "mode": pipeline_config.mode.value,
        "alpha": pipeline_config.alpha,
        "pass2_alpha": pipeline_config.pass2_alpha,
        "k": pipeline_config.k,
        "budget": pipeline_config.budget,
        "failure_policy": pipeline_config.failure_policy.value,
        "jobs": pipeline_config.jobs,
        **endpoint_echo,
    }
    atomic_write_text(str(args.out) + ".config.json",
                      json.dumps(echo, sort_keys=True, indent=2) + "\n")
    n_ok = sum(1 for r in records if r.final is not None)
    print(f"ran {len(records)} samples ({n_ok} ok, "
          f"{len(records) - n_ok} failed) -> {args.out}")
    return 0


def cmd_eval(args, config: dict) -> int:
    store = load_store(args.store)
    records = read_records(args.records)
    report = evaluate(records, store, k=args.k,
                      multiset=not args.set_match, casefold=args.casefold)
    if args.json:
        payload = {
            "n": report.n,
            "exact_match": report.exact_match,
            "template_recall": report.template_recall,
            "n_failed": report.n_failed,
            "per_domain": {
                domain: vars(stats)
                for domain, stats in report.per_domain.items()
            },
        }
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True))
        return 0
    print(f"samples\t{report.n}")
    print(f"exact_match\t{report.exact_match:.6f}")
    print(f"template_recall\t{report.template_recall:.6f}")
    print(f"failed\t{report.n_failed}")
    for domain, stats in report.per_domain.items():
        print(f"domain\t{domain}\t{stats.n}\t{stats.exact_match:.6f}\t"
              f"{stats.template_recall:.6f}")
    return 0


def cmd_sweep(args, config: dict) -> int:
    store = load_store(args.store)
    samples = _load_samples(args.data, args.format, args.has_header,
                            args.strict)
    base_config = _pipeline_config(args, config)
    preliminary, final, endpoint_echo = _endpoint_pair(args, config)
    axis = SweepAxis(args.axis)
    values = (_comma_floats(args.values) if axis is SweepAxis.ALPHA
              else _comma_ints(args.values))
    seeds = _comma_ints(args.seeds)
    rows = run_sweep(store, samples, preliminary, final, base_config, axis,
                     values, seeds, recall_k=args.recall_k,
                     sample_fraction=args.sample_fraction)
    note = json.dumps({
        "axis": axis.value, "values": values, "seeds": seeds,
        "mode": base_config.mode.value, "alpha": base_config.alpha,
        "k": base_config.k, "recall_k": args.recall_k,
        "sample_fraction": args.sample_fraction, **endpoint_echo,
    }, sort_keys=True)
    text = format_sweep_tsv(rows, note)
    if args.out:
        atomic_write_text(args.out, text)
        print(f"swept {len(rows)} settings -> {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_emit_train(args, config: dict) -> int:
    store = load_store(args.store)
    if args.data:
        samples = _load_samples(args.data, args.format, args.has_header,
                                args.strict)
    else:
        samples = samples_from_exemplars(store.exemplars)
    k = _resolve(args.k, None, config, "k", DEFAULT_K, int)
    p = _resolve(args.p, None, config, "p", DEFAULT_P, float)
    budget = _resolve(args.budget, None, config, "budget", None, int)
    rng = np.random.default_rng(args.seed)

    if args.stage == 1:
        alpha = 0.0
        preliminaries = None
    else:
        alpha = _resolve(args.alpha, None, config, "alpha", DEFAULT_ALPHA,
                         float)
        if args.preliminary_from:
            preliminaries = {}
            for record in read_records(args.preliminary_from):
                if record.preliminary is not None:
                    preliminaries[record.sample_id] = record.preliminary
        elif args.preliminary_endpoint or os.environ.get(ENV_PRELIMINARY_URL) \
                or "preliminary_endpoint" in config:
            timeout = _resolve(args.timeout, ENV_TIMEOUT, config, "timeout",
                               DEFAULT_TIMEOUT, float)
            spec = _resolve(args.preliminary_endpoint, ENV_PRELIMINARY_URL,
                            config, "preliminary_endpoint")
            endpoint = _build_endpoint(spec, timeout)
            preliminaries = _generate_preliminaries(store, samples, endpoint,
                                                    k, budget)
        else:
            raise ConfigError("stage 2 needs preliminaries; pass "
                              "--preliminary-from RECORDS or a "
                              "preliminary endpoint")

    pairs = emit_training_pairs(store, samples, k, p, rng, alpha=alpha,
                                preliminaries=preliminaries, budget=budget,
                                exclude_self=not args.keep_self)
    write_training_pairs(pairs, args.out)
    print(f"emitted {len(pairs)} training pairs (stage {args.stage}, "
          f"alpha={alpha}, p={p}) -> {args.out}")
    return 0


def _generate_preliminaries(store: ExemplarStore, samples, endpoint,
                            k: int, budget) -> dict[int, str]:
    from .augment import build_augmented_input

    prompts = []
    for sample in samples:
        hits = retrieve_topk(store, sample.utterance, k, alpha=0.0,
                             exclude_ids={sample.sample_id})
        exemplars = [store.get(h.exemplar_id) for h in hits]
        prompts.append(build_augmented_input(sample.utterance, exemplars,
                                             budget).text)
    outputs = endpoint.generate(prompts)
    return {s.sample_id: out for s, out in zip(samples, outputs)}


def cmd_trace(args, config: dict) -> int:
    store = load_store(args.store)
    pipeline_config = _pipeline_config(args, config)
    preliminary, final, _ = _endpoint_pair(args, config)
    sample = Sample(sample_id=0, utterance=args.query, gold=args.gold)
    record = run_pipeline(store, [sample], preliminary, final,
                          pipeline_config)[0]
    if args.json:
        print(json.dumps(record.to_dict(), ensure_ascii=False))
        return 0

    def show_hits(title: str, hits, alpha: float):
        print(f"{title} (alpha={alpha}):")
        print("  rank\tid\trelevance\tinput_sim\toutput_sim\tutterance\tparse")
        for hit in hits:
            exemplar = store.get(hit.exemplar_id)
            print(f"  {hit.rank}\t{hit.exemplar_id}\t{hit.relevance:.6f}\t"
                  f"{hit.input_sim:.6f}\t{hit.output_sim:.6f}\t"
                  f"{exemplar.utterance}\t{exemplar.parse}")

    print(f"query: {record.query}")
    show_hits("pass 1", record.pass1_retrievals, 0.0)
    print(f"prompt 1: {record.pass1_augmented.text}")
    print(f"preliminary: {record.preliminary}")
    if record.pass2_retrievals is not None:
        show_hits("pass 2", record.pass2_retrievals,
                  pipeline_config.pass2_alpha)
        print(f"prompt 2: {record.pass2_augmented.text}")
    print(f"final: {record.final}")
    if record.gold is not None:
        from .evaluation import exact_match
        verdict = "yes" if exact_match(record.final, record.gold) else "no"
        print(f"gold: {record.gold}")
        print(f"exact match: {verdict}")
    print(f"status: {record.status}")
    return 0


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=["tsv", "jsonl"], default=None,
                        help="dataset format (default: infer from extension)")
    parser.add_argument("--has-header", action="store_true",
                        help="skip the first line of TSV input")
    parser.add_argument("--strict", action="store_true",
                        help="fail on the first bad row instead of skipping")


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode",
                        choices=[m.value for m in PipelineMode], default=None)
    parser.add_argument("--alpha", type=float, default=None,
                        help="output-similarity weight for the second pass")
    parser.add_argument("--k", type=int, default=None,
                        help="exemplars per prompt")
    parser.add_argument("--budget", type=int, default=None,
                        help="whitespace-token cap for augmented prompts")
    parser.add_argument("--failure-policy", choices=["skip", "abort"],
                        default=None)
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker threads for retrieval")


def _add_endpoint_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preliminary-endpoint", default=None,
                        help="endpoint spec for the first pass "
                             "(defaults to the final endpoint)")
    parser.add_argument("--final-endpoint", default=None,
                        help="endpoint spec: static:TEXT, oracle:PATH, "
                             "replay:PATH, or an http(s) URL")
    parser.add_argument("--timeout", type=float, default=None,
                        help="remote endpoint timeout in seconds")
    parser.add_argument("--max-batch", type=int, default=None,
                        help="largest request batch for remote endpoints")
    parser.add_argument("--record-preliminary", default=None, metavar="PATH",
                        help="append first-pass traffic to a replay log")
    parser.add_argument("--record-final", default=None, metavar="PATH",
                        help="append second-pass traffic to a replay log")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gandr",
        description="Retrieval-augmented semantic parsing pipeline")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("--config", default=None, metavar="PATH",
                        help="JSON file with default settings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build an exemplar store from a dataset")
    p.add_argument("--data", required=True)
    _add_dataset_flags(p)
    p.add_argument("--split", default="full",
                   help="full, count:N, or fraction:F")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sublinear-tf", action="store_true")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("retrieve", help="query a store and print the top k")
    p.add_argument("--store", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--preliminary", default=None,
                   help="preliminary parse (needed when alpha > 0)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("run", help="run the two-pass pipeline over a dataset")
    p.add_argument("--store", required=True)
    p.add_argument("--data", required=True)
    _add_dataset_flags(p)
    _add_pipeline_flags(p)
    _add_endpoint_flags(p)
    p.add_argument("--out", required=True, help="records JSONL path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a records file")
    p.add_argument("--store", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--k", type=int, default=None,
                   help="recall cutoff (default: all recorded retrievals)")
    p.add_argument("--set-match", action="store_true",
                   help="compare templates as sets instead of multisets")
    p.add_argument("--casefold", action="store_true",
                   help="case-insensitive exact match")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid-run alpha or k and tabulate scores")
    p.add_argument("--store", required=True)
    p.add_argument("--data", required=True)
    _add_dataset_flags(p)
    _add_pipeline_flags(p)
    _add_endpoint_flags(p)
    p.add_argument("--axis", choices=[a.value for a in SweepAxis],
                   required=True)
    p.add_argument("--values", required=True,
                   help="comma-separated axis values")
    p.add_argument("--seeds", default="0", help="comma-separated seeds")
    p.add_argument("--recall-k", type=int, default=None)
    p.add_argument("--sample-fraction", type=float, default=None,
                   help="evaluate each seed on a random fraction of the data")
    p.add_argument("--out", default=None, help="TSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("emit-train",
                       help="write fine-tuning pairs with sampled exemplars")
    p.add_argument("--store", required=True)
    p.add_argument("--data", default=None,
                   help="samples to emit for (default: the store itself)")
    _add_dataset_flags(p)
    p.add_argument("--stage", type=int, choices=[1, 2], required=True,
                   help="1: input-only prompts; 2: mixed retrieval with "
                        "preliminary parses")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--p", type=float, default=None,
                   help="geometric decay for rank sampling")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--keep-self", action="store_true",
                   help="let a sample retrieve its own store entry")
    p.add_argument("--preliminary-from", default=None, metavar="RECORDS",
                   help="take stage-2 preliminaries from a records file")
    p.add_argument("--preliminary-endpoint", default=None)
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_emit_train)

    p = sub.add_parser("trace", help="show both passes for one query")
    p.add_argument("--store", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--gold", default=None)
    _add_pipeline_flags(p)
    _add_endpoint_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_trace)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config_file(args.config)
        return args.func(args, config)
    except FileNotFoundError as exc:
        missing = exc.filename if exc.filename else exc
        print(f"error: file not found: {missing}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GandrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
