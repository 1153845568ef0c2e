"""Command-line interface: ingest, run, compare, cache.

Exit codes: 0 success, 2 config error, 3 data error, 4 provider error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .caching import TextCache, VectorCache
from .corpus import label_histogram, write_corpus
from .errors import (
    ConfigError,
    EmptyLexicon,
    MalformedHeader,
    MindsiftError,
    MissingColumn,
    MissingDataset,
    ProviderUnavailable,
    SplitMismatch,
    UnknownCategoryId,
    UnmappedLabel,
    UnreadableFile,
)
from .evaluation import report_from_dict
from .pipeline import (
    METRICS_FILE,
    RunSummary,
    build_split,
    compare_models,
    load_config,
    run_experiment,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DATA, EXIT_PROVIDER = 0, 1, 2, 3, 4

_DATA_ERRORS = (
    UnreadableFile,
    MissingColumn,
    UnmappedLabel,
    MissingDataset,
    MalformedHeader,
    UnknownCategoryId,
    EmptyLexicon,
    SplitMismatch,
)


def _overrides(args) -> dict:
    out = {
        "task": getattr(args, "task", None),
        "method": getattr(args, "method", None),
        "feature_mode": getattr(args, "features", None),
        "seed": getattr(args, "seed", None),
    }
    if getattr(args, "offline", False):
        out["offline"] = True
    return out


def cmd_ingest(args) -> int:
    config = load_config(args.config, _overrides(args))
    stats: dict = {}
    corpus = build_split(config, stats=stats)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "corpus.jsonl"
    write_corpus(corpus, out_path)
    for stage in ("loaded", "deduped", "filtered", "mapped"):
        total = sum(stats[stage].values())
        print(f"{stage:>8}: {total:6d}  {stats[stage]}")
    print(f"   train: {len(corpus.train):6d}  {label_histogram(corpus.train)}")
    print(f"    test: {len(corpus.test):6d}  {label_histogram(corpus.test)}")
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = load_config(args.config, _overrides(args))
    manifest, report = run_experiment(config)
    print(f"task={config.task.value} model={config.model_tag} seed={config.seed}")
    print(
        f"accuracy {report.accuracy:.4f}  macro_f1 {report.macro_f1:.4f}  "
        f"weighted_f1 {report.weighted.f1:.4f}"
    )
    for cls, m in report.per_class.items():
        print(f"  {cls!s:>16}  P {m.precision:.4f}  R {m.recall:.4f}  F1 {m.f1:.4f}  n={m.support}")
    unparseable = manifest.get("unparseable", {})
    if unparseable:
        print(f"unparseable: {unparseable}")
    print(f"reports in {config.output_dir}")
    return EXIT_OK


def cmd_compare(args) -> int:
    runs = []
    for run_dir in args.run_dirs:
        path = Path(run_dir) / METRICS_FILE
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise UnreadableFile(f"{path}: {exc}") from exc
        runs.append(
            RunSummary(
                tag=doc.get("model_tag", run_dir),
                split_fingerprint=doc.get("split_fingerprint", ""),
                report=report_from_dict(doc["precise"]),
            )
        )
    if len(runs) < 2:
        raise ConfigError("compare needs at least two run directories")
    rows = compare_models(runs)
    widths = [max(len(_fmt(r[i])) for r in rows) for i in range(len(rows[0]))]
    for row in rows:
        print("  ".join(_fmt(v).ljust(w) for v, w in zip(row, widths)))
    if args.out:
        Path(args.out).write_text(
            "\n".join(",".join(_fmt(v) for v in row) for row in rows) + "\n", encoding="utf-8"
        )
        print(f"wrote {args.out}")
    return EXIT_OK


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _cache_paths(config) -> list[Path]:
    if config.cache_dir is None:
        return []
    return [Path(config.cache_dir) / "embeddings.jsonl", Path(config.cache_dir) / "responses.jsonl"]


def cmd_cache(args) -> int:
    config = load_config(args.config, {})
    paths = _cache_paths(config)
    if not paths:
        print("no cache_dir configured")
        return EXIT_OK
    if args.action == "inspect":
        for path, cls in zip(paths, (VectorCache, TextCache)):
            if path.exists():
                cache = cls(path)
                print(f"{path}: {len(cache)} entries, {cache.corrupt_entries} corrupt")
            else:
                print(f"{path}: absent")
    else:  # clear
        for path in paths:
            if path.exists():
                path.unlink()
                print(f"removed {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mindsift")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_method=True):
        p.add_argument("--config", required=True, help="YAML run config")
        p.add_argument("--task", choices=["binary", "severity", "differential"])
        p.add_argument("--seed", type=int)
        if with_method:
            p.add_argument("--method", choices=["logreg", "svm", "forest", "zero_shot"])
            p.add_argument("--features", choices=["text_liwc", "llm_summary"])
            p.add_argument(
                "--offline",
                action="store_true",
                help="stub/mock providers only; fail on any network need",
            )

    p_ingest = sub.add_parser("ingest", help="clean, map, split, and write the corpus file")
    add_common(p_ingest, with_method=False)
    p_ingest.set_defaults(func=cmd_ingest)

    p_run = sub.add_parser("run", help="run one experiment and write reports")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="rank completed runs over one test split")
    p_cmp.add_argument("run_dirs", nargs="+", help="run output directories")
    p_cmp.add_argument("--out", help="also write the ranking as CSV")
    p_cmp.set_defaults(func=cmd_compare)

    p_cache = sub.add_parser("cache", help="inspect or clear the provider caches")
    p_cache.add_argument("action", choices=["inspect", "clear"])
    p_cache.add_argument("--config", required=True)
    p_cache.set_defaults(func=cmd_cache)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ProviderUnavailable as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except MindsiftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
