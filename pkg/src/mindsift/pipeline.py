"""Experiment orchestration: config parsing, the three method pipelines,
manifest bookkeeping, and report emission."""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from . import corpus as corpus_mod
from .caching import TextCache, VectorCache
from .corpus import (
    UNPARSEABLE,
    ColumnSchema,
    LabeledExample,
    SplitCorpus,
    TaskKind,
    assemble_task,
    label_histogram,
    load_dataset,
    split,
)
from .embeddings import EmbeddingProviderConfig, EmbeddingService, make_embedder
from .errors import ConfigError, SplitMismatch, UnwritableOutput
from .evaluation import (
    MetricsReport,
    confusion,
    metrics,
    normalize_confusion,
    per_class_f1_table,
)
from .lexicon import (
    apply_standardizer,
    feature_matrix,
    fit_standardizer,
    load_lexicon,
)
from .llm import ChatProviderConfig, ChatService, classify_zero_shot, make_chat_provider, summarize
from .models import (
    FeatureMatrix,
    TrainConfig,
    model_to_json,
    predict,
    train_linear_svm,
    train_logreg,
    train_random_forest,
)

CONFIG_VERSION = 1
SUPERVISED_FAMILIES = ("logreg", "svm", "forest")
METHODS = SUPERVISED_FAMILIES + ("zero_shot",)
FEATURE_MODES = ("text_liwc", "llm_summary")

METRICS_FILE = "metrics.json"
CONFUSION_FILE = "confusion.csv"
MANIFEST_FILE = "manifest.json"
F1_FILE = "per_class_f1.csv"
MODEL_FILE = "model.json"


def derive_seed(root: int, name: str) -> int:
    """Named sub-seed: stable 63-bit digest of root seed and stream name."""
    digest = hashlib.sha256(f"{root}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class DatasetSpec:
    path: Path
    schema: ColumnSchema


@dataclass
class RunConfig:
    task: TaskKind
    datasets: dict[str, DatasetSpec]
    method: str
    feature_mode: str = "text_liwc"
    lexicon_path: Path | None = None
    embeddings: EmbeddingProviderConfig = field(default_factory=EmbeddingProviderConfig)
    llm: ChatProviderConfig | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    train_fraction: float = 0.7
    output_dir: Path = Path("runs/out")
    cache_dir: Path | None = None
    offline: bool = False

    @property
    def model_tag(self) -> str:
        if self.method == "zero_shot":
            return "zero_shot"
        return f"{self.method}({self.feature_mode})"

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"feature_mode must be one of {FEATURE_MODES}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.method in SUPERVISED_FAMILIES:
            if self.feature_mode == "text_liwc" and self.lexicon_path is None:
                raise ConfigError("feature_mode text_liwc requires a lexicon path")
            if self.feature_mode == "llm_summary" and self.llm is None:
                raise ConfigError("feature_mode llm_summary requires an llm provider config")
        if self.method == "zero_shot" and self.llm is None:
            raise ConfigError("method zero_shot requires an llm provider config")
        if self.offline:
            if self.embeddings.kind != "stub":
                raise ConfigError("offline mode requires the stub embedding provider")
            if self.llm is not None and self.llm.kind != "mock":
                raise ConfigError("offline mode requires the mock llm provider")


def _require(mapping: Mapping, key: str, where: str):
    if key not in mapping:
        raise ConfigError(f"{where} is missing required key {key!r}")
    return mapping[key]


def config_from_dict(doc: Mapping, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("config root must be a mapping")
    version = doc.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r} (expected {CONFIG_VERSION})")
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    def respath(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    try:
        task = TaskKind(str(_require(doc, "task", "config")).lower())
    except ValueError as exc:
        raise ConfigError(f"unknown task {doc.get('task')!r}") from exc

    datasets_doc = _require(doc, "datasets", "config")
    if not isinstance(datasets_doc, Mapping):
        raise ConfigError("datasets must be a mapping of source name to file spec")
    datasets: dict[str, DatasetSpec] = {}
    for source, spec in datasets_doc.items():
        if source not in corpus_mod.SOURCES:
            raise ConfigError(f"unknown dataset source {source!r} (expected {corpus_mod.SOURCES})")
        if not isinstance(spec, Mapping):
            raise ConfigError(f"datasets.{source} must be a mapping")
        schema = ColumnSchema(
            text=str(_require(spec, "text", f"datasets.{source}")),
            label=str(_require(spec, "label", f"datasets.{source}")),
            id=spec.get("id"),
            delimiter=spec.get("delimiter", ","),
            format=spec.get("format"),
        )
        datasets[source] = DatasetSpec(path=respath(_require(spec, "path", f"datasets.{source}")), schema=schema)

    emb_doc = doc.get("embeddings", {})
    try:
        embeddings = EmbeddingProviderConfig(
            kind=emb_doc.get("kind", "stub"),
            model_name=emb_doc.get("model", emb_doc.get("model_name", "stub-768")),
            dimension=int(emb_doc.get("dimension", 768)),
            max_batch=int(emb_doc.get("max_batch", 32)),
            base_url=emb_doc.get("base_url"),
            timeout=float(emb_doc.get("timeout", 30.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad embeddings config: {exc}") from exc

    llm_cfg = None
    if "llm" in doc and doc["llm"] is not None:
        llm_doc = doc["llm"]
        try:
            llm_cfg = ChatProviderConfig(
                kind=llm_doc.get("kind", "mock"),
                model_name=llm_doc.get("model", llm_doc.get("model_name", "mock")),
                base_url=llm_doc.get("base_url"),
                timeout=float(llm_doc.get("timeout", 60.0)),
                concurrency=int(llm_doc.get("concurrency", 4)),
                fixture=str(respath(llm_doc["fixture"])) if llm_doc.get("fixture") else None,
                default_response=llm_doc.get("default_response"),
            )
        except ValueError as exc:
            raise ConfigError(f"bad llm config: {exc}") from exc

    train_doc = doc.get("train", {})
    try:
        train = TrainConfig(
            C=float(train_doc.get("C", 1.0)),
            max_iter=int(train_doc.get("max_iter", 1000)),
            tol=float(train_doc.get("tol", 1e-6)),
            n_trees=int(train_doc.get("n_trees", 100)),
            seed=0,  # replaced by the derived forest sub-seed at run time
        )
    except ValueError as exc:
        raise ConfigError(f"bad train config: {exc}") from exc

    cfg = RunConfig(
        task=task,
        datasets=datasets,
        method=str(doc.get("method", "logreg")),
        feature_mode=str(doc.get("feature_mode", "text_liwc")),
        lexicon_path=respath(doc["lexicon"]) if doc.get("lexicon") else None,
        embeddings=embeddings,
        llm=llm_cfg,
        train=train,
        seed=int(doc.get("seed", 0)),
        train_fraction=float(doc.get("train_fraction", 0.7)),
        output_dir=respath(doc.get("output_dir", "runs/out")),
        cache_dir=respath(doc["cache_dir"]) if doc.get("cache_dir") else None,
        offline=bool(doc.get("offline", False)),
    )
    cfg.validate()
    return cfg


def load_config(path: str | Path, overrides: Mapping | None = None) -> RunConfig:
    """Parse a YAML config file; `overrides` (CLI flags) replace top-level keys."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if doc is None:
        doc = {}
    if overrides:
        doc = dict(doc)
        for key, value in overrides.items():
            if value is not None:
                doc[key] = value
    return config_from_dict(doc, base_dir=path.parent)


def _config_snapshot(config: RunConfig) -> dict:
    """Resolved config embedded in the manifest for provenance."""
    return {
        "task": config.task.value,
        "method": config.method,
        "feature_mode": config.feature_mode if config.method != "zero_shot" else None,
        "datasets": {
            src: {
                "path": str(spec.path),
                "text": spec.schema.text,
                "label": spec.schema.label,
                "id": spec.schema.id,
                "delimiter": spec.schema.delimiter,
                "format": spec.schema.format,
            }
            for src, spec in sorted(config.datasets.items())
        },
        "lexicon": str(config.lexicon_path) if config.lexicon_path else None,
        "embeddings": {
            "kind": config.embeddings.kind,
            "model": config.embeddings.model_name,
            "dimension": config.embeddings.dimension,
            "max_batch": config.embeddings.max_batch,
        },
        "llm": None
        if config.llm is None
        else {
            "kind": config.llm.kind,
            "model": config.llm.model_name,
            "concurrency": config.llm.concurrency,
            "temperature": config.llm.temperature,
        },
        "train": {
            "C": config.train.C,
            "max_iter": config.train.max_iter,
            "tol": config.train.tol,
            "n_trees": config.train.n_trees,
        },
        "seed": config.seed,
        "train_fraction": config.train_fraction,
        "output_dir": str(config.output_dir),
        "cache_dir": str(config.cache_dir) if config.cache_dir else None,
        "offline": config.offline,
    }


def ids_fingerprint(ids: Sequence[str]) -> str:
    """Order-insensitive digest of a set of row ids."""
    return hashlib.sha256("\n".join(sorted(ids)).encode("utf-8")).hexdigest()[:16]


def build_split(config: RunConfig, stats: dict | None = None) -> SplitCorpus:
    # load only what the task needs; assemble_task reports missing sources
    datasets = {}
    for source in config.task.required_sources:
        spec = config.datasets.get(source)
        if spec is None:
            continue
        datasets[source] = load_dataset(spec.path, source, spec.schema)
    examples = assemble_task(config.task, datasets, stats=stats)
    return split(examples, config.train_fraction, derive_seed(config.seed, "split"))


def _services(config: RunConfig) -> tuple[EmbeddingService, ChatService | None]:
    emb_cache = VectorCache(config.cache_dir / "embeddings.jsonl") if config.cache_dir else VectorCache(None)
    embedder = EmbeddingService(make_embedder(config.embeddings), cache=emb_cache)
    chat = None
    if config.llm is not None:
        llm_cache = TextCache(config.cache_dir / "responses.jsonl") if config.cache_dir else TextCache(None)
        chat = ChatService(
            make_chat_provider(config.llm), cache=llm_cache, concurrency=config.llm.concurrency
        )
    return embedder, chat


def _supervised_features(
    config: RunConfig,
    corpus: SplitCorpus,
    embedder: EmbeddingService,
    chat: ChatService | None,
    manifest: dict,
) -> tuple[FeatureMatrix, FeatureMatrix]:
    everything = list(corpus.train) + list(corpus.test)
    ids = [ex.post.id for ex in everything]
    n_train = len(corpus.train)

    if config.feature_mode == "llm_summary":
        outcomes = summarize(chat, [ex.post for ex in everything])
        usable = [o.parsed != UNPARSEABLE for o in outcomes]
        manifest["unparseable"]["summaries"] = int(sum(1 for u in usable if not u))
        texts = [o.raw_response for o, u in zip(outcomes, usable) if u]
        embedded = embedder.embed_batch(texts) if texts else np.zeros((0, embedder.dimension))
        rows = np.zeros((len(everything), embedder.dimension), dtype=np.float64)
        rows[np.nonzero(usable)[0]] = embedded
        values = rows
    else:
        embedded = embedder.embed_batch([ex.post.text for ex in everything])
        lex = load_lexicon(config.lexicon_path)
        raw = feature_matrix(lex, [ex.post.text for ex in everything])
        standardizer = fit_standardizer(raw[:n_train])
        standardized = apply_standardizer(standardizer, raw)
        values = np.hstack([embedded, standardized])

    train_matrix = FeatureMatrix(values[:n_train], tuple(ids[:n_train]))
    test_matrix = FeatureMatrix(values[n_train:], tuple(ids[n_train:]))
    return train_matrix, test_matrix


_TRAINERS = {
    "logreg": train_logreg,
    "svm": train_linear_svm,
    "forest": train_random_forest,
}


def run_experiment(config: RunConfig) -> tuple[dict, MetricsReport]:
    """Execute one configured experiment and write its reports.

    Returns the manifest dict and the metrics report; emit_report has already
    written metrics.json, confusion.csv, per_class_f1.csv, and manifest.json
    into config.output_dir.
    """
    config.validate()
    timings: dict[str, float] = {}
    manifest: dict = {
        "schema_version": 1,
        "config": _config_snapshot(config),
        "model_tag": config.model_tag,
        "seeds": {
            "root": config.seed,
            "split": derive_seed(config.seed, "split"),
            "forest": derive_seed(config.seed, "forest"),
        },
        "prompt_role": "user",
        "counts": {},
        "providers": {},
        "unparseable": {},
        "fingerprints": {},
        "timings": timings,
    }

    t0 = time.perf_counter()
    stats: dict = {}
    corpus = build_split(config, stats=stats)
    timings["preprocess"] = time.perf_counter() - t0

    manifest["counts"] = {
        **stats,
        "examples": len(corpus.train) + len(corpus.test),
        "train": len(corpus.train),
        "test": len(corpus.test),
        "train_labels": {str(k): v for k, v in sorted(label_histogram(corpus.train).items(), key=lambda kv: str(kv[0]))},
        "test_labels": {str(k): v for k, v in sorted(label_histogram(corpus.test).items(), key=lambda kv: str(kv[0]))},
    }
    manifest["fingerprints"]["split"] = ids_fingerprint([ex.post.id for ex in corpus.test])

    embedder, chat = _services(config)
    y_true = [ex.label for ex in corpus.test]
    classes = config.task.labels

    if config.method == "zero_shot":
        # scored on the test split only, same denominator as the supervised runs
        t0 = time.perf_counter()
        outcomes = classify_zero_shot(chat, config.task, [ex.post for ex in corpus.test])
        timings["llm"] = time.perf_counter() - t0
        y_pred = [o.parsed for o in outcomes]
        manifest["unparseable"]["zero_shot"] = sum(1 for o in outcomes if o.parsed == UNPARSEABLE)
        manifest["provider_failures"] = sum(1 for o in outcomes if o.error is not None)
        manifest["fingerprints"]["fit"] = None
    else:
        t0 = time.perf_counter()
        train_matrix, test_matrix = _supervised_features(config, corpus, embedder, chat, manifest)
        timings["features"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        train_cfg = TrainConfig(
            C=config.train.C,
            max_iter=config.train.max_iter,
            tol=config.train.tol,
            n_trees=config.train.n_trees,
            seed=derive_seed(config.seed, "forest"),
        )
        model = _TRAINERS[config.method](
            train_matrix, [ex.label for ex in corpus.train], train_cfg, classes=classes
        )
        timings["train"] = time.perf_counter() - t0
        # fit fingerprint comes from the rows the trainer actually received
        manifest["fingerprints"]["fit"] = ids_fingerprint(train_matrix.row_ids)
        _atomic_write(Path(config.output_dir) / MODEL_FILE, model_to_json(model) + "\n")
        y_pred = predict(model, test_matrix)

    t0 = time.perf_counter()
    cm = confusion(y_true, y_pred, classes)
    report = metrics(cm)
    timings["evaluate"] = time.perf_counter() - t0

    manifest["providers"]["embeddings"] = {
        "requested": embedder.requested,
        "cache_hits": embedder.cache_hits,
        "provider_calls": embedder.provider_calls,
    }
    if chat is not None:
        manifest["providers"]["llm"] = {
            "requested": chat.requested,
            "cache_hits": chat.cache_hits,
            "provider_calls": chat.provider_calls,
        }
    manifest["metrics_file"] = METRICS_FILE

    emit_report(report, manifest, config.output_dir)
    return manifest, report


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise UnwritableOutput(f"cannot write {path}: {exc}") from exc


def _round4(value: float) -> float:
    return round(value, 4)


def metrics_document(report: MetricsReport, model_tag: str, split_fingerprint: str) -> dict:
    """Machine-readable metrics plus a 4-decimal display block."""
    doc = report.to_dict()
    cm = report.confusion
    display = {
        "accuracy": _round4(report.accuracy),
        "macro_f1": _round4(report.macro_f1),
        "weighted_precision": _round4(report.weighted.precision),
        "weighted_recall": _round4(report.weighted.recall),
        "weighted_f1": _round4(report.weighted.f1),
        "per_class_f1": {str(c): _round4(m.f1) for c, m in report.per_class.items()},
    }
    return {
        "schema_version": 1,
        "model_tag": model_tag,
        "split_fingerprint": split_fingerprint,
        "display": display,
        "precise": doc,
        "normalized_confusion": normalize_confusion(cm).tolist() if cm.parsed_total else None,
    }


def emit_report(report: MetricsReport, manifest: dict, out_dir: str | Path) -> dict[str, Path]:
    """Write metrics.json, confusion.csv, per_class_f1.csv, and manifest.json
    atomically (write-temp-then-rename); returns the paths."""
    out = Path(out_dir)
    cm = report.confusion
    tag = manifest.get("model_tag", "model")
    fingerprint = manifest.get("fingerprints", {}).get("split", "")

    metrics_path = out / METRICS_FILE
    _atomic_write(
        metrics_path,
        json.dumps(metrics_document(report, tag, fingerprint), indent=2, sort_keys=True) + "\n",
    )

    lines = ["true\\pred," + ",".join([*map(str, cm.classes), "unparseable"])]
    for i, cls in enumerate(cm.classes):
        row = [str(cls), *map(str, cm.counts[i].tolist()), str(int(cm.unparseable_by_class[i]))]
        lines.append(",".join(row))
    confusion_path = out / CONFUSION_FILE
    _atomic_write(confusion_path, "\n".join(lines) + "\n")

    table = per_class_f1_table({tag: report})
    f1_lines = [",".join(map(str, row)) for row in table.as_rows()]
    f1_path = out / F1_FILE
    _atomic_write(f1_path, "\n".join(f1_lines) + "\n")

    manifest_path = out / MANIFEST_FILE
    _atomic_write(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    return {
        "metrics": metrics_path,
        "confusion": confusion_path,
        "per_class_f1": f1_path,
        "manifest": manifest_path,
    }


@dataclass
class RunSummary:
    tag: str
    split_fingerprint: str
    report: MetricsReport


def compare_models(runs: Sequence[RunSummary]):
    """Ranking table over runs that share one test split: models sorted by
    accuracy descending, with per-class F1 columns."""
    if len(runs) < 2:
        raise ValueError("ranking needs at least two reports")
    fingerprints = {r.split_fingerprint for r in runs}
    if len(fingerprints) != 1:
        raise SplitMismatch(f"reports span different test splits: {sorted(fingerprints)}")
    table = per_class_f1_table({r.tag: r.report for r in runs})
    ranked = sorted(runs, key=lambda r: -r.report.accuracy)
    rows = [["model", "accuracy", *(f"f1_{c}" for c in table.classes)]]
    for r in ranked:
        rows.append(
            [r.tag, r.report.accuracy, *(r.report.per_class[c].f1 for c in table.classes)]
        )
    return rows
