"""Dataset ingestion, cleaning, label mapping, and seeded train/test splits."""

from __future__ import annotations

import csv
import io
import json
import math
import re
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateClassWarning,
    MissingColumn,
    MissingDataset,
    UnmappedLabel,
    UnreadableFile,
)

SOURCES = ("MHB", "CAMS", "HelaDepDet", "RMHD", "DepressionEmo", "AITA")

DEPRESSION = "Depression"
NON_DEPRESSION = "NonDepression"
ANXIETY = "Anxiety"
PTSD = "PTSD"

#: Outcome value for an LLM response that matched zero or several labels.
#: Scored as an incorrect prediction, never dropped.
UNPARSEABLE = "__unparseable__"


class TaskKind(Enum):
    BINARY = "binary"
    SEVERITY = "severity"
    DIFFERENTIAL = "differential"

    @property
    def labels(self) -> tuple:
        """Canonical label space, in declared order."""
        return _TASK_LABELS[self]

    @property
    def prompt_labels(self) -> tuple[str, ...]:
        """Human-readable label names used in prompts, aligned with `labels`."""
        return _PROMPT_LABELS[self]

    @property
    def required_sources(self) -> tuple[str, ...]:
        return _REQUIRED_SOURCES[self]

    def from_prompt_label(self, display: str):
        return dict(zip(self.prompt_labels, self.labels))[display]

    def to_prompt_label(self, value) -> str:
        return dict(zip(self.labels, self.prompt_labels))[value]


_TASK_LABELS = {
    TaskKind.BINARY: (DEPRESSION, NON_DEPRESSION),
    TaskKind.SEVERITY: (0, 1, 2, 3),
    TaskKind.DIFFERENTIAL: (DEPRESSION, ANXIETY, PTSD),
}
_PROMPT_LABELS = {
    TaskKind.BINARY: ("Depression", "Non-depression"),
    TaskKind.SEVERITY: ("Minimum", "Mild", "Moderate", "Severe"),
    TaskKind.DIFFERENTIAL: ("Depression", "Anxiety", "PTSD"),
}
_REQUIRED_SOURCES = {
    TaskKind.BINARY: SOURCES,
    TaskKind.SEVERITY: ("HelaDepDet",),
    TaskKind.DIFFERENTIAL: ("MHB", "RMHD"),
}


@dataclass(frozen=True)
class Post:
    """One social-media text with provenance and its original label string."""

    id: str
    text: str
    source: str
    raw_label: str

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r} (expected one of {SOURCES})")
        if not self.text.strip():
            raise ValueError(f"post {self.id!r} has empty text")


@dataclass(frozen=True)
class LabeledExample:
    post: Post
    label: object


@dataclass(frozen=True)
class SplitCorpus:
    train: tuple[LabeledExample, ...]
    test: tuple[LabeledExample, ...]
    seed: int


@dataclass(frozen=True)
class ColumnSchema:
    """Column mapping for one dataset file.

    `format` is "csv" or "jsonl"; when None it is inferred from the file
    extension (.jsonl/.ndjson are line-delimited JSON, anything else is a
    delimited table with a header row).
    """

    text: str
    label: str
    id: str | None = None
    delimiter: str = ","
    format: str | None = None


def load_dataset(path: str | Path, source: str, schema: ColumnSchema) -> list[Post]:
    """Read one dataset file into Posts.

    Rows whose text is empty after stripping are dropped. Ids come from the
    mapped id column when given, otherwise "<source>:<row-index>" with the
    0-based position of the row in the file.
    """
    p = Path(path)
    try:
        raw = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFile(f"{p}: {exc}") from exc

    fmt = schema.format or ("jsonl" if p.suffix.lower() in {".jsonl", ".ndjson"} else "csv")
    if fmt == "jsonl":
        rows = _read_jsonl(raw, p, schema)
    elif fmt == "csv":
        rows = _read_delimited(raw, p, schema)
    else:
        raise UnreadableFile(f"{p}: unknown format {fmt!r}")

    posts: list[Post] = []
    for idx, row in enumerate(rows):
        text = "" if row.get(schema.text) is None else str(row[schema.text])
        if not text.strip():
            continue
        raw_label = "" if row.get(schema.label) is None else str(row[schema.label])
        if schema.id is not None and row.get(schema.id) not in (None, ""):
            post_id = str(row[schema.id])
        else:
            post_id = f"{source}:{idx}"
        posts.append(Post(id=post_id, text=text, source=source, raw_label=raw_label))
    return posts


def _read_delimited(raw: str, path: Path, schema: ColumnSchema) -> list[dict]:
    reader = csv.DictReader(io.StringIO(raw), delimiter=schema.delimiter)
    header = reader.fieldnames or []
    for col in _needed_columns(schema):
        if col not in header:
            raise MissingColumn(f"{path}: column {col!r} not in header {header}")
    return list(reader)


def _read_jsonl(raw: str, path: Path, schema: ColumnSchema) -> list[dict]:
    rows = []
    needed = _needed_columns(schema)
    for lineno, line in enumerate(raw.splitlines()):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise UnreadableFile(f"{path}:{lineno + 1}: invalid JSON: {exc}") from exc
        for col in needed:
            if col not in rec:
                raise MissingColumn(f"{path}:{lineno + 1}: record lacks field {col!r}")
        rows.append(rec)
    return rows


def _needed_columns(schema: ColumnSchema) -> list[str]:
    cols = [schema.text, schema.label]
    if schema.id is not None:
        cols.append(schema.id)
    return cols


_WS_RUN = re.compile(r"\s+")


def _dedupe_key(text: str) -> str:
    return _WS_RUN.sub(" ", text.strip())


def dedupe(posts: Sequence[Post]) -> list[Post]:
    """Drop posts whose whitespace-normalized text was already seen; first wins."""
    seen: set[str] = set()
    out = []
    for post in posts:
        key = _dedupe_key(post.text)
        if key in seen:
            continue
        seen.add(key)
        out.append(post)
    return out


def nearest_rank_percentile(values: Sequence[int | float], pct: float):
    """Smallest order statistic whose cumulative rank reaches pct% of the sample."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("percentile of an empty sample")
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


def _token_length(text: str) -> int:
    return len(text.split())


def length_filter(posts: Sequence[Post]) -> list[Post]:
    """Keep posts whose whitespace-token count lies within the inclusive
    nearest-rank 10th..90th percentile band of the input length distribution."""
    if not posts:
        raise ValueError("length_filter needs at least one post")
    lengths = [_token_length(p.text) for p in posts]
    lo = nearest_rank_percentile(lengths, 10)
    hi = nearest_rank_percentile(lengths, 90)
    return [p for p, n in zip(posts, lengths) if lo <= n <= hi]


#: Mapping target meaning "defined for the task, but the post is dropped".
EXCLUDED = "__excluded__"

# Raw labels are matched case-insensitively after stripping. "*" is a
# wildcard for sources whose every row maps to one target (AITA control).
LABEL_MAPS: dict[TaskKind, dict[str, dict[str, object]]] = {
    TaskKind.BINARY: {
        "MHB": {"depression": DEPRESSION, "anxiety": EXCLUDED, "ptsd": EXCLUDED},
        "CAMS": {"depression": DEPRESSION},
        "HelaDepDet": {
            "depression": DEPRESSION,
            "minimum": DEPRESSION,
            "mild": DEPRESSION,
            "moderate": DEPRESSION,
            "severe": DEPRESSION,
        },
        "RMHD": {"depression": DEPRESSION, "anxiety": EXCLUDED, "ptsd": EXCLUDED},
        "DepressionEmo": {"depression": DEPRESSION},
        "AITA": {"*": NON_DEPRESSION},
    },
    TaskKind.SEVERITY: {
        "HelaDepDet": {"minimum": 0, "mild": 1, "moderate": 2, "severe": 3},
    },
    TaskKind.DIFFERENTIAL: {
        "MHB": {"depression": DEPRESSION, "anxiety": ANXIETY, "ptsd": PTSD},
        "RMHD": {"depression": DEPRESSION, "anxiety": ANXIETY, "ptsd": PTSD},
    },
}


def map_labels(posts: Sequence[Post], task: TaskKind) -> list[LabeledExample]:
    """Map raw dataset labels into the task's label space.

    Pairs the table marks EXCLUDED are dropped (auditable as input count minus
    output count); an unknown (source, raw_label) pair raises UnmappedLabel so
    bad rows are reported instead of silently vanishing.
    """
    table = LABEL_MAPS[task]
    out: list[LabeledExample] = []
    for post in posts:
        src_map = table.get(post.source)
        if src_map is None:
            raise UnmappedLabel(
                f"source {post.source!r} has no mapping for task {task.value!r} (post {post.id})"
            )
        key = post.raw_label.strip().lower()
        if key in src_map:
            target = src_map[key]
        elif "*" in src_map:
            target = src_map["*"]
        else:
            raise UnmappedLabel(
                f"label {post.raw_label!r} from {post.source} is not mapped for task "
                f"{task.value!r} (post {post.id})"
            )
        if target == EXCLUDED:
            continue
        out.append(LabeledExample(post=post, label=target))
    return out


def split(
    examples: Sequence[LabeledExample],
    train_fraction: float = 0.7,
    seed: int = 0,
) -> SplitCorpus:
    """Stratified seeded split.

    Within each label group the seeded generator shuffles the members; train
    sizes are allocated by largest remainder so the total is exactly
    round(train_fraction * N) while each label stays within one example of
    round(train_fraction * group size). A single-example label goes entirely
    to train with a DegenerateClassWarning.
    """
    examples = list(examples)
    n = len(examples)
    if n < 2:
        raise ValueError("split needs at least two examples")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")

    groups: dict[object, list[int]] = {}
    for i, ex in enumerate(examples):
        groups.setdefault(ex.label, []).append(i)

    target_train = round(train_fraction * n)
    alloc: dict[object, int] = {}
    singles = [lbl for lbl, idx in groups.items() if len(idx) == 1]
    for lbl in singles:
        warnings.warn(
            f"label {lbl!r} has a single example; it goes entirely to train",
            DegenerateClassWarning,
        )
        alloc[lbl] = 1

    multi = [(lbl, len(idx)) for lbl, idx in groups.items() if len(idx) >= 2]
    budget = max(0, target_train - len(singles))
    remainders = {}
    for lbl, size in multi:
        quota = train_fraction * size
        alloc[lbl] = int(math.floor(quota))
        remainders[lbl] = quota - alloc[lbl]
    extra = budget - sum(alloc[lbl] for lbl, _ in multi)
    # first-appearance order breaks remainder ties deterministically
    order = sorted(range(len(multi)), key=lambda i: (-remainders[multi[i][0]], i))
    sizes = dict(multi)
    while extra > 0:
        progressed = False
        for i in order:
            if extra == 0:
                break
            lbl = multi[i][0]
            if alloc[lbl] < sizes[lbl]:
                alloc[lbl] += 1
                extra -= 1
                progressed = True
        if not progressed:
            break
    while extra < 0:
        progressed = False
        for i in reversed(order):
            if extra == 0:
                break
            lbl = multi[i][0]
            if alloc[lbl] > 0:
                alloc[lbl] -= 1
                extra += 1
                progressed = True
        if not progressed:
            break

    rng = np.random.default_rng(seed)
    train_idx: set[int] = set()
    for lbl, idxs in groups.items():  # insertion order: first appearance
        perm = rng.permutation(len(idxs))
        train_idx.update(idxs[j] for j in perm[: alloc[lbl]])

    train = tuple(examples[i] for i in range(n) if i in train_idx)
    test = tuple(examples[i] for i in range(n) if i not in train_idx)
    return SplitCorpus(train=train, test=test, seed=seed)


def assemble_task(
    task: TaskKind,
    datasets: Mapping[str, Sequence[Post]],
    stats: dict | None = None,
) -> list[LabeledExample]:
    """Clean each required source (dedupe, then length filter, both per
    dataset), map labels, and concatenate in declared source order.

    When `stats` is given it is filled with per-source counts for each stage:
    loaded, deduped, filtered, mapped, excluded.
    """
    missing = [s for s in task.required_sources if s not in datasets]
    if missing:
        raise MissingDataset(f"task {task.value!r} needs sources {missing}")

    if stats is not None:
        for key in ("loaded", "deduped", "filtered", "mapped", "excluded"):
            stats.setdefault(key, {})

    out: list[LabeledExample] = []
    for source in task.required_sources:
        posts = list(datasets[source])
        unique = dedupe(posts)
        kept = length_filter(unique) if unique else []
        mapped = map_labels(kept, task)
        if stats is not None:
            stats["loaded"][source] = len(posts)
            stats["deduped"][source] = len(unique)
            stats["filtered"][source] = len(kept)
            stats["mapped"][source] = len(mapped)
            stats["excluded"][source] = len(kept) - len(mapped)
        out.extend(mapped)
    return out


def write_corpus(corpus: SplitCorpus, path: str | Path) -> None:
    """Write the canonical corpus file: one JSON record per line with
    {id, source, text, label, split}."""
    lines = []
    for part, examples in (("train", corpus.train), ("test", corpus.test)):
        for ex in examples:
            lines.append(
                json.dumps(
                    {
                        "id": ex.post.id,
                        "source": ex.post.source,
                        "text": ex.post.text,
                        "label": ex.label,
                        "split": part,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def label_histogram(examples: Iterable[LabeledExample]) -> dict:
    counts: dict = {}
    for ex in examples:
        counts[ex.label] = counts.get(ex.label, 0) + 1
    return counts
