"""LIWC-format dictionary parsing and category-frequency features.

Dictionary files use the classic interchange format::

    %
    1<TAB>negemo
    2<TAB>cogproc
    %
    sad<TAB>1
    cry*<TAB>1
    think<TAB>2

Lines between the two ``%`` markers declare categories (id, name); the
declaration order fixes the feature-vector dimension order. Entry lines map a
word to one or more category ids; a trailing ``*`` marks a stem that matches
any token starting with the given prefix.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyLexicon,
    InsufficientRows,
    MalformedHeader,
    UnknownCategoryId,
)


@dataclass(frozen=True)
class Lexicon:
    categories: dict[str, str]  # id -> name, in declaration order
    exact_entries: dict[str, frozenset[str]]  # word -> category ids
    stem_entries: dict[str, frozenset[str]]  # prefix (no "*") -> category ids

    @property
    def dimension(self) -> int:
        return len(self.categories)

    @property
    def category_names(self) -> tuple[str, ...]:
        return tuple(self.categories.values())

    def category_index(self) -> dict[str, int]:
        return {cid: i for i, cid in enumerate(self.categories)}


def parse_lexicon(content: str) -> Lexicon:
    lines = content.splitlines()
    pos = 0
    while pos < len(lines) and not lines[pos].strip():
        pos += 1
    if pos >= len(lines) or lines[pos].strip() != "%":
        raise MalformedHeader("dictionary must open with a line containing only '%'")
    pos += 1

    categories: dict[str, str] = {}
    closed = False
    while pos < len(lines):
        line = lines[pos]
        pos += 1
        if line.strip() == "%":
            closed = True
            break
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split("\t") if p.strip()]
        if len(parts) != 2:
            raise MalformedHeader(f"bad category line {line!r} (want id<TAB>name)")
        cid, name = parts
        if cid in categories:
            raise MalformedHeader(f"duplicate category id {cid!r}")
        categories[cid] = name
    if not closed:
        raise MalformedHeader("header never closed with a second '%' line")

    exact: dict[str, set[str]] = {}
    stems: dict[str, set[str]] = {}
    for line in lines[pos:]:
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split("\t") if p.strip()]
        if len(parts) < 2:
            raise MalformedHeader(f"entry line {line!r} has no category ids")
        word, ids = parts[0].lower(), parts[1:]
        for cid in ids:
            if cid not in categories:
                raise UnknownCategoryId(f"entry {word!r} references undeclared id {cid!r}")
        if word.endswith("*"):
            stems.setdefault(word[:-1], set()).update(ids)
        else:
            exact.setdefault(word, set()).update(ids)

    if not categories or (not exact and not stems):
        raise EmptyLexicon("dictionary has no categories or no entries")
    return Lexicon(
        categories=categories,
        exact_entries={w: frozenset(c) for w, c in exact.items()},
        stem_entries={w: frozenset(c) for w, c in stems.items()},
    )


def load_lexicon(path: str | Path) -> Lexicon:
    return parse_lexicon(Path(path).read_text(encoding="utf-8"))


def default_lexicon_path() -> Path:
    """The small open lexicon bundled for tests and offline demos."""
    return Path(__file__).with_name("data") / "minilex.dic"


def serialize_lexicon(lex: Lexicon) -> str:
    """Inverse of parse_lexicon: parse(serialize(lex)) equals lex."""
    out = ["%"]
    out += [f"{cid}\t{name}" for cid, name in lex.categories.items()]
    out.append("%")
    order = lex.category_index()
    for word in sorted(lex.exact_entries):
        ids = sorted(lex.exact_entries[word], key=order.__getitem__)
        out.append("\t".join([word, *ids]))
    for stem in sorted(lex.stem_entries):
        ids = sorted(lex.stem_entries[stem], key=order.__getitem__)
        out.append("\t".join([stem + "*", *ids]))
    return "\n".join(out) + "\n"


# Tokens are maximal runs of alphabetic characters with internal apostrophes;
# digits and punctuation separate.
_TOKEN = re.compile(r"[^\W\d_]+(?:['’][^\W\d_]+)*")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def extract_features(lex: Lexicon, text: str) -> np.ndarray:
    """Per-category relative frequencies for one text.

    Each token increments every category of its exact entry and every
    category of its longest matching stem prefix, at most once per category.
    Counts are divided by the total token count; a text with no tokens yields
    the zero vector.
    """
    if lex.dimension == 0:
        raise EmptyLexicon("cannot extract features with an empty lexicon")
    index = lex.category_index()
    counts = np.zeros(lex.dimension, dtype=np.float64)
    tokens = tokenize(text)
    if not tokens:
        return counts
    for tok in tokens:
        cats = set(lex.exact_entries.get(tok, ()))
        for cut in range(len(tok), 0, -1):  # longest stem prefix wins
            hit = lex.stem_entries.get(tok[:cut])
            if hit is not None:
                cats |= hit
                break
        for cid in cats:
            counts[index[cid]] += 1.0
    return counts / len(tokens)


def feature_matrix(lex: Lexicon, texts: Iterable[str]) -> np.ndarray:
    rows = [extract_features(lex, t) for t in texts]
    if not rows:
        return np.zeros((0, lex.dimension), dtype=np.float64)
    return np.stack(rows)


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension z-score parameters, population std, train-fitted."""

    mean: np.ndarray
    std: np.ndarray
    fitted_on: int


def fit_standardizer(train_features: np.ndarray) -> Standardizer:
    x = np.asarray(train_features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {x.shape}")
    if x.shape[0] < 2:
        raise InsufficientRows(f"standardizer needs >= 2 rows, got {x.shape[0]}")
    return Standardizer(mean=x.mean(axis=0), std=x.std(axis=0), fitted_on=x.shape[0])


def apply_standardizer(s: Standardizer, features: np.ndarray) -> np.ndarray:
    """(x - mean) / std per dimension; zero-variance dimensions map to 0."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != s.mean.shape[0]:
        raise DimensionMismatch(
            f"standardizer is {s.mean.shape[0]}-dimensional, features are {x.shape[-1]}"
        )
    centered = x - s.mean
    out = np.zeros_like(centered)
    np.divide(centered, s.std, out=out, where=s.std > 0)
    return out


def export_features(
    path: str | Path,
    row_ids: Sequence[str],
    lex: Lexicon,
    matrix: np.ndarray,
) -> None:
    """CSV export: one row per post, category names as header."""
    matrix = np.asarray(matrix)
    if matrix.shape != (len(row_ids), lex.dimension):
        raise DimensionMismatch(
            f"matrix shape {matrix.shape} does not match {len(row_ids)} rows x "
            f"{lex.dimension} categories"
        )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", *lex.category_names])
        for rid, row in zip(row_ids, matrix):
            writer.writerow([rid, *(repr(float(v)) for v in row)])
