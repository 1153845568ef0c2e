"""Synthetic offline corpora for demos and end-to-end tests.

The generated binary corpus gives each class disjoint marker tokens drawn
from the bundled lexicon, so the combined embedding+lexicon feature space is
linearly separable and supervised runs are meaningful without network access.
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

from .lexicon import default_lexicon_path

DEP_MARKERS = (
    "sad",
    "hopeless",
    "crying",
    "worthless",
    "empty",
    "lonely",
    "miserable",
    "worried",
    "anxious",
    "numb",
    "tired",
    "awful",
)
CTRL_MARKERS = (
    "happy",
    "great",
    "awesome",
    "fun",
    "excited",
    "laughing",
    "friends",
    "party",
    "family",
    "amazing",
    "glad",
    "proud",
)

_LETTERS = np.array(list("abcdefghijklmnopqrstuvwxyz"))


def _filler(rng: np.random.Generator) -> str:
    # "zq" prefix keeps fillers clear of every lexicon entry
    return "zq" + "".join(rng.choice(_LETTERS, size=4))


def _text(rng: np.random.Generator, idx: int, markers, opener: tuple[str, str]) -> str:
    picks = rng.choice(len(markers), size=4, replace=False)
    m = [markers[i] for i in picks]
    tokens = [
        *opener,
        m[0],
        m[1],
        "and",
        m[2],
        m[3],
        f"zq{idx:05d}",
        _filler(rng),
        _filler(rng),
        _filler(rng),
        _filler(rng),
    ]
    return " ".join(tokens)  # always 12 whitespace tokens


def _dep_text(rng, idx):
    return _text(rng, idx, DEP_MARKERS, ("i", "feel"))


def _ctrl_text(rng, idx):
    return _text(rng, idx, CTRL_MARKERS, ("we", "had"))


def _write_csv(path: Path, rows: list[tuple[str, str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["text", "label"])
        writer.writerows(rows)


def generate_binary_fixture(data_dir: str | Path, seed: int = 0) -> dict[str, Path]:
    """Write six small dataset files (100 depression posts across the five
    mental-health sources, 100 control posts, plus a few anxiety/ptsd rows
    that the binary mapping excludes). Returns source -> file path."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    idx = 0

    def take(n, maker, label):
        nonlocal idx
        rows = []
        for _ in range(n):
            rows.append((maker(rng, idx), label))
            idx += 1
        return rows

    files = {}

    mhb = take(25, _dep_text, "depression")
    mhb += take(4, _dep_text, "anxiety") + take(3, _dep_text, "ptsd")
    files["MHB"] = data_dir / "mhb.csv"
    _write_csv(files["MHB"], mhb)

    files["CAMS"] = data_dir / "cams.csv"
    _write_csv(files["CAMS"], take(20, _dep_text, "depression"))

    hela = (
        take(8, _dep_text, "Minimum")
        + take(8, _dep_text, "Mild")
        + take(7, _dep_text, "Moderate")
        + take(7, _dep_text, "Severe")
    )
    files["HelaDepDet"] = data_dir / "heladepdet.csv"
    _write_csv(files["HelaDepDet"], hela)

    files["RMHD"] = data_dir / "rmhd.csv"
    _write_csv(files["RMHD"], take(10, _dep_text, "depression"))

    files["DepressionEmo"] = data_dir / "depressionemo.csv"
    _write_csv(files["DepressionEmo"], take(15, _dep_text, "depression"))

    files["AITA"] = data_dir / "aita.csv"
    _write_csv(files["AITA"], take(100, _ctrl_text, "none"))

    return files


def fixture_config(
    files: dict[str, Path],
    output_dir: str | Path,
    cache_dir: str | Path | None = None,
    method: str = "logreg",
    seed: int = 7,
    **extra,
) -> dict:
    """Config dict for a fully offline run over the generated corpus."""
    doc = {
        "version": 1,
        "task": "binary",
        "method": method,
        "feature_mode": "text_liwc",
        "seed": seed,
        "datasets": {
            src: {"path": str(path), "text": "text", "label": "label"}
            for src, path in files.items()
        },
        "lexicon": str(default_lexicon_path()),
        "embeddings": {"kind": "stub", "model": "stub-768", "dimension": 768},
        "output_dir": str(output_dir),
        "offline": True,
    }
    if cache_dir is not None:
        doc["cache_dir"] = str(cache_dir)
    doc.update(extra)
    return doc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="generate the offline demo corpus")
    parser.add_argument("data_dir", help="directory for the six dataset files")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    files = generate_binary_fixture(args.data_dir, seed=args.seed)
    for src, path in files.items():
        print(f"{src}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
