from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import make_example, make_post
from oracles import nearest_rank

from mindsift.corpus import (
    ColumnSchema,
    Post,
    TaskKind,
    assemble_task,
    dedupe,
    label_histogram,
    length_filter,
    load_dataset,
    map_labels,
    split,
    write_corpus,
)
from mindsift.errors import (
    DegenerateClassWarning,
    MissingColumn,
    MissingDataset,
    UnmappedLabel,
    UnreadableFile,
)
from mindsift.pipeline import ids_fingerprint


class TestLoadDataset:
    def test_three_row_csv_identity(self, tmp_path):
        path = tmp_path / "mhb.csv"
        path.write_text("text,label\nfirst post,depression\nsecond post,anxiety\nthird post,ptsd\n")
        posts = load_dataset(path, "MHB", ColumnSchema(text="text", label="label"))
        assert [p.id for p in posts] == ["MHB:0", "MHB:1", "MHB:2"]
        assert posts[0].text == "first post"
        assert posts[1].raw_label == "anxiety"
        assert all(p.source == "MHB" for p in posts)

    def test_empty_text_rows_dropped(self, tmp_path):
        path = tmp_path / "cams.csv"
        path.write_text('text,label\nkeep me,depression\n"",depression\nanother,depression\n')
        posts = load_dataset(path, "CAMS", ColumnSchema(text="text", label="label"))
        assert len(posts) == 2
        assert [p.text for p in posts] == ["keep me", "another"]

    def test_missing_label_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("text,sentiment\nhello,positive\n")
        with pytest.raises(MissingColumn):
            load_dataset(path, "CAMS", ColumnSchema(text="text", label="label"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(UnreadableFile):
            load_dataset(tmp_path / "nope.csv", "CAMS", ColumnSchema(text="text", label="label"))

    def test_jsonl_with_id_column(self, tmp_path):
        path = tmp_path / "rmhd.jsonl"
        rows = [
            {"body": "a post", "cond": "depression", "pid": "u1"},
            {"body": "b post", "cond": "anxiety", "pid": "u2"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows))
        posts = load_dataset(path, "RMHD", ColumnSchema(text="body", label="cond", id="pid"))
        assert [p.id for p in posts] == ["u1", "u2"]

    def test_jsonl_missing_field(self, tmp_path):
        path = tmp_path / "rmhd.jsonl"
        path.write_text(json.dumps({"body": "a post"}))
        with pytest.raises(MissingColumn):
            load_dataset(path, "RMHD", ColumnSchema(text="body", label="cond"))

    def test_tsv_delimiter(self, tmp_path):
        path = tmp_path / "hela.tsv"
        path.write_text("text\tlabel\nsome post\tModerate\n")
        posts = load_dataset(path, "HelaDepDet", ColumnSchema(text="text", label="label", delimiter="\t"))
        assert posts[0].raw_label == "Moderate"


class TestDedupe:
    def test_whitespace_collapse_key(self):
        posts = [make_post(0, "a b"), make_post(1, "a  b"), make_post(2, "c")]
        kept = dedupe(posts)
        assert [p.text for p in kept] == ["a b", "c"]

    def test_all_distinct_unchanged(self):
        posts = [make_post(i, f"text {i}") for i in range(5)]
        assert dedupe(posts) == posts

    def test_five_copies_collapse(self):
        posts = [make_post(i, "same text here") for i in range(5)]
        assert len(dedupe(posts)) == 1

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        posts = [make_post(i, f"text {rng.integers(0, 8)}") for i in range(40)]
        once = dedupe(posts)
        assert dedupe(once) == once


class TestLengthFilter:
    def test_lengths_one_to_ten(self):
        posts = [make_post(i, " ".join(["w"] * (i + 1))) for i in range(10)]
        lengths = [len(p.text.split()) for p in posts]
        assert nearest_rank(lengths, 10) == 1 and nearest_rank(lengths, 90) == 9
        kept = length_filter(posts)
        assert [len(p.text.split()) for p in kept] == list(range(1, 10))

    def test_equal_lengths_all_kept(self):
        posts = [make_post(i, f"three word post{i}") for i in range(7)]
        assert length_filter(posts) == posts

    def test_single_post_kept(self):
        posts = [make_post(0, "only one")]
        assert length_filter(posts) == posts

    def test_band_matches_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(1, 60))
            posts = [
                make_post(i, " ".join(["w"] * int(rng.integers(1, 40)))) for i in range(n)
            ]
            lengths = [len(p.text.split()) for p in posts]
            lo, hi = nearest_rank(lengths, 10), nearest_rank(lengths, 90)
            kept = length_filter(posts)
            assert kept == [p for p, l in zip(posts, lengths) if lo <= l <= hi]


class TestMapLabels:
    def test_heladepdet_moderate_is_ordinal_two(self):
        posts = [make_post(0, source="HelaDepDet", raw_label="Moderate")]
        out = map_labels(posts, TaskKind.SEVERITY)
        assert out[0].label == 2

    def test_aita_always_nondepression(self):
        posts = [make_post(0, source="AITA", raw_label="whatever")]
        out = map_labels(posts, TaskKind.BINARY)
        assert out[0].label == "NonDepression"

    def test_binary_excludes_anxiety_ptsd_with_bookkeeping(self):
        posts = [
            make_post(0, source="MHB", raw_label="depression"),
            make_post(1, source="MHB", raw_label="ptsd"),
            make_post(2, source="MHB", raw_label="anxiety"),
            make_post(3, source="MHB", raw_label="depression"),
            make_post(4, source="AITA", raw_label="story"),
            make_post(5, source="CAMS", raw_label="Depression"),
        ]
        out = map_labels(posts, TaskKind.BINARY)
        assert len(out) == 4  # two excluded
        assert [ex.post.id for ex in out] == ["MHB:0", "MHB:3", "AITA:4", "CAMS:5"]
        assert label_histogram(out) == {"Depression": 3, "NonDepression": 1}

    def test_unknown_label_reported(self):
        posts = [make_post(0, source="MHB", raw_label="bipolar")]
        with pytest.raises(UnmappedLabel, match="bipolar"):
            map_labels(posts, TaskKind.BINARY)

    def test_source_without_task_mapping(self):
        posts = [make_post(0, source="AITA", raw_label="story")]
        with pytest.raises(UnmappedLabel):
            map_labels(posts, TaskKind.SEVERITY)

    def test_differential_accepts_rmhd_ptsd(self):
        posts = [make_post(0, source="RMHD", raw_label="PTSD")]
        assert map_labels(posts, TaskKind.DIFFERENTIAL)[0].label == "PTSD"


class TestSplit:
    def test_ten_examples_seven_three(self):
        examples = [make_example(i, "A" if i < 5 else "B") for i in range(10)]
        sc = split(examples, 0.7, seed=1)
        assert len(sc.train) == 7 and len(sc.test) == 3
        hist = label_histogram(sc.train)
        assert hist["A"] >= 3 and hist["B"] >= 3

    def test_same_seed_identical(self):
        examples = [make_example(i, i % 3) for i in range(30)]
        assert split(examples, 0.7, seed=9) == split(examples, 0.7, seed=9)

    def test_hundred_fifty_fifty_seed42_golden(self):
        examples = [make_example(i, "A" if i < 50 else "B") for i in range(100)]
        sc = split(examples, 0.7, seed=42)
        assert label_histogram(sc.train) == {"A": 35, "B": 35}
        # frozen from the first reference run of the seeded shuffle
        assert ids_fingerprint([ex.post.id for ex in sc.train]) == "2c968c99fd15119b"
        assert ids_fingerprint([ex.post.id for ex in sc.test]) == "682545e9163dc267"

    def test_disjoint_and_covering(self):
        rng = np.random.default_rng(17)
        for trial in range(15):
            n = int(rng.integers(2, 80))
            labels = rng.integers(0, 4, size=n)
            examples = [make_example(i, int(labels[i])) for i in range(n)]
            with pytest.warns(DegenerateClassWarning) if _has_singleton(labels) else _nullcontext():
                sc = split(examples, 0.7, seed=trial)
            train_ids = {ex.post.id for ex in sc.train}
            test_ids = {ex.post.id for ex in sc.test}
            assert not train_ids & test_ids
            assert len(sc.train) + len(sc.test) == n

    def test_per_label_counts_within_rounding(self):
        rng = np.random.default_rng(23)
        for trial in range(10):
            n = int(rng.integers(10, 120))
            labels = rng.integers(0, 3, size=n)
            examples = [make_example(i, int(labels[i])) for i in range(n)]
            if _has_singleton(labels):
                continue
            sc = split(examples, 0.7, seed=trial)
            assert len(sc.train) == round(0.7 * n)
            train_hist = label_histogram(sc.train)
            total_hist = label_histogram(examples)
            for label, count in total_hist.items():
                assert abs(train_hist.get(label, 0) - round(0.7 * count)) <= 1

    def test_singleton_label_warns_and_goes_to_train(self):
        examples = [make_example(0, "solo")] + [make_example(i, "big") for i in range(1, 9)]
        with pytest.warns(DegenerateClassWarning):
            sc = split(examples, 0.7, seed=0)
        assert any(ex.label == "solo" for ex in sc.train)
        assert all(ex.label != "solo" for ex in sc.test)

    def test_serialization_byte_identical(self, tmp_path):
        examples = [make_example(i, i % 2) for i in range(20)]
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_corpus(split(examples, 0.7, seed=5), a)
        write_corpus(split(examples, 0.7, seed=5), b)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_fraction_rejected(self):
        examples = [make_example(i, i % 2) for i in range(4)]
        with pytest.raises(ValueError):
            split(examples, 1.0, seed=0)
        with pytest.raises(ValueError):
            split(examples[:1], 0.7, seed=0)


class TestAssembleTask:
    def test_severity_needs_only_heladepdet(self):
        posts = [
            make_post(i, source="HelaDepDet", raw_label=lbl)
            for i, lbl in enumerate(["minimum", "mild", "moderate", "severe"])
        ]
        out = assemble_task(TaskKind.SEVERITY, {"HelaDepDet": posts})
        assert sorted(ex.label for ex in out) == [0, 1, 2, 3]

    def test_binary_missing_aita(self):
        datasets = {
            src: [make_post(0, source=src, raw_label="depression")]
            for src in ("MHB", "CAMS", "HelaDepDet", "RMHD", "DepressionEmo")
        }
        with pytest.raises(MissingDataset, match="AITA"):
            assemble_task(TaskKind.BINARY, datasets)

    def test_multi_source_fixture_hand_traced(self):
        # MHB: dup pair collapses to one depression post, plus one ptsd (excluded)
        # RMHD: one anxiety -> Anxiety, one depression -> Depression
        datasets = {
            "MHB": [
                Post("MHB:0", "same words", "MHB", "depression"),
                Post("MHB:1", "same  words", "MHB", "depression"),
                Post("MHB:2", "trauma post", "MHB", "ptsd"),
            ],
            "RMHD": [
                Post("RMHD:0", "worry post", "RMHD", "anxiety"),
                Post("RMHD:1", "down post", "RMHD", "depression"),
                Post("RMHD:2", "flashback post", "RMHD", "PTSD"),
            ],
        }
        stats: dict = {}
        out = assemble_task(TaskKind.DIFFERENTIAL, datasets, stats=stats)
        assert label_histogram(out) == {"Depression": 2, "PTSD": 2, "Anxiety": 1}
        assert stats["loaded"] == {"MHB": 3, "RMHD": 3}
        assert stats["deduped"] == {"MHB": 2, "RMHD": 3}
        assert stats["mapped"] == {"MHB": 2, "RMHD": 3}

    def test_stage_order_dedupe_then_filter_then_map(self):
        # nine 3-token posts plus one duplicated 50-token outlier: dedupe first
        # leaves 10 unique, then the band keeps token counts in [3, 3]
        posts = [make_post(i, f"short post {i}", source="HelaDepDet", raw_label="mild") for i in range(9)]
        long_text = " ".join(["tok"] * 50)
        posts += [
            Post("HelaDepDet:9", long_text, "HelaDepDet", "severe"),
            Post("HelaDepDet:10", long_text, "HelaDepDet", "severe"),
        ]
        out = assemble_task(TaskKind.SEVERITY, {"HelaDepDet": posts})
        assert label_histogram(out) == {1: 9}

    def test_labels_always_in_task_space(self):
        rng = np.random.default_rng(31)
        raw = ["minimum", "mild", "moderate", "severe"]
        posts = [
            make_post(i, f"text {i}", source="HelaDepDet", raw_label=raw[rng.integers(0, 4)])
            for i in range(50)
        ]
        out = assemble_task(TaskKind.SEVERITY, {"HelaDepDet": posts})
        assert {ex.label for ex in out} <= set(TaskKind.SEVERITY.labels)


def _has_singleton(labels) -> bool:
    _, counts = np.unique(labels, return_counts=True)
    return bool((counts == 1).any())


class _nullcontext:
    def __enter__(self):
        return None

    def __exit__(self, *exc):
        return False
