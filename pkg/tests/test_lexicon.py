from __future__ import annotations

import math

import numpy as np
import pytest

from mindsift.errors import (
    DimensionMismatch,
    EmptyLexicon,
    InsufficientRows,
    MalformedHeader,
    UnknownCategoryId,
)
from mindsift.lexicon import (
    apply_standardizer,
    default_lexicon_path,
    extract_features,
    feature_matrix,
    fit_standardizer,
    load_lexicon,
    parse_lexicon,
    serialize_lexicon,
    tokenize,
)


class TestParse:
    def test_direct_parse(self, tiny_lexicon_text):
        lex = parse_lexicon(tiny_lexicon_text)
        assert list(lex.categories.items()) == [("1", "negemo"), ("2", "cogproc")]
        assert lex.exact_entries == {"sad": frozenset({"1"}), "think": frozenset({"2"})}
        assert lex.stem_entries == {"cry": frozenset({"1"})}

    def test_undeclared_category_id(self):
        with pytest.raises(UnknownCategoryId):
            parse_lexicon("%\n1\tnegemo\n%\nsad\t7\n")

    def test_duplicate_word_merges_categories(self):
        lex = parse_lexicon("%\n1\tnegemo\n2\tcogproc\n%\nsad\t1\nsad\t2\n")
        assert lex.exact_entries["sad"] == frozenset({"1", "2"})

    def test_missing_opening_marker(self):
        with pytest.raises(MalformedHeader):
            parse_lexicon("1\tnegemo\n%\nsad\t1\n")

    def test_unclosed_header(self):
        with pytest.raises(MalformedHeader):
            parse_lexicon("%\n1\tnegemo\nsad\t1\n")

    def test_entry_without_ids(self):
        with pytest.raises(MalformedHeader):
            parse_lexicon("%\n1\tnegemo\n%\nsad\n")

    def test_no_entries_is_empty(self):
        with pytest.raises(EmptyLexicon):
            parse_lexicon("%\n1\tnegemo\n%\n")

    def test_serialize_round_trip(self):
        lex = load_lexicon(default_lexicon_path())
        again = parse_lexicon(serialize_lexicon(lex))
        assert again == lex
        assert list(again.categories) == list(lex.categories)

    def test_bundled_lexicon_is_rich_enough(self):
        lex = load_lexicon(default_lexicon_path())
        assert lex.dimension >= 8
        names = set(lex.category_names)
        assert {"posemo", "negemo", "cogproc", "i"} <= names


class TestTokenize:
    def test_apostrophe_word(self):
        assert tokenize("I can't sleep.") == ["i", "can't", "sleep"]

    def test_digits_are_separators(self):
        assert tokenize("2am again") == ["am", "again"]

    def test_empty(self):
        assert tokenize("") == []

    def test_punctuation_and_case(self):
        assert tokenize("SAD!!! so-sad... (really)") == ["sad", "so", "sad", "really"]


class TestExtractFeatures:
    def test_hand_counted_frequency(self, tiny_lexicon_text):
        lex = parse_lexicon(tiny_lexicon_text)
        values = extract_features(lex, "i feel sad and crying")
        # 5 tokens; "sad" exact + "crying" via stem cry* -> negemo 2/5
        assert values[0] == pytest.approx(0.4, abs=0)
        assert values[1] == 0.0

    def test_no_matches_all_zero(self, tiny_lexicon_text):
        lex = parse_lexicon(tiny_lexicon_text)
        assert np.all(extract_features(lex, "completely unrelated words") == 0.0)

    def test_exact_and_stem_both_fire_once(self):
        lex = parse_lexicon("%\n1\taffect\n2\tverbs\n%\ncry\t1\ncry*\t2\n")
        values = extract_features(lex, "cry")
        assert values.tolist() == [1.0, 1.0]

    def test_longest_stem_wins(self):
        lex = parse_lexicon("%\n4\tposemo\n8\tsad\n%\nhope*\t4\nhopeless*\t8\n")
        assert extract_features(lex, "hopeless").tolist() == [0.0, 1.0]
        assert extract_features(lex, "hopeful").tolist() == [1.0, 0.0]

    def test_same_category_not_double_counted(self):
        lex = parse_lexicon("%\n1\tnegemo\n%\ncry\t1\ncry*\t1\n")
        assert extract_features(lex, "cry").tolist() == [1.0]

    def test_bag_of_words_order_invariance(self, tiny_lexicon_text):
        lex = parse_lexicon(tiny_lexicon_text)
        rng = np.random.default_rng(5)
        words = ["sad", "crying", "think", "and", "i", "feel", "cry", "thinking"]
        for _ in range(10):
            perm = rng.permutation(len(words))
            base = extract_features(lex, " ".join(words))
            shuffled = extract_features(lex, " ".join(words[i] for i in perm))
            assert np.array_equal(base, shuffled)

    def test_values_stay_in_unit_interval(self):
        lex = load_lexicon(default_lexicon_path())
        rng = np.random.default_rng(9)
        vocab = ["sad", "happy", "zq", "think", "cry", "we", "party", "x2y", "don't"]
        for _ in range(25):
            n = int(rng.integers(0, 30))
            text = " ".join(vocab[i] for i in rng.integers(0, len(vocab), size=n))
            values = extract_features(lex, text)
            assert np.all(values >= 0.0) and np.all(values <= 1.0)

    def test_empty_text_zero_vector(self, tiny_lexicon_text):
        lex = parse_lexicon(tiny_lexicon_text)
        assert np.all(extract_features(lex, "1234 !!") == 0.0)


class TestStandardizer:
    def test_population_std_hand_computed(self):
        s = fit_standardizer(np.array([[1.0], [2.0], [3.0]]))
        assert s.mean[0] == pytest.approx(2.0, abs=0)
        assert s.std[0] == pytest.approx(math.sqrt(2.0 / 3.0), abs=1e-12)
        assert s.std[0] == pytest.approx(0.81650, abs=1e-5)
        assert s.fitted_on == 3

    def test_z_scores_hand_computed(self):
        x = np.array([[1.0], [2.0], [3.0]])
        z = apply_standardizer(fit_standardizer(x), x)
        assert z[:, 0] == pytest.approx([-1.22474, 0.0, 1.22474], abs=1e-5)

    def test_constant_column_maps_to_zero(self):
        x = np.array([[0.4, 1.0], [0.4, 3.0]])
        s = fit_standardizer(x)
        assert s.mean[0] == 0.4 and s.std[0] == 0.0
        z = apply_standardizer(s, np.array([[99.0, 2.0]]))
        assert z[0, 0] == 0.0

    def test_single_row_rejected(self):
        with pytest.raises(InsufficientRows):
            fit_standardizer(np.ones((1, 4)))

    def test_dimension_mismatch(self):
        s = fit_standardizer(np.random.default_rng(0).random((5, 64)))
        with pytest.raises(DimensionMismatch):
            apply_standardizer(s, np.zeros(10))

    def test_standardized_train_matrix_is_zero_mean_unit_std(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            x = rng.random((int(rng.integers(2, 40)), 6)) * rng.integers(1, 5)
            x[:, 3] = 0.25  # one constant dimension
            z = apply_standardizer(fit_standardizer(x), x)
            assert np.all(np.abs(z.mean(axis=0)) < 1e-9)
            stds = z.std(axis=0)
            nonconst = x.std(axis=0) > 0
            assert np.all(np.abs(stds[nonconst] - 1.0) < 1e-9)
            assert np.all(stds[~nonconst] == 0.0)


def test_feature_matrix_and_export(tmp_path, tiny_lexicon_text):
    lex = parse_lexicon(tiny_lexicon_text)
    texts = ["i feel sad", "think think", "nothing here"]
    matrix = feature_matrix(lex, texts)
    assert matrix.shape == (3, 2)
    from mindsift.lexicon import export_features

    out = tmp_path / "features.csv"
    export_features(out, ["a", "b", "c"], lex, matrix)
    lines = out.read_text().splitlines()
    assert lines[0] == "id,negemo,cogproc"
    assert len(lines) == 4
