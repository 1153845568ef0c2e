from __future__ import annotations

import pytest

from mindsift.corpus import LabeledExample, Post

TINY_LEXICON = "%\n1\tnegemo\n2\tcogproc\n%\nsad\t1\ncry*\t1\nthink\t2\n"


def make_post(i, text=None, source="CAMS", raw_label="depression"):
    return Post(
        id=f"{source}:{i}",
        text=text if text is not None else f"post text number {i}",
        source=source,
        raw_label=raw_label,
    )


def make_example(i, label, source="CAMS", text=None):
    return LabeledExample(post=make_post(i, text=text, source=source), label=label)


@pytest.fixture
def tiny_lexicon_text():
    return TINY_LEXICON
