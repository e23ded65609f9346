from __future__ import annotations

import pytest

from svagree import builtin_templates, load_lexicon, make_lexicon


@pytest.fixture(scope="session")
def default_lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def all_templates():
    return builtin_templates()


@pytest.fixture()
def tiny_lexicon():
    # One forced choice per slot category; handy for exact expectations.
    return make_lexicon(
        nouns=[("window", "windows")],
        verbs=[("fails", "fail")],
        stative_verbs=[("knows", "know")],
        determiners=["the"],
        prepositions=["near"],
    )
