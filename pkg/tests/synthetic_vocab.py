from __future__ import annotations

from svagree import make_lexicon


def synthetic_lexicon(n_nouns: int = 50, n_verbs: int = 50, n_overlap: int = 10):
    """A generated lexicon with deliberately ambiguous forms: `n_overlap`
    noun pairs fully share their surface forms with verb pairs."""
    nouns = [(f"blim{i}", f"blim{i}s") for i in range(n_nouns)]
    verbs = [(f"dren{i}s", f"dren{i}") for i in range(n_verbs)]
    nouns += [(f"quax{i}", f"quax{i}s") for i in range(n_overlap)]
    verbs += [(f"quax{i}s", f"quax{i}") for i in range(n_overlap)]
    return make_lexicon(
        nouns=nouns,
        verbs=verbs,
        stative_verbs=[("prell{}s".format(i), "prell{}".format(i)) for i in range(4)],
        determiners=["my", "your", "his", "her", "its", "our", "their", "the"],
        prepositions=["in", "near", "on", "behind", "beside", "above", "below", "around"],
    )
