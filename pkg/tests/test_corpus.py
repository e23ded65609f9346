from __future__ import annotations

import random

import pytest

from svagree.corpus import (
    MatchError,
    build_index,
    harvest,
    index_size,
    iter_documents,
    scan_corpus,
    scan_tokens,
    tokenize,
)
from svagree.generator import Source, dataset_to_jsonl, generate, read_dataset, write_dataset
from svagree.lexicon import Number, make_lexicon
from svagree.templates import SlotCategory, builtin_template, builtin_templates

from synthetic_vocab import synthetic_lexicon
from naive_match import naive_scan, project_records


def test_tokenize_separates_terminal_punctuation():
    assert tokenize("The plate breaks.") == ["The", "plate", "breaks", "."]
    assert tokenize("really?! yes") == ["really", "?", "!", "yes"]
    assert tokenize("a,b") == ["a,b"]  # only terminal punctuation is peeled
    assert tokenize("wait,") == ["wait", ","]
    assert tokenize("") == []
    assert tokenize(".") == ["."]


def test_index_entry_counts():
    lex = make_lexicon(nouns=[("boy", "boys")], verbs=[("plays", "play")],
                       determiners=["the"], prepositions=["near"])
    idx = build_index(lex)
    open_class = [w for w in ("boy", "boys", "plays", "play") if w in idx.entries]
    assert len(open_class) == 4
    # total entries = sum over categories of distinct forms:
    # 2 noun + 2 verb + 1 det + 1 prep + that + and
    assert index_size(idx) == 2 + 2 + 1 + 1 + 1 + 1
    assert idx.readings("plays", SlotCategory.VERB)[0].number is Number.SINGULAR


def test_ambiguous_form_has_two_readings():
    lex = make_lexicon(nouns=[("glow", "glows")], verbs=[("glows", "glow")],
                       determiners=["the"])
    idx = build_index(lex)
    readings = idx.entries["glows"]
    cats = {r.category for r in readings}
    assert cats == {SlotCategory.NOUN, SlotCategory.VERB}
    assert {r.number for r in readings} == {Number.PLURAL, Number.SINGULAR}


def test_scan_example_prepositional_phrase(default_lexicon, all_templates):
    idx = build_index(default_lexicon)
    tokens = tokenize("the plate near the glasses breaks .")
    recs = scan_tokens(tokens, all_templates, idx, "d0")
    assert len(recs) == 1
    s = recs[0].stimulus
    assert s.template_id == "C"
    assert s.cue_number is Number.SINGULAR
    assert s.attractor_number is Number.PLURAL
    assert s.correct_form == "breaks" and s.incorrect_form == "break"
    assert s.tokens == ("the", "plate", "near", "the", "glasses", "breaks", ".")
    assert s.source is Source.WIKI and recs[0].token_offset == 0


def test_empty_corpus_empty_result(all_templates, default_lexicon):
    idx = build_index(default_lexicon)
    assert scan_tokens([], all_templates, idx) == []


def test_surface_case_preserved_in_record(default_lexicon, all_templates):
    idx = build_index(default_lexicon)
    recs = scan_tokens(tokenize("The boy laughs ."), all_templates, idx)
    assert recs[0].surface_tokens[0] == "The"
    assert recs[0].stimulus.tokens[0] == "the"


def test_matches_do_not_cross_sentence_boundaries(default_lexicon):
    idx = build_index(default_lexicon)
    # "boy laughs . the" would otherwise let A start before the period
    tokens = tokenize("the boy . laughs the boy laughs .")
    recs = scan_tokens(tokens, [builtin_template("A")], idx)
    assert [r.token_offset for r in recs] == [4]


def test_same_template_overlaps_keep_earliest(default_lexicon):
    idx = build_index(default_lexicon)
    # B matches at 0, 3 and 6; the match at 3 overlaps the accepted one at 0
    # and is dropped, while the one at 6 starts exactly at its end.
    tokens = "the boy knows the girls chase the cats run the dogs sleep".split()
    recs = scan_tokens(tokens, [builtin_template("B")], idx)
    assert [r.token_offset for r in recs] == [0, 6]


def test_string_identical_structures_both_match(default_lexicon):
    idx = build_index(default_lexicon)
    tokens = tokenize("the mouse that the cats chase runs .")
    recs = scan_tokens(tokens, [builtin_template("F"), builtin_template("G")], idx)
    ids = sorted(r.stimulus.template_id for r in recs)
    assert ids == ["F", "G"]
    f = next(r.stimulus for r in recs if r.stimulus.template_id == "F")
    g = next(r.stimulus for r in recs if r.stimulus.template_id == "G")
    assert f.correct_form == "runs" and g.correct_form == "chase"
    assert f.cue_number is Number.SINGULAR and g.cue_number is Number.PLURAL
    assert f.attractor_number is Number.PLURAL and g.attractor_index is None


def test_wiki_attractor_recorded_as_found(default_lexicon):
    idx = build_index(default_lexicon)
    # congruent attractor: both singular; generation would forbid this but
    # natural data records it as observed
    recs = scan_tokens(tokenize("the plate near the glass breaks ."),
                       [builtin_template("C")], idx)
    assert recs[0].stimulus.attractor_number is Number.SINGULAR
    assert recs[0].stimulus.cue_number is Number.SINGULAR


def test_scan_corpus_dir_and_parallel_determinism(tmp_path, default_lexicon, all_templates):
    idx = build_index(default_lexicon)
    docs = {
        "b.txt": "the boy laughs .\n\nthe plate near the glasses breaks .",
        "a.txt": "the cat that chases the mice runs .",
        "sub/c.txt": "no matches here at all .\n\nthe boys laugh .",
    }
    for name, text in docs.items():
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    serial = scan_corpus(tmp_path, all_templates, idx)
    parallel = scan_corpus(tmp_path, all_templates, idx, jobs=4)
    assert serial == parallel
    assert [r.document_id for r in serial] == sorted(r.document_id for r in serial)
    assert serial[0].document_id == "a.txt#0"
    capped = scan_corpus(tmp_path, all_templates, idx, caps=1)
    by_template = {}
    for r in capped:
        by_template.setdefault(r.stimulus.template_id, []).append(r)
    assert all(len(v) == 1 for v in by_template.values())
    full_first = {tid: recs[0] for tid, recs in by_template.items()}
    for r in serial:
        tid = r.stimulus.template_id
        if tid in full_first:
            assert full_first[tid] == r
            del full_first[tid]


def test_iter_documents_blank_line_blocks(tmp_path):
    (tmp_path / "x.txt").write_text("one doc\n\n\nsecond doc\n   \nthird doc")
    ids = [doc_id for doc_id, _ in iter_documents(tmp_path)]
    assert ids == ["x.txt#0", "x.txt#1", "x.txt#2"]


# --- oracle equivalence ---------------------------------------------------------

def random_corpus(rng: random.Random, lex, templates, max_tokens=400) -> list[str]:
    from svagree.lexicon import all_forms
    bag = sorted(all_forms(lex)) + ["zzq", "blorp", "."] * 6
    tokens: list[str] = []
    while len(tokens) < max_tokens:
        if rng.random() < 0.25:
            t = rng.choice(templates)
            d = generate(t, lex, 2, seed=rng.randrange(2**32))
            tokens.extend(rng.choice(d.items).tokens)
        else:
            tokens.extend(rng.choice(bag) for _ in range(rng.randrange(1, 12)))
    return tokens[:max_tokens]


@pytest.mark.parametrize("trial", range(12))
def test_scan_matches_naive_matcher(trial, all_templates):
    lex = synthetic_lexicon()
    rng = random.Random(9_000 + trial)
    tokens = random_corpus(rng, lex, all_templates)
    idx = build_index(lex)
    got = sorted(project_records(scan_tokens(tokens, all_templates, idx)))
    want = sorted(naive_scan(tokens, all_templates, lex))
    assert got == want


def test_scan_matches_naive_with_caps(all_templates):
    lex = synthetic_lexicon()
    rng = random.Random(4242)
    tokens = random_corpus(rng, lex, all_templates, max_tokens=600)
    idx = build_index(lex)
    caps = {"A": 2, "C": 0, "B": 1}
    from svagree.corpus import _apply_caps, _normalize_caps
    got = _apply_caps(scan_tokens(tokens, all_templates, idx),
                      _normalize_caps(all_templates, caps))
    want = naive_scan(tokens, all_templates, lex, caps=caps)
    assert sorted(project_records(got)) == sorted(want)


# --- harvest ---------------------------------------------------------------------

def _records(default_lexicon, n=6):
    idx = build_index(default_lexicon)
    text = " ".join(["the boy laughs .", "the girls laugh .", "the cat runs .",
                     "the dogs run .", "the window fails .", "the doors open ."][:n])
    return scan_tokens(tokenize(text), [builtin_template("A")], idx, "doc")


def test_harvest_first_n_in_scan_order(default_lexicon):
    records = _records(default_lexicon)
    d = harvest(records, 2)
    assert d.items == [records[0].stimulus, records[1].stimulus]
    assert d.source is Source.WIKI and d.template_id == "A"


def test_harvest_n_zero(default_lexicon):
    d = harvest(_records(default_lexicon), 0)
    assert d.items == []


def test_harvest_insufficient(default_lexicon):
    records = _records(default_lexicon)
    with pytest.raises(MatchError, match="need"):
        harvest(records, 100)
    assert len(harvest(records, 100, truncate=True).items) == len(records)


def test_harvest_balance(default_lexicon):
    records = _records(default_lexicon)
    d = harvest(records, 4, balance=True)
    sg = sum(1 for s in d.items if s.cue_number is Number.SINGULAR)
    assert sg == 2 and len(d.items) == 4
    # order preserved within the selection
    traces = [s.seed_trace for s in d.items]
    all_traces = [r.stimulus.seed_trace for r in records]
    assert traces == [t for t in all_traces if t in set(traces)]


def test_harvest_rejects_mixed_templates(default_lexicon):
    idx = build_index(default_lexicon)
    recs = scan_tokens(tokenize("the boy laughs . the plate near the glasses breaks ."),
                       builtin_templates(), idx, "doc")
    with pytest.raises(MatchError, match="mix"):
        harvest(recs, 1)


def test_harvest_round_trip(tmp_path, default_lexicon):
    records = _records(default_lexicon)
    d = harvest(records, 4)
    path = write_dataset(d, tmp_path / "wiki_A.jsonl")
    loaded = read_dataset(path)
    assert loaded.items == d.items
    assert dataset_to_jsonl(loaded) == dataset_to_jsonl(d)
