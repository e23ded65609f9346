"""Linear corpus scanning for template-shaped token sequences.

Documents are tokenized, split at sentence-final punctuation, and checked
against every template's category signature with a per-template sliding
window. Dictionary membership (not statistical tagging) decides categories;
ambiguous tokens carry multiple readings and the first satisfying assignment
in canonical reading order is recorded.
"""
from __future__ import annotations

import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .generator import Dataset, Source, Stimulus
from .lexicon import Lexicon, Number
from .templates import NumberPolicy, SlotCategory, Template

SENTENCE_FINAL = frozenset({".", "!", "?"})
_PEELABLE = frozenset({".", "!", "?", ",", ";", ":"})


class MatchError(ValueError):
    """Harvesting cannot satisfy its contract."""


@dataclass(frozen=True, order=True)
class Reading:
    """One dictionary interpretation of a surface form."""
    category: SlotCategory
    number: Number | None
    pair_index: int

    def sort_key(self) -> tuple[int, int]:
        rank = {Number.SINGULAR: 0, Number.PLURAL: 1, None: 2}[self.number]
        return (rank, self.pair_index)


@dataclass(frozen=True)
class DictionaryIndex:
    lexicon: Lexicon
    entries: Mapping[str, tuple[Reading, ...]]

    def readings(self, folded: str, category: SlotCategory) -> list[Reading]:
        return [r for r in self.entries.get(folded, ()) if r.category is category]


def build_index(lex: Lexicon) -> DictionaryIndex:
    """Word -> readings lookup covering every open- and closed-class form."""
    entries: dict[str, list[Reading]] = {}

    def add(form: str, category: SlotCategory, number: Number | None, pair_index: int) -> None:
        entries.setdefault(form, []).append(Reading(category, number, pair_index))

    for i, p in enumerate(lex.nouns):
        add(p.singular, SlotCategory.NOUN, Number.SINGULAR, i)
        add(p.plural, SlotCategory.NOUN, Number.PLURAL, i)
    for i, p in enumerate(lex.verbs):
        add(p.third_singular, SlotCategory.VERB, Number.SINGULAR, i)
        add(p.plural_base, SlotCategory.VERB, Number.PLURAL, i)
    for i, p in enumerate(lex.stative_verbs):
        add(p.third_singular, SlotCategory.STATIVE_VERB, Number.SINGULAR, i)
        add(p.plural_base, SlotCategory.STATIVE_VERB, Number.PLURAL, i)
    for i, w in enumerate(lex.determiners):
        add(w, SlotCategory.DET, None, i)
    for i, w in enumerate(lex.prepositions):
        add(w, SlotCategory.PREP, None, i)
    add(lex.complementizer, SlotCategory.COMP, None, 0)
    add(lex.conjunction, SlotCategory.CONJ, None, 0)

    frozen = {w: tuple(sorted(rs, key=lambda r: (r.category.value,) + r.sort_key()))
              for w, rs in entries.items()}
    return DictionaryIndex(lex, frozen)


def index_size(idx: DictionaryIndex) -> int:
    return sum(len(rs) for rs in idx.entries.values())


@dataclass(frozen=True)
class MatchRecord:
    stimulus: Stimulus
    document_id: str
    token_offset: int
    surface_tokens: tuple[str, ...]


# --- tokenization -------------------------------------------------------------

def tokenize(text: str) -> list[str]:
    """Whitespace tokenization with terminal punctuation split off."""
    tokens: list[str] = []
    for chunk in text.split():
        peeled: list[str] = []
        while len(chunk) > 1 and chunk[-1] in _PEELABLE:
            peeled.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.append(chunk)
        tokens.extend(reversed(peeled))
    return tokens


def iter_documents(corpus_dir: str | Path) -> Iterator[tuple[str, str]]:
    """Yield (document_id, text) for blank-line-separated blocks, in
    deterministic path order."""
    corpus_dir = Path(corpus_dir)
    for path in sorted(corpus_dir.rglob("*")):
        if not path.is_file():
            continue
        text = path.read_text(encoding="utf-8")
        blocks = [b for b in (blk.strip() for blk in re.split(r"\n\s*\n", text)) if b]
        rel = path.relative_to(corpus_dir).as_posix()
        for i, block in enumerate(blocks):
            yield f"{rel}#{i}", block


# --- matching -----------------------------------------------------------------

def _match_at(tokens: Sequence[str], offset: int, t: Template,
              idx: DictionaryIndex) -> list[Reading | None] | None:
    """First satisfying reading assignment for `t` at `offset`, else None.

    Candidate readings per slot are tried in canonical order (singular before
    plural, then pair index), backtracking left to right; the first full
    assignment in that lexicographic order wins. Targets must agree with the
    cue and `same_as_slot` verbs with their local subject; attractor and free
    slots are unconstrained and their observed numbers are recorded.
    """
    slots = t.slots
    n = len(slots)
    chosen: list[Reading | None] = [None] * n
    numbers: list[Number | None] = [None] * n

    def constraint_ok(slot, number: Number | None) -> bool:
        policy = slot.number_policy
        if policy is NumberPolicy.SAME_AS_CUE:
            return number is not None and number == numbers[t.cue_index]
        if policy is NumberPolicy.SAME_AS_SLOT:
            return number is not None and number == numbers[slot.agrees_with]
        return True

    def fill(k: int) -> bool:
        if k == n:
            return True
        slot = slots[k]
        token = tokens[offset + k]
        if slot.fixed_form is not None:
            return token == slot.fixed_form and fill(k + 1)
        for reading in sorted(idx.readings(token, slot.category), key=Reading.sort_key):
            if constraint_ok(slot, reading.number):
                chosen[k] = reading
                numbers[k] = reading.number
                if fill(k + 1):
                    return True
        chosen[k] = None
        numbers[k] = None
        return False

    return chosen if fill(0) else None


def _record(tokens: Sequence[str], surface: Sequence[str], offset: int, t: Template,
            idx: DictionaryIndex, assignment: Sequence[Reading | None],
            document_id: str) -> MatchRecord:
    n = len(t.slots)
    span = [tokens[offset + i] for i in range(n)]
    span_surface = [surface[offset + i] for i in range(n)]
    # Sentence-final matches keep their period so the evaluation sentence is
    # terminated like a generated one.
    if offset + n < len(tokens) and tokens[offset + n] == ".":
        span.append(".")
        span_surface.append(surface[offset + n])
    cue_reading = assignment[t.cue_index]
    target_reading = assignment[t.target_index]
    assert cue_reading is not None and target_reading is not None
    target_pair = idx.lexicon.verbs[target_reading.pair_index] \
        if target_reading.category is SlotCategory.VERB \
        else idx.lexicon.stative_verbs[target_reading.pair_index]
    attractor_number = None
    if t.attractor_index is not None:
        attractor_reading = assignment[t.attractor_index]
        assert attractor_reading is not None
        attractor_number = attractor_reading.number
    assert target_reading.number is not None
    stim = Stimulus(
        tokens=tuple(span),
        template_id=t.id,
        cue_index=t.cue_index,
        cue_number=cue_reading.number,
        target_index=t.target_index,
        correct_form=span[t.target_index],
        incorrect_form=target_pair.form(target_reading.number.opposite),
        attractor_index=t.attractor_index,
        attractor_number=attractor_number,
        source=Source.WIKI,
        seed_trace=f"{document_id}:{offset}",
    )
    return MatchRecord(stim, document_id, offset, tuple(span_surface))


def scan_tokens(surface_tokens: Sequence[str], templates: Sequence[Template],
                idx: DictionaryIndex, document_id: str = "") -> list[MatchRecord]:
    """Single-pass match of all templates over one document's tokens.

    Within each sentence (spans never cross sentence-final punctuation),
    every offset is tried; overlapping matches of the same template keep the
    earliest, and all templates are matched independently.
    """
    folded = [tok.casefold() for tok in surface_tokens]
    records: list[MatchRecord] = []
    last_end = {t.id: 0 for t in templates}
    boundaries = [i for i, tok in enumerate(folded) if tok in SENTENCE_FINAL]
    sentence_end = {}
    start = 0
    for b in boundaries + [len(folded)]:
        for i in range(start, min(b + 1, len(folded))):
            sentence_end[i] = b
        start = b + 1
    for offset in range(len(folded)):
        end_limit = sentence_end.get(offset, len(folded))
        for t in templates:
            n = len(t.slots)
            if offset < last_end[t.id] or offset + n > end_limit:
                continue
            assignment = _match_at(folded, offset, t, idx)
            if assignment is None:
                continue
            records.append(_record(folded, surface_tokens, offset, t, idx,
                                   assignment, document_id))
            last_end[t.id] = offset + n
    return records


def _scan_document(args: tuple) -> list[MatchRecord]:
    doc_id, text, templates, idx = args
    return scan_tokens(tokenize(text), templates, idx, doc_id)


def _normalize_caps(templates: Sequence[Template],
                    caps: int | Mapping[str, int] | None) -> dict[str, int | None]:
    if caps is None:
        return {t.id: None for t in templates}
    if isinstance(caps, int):
        if caps < 0:
            raise MatchError("cap must be >= 0")
        return {t.id: caps for t in templates}
    for tid, cap in caps.items():
        if cap is not None and cap < 0:
            raise MatchError(f"cap for template {tid} must be >= 0")
    return {t.id: caps.get(t.id) for t in templates}


def _apply_caps(records: Iterable[MatchRecord],
                caps: dict[str, int | None]) -> list[MatchRecord]:
    taken: dict[str, int] = {tid: 0 for tid in caps}
    kept: list[MatchRecord] = []
    for rec in records:
        tid = rec.stimulus.template_id
        cap = caps.get(tid)
        if cap is not None and taken[tid] >= cap:
            continue
        taken[tid] += 1
        kept.append(rec)
    return kept


def scan_corpus(corpus_dir: str | Path, templates: Sequence[Template],
                idx: DictionaryIndex, caps: int | Mapping[str, int] | None = None,
                *, jobs: int = 1) -> list[MatchRecord]:
    """Scan a directory of extracted plain-text documents.

    Parallelism is over documents; shard results are merged in document
    order, so the output is identical for any `jobs` value.
    """
    cap_map = _normalize_caps(templates, caps)
    docs = list(iter_documents(corpus_dir))
    records: list[MatchRecord] = []
    if jobs > 1 and len(docs) > 1:
        work = [(doc_id, text, tuple(templates), idx) for doc_id, text in docs]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_scan_document, work, chunksize=8):
                records.extend(part)
    else:
        needed = {tid for tid, cap in cap_map.items() if cap is None or cap > 0}
        counts = {tid: 0 for tid in cap_map}
        for doc_id, text in docs:
            if not needed:
                break
            for rec in _scan_document((doc_id, text, tuple(templates), idx)):
                records.append(rec)
                tid = rec.stimulus.template_id
                counts[tid] += 1
                cap = cap_map[tid]
                if cap is not None and counts[tid] >= cap:
                    needed.discard(tid)
    return _apply_caps(records, cap_map)


# --- harvesting ---------------------------------------------------------------

def harvest(records: Sequence[MatchRecord], n: int, *, balance: bool = False,
            truncate: bool = False) -> Dataset:
    """Select the first `n` records in scan order into an evaluation dataset.

    With `balance`, the first n/2 singular-cue and n/2 plural-cue records
    are taken instead. Raises unless `truncate` allows a short result.
    """
    if n < 0:
        raise MatchError("n must be >= 0")
    template_ids = {r.stimulus.template_id for r in records}
    if len(template_ids) > 1:
        raise MatchError(f"records mix templates {sorted(template_ids)}; harvest one at a time")
    if n == 0:
        tid = next(iter(template_ids), "A")
        return Dataset([], tid, Source.WIKI, None)
    if balance:
        if n % 2 != 0:
            raise MatchError("balanced harvest requires even n")
        per = n // 2
        sg = [i for i, r in enumerate(records) if r.stimulus.cue_number is Number.SINGULAR]
        pl = [i for i, r in enumerate(records) if r.stimulus.cue_number is Number.PLURAL]
        if (len(sg) < per or len(pl) < per) and not truncate:
            raise MatchError(
                f"need {per} per number, have {len(sg)} singular / {len(pl)} plural")
        k = min(per, len(sg), len(pl))
        chosen = [records[i] for i in sorted(sg[:k] + pl[:k])]
    else:
        if len(records) < n and not truncate:
            raise MatchError(f"need {n} records, have {len(records)}")
        chosen = list(records[:n])
    tid = next(iter(template_ids))
    return Dataset([r.stimulus for r in chosen], tid, Source.WIKI, None)


def provenance(records: Sequence[MatchRecord]) -> list[dict]:
    return [
        {
            "index": i,
            "document_id": r.document_id,
            "token_offset": r.token_offset,
            "surface_tokens": list(r.surface_tokens),
        }
        for i, r in enumerate(records)
    ]


def write_provenance(records: Sequence[MatchRecord], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(provenance(records), indent=2, sort_keys=True) + "\n", encoding="utf-8")
