"""Balanced nonce-stimulus generation and one-word-replacement ablations.

All randomness is counter-based: every draw is a pure function of the run
seed plus structural counters (item index, slot index, ...), so parallel
generation reproduces serial output byte for byte.
"""
from __future__ import annotations

import enum
import hashlib
import json
import struct
import weakref
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace as dc_replace
from pathlib import Path
from typing import Sequence

from .lexicon import Lexicon, Number
from .templates import (
    NumberPolicy,
    Slot,
    SlotCategory,
    SlotRole,
    Template,
    builtin_template,
)

GENERATOR_VERSION = "0.1.0"

SENTENCE_END = "."


class GenerationError(ValueError):
    """Generation or replacement cannot satisfy its contract."""


class Source(enum.Enum):
    NONCE = "NONCE"
    WIKI = "WIKI"
    ML = "ML"


@dataclass(frozen=True)
class Stimulus:
    tokens: tuple[str, ...]
    template_id: str
    cue_index: int
    cue_number: Number
    target_index: int
    correct_form: str
    incorrect_form: str
    attractor_index: int | None
    attractor_number: Number | None
    source: Source
    seed_trace: str

    def sentence(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Replacement:
    position: int
    original: str
    replacement: str
    preserved_number: Number | None


@dataclass
class Dataset:
    items: list[Stimulus]
    template_id: str
    source: Source
    generation_seed: int | None = None

    def __len__(self) -> int:
        return len(self.items)


# --- JSONL serialization ----------------------------------------------------

def stimulus_to_dict(s: Stimulus) -> dict:
    return {
        "tokens": list(s.tokens),
        "template_id": s.template_id,
        "cue_index": s.cue_index,
        "cue_number": s.cue_number.value,
        "target_index": s.target_index,
        "correct_form": s.correct_form,
        "incorrect_form": s.incorrect_form,
        "attractor_index": s.attractor_index,
        "attractor_number": s.attractor_number.value if s.attractor_number else None,
        "source": s.source.value,
        "seed_trace": s.seed_trace,
    }


def stimulus_from_dict(obj: dict) -> Stimulus:
    return Stimulus(
        tokens=tuple(obj["tokens"]),
        template_id=obj["template_id"],
        cue_index=obj["cue_index"],
        cue_number=Number(obj["cue_number"]),
        target_index=obj["target_index"],
        correct_form=obj["correct_form"],
        incorrect_form=obj["incorrect_form"],
        attractor_index=obj.get("attractor_index"),
        attractor_number=Number(obj["attractor_number"]) if obj.get("attractor_number") else None,
        source=Source(obj["source"]),
        seed_trace=obj["seed_trace"],
    )


def dataset_to_jsonl(d: Dataset) -> bytes:
    lines = [json.dumps(stimulus_to_dict(s), ensure_ascii=False, separators=(",", ":"))
             for s in d.items]
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def dataset_sidecar(d: Dataset, lexicon_hash: str | None = None) -> dict:
    return {
        "template_id": d.template_id,
        "source": d.source.value,
        "n": len(d.items),
        "generation_seed": d.generation_seed,
        "lexicon_hash": lexicon_hash,
        "generator_version": GENERATOR_VERSION,
    }


def write_dataset(d: Dataset, path: str | Path, *, lexicon_hash: str | None = None) -> Path:
    """Write a dataset as JSONL plus a `.meta.json` sidecar next to it."""
    path = Path(path)
    path.write_bytes(dataset_to_jsonl(d))
    sidecar = dataset_sidecar(d, lexicon_hash)
    path.with_suffix(path.suffix + ".meta.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    items = [stimulus_from_dict(json.loads(line))
             for line in path.read_text(encoding="utf-8").splitlines() if line]
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    meta: dict = {}
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if not items:
        # Empty datasets are representable only with a sidecar.
        if "template_id" not in meta:
            raise GenerationError(f"{path}: empty dataset and no sidecar metadata")
        return Dataset([], meta["template_id"], Source(meta["source"]),
                       meta.get("generation_seed"))
    template_id = items[0].template_id
    source = items[0].source
    for i, s in enumerate(items):
        if s.template_id != template_id or s.source != source:
            raise GenerationError(f"{path}:{i + 1}: mixed template ids or sources in one dataset")
    return Dataset(items, template_id, source, meta.get("generation_seed"))


# --- deterministic counter-based draws ---------------------------------------

_MASK64 = (1 << 64) - 1
_FMT = {n: f"<{n}Q" for n in range(1, 9)}


def _digest(seed: int, counters: tuple[int, ...]) -> int:
    fields = (seed & _MASK64,) + tuple(c & _MASK64 for c in counters)
    payload = struct.pack(_FMT[len(fields)], *fields)
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def _draw(seed: int, *counters: int, size: int) -> int:
    """Uniform index in [0, size), a pure function of (seed, counters)."""
    if size <= 0:
        raise GenerationError("cannot draw from an empty pool")
    return _digest(seed, counters) % size


def derive_seed(seed: int, *counters: int) -> int:
    """A new 64-bit seed derived from (seed, counters); used for sub-streams."""
    return _digest(seed, counters)


# --- form lookup helpers ------------------------------------------------------

_maps_cache: dict[int, dict] = {}


def _form_maps(lex: Lexicon) -> dict:
    """Per-lexicon lookup tables; first reading wins in canonical pair order.

    Cached by object identity: hashing the full Lexicon per lookup is far
    too slow for per-token use, and frozen instances never change.
    """
    cached = _maps_cache.get(id(lex))
    if cached is not None:
        return cached
    noun_number: dict[str, Number] = {}
    for p in lex.nouns:
        noun_number.setdefault(p.singular, Number.SINGULAR)
        noun_number.setdefault(p.plural, Number.PLURAL)
    verb_number: dict[str, Number] = {}
    for p in lex.verbs + lex.stative_verbs:
        verb_number.setdefault(p.third_singular, Number.SINGULAR)
        verb_number.setdefault(p.plural_base, Number.PLURAL)
    maps = {
        "noun_number": noun_number,
        "verb_number": verb_number,
        "verb_forms": {Number.SINGULAR: {p.third_singular for p in lex.verbs},
                       Number.PLURAL: {p.plural_base for p in lex.verbs}},
    }
    _maps_cache[id(lex)] = maps
    weakref.finalize(lex, _maps_cache.pop, id(lex), None)
    return maps


def noun_form_number(lex: Lexicon, form: str) -> Number | None:
    return _form_maps(lex)["noun_number"].get(form)


def verb_form_number(lex: Lexicon, form: str) -> Number | None:
    return _form_maps(lex)["verb_number"].get(form)


def _pool(lex: Lexicon, category: SlotCategory) -> Sequence:
    if category is SlotCategory.NOUN:
        return lex.nouns
    if category is SlotCategory.VERB:
        return lex.verbs
    if category is SlotCategory.STATIVE_VERB:
        return lex.stative_verbs
    if category is SlotCategory.DET:
        return lex.determiners
    if category is SlotCategory.PREP:
        return lex.prepositions
    raise GenerationError(f"category {category.value} has no sampling pool")


# --- generation ---------------------------------------------------------------

def _resolve_number(slot: Slot, cue_number: Number, numbers: dict[int, Number | None],
                    seed: int, item: int, attempt: int) -> Number | None:
    if slot.number_policy is NumberPolicy.NOT_APPLICABLE:
        return None
    if slot.number_policy is NumberPolicy.SAME_AS_CUE:
        return cue_number
    if slot.number_policy is NumberPolicy.OPPOSITE_OF_CUE:
        return cue_number.opposite
    if slot.number_policy is NumberPolicy.SAME_AS_SLOT:
        ref = numbers.get(slot.agrees_with)
        if ref is None:
            raise GenerationError(
                f"slot {slot.index} agrees with slot {slot.agrees_with}, "
                "which has no number at that point")
        return ref
    # FREE: independent fair draw per (item, slot)
    bit = _draw(seed, item, slot.index, 7, attempt, size=2)
    return Number.SINGULAR if bit == 0 else Number.PLURAL


def _build_item(t: Template, lex: Lexicon, seed: int, item: int, *,
                append_period: bool, avoid_collision: bool, attempt: int = 0) -> Stimulus:
    cue_number = Number.SINGULAR if item % 2 == 0 else Number.PLURAL
    tokens: list[str] = []
    numbers: dict[int, Number | None] = {}
    correct_form = ""
    incorrect_form = ""
    attractor_number: Number | None = None
    cue_form = ""
    for slot in t.slots:
        if slot.fixed_form is not None:
            numbers[slot.index] = None
            tokens.append(slot.fixed_form)
            continue
        number = _resolve_number(slot, cue_number, numbers, seed, item, attempt)
        if slot.role is SlotRole.CUE:
            number = cue_number
        numbers[slot.index] = number
        pool = _pool(lex, slot.category)
        if not pool:
            raise GenerationError(
                f"template {t.id}: empty {slot.category.value} pool in lexicon")
        idx = _draw(seed, item, slot.index, attempt, size=len(pool))
        entry = pool[idx]
        if slot.category in (SlotCategory.DET, SlotCategory.PREP):
            tokens.append(entry)
            continue
        if slot.category is SlotCategory.NOUN:
            form = entry.form(number)
            if slot.role is SlotRole.CUE:
                cue_form = form
            if slot.role is SlotRole.ATTRACTOR:
                attractor_number = number
            tokens.append(form)
            continue
        # verb slots; a collision with the cue's surface form is only possible
        # when that form doubles as a verb of the target's number
        if (slot.role is SlotRole.TARGET and avoid_collision and cue_form
                and slot.category is SlotCategory.VERB
                and cue_form in _form_maps(lex)["verb_forms"][number]):
            allowed = [p for p in pool if p.form(number) != cue_form]
            if allowed:
                entry = allowed[_draw(seed, item, slot.index, attempt, size=len(allowed))]
        form = entry.form(number)
        if slot.role is SlotRole.TARGET:
            correct_form = form
            incorrect_form = entry.form(number.opposite)
        tokens.append(form)
    if append_period:
        tokens.append(SENTENCE_END)
    return Stimulus(
        tokens=tuple(tokens),
        template_id=t.id,
        cue_index=t.cue_index,
        cue_number=cue_number,
        target_index=t.target_index,
        correct_form=correct_form,
        incorrect_form=incorrect_form,
        attractor_index=t.attractor_index,
        attractor_number=attractor_number,
        source=Source.NONCE,
        seed_trace=f"{seed}:{item}" if attempt == 0 else f"{seed}:{item}+{attempt}",
    )


def _unique_capacity(t: Template, lex: Lexicon) -> int:
    cap = 1
    for slot in t.slots:
        if slot.fixed_form is not None:
            continue
        n = len(_pool(lex, slot.category))
        if slot.category is SlotCategory.NOUN and slot.number_policy is NumberPolicy.FREE \
                and slot.role is not SlotRole.CUE:
            n *= 2
        cap *= max(n, 0)
        if cap > 1 << 62:
            return 1 << 62
    return cap


def _build_range(args: tuple) -> list[Stimulus]:
    t, lex, seed, start, stop, append_period, avoid_collision = args
    return [_build_item(t, lex, seed, i, append_period=append_period,
                        avoid_collision=avoid_collision)
            for i in range(start, stop)]


def generate(t: Template, lex: Lexicon, n: int, seed: int, *,
             append_period: bool = True, avoid_cue_target_collision: bool = True,
             unique: bool = False, jobs: int = 1) -> Dataset:
    """Generate `n` nonce stimuli, exactly n/2 singular-cue and n/2 plural-cue.

    Attractor slots are sampled with the number opposite the cue; determiners
    are drawn uniformly from the determiner list. Deterministic in
    (t, lex, n, seed) regardless of `jobs`. With `unique`, item token
    sequences are deduplicated (and generation is serial).
    """
    if n % 2 != 0:
        raise GenerationError(f"n must be even for balanced generation, got {n}")
    for slot in t.slots:
        if slot.fixed_form is None and not _pool(lex, slot.category):
            raise GenerationError(
                f"template {t.id}: empty {slot.category.value} pool in lexicon")
    if unique and n // 2 > _unique_capacity(t, lex):
        raise GenerationError(
            f"template {t.id}: cannot draw {n // 2} unique items per number "
            f"from {_unique_capacity(t, lex)} combinations")

    items: list[Stimulus]
    if unique:
        items = []
        seen: set[tuple[str, ...]] = set()
        for i in range(n):
            for attempt in range(10000):
                s = _build_item(t, lex, seed, i, append_period=append_period,
                                avoid_collision=avoid_cue_target_collision, attempt=attempt)
                if s.tokens not in seen:
                    seen.add(s.tokens)
                    items.append(s)
                    break
            else:
                raise GenerationError(
                    f"template {t.id}: could not find a fresh unique item for index {i}")
    elif jobs > 1 and n >= 4 * jobs:
        chunk = -(-n // jobs)
        ranges = [(t, lex, seed, lo, min(lo + chunk, n), append_period,
                   avoid_cue_target_collision) for lo in range(0, n, chunk)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            items = [s for part in pool.map(_build_range, ranges) for s in part]
    else:
        items = _build_range((t, lex, seed, 0, n, append_period,
                              avoid_cue_target_collision))
    return Dataset(items, t.id, Source.NONCE, seed)


# --- one-word replacement ------------------------------------------------------

def _observed_number(s: Stimulus, t: Template, lex: Lexicon, position: int) -> Number | None:
    """Number carried by the token at `position`, from annotations when
    structural, otherwise by lexicon lookup of the original form."""
    slot = t.slots[position]
    if slot.number_policy is NumberPolicy.NOT_APPLICABLE:
        return None
    if slot.role is SlotRole.CUE or slot.number_policy is NumberPolicy.SAME_AS_CUE:
        return s.cue_number
    if slot.role is SlotRole.ATTRACTOR and s.attractor_number is not None:
        return s.attractor_number
    if slot.number_policy is NumberPolicy.SAME_AS_SLOT:
        return _observed_number(s, t, lex, slot.agrees_with)
    form = s.tokens[position]
    number = (noun_form_number(lex, form) if slot.category is SlotCategory.NOUN
              else verb_form_number(lex, form))
    if number is None:
        raise GenerationError(
            f"token {form!r} at position {position} is not in the lexicon; "
            "cannot preserve its number")
    return number


def replace_one(s: Stimulus, position: int, lex: Lexicon, seed: int, *,
                template: Template | None = None) -> tuple[Stimulus, Replacement]:
    """Replace the word at `position` with a same-category, same-number word.

    Returns the new stimulus (differing from `s` only at `position`) and the
    replacement record. Replacing the target re-draws the verb pair and
    updates the correct/incorrect forms, preserving the cue's number.
    """
    t = template or builtin_template(s.template_id)
    if not 0 <= position < len(t.slots):
        raise GenerationError(f"position {position} out of range for template {t.id}")
    slot = t.slots[position]
    if slot.fixed_form is not None:
        raise GenerationError(
            f"position {position} is a fixed {slot.category.value} slot; "
            "no same-category alternative exists")
    original = s.tokens[position]
    tokens = list(s.tokens)

    if slot.category in (SlotCategory.DET, SlotCategory.PREP):
        pool = [w for w in _pool(lex, slot.category) if w != original]
        if not pool:
            raise GenerationError(
                f"no alternative {slot.category.value} available for {original!r}")
        replacement = pool[_draw(seed, position, 0, size=len(pool))]
        tokens[position] = replacement
        new = dc_replace(s, tokens=tuple(tokens))
        return new, Replacement(position, original, replacement, None)

    number = _observed_number(s, t, lex, position)
    assert number is not None
    pairs = _pool(lex, slot.category)

    if position == s.target_index:
        candidates = [p for p in pairs if p.form(number) != original]
        if not candidates:
            raise GenerationError(f"no alternative verb pair for target {original!r}")
        pair = candidates[_draw(seed, position, 0, size=len(candidates))]
        correct = pair.form(number)
        tokens[position] = correct
        new = dc_replace(s, tokens=tuple(tokens), correct_form=correct,
                         incorrect_form=pair.form(number.opposite))
        return new, Replacement(position, original, correct, number)

    candidates = [p for p in pairs if p.form(number) != original]
    if not candidates:
        raise GenerationError(
            f"no alternative {slot.category.value} for {original!r} "
            f"with {number.value} number")
    pair = candidates[_draw(seed, position, 0, size=len(candidates))]
    replacement = pair.form(number)
    tokens[position] = replacement
    new = dc_replace(s, tokens=tuple(tokens))
    return new, Replacement(position, original, replacement, number)


def replaceable_positions(t: Template) -> list[int]:
    """Slot indices the ablation sweep intervenes at (fixed slots skipped)."""
    return [s.index for s in t.slots if s.fixed_form is None]


def ablation_sweep(d: Dataset, lex: Lexicon, repetitions: int, seed: int, *,
                   template: Template | None = None) -> dict[int, list[Dataset]]:
    """For each replaceable position, `repetitions` datasets with an
    independent seeded replacement applied to every item."""
    if repetitions < 1:
        raise GenerationError("repetitions must be >= 1")
    t = template or builtin_template(d.template_id)
    sweep: dict[int, list[Dataset]] = {}
    for position in replaceable_positions(t):
        reps: list[Dataset] = []
        for rep in range(repetitions):
            items = []
            for i, s in enumerate(d.items):
                item_seed = derive_seed(seed, rep, position, i)
                new, _ = replace_one(s, position, lex, item_seed, template=t)
                items.append(new)
            reps.append(Dataset(items, d.template_id, d.source,
                                derive_seed(seed, rep, position)))
        sweep[position] = reps
    return sweep
