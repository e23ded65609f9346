"""Number-paired vocabularies that fill template slots.

A lexicon bundles open-class noun/verb pairs (one form per grammatical
number) with the closed-class word lists (determiners, prepositions, the
complementizer and the conjunction). Lexicons are immutable after load and
safe to share across threads.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

COMPLEMENTIZER = "that"
CONJUNCTION = "and"

# Present-tense forms of "be": excluded from verb vocabularies by default
# because the copula is extremely frequent and inflects unlike other verbs.
BE_PRESENT_FORMS = frozenset({"is", "are", "am"})

DEFAULT_MANIFEST = Path(__file__).parent / "data" / "lexicon.json"

MANIFEST_KEYS = ("nouns", "verbs", "stative_verbs", "determiners", "prepositions")


class LexiconError(ValueError):
    """Malformed or inconsistent vocabulary input."""


class Number(enum.Enum):
    SINGULAR = "singular"
    PLURAL = "plural"

    @property
    def opposite(self) -> "Number":
        return Number.PLURAL if self is Number.SINGULAR else Number.SINGULAR


@dataclass(frozen=True, order=True)
class NounPair:
    singular: str
    plural: str

    def form(self, number: Number) -> str:
        return self.singular if number is Number.SINGULAR else self.plural


@dataclass(frozen=True, order=True)
class VerbPair:
    """A present-tense verb pair, e.g. ("laughs", "laugh").

    The third-person-singular form agrees with a singular subject, the bare
    form with a plural one, so a verb form's "number" is its subject's.
    """

    third_singular: str
    plural_base: str

    def form(self, number: Number) -> str:
        return self.third_singular if number is Number.SINGULAR else self.plural_base


@dataclass(frozen=True)
class Lexicon:
    nouns: tuple[NounPair, ...]
    verbs: tuple[VerbPair, ...]
    stative_verbs: tuple[VerbPair, ...]
    determiners: tuple[str, ...]
    prepositions: tuple[str, ...]
    complementizer: str = COMPLEMENTIZER
    conjunction: str = CONJUNCTION

    def content_hash(self) -> str:
        """Hash of the canonical word lists (stable across load paths)."""
        payload = json.dumps(
            {
                "nouns": [[p.singular, p.plural] for p in self.nouns],
                "verbs": [[p.third_singular, p.plural_base] for p in self.verbs],
                "stative_verbs": [[p.third_singular, p.plural_base] for p in self.stative_verbs],
                "determiners": list(self.determiners),
                "prepositions": list(self.prepositions),
                "complementizer": self.complementizer,
                "conjunction": self.conjunction,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _check_form(form: str, where: str) -> str:
    form = form.strip().casefold()
    if not form:
        raise LexiconError(f"{where}: empty word form")
    if any(c.isspace() for c in form):
        raise LexiconError(f"{where}: word form {form!r} contains whitespace")
    return form


def _parse_pair_lines(lines: Iterable[str], where: str) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise LexiconError(f"{where}:{lineno}: expected 'form,form', got {raw!r}")
        first = _check_form(parts[0], f"{where}:{lineno}")
        second = _check_form(parts[1], f"{where}:{lineno}")
        if first == second:
            raise LexiconError(f"{where}:{lineno}: identical forms {first!r}")
        pairs.append((first, second))
    return pairs


def _canonical_pairs(raw: Iterable[tuple[str, str]], where: str) -> list[tuple[str, str]]:
    """Dedup and sort by the first form; conflicting second forms are errors."""
    by_key: dict[str, str] = {}
    for first, second in raw:
        if first == second:
            raise LexiconError(f"{where}: identical forms {first!r}")
        if first in by_key and by_key[first] != second:
            raise LexiconError(
                f"{where}: {first!r} listed with conflicting forms "
                f"{by_key[first]!r} and {second!r}"
            )
        by_key.setdefault(first, second)
    return sorted(by_key.items())


def _parse_word_lines(lines: Iterable[str], where: str) -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        word = _check_form(line, f"{where}:{lineno}")
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def _is_be_pair(pair: VerbPair) -> bool:
    return pair.third_singular in BE_PRESENT_FORMS or pair.plural_base in BE_PRESENT_FORMS


def make_lexicon(
    nouns: Iterable[tuple[str, str]],
    verbs: Iterable[tuple[str, str]],
    stative_verbs: Iterable[tuple[str, str]] = (),
    determiners: Iterable[str] = (),
    prepositions: Iterable[str] = (),
    *,
    exclude_be: bool = True,
) -> Lexicon:
    """Build a validated lexicon from in-memory word pairs and lists."""
    noun_pairs = tuple(NounPair(s, p) for s, p in _canonical_pairs(
        ((_check_form(a, "nouns"), _check_form(b, "nouns")) for a, b in nouns), "nouns"))
    verb_pairs = tuple(VerbPair(s, p) for s, p in _canonical_pairs(
        ((_check_form(a, "verbs"), _check_form(b, "verbs")) for a, b in verbs), "verbs"))
    stative_pairs = tuple(VerbPair(s, p) for s, p in _canonical_pairs(
        ((_check_form(a, "stative_verbs"), _check_form(b, "stative_verbs")) for a, b in stative_verbs),
        "stative_verbs"))
    if exclude_be:
        verb_pairs = tuple(p for p in verb_pairs if not _is_be_pair(p))
        stative_pairs = tuple(p for p in stative_pairs if not _is_be_pair(p))
    dets = tuple(_check_form(w, "determiners") for w in determiners)
    preps = tuple(_check_form(w, "prepositions") for w in prepositions)

    noun_forms = {f for p in noun_pairs for f in (p.singular, p.plural)}
    clash = sorted(noun_forms & set(dets))
    if clash:
        raise LexiconError(f"forms listed as both noun and determiner: {', '.join(clash)}")
    return Lexicon(noun_pairs, verb_pairs, stative_pairs, dets, preps)


def load_lexicon(manifest_path: str | Path = DEFAULT_MANIFEST, *, exclude_be: bool = True) -> Lexicon:
    """Load a lexicon from a JSON manifest naming the five vocabulary files.

    The manifest maps each of nouns/verbs/stative_verbs/determiners/
    prepositions to a file path (relative to the manifest). Pair files hold
    one `first,second` entry per line; word-list files one word per line.
    Blank lines and `#` comments are ignored. All forms are case-folded.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise LexiconError(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise LexiconError(f"{manifest_path}: invalid JSON: {exc}") from exc
    missing = [k for k in MANIFEST_KEYS if k not in manifest]
    if missing:
        raise LexiconError(f"{manifest_path}: missing manifest keys: {', '.join(missing)}")

    def read_lines(key: str) -> tuple[str, list[str]]:
        path = manifest_path.parent / manifest[key]
        try:
            return str(path), path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise LexiconError(f"cannot read {key} file {path}: {exc}") from exc

    where, lines = read_lines("nouns")
    nouns = _parse_pair_lines(lines, where)
    where, lines = read_lines("verbs")
    verbs = _parse_pair_lines(lines, where)
    where, lines = read_lines("stative_verbs")
    statives = _parse_pair_lines(lines, where)
    where, lines = read_lines("determiners")
    determiners = _parse_word_lines(lines, where)
    where, lines = read_lines("prepositions")
    prepositions = _parse_word_lines(lines, where)
    return make_lexicon(nouns, verbs, statives, determiners, prepositions, exclude_be=exclude_be)


def filter_by_scorer_vocab(
    lex: Lexicon, vocab: Iterable[str], *, include_nouns: bool = False
) -> Lexicon:
    """Keep only verb pairs (and optionally noun pairs) fully inside `vocab`.

    Used to restrict candidate forms to words a scorer represents as single
    unsplit tokens. Order-stable; raises if no verb pair survives.
    """
    vocab_set = {w.casefold() for w in vocab}
    if not vocab_set:
        raise LexiconError("scorer vocabulary is empty")
    verbs = tuple(p for p in lex.verbs
                  if p.third_singular in vocab_set and p.plural_base in vocab_set)
    if not verbs:
        raise LexiconError("no verb pair has both forms in the scorer vocabulary")
    nouns = lex.nouns
    if include_nouns:
        nouns = tuple(p for p in lex.nouns
                      if p.singular in vocab_set and p.plural in vocab_set)
    return replace(lex, nouns=nouns, verbs=verbs)


def all_forms(lex: Lexicon) -> set[str]:
    """Every surface form known to the lexicon, open and closed class."""
    forms: set[str] = set()
    for p in lex.nouns:
        forms.update((p.singular, p.plural))
    for p in lex.verbs + lex.stative_verbs:
        forms.update((p.third_singular, p.plural_base))
    forms.update(lex.determiners)
    forms.update(lex.prepositions)
    forms.add(lex.complementizer)
    forms.add(lex.conjunction)
    return forms
