"""Declarative slot-sequence templates for agreement constructions.

Each template is an ordered list of lexical-category slots annotated with a
role (cue / target / attractor / other) and a number policy. The eleven
builtin templates (A-I plus the B2/B3 variants) cover simple agreement,
sentential complements, prepositional phrases, relative clauses and short
verb-phrase coordination.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

from .lexicon import COMPLEMENTIZER, CONJUNCTION


class TemplateError(ValueError):
    """Structurally invalid template definition."""


class SlotCategory(enum.Enum):
    DET = "det"
    NOUN = "noun"
    VERB = "verb"
    STATIVE_VERB = "stative_verb"
    PREP = "prep"
    COMP = "comp"
    CONJ = "conj"


class SlotRole(enum.Enum):
    CUE = "cue"
    TARGET = "target"
    ATTRACTOR = "attractor"
    OTHER = "other"


class NumberPolicy(enum.Enum):
    FREE = "free"
    SAME_AS_CUE = "same_as_cue"
    OPPOSITE_OF_CUE = "opposite_of_cue"
    NOT_APPLICABLE = "not_applicable"
    # Copies the sampled/observed number of another slot (a verb agreeing
    # with a local subject that is not the cue). Requires Slot.agrees_with.
    SAME_AS_SLOT = "same_as_slot"


FIXED_CATEGORIES = frozenset({SlotCategory.COMP, SlotCategory.CONJ})
VERB_CATEGORIES = frozenset({SlotCategory.VERB, SlotCategory.STATIVE_VERB})

BUILTIN_IDS = ("A", "B", "B2", "B3", "C", "D", "E", "F", "G", "H", "I")
ATTRACTOR_IDS = frozenset({"C", "D", "F", "H"})


@dataclass(frozen=True)
class Slot:
    index: int
    category: SlotCategory
    role: SlotRole = SlotRole.OTHER
    number_policy: NumberPolicy = NumberPolicy.NOT_APPLICABLE
    fixed_form: str | None = None
    agrees_with: int | None = None


@dataclass(frozen=True)
class Template:
    id: str
    description: str
    slots: tuple[Slot, ...]

    @property
    def cue_index(self) -> int:
        return next(s.index for s in self.slots if s.role is SlotRole.CUE)

    @property
    def target_index(self) -> int:
        return next(s.index for s in self.slots if s.role is SlotRole.TARGET)

    @property
    def attractor_index(self) -> int | None:
        return next((s.index for s in self.slots if s.role is SlotRole.ATTRACTOR), None)


def validate_template(t: Template) -> Template:
    roles = [s.role for s in t.slots]
    if roles.count(SlotRole.CUE) != 1:
        raise TemplateError(f"template {t.id}: exactly one cue slot required")
    if roles.count(SlotRole.TARGET) != 1:
        raise TemplateError(f"template {t.id}: exactly one target slot required")
    if roles.count(SlotRole.ATTRACTOR) > 1:
        raise TemplateError(f"template {t.id}: at most one attractor slot allowed")
    for pos, s in enumerate(t.slots):
        if s.index != pos:
            raise TemplateError(f"template {t.id}: slot indices must be 0..n-1 contiguous")
        if (s.fixed_form is not None) != (s.category in FIXED_CATEGORIES):
            raise TemplateError(
                f"template {t.id}: slot {pos}: fixed_form required exactly for comp/conj slots")
        if s.category in (SlotCategory.DET, SlotCategory.PREP) \
                and s.number_policy is not NumberPolicy.NOT_APPLICABLE:
            raise TemplateError(
                f"template {t.id}: slot {pos}: det/prep slots carry no number")
        if (s.agrees_with is not None) != (s.number_policy is NumberPolicy.SAME_AS_SLOT):
            raise TemplateError(
                f"template {t.id}: slot {pos}: agrees_with required exactly for same_as_slot")
        if s.agrees_with is not None and not 0 <= s.agrees_with < s.index:
            raise TemplateError(
                f"template {t.id}: slot {pos}: agrees_with must name an earlier slot")
        if s.role is SlotRole.TARGET:
            if s.number_policy is not NumberPolicy.SAME_AS_CUE:
                raise TemplateError(f"template {t.id}: target slot must agree with the cue")
            if s.category not in VERB_CATEGORIES:
                raise TemplateError(f"template {t.id}: target slot must be a verb")
        if s.role in (SlotRole.CUE, SlotRole.ATTRACTOR) and s.category is not SlotCategory.NOUN:
            raise TemplateError(f"template {t.id}: cue/attractor slots must be nouns")
        if s.role is SlotRole.ATTRACTOR and s.number_policy is not NumberPolicy.OPPOSITE_OF_CUE:
            raise TemplateError(
                f"template {t.id}: attractor slot must be opposite-numbered to the cue")
    if t.cue_index >= t.target_index:
        raise TemplateError(f"template {t.id}: cue must precede target")
    return t


def _det(i: int) -> Slot:
    return Slot(i, SlotCategory.DET)


def _prep(i: int) -> Slot:
    return Slot(i, SlotCategory.PREP)


def _comp(i: int) -> Slot:
    return Slot(i, SlotCategory.COMP, fixed_form=COMPLEMENTIZER)


def _conj(i: int) -> Slot:
    return Slot(i, SlotCategory.CONJ, fixed_form=CONJUNCTION)


def _noun(i: int, role: SlotRole = SlotRole.OTHER,
          policy: NumberPolicy = NumberPolicy.FREE) -> Slot:
    return Slot(i, SlotCategory.NOUN, role, policy)


def _verb(i: int, role: SlotRole = SlotRole.OTHER,
          policy: NumberPolicy = NumberPolicy.SAME_AS_CUE,
          agrees_with: int | None = None,
          category: SlotCategory = SlotCategory.VERB) -> Slot:
    return Slot(i, category, role, policy, agrees_with=agrees_with)


_CUE = SlotRole.CUE
_TGT = SlotRole.TARGET
_ATT = SlotRole.ATTRACTOR
_SLOT = NumberPolicy.SAME_AS_SLOT
_OPP = NumberPolicy.OPPOSITE_OF_CUE

_BUILTINS = (
    Template("A", "simple agreement", (
        _det(0), _noun(1, _CUE), _verb(2, _TGT),
    )),
    Template("B", "cue inside a sentential complement, no complementizer", (
        _det(0), _noun(1), _verb(2, policy=_SLOT, agrees_with=1),
        _det(3), _noun(4, _CUE), _verb(5, _TGT),
    )),
    Template("B2", "cue inside a sentential complement with overt complementizer", (
        _det(0), _noun(1), _verb(2, policy=_SLOT, agrees_with=1), _comp(3),
        _det(4), _noun(5, _CUE), _verb(6, _TGT),
    )),
    Template("B3", "cue inside a sentential complement under a stative matrix verb", (
        _det(0), _noun(1),
        _verb(2, policy=_SLOT, agrees_with=1, category=SlotCategory.STATIVE_VERB),
        _det(3), _noun(4, _CUE), _verb(5, _TGT),
    )),
    Template("C", "agreement across a prepositional phrase", (
        _det(0), _noun(1, _CUE), _prep(2), _det(3), _noun(4, _ATT, _OPP), _verb(5, _TGT),
    )),
    Template("D", "agreement across a subject relative clause", (
        _det(0), _noun(1, _CUE), _comp(2), _verb(3),
        _det(4), _noun(5, _ATT, _OPP), _verb(6, _TGT),
    )),
    Template("E", "agreement in a short verb-phrase coordination", (
        _det(0), _noun(1, _CUE), _verb(2), _conj(3), _verb(4, _TGT),
    )),
    Template("F", "agreement across an object relative clause", (
        _det(0), _noun(1, _CUE), _comp(2), _det(3), _noun(4, _ATT, _OPP),
        _verb(5, policy=_SLOT, agrees_with=4), _verb(6, _TGT),
    )),
    Template("G", "agreement within an object relative clause", (
        _det(0), _noun(1), _comp(2), _det(3), _noun(4, _CUE),
        _verb(5, _TGT), _verb(6, policy=_SLOT, agrees_with=1),
    )),
    Template("H", "agreement across a reduced object relative clause", (
        _det(0), _noun(1, _CUE), _det(2), _noun(3, _ATT, _OPP),
        _verb(4, policy=_SLOT, agrees_with=3), _verb(5, _TGT),
    )),
    Template("I", "agreement within a reduced object relative clause", (
        _det(0), _noun(1), _det(2), _noun(3, _CUE),
        _verb(4, _TGT), _verb(5, policy=_SLOT, agrees_with=1),
    )),
)

for _t in _BUILTINS:
    validate_template(_t)
del _t


def builtin_templates() -> tuple[Template, ...]:
    """The eleven builtin agreement constructions, in id order."""
    return _BUILTINS


def builtin_template(template_id: str) -> Template:
    for t in _BUILTINS:
        if t.id == template_id:
            return t
    raise TemplateError(f"unknown template id {template_id!r}")


def pos_signature(t: Template) -> tuple[SlotCategory, ...]:
    """The ordered lexical-category sequence, used as the corpus pattern key."""
    return tuple(s.category for s in t.slots)


def template_to_dict(t: Template) -> dict:
    return {
        "id": t.id,
        "description": t.description,
        "slots": [
            {
                "category": s.category.value,
                "role": s.role.value,
                "number_policy": s.number_policy.value,
                "fixed_form": s.fixed_form,
                "agrees_with": s.agrees_with,
            }
            for s in t.slots
        ],
    }


def template_from_dict(obj: dict) -> Template:
    try:
        slots = tuple(
            Slot(
                index=i,
                category=SlotCategory(raw["category"]),
                role=SlotRole(raw.get("role", "other")),
                number_policy=NumberPolicy(raw.get("number_policy", "not_applicable")),
                fixed_form=raw.get("fixed_form"),
                agrees_with=raw.get("agrees_with"),
            )
            for i, raw in enumerate(obj["slots"])
        )
        t = Template(id=str(obj["id"]), description=str(obj.get("description", "")), slots=slots)
    except (KeyError, ValueError, TypeError) as exc:
        raise TemplateError(f"malformed template definition: {exc}") from exc
    return validate_template(t)


def load_templates(path: str | Path) -> tuple[Template, ...]:
    """Load user-defined templates from a JSON file (list of definitions)."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise TemplateError(f"cannot read template file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TemplateError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise TemplateError(f"{path}: expected a JSON list of templates")
    templates = tuple(template_from_dict(obj) for obj in data)
    ids = [t.id for t in templates]
    if len(set(ids)) != len(ids):
        raise TemplateError(f"{path}: duplicate template ids")
    return templates
