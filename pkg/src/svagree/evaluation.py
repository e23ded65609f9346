"""Number-agreement accuracy evaluation and the two experiment drivers.

An item is correct iff the scorer assigns a strictly higher score to the
correct target form; ties count as incorrect. Items whose candidate forms a
scorer cannot represent are skipped and tallied, never silently dropped.
"""
from __future__ import annotations

import csv
import io
import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .generator import (
    Dataset,
    Source,
    Stimulus,
    ablation_sweep,
    derive_seed,
    generate,
)
from .lexicon import Lexicon, Number
from .scorers import MASK, Scorer, ScoreRequest
from .templates import Template, builtin_template

CSV_COLUMNS = ("template", "source", "condition", "position", "repetition",
               "n", "correct", "skipped", "accuracy")


class EvalError(ValueError):
    """Evaluation input that violates a precondition."""


@dataclass(frozen=True)
class ReportRow:
    template_id: str
    source: str
    condition: str
    position: int | None
    repetition: int | None
    stratum: str | None
    n_items: int
    n_correct: int
    n_skipped: int
    accuracy: float
    n_singular: int
    n_singular_correct: int
    n_plural: int
    n_plural_correct: int


@dataclass(frozen=True)
class AggregateRow:
    template_id: str
    source: str
    condition: str
    position: int | None
    n_repetitions: int
    mean_accuracy: float
    std_accuracy: float


@dataclass(frozen=True)
class ItemOutcome:
    item_id: str
    correct: bool | None  # None = skipped
    scores: tuple[float, float] | None
    skip_reason: str | None = None


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)
    aggregates: list[AggregateRow] = field(default_factory=list)

    def extend(self, other: "EvalReport") -> None:
        self.rows.extend(other.rows)
        self.aggregates.extend(other.aggregates)

    def to_dict(self) -> dict:
        return {
            "rows": [asdict(r) for r in self.rows],
            "aggregates": [asdict(a) for a in self.aggregates],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalReport":
        return cls(
            rows=[ReportRow(**r) for r in obj.get("rows", [])],
            aggregates=[AggregateRow(**a) for a in obj.get("aggregates", [])],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))


def request_for(s: Stimulus) -> ScoreRequest:
    """Masked-position request; the mask slot carries a placeholder so the
    scorer is never shown the correct form."""
    tokens = list(s.tokens)
    tokens[s.target_index] = MASK
    return ScoreRequest(
        id=s.seed_trace,
        tokens=tuple(tokens),
        mask_index=s.target_index,
        candidates=(s.correct_form, s.incorrect_form),
    )


def _tally(items: Sequence[Stimulus], outcomes: Mapping[str, ItemOutcome],
           template_id: str, source: str, condition: str,
           position: int | None, repetition: int | None,
           stratum: str | None = None) -> ReportRow:
    n = n_correct = n_skipped = 0
    per = {Number.SINGULAR: [0, 0], Number.PLURAL: [0, 0]}
    for s in items:
        o = outcomes[s.seed_trace]
        if o.correct is None:
            n_skipped += 1
            continue
        n += 1
        per[s.cue_number][0] += 1
        if o.correct:
            n_correct += 1
            per[s.cue_number][1] += 1
    return ReportRow(
        template_id=template_id, source=source, condition=condition,
        position=position, repetition=repetition, stratum=stratum,
        n_items=n, n_correct=n_correct, n_skipped=n_skipped,
        accuracy=(n_correct / n) if n else 0.0,
        n_singular=per[Number.SINGULAR][0], n_singular_correct=per[Number.SINGULAR][1],
        n_plural=per[Number.PLURAL][0], n_plural_correct=per[Number.PLURAL][1],
    )


def score_items(items: Sequence[Stimulus], scorer: Scorer, *,
                batch_size: int = 64, jobs: int = 1) -> dict[str, ItemOutcome]:
    """Score every item once, returning outcomes keyed by item id.

    Duplicate ids (identical items) are scored once. Vocabulary violations
    become skips; transport failures raise, naming the item.
    """
    by_id: dict[str, Stimulus] = {}
    for s in items:
        by_id.setdefault(s.seed_trace, s)
    unique = list(by_id.values())

    outcomes: dict[str, ItemOutcome] = {}
    candidate_words = sorted({w for s in unique for w in (s.correct_form, s.incorrect_form)})
    membership = scorer.vocab_contains(candidate_words)
    to_score: list[Stimulus] = []
    for s in unique:
        if membership is not None and not (
                membership.get(s.correct_form, False)
                and membership.get(s.incorrect_form, False)):
            outcomes[s.seed_trace] = ItemOutcome(
                s.seed_trace, None, None, "candidate form not in scorer vocabulary")
        else:
            to_score.append(s)

    batches = [to_score[i:i + batch_size] for i in range(0, len(to_score), batch_size)]
    workers = jobs if scorer.max_concurrency is None else min(jobs, scorer.max_concurrency)

    def run(batch: list[Stimulus]):
        return scorer.score([request_for(s) for s in batch])

    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_responses = list(pool.map(run, batches))
    else:
        all_responses = [run(b) for b in batches]

    for batch, responses in zip(batches, all_responses):
        for s, resp in zip(batch, responses):
            if resp.scores is None:
                outcomes[s.seed_trace] = ItemOutcome(s.seed_trace, None, None,
                                                     resp.error or "scorer error")
            else:
                correct = resp.scores[0] > resp.scores[1]
                outcomes[s.seed_trace] = ItemOutcome(s.seed_trace, correct, resp.scores)
    return outcomes


def evaluate(d: Dataset, scorer: Scorer, *, condition: str = "baseline",
             position: int | None = None, repetition: int | None = None,
             batch_size: int = 64, jobs: int = 1,
             audit_path: str | Path | None = None) -> EvalReport:
    """Accuracy of `scorer` on one dataset, with per-number breakdown and,
    for naturally-occurring data with attractors, congruence strata."""
    outcomes = score_items(d.items, scorer, batch_size=batch_size, jobs=jobs)
    source = d.source.value
    rows = [_tally(d.items, outcomes, d.template_id, source, condition,
                   position, repetition)]
    if d.source is Source.WIKI and any(s.attractor_index is not None for s in d.items):
        congruent = [s for s in d.items if s.attractor_number == s.cue_number]
        incongruent = [s for s in d.items
                       if s.attractor_number is not None
                       and s.attractor_number != s.cue_number]
        if congruent:
            rows.append(_tally(congruent, outcomes, d.template_id, source, condition,
                               position, repetition, stratum="attractor_congruent"))
        if incongruent:
            rows.append(_tally(incongruent, outcomes, d.template_id, source, condition,
                               position, repetition, stratum="attractor_incongruent"))
    if audit_path is not None:
        lines = [json.dumps({"item_id": s.seed_trace,
                             "correct": outcomes[s.seed_trace].correct,
                             "scores": list(outcomes[s.seed_trace].scores or ()) or None,
                             "skip_reason": outcomes[s.seed_trace].skip_reason},
                            separators=(",", ":"))
                 for s in d.items]
        Path(audit_path).write_text("\n".join(lines) + ("\n" if lines else ""),
                                    encoding="utf-8")
    return EvalReport(rows=rows)


def run_exp1(datasets: Mapping[str, Mapping[str, Dataset]], scorer: Scorer, *,
             batch_size: int = 64, jobs: int = 1) -> EvalReport:
    """One accuracy per (template, source) cell; missing cells are simply
    absent from the report and the run continues."""
    report = EvalReport()
    for template_id in sorted(datasets):
        cells = datasets[template_id]
        for source_name in ("ML", "WIKI", "NONCE"):
            d = cells.get(source_name)
            if d is None:
                continue
            if d.template_id != template_id:
                raise EvalError(
                    f"dataset under key {template_id!r} carries template {d.template_id!r}")
            report.extend(evaluate(d, scorer, condition="exp1",
                                   batch_size=batch_size, jobs=jobs))
    return report


def run_exp2(d: Dataset, lex: Lexicon, scorer: Scorer, repetitions: int = 10,
             seed: int = 0, *, template: Template | None = None,
             nonce_baseline: Dataset | None = None,
             batch_size: int = 64, jobs: int = 1) -> EvalReport:
    """One-word-replacement sweep: per-position accuracy across repetitions,
    with the unreplaced dataset and a size-matched nonce set as baselines."""
    if not d.items:
        raise EvalError("exp2 needs a non-empty dataset")
    if repetitions < 1:
        raise EvalError("repetitions must be >= 1")
    t = template or builtin_template(d.template_id)

    report = evaluate(d, scorer, condition=f"{d.source.value.lower()}_baseline",
                      batch_size=batch_size, jobs=jobs)
    if nonce_baseline is None:
        n = max(2, len(d.items) - (len(d.items) % 2))
        nonce_baseline = generate(t, lex, n, derive_seed(seed, 1), jobs=jobs)
    report.extend(evaluate(nonce_baseline, scorer, condition="nonce_baseline",
                           batch_size=batch_size, jobs=jobs))

    sweep = ablation_sweep(d, lex, repetitions, seed, template=t)
    tasks = [(position, rep, derived)
             for position in sorted(sweep)
             for rep, derived in enumerate(sweep[position])]

    def run(task):
        position, rep, derived = task
        return evaluate(derived, scorer, condition="replaced", position=position,
                        repetition=rep, batch_size=batch_size)

    if jobs > 1 and (scorer.max_concurrency is None or scorer.max_concurrency > 1):
        workers = jobs if scorer.max_concurrency is None else min(jobs, scorer.max_concurrency)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run, tasks))
    else:
        partials = [run(task) for task in tasks]
    for partial in partials:
        report.extend(partial)

    for position in sorted(sweep):
        accs = [row.accuracy for row in report.rows
                if row.condition == "replaced" and row.position == position
                and row.stratum is None]
        report.aggregates.append(AggregateRow(
            template_id=d.template_id, source=d.source.value, condition="replaced",
            position=position, n_repetitions=len(accs),
            mean_accuracy=statistics.fmean(accs),
            std_accuracy=statistics.stdev(accs) if len(accs) > 1 else 0.0,
        ))
    return report


# --- minimal-pair import --------------------------------------------------------

def import_ml(path: str | Path, *, lexicon: Lexicon | None = None) -> dict[str, Dataset]:
    """Read template-labeled minimal pairs (TSV: id, grammatical,
    ungrammatical) into per-template datasets.

    The single differing position locates the target; the cue's number is
    inferred from the correct verb form (lexicon lookup, then the regular
    third-singular suffix rule)."""
    path = Path(path)
    by_template: dict[str, list[Stimulus]] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise EvalError(f"{path}:{lineno}: expected 3 tab-separated fields")
        template_id, good, bad = parts
        t = builtin_template(template_id)  # raises on unknown labels
        good_tokens = good.split()
        bad_tokens = bad.split()
        if len(good_tokens) != len(bad_tokens):
            raise EvalError(f"{path}:{lineno}: pair sentences differ in length")
        diffs = [i for i, (a, b) in enumerate(zip(good_tokens, bad_tokens)) if a != b]
        if len(diffs) != 1:
            raise EvalError(
                f"{path}:{lineno}: pair differs at {len(diffs)} positions, need exactly 1")
        if len(good_tokens) not in (len(t.slots), len(t.slots) + 1):
            raise EvalError(
                f"{path}:{lineno}: {len(good_tokens)} tokens do not fit template "
                f"{template_id} ({len(t.slots)} slots)")
        target_index = diffs[0]
        if target_index != t.target_index:
            raise EvalError(
                f"{path}:{lineno}: pair differs at position {target_index}, but template "
                f"{template_id} targets position {t.target_index}")
        correct = good_tokens[target_index].casefold()
        incorrect = bad_tokens[target_index].casefold()
        cue_number = _infer_verb_number(correct, incorrect, lexicon)
        if cue_number is None:
            raise EvalError(
                f"{path}:{lineno}: cannot orient verb pair ({correct!r}, {incorrect!r})")
        attractor_number = None
        if t.attractor_index is not None and lexicon is not None:
            from .generator import noun_form_number
            attractor_number = noun_form_number(
                lexicon, good_tokens[t.attractor_index].casefold())
        tokens = [w.casefold() for w in good_tokens]
        stim = Stimulus(
            tokens=tuple(tokens),
            template_id=template_id,
            cue_index=t.cue_index,
            cue_number=cue_number,
            target_index=target_index,
            correct_form=correct,
            incorrect_form=incorrect,
            attractor_index=t.attractor_index,
            attractor_number=attractor_number,
            source=Source.ML,
            seed_trace=f"ml:{lineno}",
        )
        by_template.setdefault(template_id, []).append(stim)
    return {tid: Dataset(items, tid, Source.ML, None)
            for tid, items in by_template.items()}


def _third_singular_variants(base: str) -> set[str]:
    out = {base + "s"}
    if base.endswith(("s", "sh", "ch", "x", "z", "o")):
        out.add(base + "es")
    if len(base) > 1 and base.endswith("y") and base[-2] not in "aeiou":
        out.add(base[:-1] + "ies")
    return out


def _infer_verb_number(correct: str, incorrect: str,
                       lexicon: Lexicon | None) -> Number | None:
    if lexicon is not None:
        from .generator import verb_form_number
        known = verb_form_number(lexicon, correct)
        if known is not None:
            return known
    if correct in _third_singular_variants(incorrect):
        return Number.SINGULAR
    if incorrect in _third_singular_variants(correct):
        return Number.PLURAL
    return None


# --- report encodings -----------------------------------------------------------

def report_to_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report.rows:
        condition = r.condition if r.stratum is None else f"{r.condition}[{r.stratum}]"
        writer.writerow([
            r.template_id, r.source, condition,
            "" if r.position is None else r.position,
            "" if r.repetition is None else r.repetition,
            r.n_items, r.n_correct, r.n_skipped, f"{r.accuracy:.6f}",
        ])
    return buf.getvalue()


def report_to_tsv(report: EvalReport) -> str:
    """Plot-ready aggregate table: one line per swept position, plus the
    baseline reference rows."""
    lines = ["template\tsource\tcondition\tposition\tmean\tstd"]
    for r in report.rows:
        if r.condition.endswith("_baseline") and r.stratum is None:
            lines.append(f"{r.template_id}\t{r.source}\t{r.condition}\t\t"
                         f"{r.accuracy:.6f}\t0.000000")
    for a in report.aggregates:
        lines.append(f"{a.template_id}\t{a.source}\t{a.condition}\t{a.position}\t"
                     f"{a.mean_accuracy:.6f}\t{a.std_accuracy:.6f}")
    return "\n".join(lines) + "\n"
