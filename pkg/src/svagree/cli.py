"""Command-line entry point: generate, match, import-ml, evaluate, exp1, exp2, report.

Every run writes a resolved-config capsule next to its outputs; data
artifacts carry content-hash names and contain no timestamps (wall-clock
metadata goes to run_meta.json), so identical configs reproduce identical
bytes.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from .corpus import MatchError, build_index, harvest, scan_corpus, write_provenance
from .evaluation import (
    EvalError,
    EvalReport,
    evaluate,
    import_ml,
    report_to_csv,
    report_to_tsv,
    run_exp1,
    run_exp2,
)
from .generator import (
    Dataset,
    GenerationError,
    dataset_sidecar,
    dataset_to_jsonl,
    generate,
    read_dataset,
)
from .lexicon import DEFAULT_MANIFEST, LexiconError, load_lexicon
from .scorers import ScorerError, make_scorer
from .templates import TemplateError, builtin_template, builtin_templates, load_templates

USER_ERRORS = (LexiconError, TemplateError, GenerationError, MatchError,
               EvalError, ScorerError)


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        print(json.dumps({"error": {"type": "usage", "message": message}}),
              file=sys.stderr)
        raise SystemExit(2)


def _hash_name(stem: str, payload: bytes, suffix: str) -> str:
    digest = hashlib.sha256(payload).hexdigest()[:12]
    return f"{stem}.{digest}{suffix}"


def _write_artifact(out_dir: Path, stem: str, payload: bytes, suffix: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / _hash_name(stem, payload, suffix)
    path.write_bytes(payload)
    return path


def _write_dataset_artifact(out_dir: Path, stem: str, d: Dataset,
                            lexicon_hash: str | None) -> Path:
    payload = dataset_to_jsonl(d)
    path = _write_artifact(out_dir, stem, payload, ".jsonl")
    sidecar = dataset_sidecar(d, lexicon_hash)
    path.with_suffix(".jsonl.meta.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_capsule(out_dir: Path, subcommand: str, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    capsule = {"subcommand": subcommand, "version": __version__, "config": config}
    (out_dir / f"config.{subcommand}.json").write_text(
        json.dumps(capsule, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / "run_meta.json").write_text(
        json.dumps({"finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z")}) + "\n",
        encoding="utf-8")


def _resolve_templates(args) -> tuple:
    if getattr(args, "templates_file", None):
        return load_templates(args.templates_file)
    return builtin_templates()


def _emit(obj: dict) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--lexicon", default=str(DEFAULT_MANIFEST),
                   help="lexicon manifest JSON (default: bundled vocabulary)")
    p.add_argument("--jobs", type=int, default=1, help="worker parallelism cap")
    p.add_argument("--templates-file", default=None,
                   help="JSON file with custom template definitions")


def cmd_generate(args) -> int:
    lex = load_lexicon(args.lexicon)
    templates = _resolve_templates(args)
    wanted = [t for t in templates if args.template in ("all", t.id)]
    if not wanted:
        raise TemplateError(f"unknown template id {args.template!r}")
    out_dir = Path(args.out)
    paths = {}
    for t in wanted:
        d = generate(t, lex, args.n, args.seed, unique=args.unique, jobs=args.jobs)
        path = _write_dataset_artifact(out_dir, f"nonce_{t.id}", d, lex.content_hash())
        paths[t.id] = str(path)
    _write_capsule(out_dir, "generate", {
        "template": args.template, "n": args.n, "seed": args.seed,
        "unique": args.unique, "lexicon": args.lexicon,
        "lexicon_hash": lex.content_hash(), "jobs": args.jobs,
    })
    _emit({"datasets": paths})
    return 0


def cmd_match(args) -> int:
    lex = load_lexicon(args.lexicon)
    templates = _resolve_templates(args)
    if args.template != "all":
        templates = tuple(t for t in templates if t.id == args.template)
        if not templates:
            raise TemplateError(f"unknown template id {args.template!r}")
    idx = build_index(lex)
    records = scan_corpus(args.corpus, templates, idx, caps=args.cap, jobs=args.jobs)
    out_dir = Path(args.out)
    paths = {}
    for t in templates:
        t_records = [r for r in records if r.stimulus.template_id == t.id]
        if not t_records:
            continue
        n = len(t_records) if args.n is None else args.n
        d = harvest(t_records, n, balance=args.balance, truncate=args.truncate)
        path = _write_dataset_artifact(out_dir, f"wiki_{t.id}", d, lex.content_hash())
        write_provenance(t_records, path.with_suffix(".provenance.json"))
        paths[t.id] = str(path)
    _write_capsule(out_dir, "match", {
        "corpus": str(args.corpus), "template": args.template, "cap": args.cap,
        "n": args.n, "balance": args.balance, "truncate": args.truncate,
        "lexicon": args.lexicon, "lexicon_hash": lex.content_hash(), "jobs": args.jobs,
    })
    _emit({"datasets": paths, "total_matches": len(records)})
    return 0


def cmd_import_ml(args) -> int:
    lex = load_lexicon(args.lexicon)
    datasets = import_ml(args.file, lexicon=lex)
    out_dir = Path(args.out)
    paths = {}
    for tid in sorted(datasets):
        path = _write_dataset_artifact(out_dir, f"ml_{tid}", datasets[tid],
                                       lex.content_hash())
        paths[tid] = str(path)
    _write_capsule(out_dir, "import-ml", {
        "file": str(args.file), "lexicon": args.lexicon,
        "lexicon_hash": lex.content_hash(),
    })
    _emit({"datasets": paths})
    return 0


def _finish_report(args, report: EvalReport, out_dir: Path, stem: str) -> dict:
    json_path = _write_artifact(out_dir, stem, report.to_json().encode("utf-8"), ".json")
    paths = {"json": str(json_path)}
    if args.format in ("csv", "all"):
        paths["csv"] = str(_write_artifact(
            out_dir, stem, report_to_csv(report).encode("utf-8"), ".csv"))
    if args.format in ("tsv", "all"):
        paths["tsv"] = str(_write_artifact(
            out_dir, stem, report_to_tsv(report).encode("utf-8"), ".tsv"))
    return paths


def cmd_evaluate(args) -> int:
    lex = load_lexicon(args.lexicon)
    scorer = make_scorer(args.scorer, lex)
    try:
        d = read_dataset(args.data)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        audit = out_dir / "items.audit.jsonl"
        report = evaluate(d, scorer, batch_size=args.batch_size, jobs=args.jobs,
                          audit_path=audit)
    finally:
        scorer.close()
    paths = _finish_report(args, report, out_dir, f"eval_{d.template_id}")
    paths["audit"] = str(audit)
    _write_capsule(out_dir, "evaluate", {
        "data": str(args.data), "scorer": args.scorer, "format": args.format,
        "batch_size": args.batch_size, "lexicon": args.lexicon, "jobs": args.jobs,
    })
    _emit({"report": paths,
           "accuracy": {r.template_id: r.accuracy for r in report.rows
                        if r.stratum is None}})
    return 0


def _load_dataset_dir(path: str | None) -> dict[str, Dataset]:
    if path is None:
        return {}
    datasets = {}
    for file in sorted(Path(path).glob("*.jsonl")):
        d = read_dataset(file)
        datasets[d.template_id] = d
    return datasets


def cmd_exp1(args) -> int:
    lex = load_lexicon(args.lexicon)
    scorer = make_scorer(args.scorer, lex)
    try:
        by_source = {"ML": _load_dataset_dir(args.ml),
                     "WIKI": _load_dataset_dir(args.wiki),
                     "NONCE": _load_dataset_dir(args.nonce)}
        template_ids = sorted({tid for cells in by_source.values() for tid in cells})
        datasets = {tid: {src: cells[tid] for src, cells in by_source.items()
                          if tid in cells}
                    for tid in template_ids}
        report = run_exp1(datasets, scorer, batch_size=args.batch_size, jobs=args.jobs)
    finally:
        scorer.close()
    out_dir = Path(args.out)
    paths = _finish_report(args, report, out_dir, "exp1")
    _write_capsule(out_dir, "exp1", {
        "ml": args.ml, "wiki": args.wiki, "nonce": args.nonce,
        "scorer": args.scorer, "format": args.format, "lexicon": args.lexicon,
        "jobs": args.jobs,
    })
    _emit({"report": paths})
    return 0


def cmd_exp2(args) -> int:
    lex = load_lexicon(args.lexicon)
    scorer = make_scorer(args.scorer, lex)
    try:
        d = read_dataset(args.data)
        template = builtin_template(d.template_id) if args.templates_file is None \
            else next(t for t in load_templates(args.templates_file)
                      if t.id == d.template_id)
        report = run_exp2(d, lex, scorer, repetitions=args.repetitions,
                          seed=args.seed, template=template,
                          batch_size=args.batch_size, jobs=args.jobs)
    finally:
        scorer.close()
    out_dir = Path(args.out)
    paths = _finish_report(args, report, out_dir, f"exp2_{d.template_id}")
    _write_capsule(out_dir, "exp2", {
        "data": str(args.data), "scorer": args.scorer, "repetitions": args.repetitions,
        "seed": args.seed, "format": args.format, "lexicon": args.lexicon,
        "jobs": args.jobs,
    })
    _emit({"report": paths})
    return 0


def cmd_report(args) -> int:
    report = EvalReport.from_json(Path(args.input).read_text(encoding="utf-8"))
    out_dir = Path(args.input).parent if args.out is None else Path(args.out)
    stem = Path(args.input).stem
    if args.format in ("csv", "all"):
        _write_artifact(out_dir, stem, report_to_csv(report).encode("utf-8"), ".csv")
    if args.format in ("tsv", "all"):
        _write_artifact(out_dir, stem, report_to_tsv(report).encode("utf-8"), ".tsv")
    if args.format == "json":
        _write_artifact(out_dir, stem, report.to_json().encode("utf-8"), ".json")
    _emit({"reencoded": str(args.input), "format": args.format})
    return 0


def build_parser() -> CliParser:
    parser = CliParser(prog="svagree",
                       description="Subject-verb agreement probing toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate balanced nonce datasets")
    _add_common(p)
    p.add_argument("--template", default="all", help="template id or 'all'")
    p.add_argument("--n", type=int, default=10000, help="items per dataset (even)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unique", action="store_true",
                   help="forbid duplicate token sequences")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("match", help="mine template matches from a corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True, help="directory of extracted text files")
    p.add_argument("--template", default="all")
    p.add_argument("--cap", type=int, default=None, help="per-template match cap")
    p.add_argument("--n", type=int, default=None, help="harvest size per template")
    p.add_argument("--balance", action="store_true",
                   help="equal singular/plural cue counts")
    p.add_argument("--truncate", action="store_true",
                   help="allow fewer matches than requested")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("import-ml", help="import template-labeled minimal pairs")
    _add_common(p)
    p.add_argument("--file", required=True, help="TSV: template, grammatical, ungrammatical")
    p.set_defaults(func=cmd_import_ml)

    p = sub.add_parser("evaluate", help="score one dataset with a scorer")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset JSONL")
    p.add_argument("--scorer", required=True,
                   help="oracle|uniform|coinflip[:seed]|linear-proximity|stdio:CMD|http(s)://URL")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--format", choices=("csv", "tsv", "json", "all"), default="all")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("exp1", help="accuracy per template and source")
    _add_common(p)
    p.add_argument("--ml", default=None, help="directory of imported ML datasets")
    p.add_argument("--wiki", default=None, help="directory of mined datasets")
    p.add_argument("--nonce", default=None, help="directory of generated datasets")
    p.add_argument("--scorer", required=True)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--format", choices=("csv", "tsv", "json", "all"), default="all")
    p.set_defaults(func=cmd_exp1)

    p = sub.add_parser("exp2", help="one-word replacement sweep")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset JSONL to intervene on")
    p.add_argument("--scorer", required=True)
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--format", choices=("csv", "tsv", "json", "all"), default="all")
    p.set_defaults(func=cmd_exp2)

    p = sub.add_parser("report", help="re-encode a report JSON")
    p.add_argument("--input", required=True, help="report JSON file")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "tsv", "json", "all"), default="csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
              file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": {"type": "io", "message": str(exc)}}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
