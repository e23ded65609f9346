"""End-to-end: the evaluation harness CLI scoring through this service over
both transports. Crosses package boundaries only via subprocess + wire."""
from __future__ import annotations

import json
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest


def _harness_available() -> bool:
    proc = subprocess.run([sys.executable, "-m", "svagree", "--version"],
                          capture_output=True)
    return proc.returncode == 0


pytestmark = pytest.mark.skipif(
    not _harness_available(), reason="svagree harness CLI not installed")


@pytest.fixture(scope="module")
def small_lexicon_manifest(tmp_path_factory):
    """A lexicon restricted to the tiny model's whole-word vocabulary."""
    d = tmp_path_factory.mktemp("lex")
    (d / "nouns.csv").write_text("boy,boys\ngirl,girls\ncat,cats\n")
    (d / "verbs.csv").write_text("laughs,laugh\nruns,run\nplays,play\nchases,chase\n")
    (d / "stative.csv").write_text("chases,chase\n")
    (d / "det.txt").write_text("the\nmy\n")
    (d / "prep.txt").write_text("near\n")
    manifest = d / "lexicon.json"
    manifest.write_text(json.dumps({
        "nouns": "nouns.csv", "verbs": "verbs.csv", "stative_verbs": "stative.csv",
        "determiners": "det.txt", "prepositions": "prep.txt"}))
    return manifest


@pytest.fixture(scope="module")
def dataset_path(small_lexicon_manifest, tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    proc = subprocess.run(
        [sys.executable, "-m", "svagree", "generate", "--template", "A",
         "--n", "6", "--seed", "3", "--lexicon", str(small_lexicon_manifest),
         "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout)["datasets"]["A"]


def _report_row(eval_out: str):
    payload = json.loads(eval_out)
    report = json.loads(Path(payload["report"]["json"]).read_text())
    return payload, report["rows"][0]


def test_harness_evaluates_over_stdio(dataset_path, tiny_model_dir, tmp_path):
    scorer = f"stdio:{sys.executable} -m scorer_service --stdio --model {tiny_model_dir}"
    proc = subprocess.run(
        [sys.executable, "-m", "svagree", "evaluate", "--data", dataset_path,
         "--scorer", scorer, "--out", str(tmp_path / "eval")],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    _, row = _report_row(proc.stdout)
    assert row["n_items"] == 6 and row["n_skipped"] == 0
    assert 0.0 <= row["accuracy"] <= 1.0


def test_harness_evaluates_over_http(dataset_path, tiny_model_dir, tmp_path):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    server = subprocess.Popen(
        [sys.executable, "-m", "scorer_service", "--serve", "--model",
         str(tiny_model_dir), "--port", str(port)],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    try:
        import urllib.request
        deadline = time.monotonic() + 30
        while True:
            try:
                with urllib.request.urlopen(
                        f"http://127.0.0.1:{port}/health", timeout=1):
                    break
            except OSError:
                if time.monotonic() > deadline:
                    pytest.fail("service did not become healthy")
                time.sleep(0.2)
        proc = subprocess.run(
            [sys.executable, "-m", "svagree", "evaluate", "--data", dataset_path,
             "--scorer", f"http://127.0.0.1:{port}", "--out", str(tmp_path / "eval")],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        _, row = _report_row(proc.stdout)
        assert row["n_items"] == 6 and row["n_skipped"] == 0
    finally:
        server.terminate()
        server.wait(timeout=15)


def test_transports_agree_on_verdicts(dataset_path, tiny_model_dir, tmp_path):
    """Same model, same items: stdio and in-process sessions rank candidates
    identically (scale-free contract: only comparisons must agree)."""
    from scorer_service import ModelSession
    session = ModelSession(str(tiny_model_dir))
    items = [json.loads(l) for l in Path(dataset_path).read_text().splitlines()]
    requests = []
    for s in items:
        tokens = list(s["tokens"])
        tokens[s["target_index"]] = "[MASK]"
        requests.append({"id": s["seed_trace"], "tokens": tokens,
                         "mask_index": s["target_index"],
                         "candidates": [s["correct_form"], s["incorrect_form"]]})
    direct = {r["id"]: r["scores"][0] > r["scores"][1]
              for r in session.score_batch(requests)}

    stdio = subprocess.Popen(
        [sys.executable, "-m", "scorer_service", "--stdio", "--model",
         str(tiny_model_dir)],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1)
    try:
        over_wire = {}
        for r in requests:
            stdio.stdin.write(json.dumps(r) + "\n")
            stdio.stdin.flush()
            reply = json.loads(stdio.stdout.readline())
            over_wire[reply["id"]] = reply["scores"][0] > reply["scores"][1]
    finally:
        stdio.stdin.close()
        stdio.wait(timeout=15)
    assert direct == over_wire
