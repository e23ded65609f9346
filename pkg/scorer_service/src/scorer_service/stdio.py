"""Stdio transport: one JSON object per line in, one per line out, in order.

A request line is either a scoring request
    {"id": str, "tokens": [str], "mask_index": int, "candidates": [str, str]}
answered by {"id": str, "scores": [float, float]} (or {"id", "error"}), or a
vocabulary handshake {"op": "vocab", "words": [str]} answered by
{"vocab_hash": str, "contains": {word: bool}}.
"""
from __future__ import annotations

import json
import sys

from .session import ModelSession


def serve_stdio(session: ModelSession, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            reply = {"id": None,
                     "error": {"code": "bad_request", "message": f"invalid JSON: {exc}"}}
        else:
            if request.get("op") == "vocab":
                reply = {
                    "vocab_hash": session.vocab_hash(),
                    "contains": session.contains(request.get("words", [])),
                }
            else:
                (reply,) = session.score_batch([request])
        stdout.write(json.dumps(reply, separators=(",", ":")) + "\n")
        stdout.flush()
