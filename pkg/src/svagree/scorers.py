"""Pluggable masked-word scorers and the wire-protocol clients.

A scorer receives batches of two-candidate masked-position requests and
returns one score per candidate; only the comparison between the two scores
matters, so probabilities, log-probabilities and logits are all acceptable.
Builtin scorers exercise the harness without any model; external scorers are
reached over a line-oriented stdio protocol or HTTP.
"""
from __future__ import annotations

import hashlib
import json
import shlex
import subprocess
from dataclasses import dataclass
from typing import Iterable, Sequence

import requests

MASK = "[MASK]"


class ScorerError(RuntimeError):
    """Transport or protocol failure while talking to a scorer."""


@dataclass(frozen=True)
class ScoreRequest:
    id: str
    tokens: tuple[str, ...]
    mask_index: int
    candidates: tuple[str, str]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "tokens": list(self.tokens),
            "mask_index": self.mask_index,
            "candidates": list(self.candidates),
        }


@dataclass(frozen=True)
class ScoreResponse:
    id: str
    scores: tuple[float, float] | None
    error: str | None = None


class Scorer:
    """Base scorer: subclasses implement `score`; purity w.r.t. request
    content is part of the contract."""

    #: upper bound on concurrent in-flight batches (None = caller's choice)
    max_concurrency: int | None = None

    def score(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResponse]:
        raise NotImplementedError

    def vocab_contains(self, words: Iterable[str]) -> dict[str, bool] | None:
        """Membership map for `words`, or None if this scorer accepts anything."""
        return None

    def close(self) -> None:
        pass


class OracleScorer(Scorer):
    """Always prefers the first candidate (the correct form, by the request
    convention). Harness ceiling check."""

    def score(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResponse]:
        return [ScoreResponse(r.id, (1.0, 0.0)) for r in requests_]


class UniformScorer(Scorer):
    """Equal scores for both candidates; under the strict-tie rule every
    item counts as incorrect."""

    def score(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResponse]:
        return [ScoreResponse(r.id, (0.5, 0.5)) for r in requests_]


class CoinFlipScorer(Scorer):
    """Seeded random preference, a pure function of the request content
    (tokens, mask index, candidates) so duplicates and reorderings score
    identically."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def score(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResponse]:
        out = []
        for r in requests_:
            payload = json.dumps(
                [self.seed, list(r.tokens), r.mask_index, list(r.candidates)],
                separators=(",", ":")).encode("utf-8")
            bit = hashlib.blake2b(payload, digest_size=1).digest()[0] & 1
            out.append(ScoreResponse(r.id, (1.0, 0.0) if bit == 0 else (0.0, 1.0)))
        return out


class LinearProximityScorer(Scorer):
    """Prefers the candidate agreeing with the nearest preceding known noun.

    Operationalizes linear attraction: the closest noun wins, whatever
    clause it belongs to. Falls back to equal scores when no preceding
    noun is found or the candidates' numbers are unknown.
    """

    def __init__(self, lexicon):
        from .generator import _form_maps  # local to avoid an import cycle
        maps = _form_maps(lexicon)
        self._noun_number = maps["noun_number"].get
        self._verb_number = maps["verb_number"].get

    def score(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResponse]:
        out = []
        for r in requests_:
            nearest = None
            for i in range(r.mask_index - 1, -1, -1):
                nearest = self._noun_number(r.tokens[i].casefold())
                if nearest is not None:
                    break
            numbers = [self._verb_number(c.casefold()) for c in r.candidates]
            if nearest is None or None in numbers or numbers[0] == numbers[1]:
                out.append(ScoreResponse(r.id, (0.5, 0.5)))
                continue
            scores = tuple(1.0 if num == nearest else 0.0 for num in numbers)
            out.append(ScoreResponse(r.id, scores))
        return out


class StdioScorer(Scorer):
    """Client for the line-oriented JSON protocol: one request object per
    line in, one response per line out, in order."""

    max_concurrency = 1

    def __init__(self, command: str | Sequence[str]):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
        except OSError as exc:
            raise ScorerError(f"cannot start scorer process {argv!r}: {exc}") from exc

    def _roundtrip(self, obj: dict) -> dict:
        assert self._proc.stdin is not None and self._proc.stdout is not None
        try:
            self._proc.stdin.write(json.dumps(obj, separators=(",", ":")) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ScorerError(f"scorer process pipe failure: {exc}") from exc
        if not line:
            raise ScorerError("scorer process closed its output stream")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScorerError(f"scorer sent invalid JSON: {line!r}") from exc

    def score(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResponse]:
        out = []
        for r in requests_:
            try:
                reply = self._roundtrip(r.to_dict())
            except ScorerError as exc:
                raise ScorerError(f"item {r.id!r}: {exc}") from exc
            if reply.get("id") != r.id:
                raise ScorerError(
                    f"scorer answered out of order: sent {r.id!r}, got {reply.get('id')!r}")
            out.append(_parse_response(reply, r.id))
        return out

    def vocab_contains(self, words: Iterable[str]) -> dict[str, bool] | None:
        words = list(words)
        if not words:
            return {}
        reply = self._roundtrip({"op": "vocab", "words": words})
        contains = reply.get("contains")
        if contains is None:
            return None
        return {w: bool(contains.get(w, False)) for w in words}

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)


class HttpScorer(Scorer):
    """Client for the HTTP transport (POST /score, GET /vocab, GET /health)."""

    max_concurrency = 4

    def __init__(self, base_url: str, *, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()
        try:
            resp = self._session.get(f"{self.base_url}/health", timeout=self.timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise ScorerError(f"scorer health check failed at {self.base_url}: {exc}") from exc

    def score(self, requests_: Sequence[ScoreRequest]) -> list[ScoreResponse]:
        body = {"requests": [r.to_dict() for r in requests_]}
        try:
            resp = self._session.post(f"{self.base_url}/score", json=body,
                                      timeout=self.timeout)
            resp.raise_for_status()
            replies = resp.json()["responses"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            ids = ", ".join(r.id for r in requests_[:3])
            raise ScorerError(f"score request failed (items {ids}...): {exc}") from exc
        if len(replies) != len(requests_):
            raise ScorerError(
                f"scorer returned {len(replies)} responses for {len(requests_)} requests")
        return [_parse_response(reply, r.id) for reply, r in zip(replies, requests_)]

    def vocab_contains(self, words: Iterable[str]) -> dict[str, bool] | None:
        words = list(words)
        if not words:
            return {}
        try:
            resp = self._session.get(f"{self.base_url}/vocab",
                                     params={"words": ",".join(words)},
                                     timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise ScorerError(f"vocab request failed: {exc}") from exc
        return {w: bool(data.get(w, False)) for w in words}

    def close(self) -> None:
        self._session.close()


def _parse_response(reply: dict, expected_id: str) -> ScoreResponse:
    if reply.get("error") is not None:
        err = reply["error"]
        message = err.get("message", str(err)) if isinstance(err, dict) else str(err)
        return ScoreResponse(expected_id, None, message)
    scores = reply.get("scores")
    if (not isinstance(scores, list) or len(scores) != 2
            or not all(isinstance(x, (int, float)) for x in scores)):
        raise ScorerError(f"malformed scores for item {expected_id!r}: {scores!r}")
    a, b = float(scores[0]), float(scores[1])
    if a != a or b != b or a in (float("inf"), float("-inf")) or b in (float("inf"), float("-inf")):
        raise ScorerError(f"non-finite scores for item {expected_id!r}")
    return ScoreResponse(expected_id, (a, b))


def make_scorer(spec: str, lexicon=None) -> Scorer:
    """Build a scorer from a CLI spec string.

    Builtin names: oracle | uniform | coinflip[:seed] | linear-proximity.
    External: "stdio:<command>" or an http(s) URL.
    """
    if spec.startswith(("http://", "https://")):
        return HttpScorer(spec)
    if spec.startswith("stdio:"):
        return StdioScorer(spec[len("stdio:"):])
    name, _, arg = spec.partition(":")
    if name == "oracle":
        return OracleScorer()
    if name == "uniform":
        return UniformScorer()
    if name == "coinflip":
        return CoinFlipScorer(int(arg) if arg else 0)
    if name == "linear-proximity":
        if lexicon is None:
            raise ScorerError("linear-proximity scorer needs a lexicon")
        return LinearProximityScorer(lexicon)
    raise ScorerError(f"unknown scorer spec {spec!r}")
