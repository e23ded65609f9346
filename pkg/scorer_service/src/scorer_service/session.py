"""Masked-LM scoring session.

Wraps one pretrained masked language model and answers two-candidate
masked-position requests with the model's output-distribution log-values at
the mask, restricted to the candidates (no renormalization: only the
comparison matters to callers). Candidates must be single unsplit
vocabulary tokens; violations produce per-request error objects rather than
transport failures.
"""
from __future__ import annotations

import hashlib
from typing import Iterable

import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer

DEFAULT_MODEL = "bert-base-uncased"

ERROR_NOT_IN_VOCAB = "candidate_not_in_vocab"
ERROR_BAD_REQUEST = "bad_request"


def _error(request_id, code: str, message: str) -> dict:
    return {"id": request_id, "error": {"code": code, "message": message}}


class ModelSession:
    """One model, one tokenizer, deterministic eval-mode scoring."""

    def __init__(self, model_id: str = DEFAULT_MODEL, *, device: str = "cpu",
                 batch_size: int = 32, lowercase: bool = True):
        self.model_id = model_id
        self.device = torch.device(device)
        self.batch_size = batch_size
        self.lowercase = lowercase
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForMaskedLM.from_pretrained(model_id)
        self.model.to(self.device)
        self.model.eval()
        self._vocab = self.tokenizer.get_vocab()

    # --- vocabulary -----------------------------------------------------------

    def vocabulary(self) -> set[str]:
        """Every whole-word (non-continuation, non-special) vocabulary token."""
        special = set(self.tokenizer.all_special_tokens)
        return {tok for tok in self._vocab
                if not tok.startswith("##") and tok not in special}

    def vocab_hash(self) -> str:
        payload = "\n".join(sorted(self._vocab)).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]

    def _single_token_id(self, word: str) -> int | None:
        pieces = self.tokenizer.tokenize(self._fold(word))
        if len(pieces) != 1 or pieces[0] == self.tokenizer.unk_token:
            return None
        return self.tokenizer.convert_tokens_to_ids(pieces[0])

    def contains(self, words: Iterable[str]) -> dict[str, bool]:
        return {w: self._single_token_id(w) is not None for w in words}

    def _fold(self, text: str) -> str:
        return text.lower() if self.lowercase else text

    # --- scoring ---------------------------------------------------------------

    def _encode(self, request: dict) -> tuple[list[int], int]:
        """Input ids with the mask symbol substituted at the request's masked
        word; every other word is re-tokenized unchanged around it."""
        tokens = request["tokens"]
        mask_index = request["mask_index"]
        tok = self.tokenizer
        prefix = tok.encode(self._fold(" ".join(tokens[:mask_index])),
                            add_special_tokens=False) if mask_index else []
        suffix = tok.encode(self._fold(" ".join(tokens[mask_index + 1:])),
                            add_special_tokens=False) if mask_index + 1 < len(tokens) else []
        ids = ([tok.cls_token_id] + prefix + [tok.mask_token_id]
               + suffix + [tok.sep_token_id])
        return ids, 1 + len(prefix)

    @staticmethod
    def _validate(request: dict) -> str | None:
        if not isinstance(request.get("id"), str):
            return "missing or non-string id"
        tokens = request.get("tokens")
        if not isinstance(tokens, list) or not tokens \
                or not all(isinstance(t, str) for t in tokens):
            return "tokens must be a non-empty list of strings"
        mask_index = request.get("mask_index")
        if not isinstance(mask_index, int) or not 0 <= mask_index < len(tokens):
            return "mask_index out of range"
        candidates = request.get("candidates")
        if (not isinstance(candidates, list) or len(candidates) != 2
                or not all(isinstance(c, str) for c in candidates)
                or candidates[0] == candidates[1]):
            return "candidates must be two distinct strings"
        return None

    def score_batch(self, requests: list[dict]) -> list[dict]:
        """Wire-shaped responses, in request order."""
        responses: list[dict | None] = [None] * len(requests)
        scoreable: list[tuple[int, list[int], int, tuple[int, int]]] = []
        for i, request in enumerate(requests):
            problem = self._validate(request)
            if problem is not None:
                responses[i] = _error(request.get("id"), ERROR_BAD_REQUEST, problem)
                continue
            candidate_ids = []
            for cand in request["candidates"]:
                cid = self._single_token_id(cand)
                if cid is None:
                    responses[i] = _error(
                        request["id"], ERROR_NOT_IN_VOCAB,
                        f"candidate {cand!r} is not a single vocabulary token")
                    break
                candidate_ids.append(cid)
            if responses[i] is not None:
                continue
            ids, mask_pos = self._encode(request)
            scoreable.append((i, ids, mask_pos, (candidate_ids[0], candidate_ids[1])))

        pad_id = self.tokenizer.pad_token_id or 0
        for start in range(0, len(scoreable), self.batch_size):
            chunk = scoreable[start:start + self.batch_size]
            width = max(len(ids) for _, ids, _, _ in chunk)
            input_ids = torch.full((len(chunk), width), pad_id, dtype=torch.long)
            attention = torch.zeros((len(chunk), width), dtype=torch.long)
            for row, (_, ids, _, _) in enumerate(chunk):
                input_ids[row, :len(ids)] = torch.tensor(ids, dtype=torch.long)
                attention[row, :len(ids)] = 1
            with torch.no_grad():
                logits = self.model(input_ids=input_ids.to(self.device),
                                    attention_mask=attention.to(self.device)).logits
            log_probs = torch.log_softmax(logits, dim=-1)
            for row, (i, _, mask_pos, (c0, c1)) in enumerate(chunk):
                at_mask = log_probs[row, mask_pos]
                responses[i] = {
                    "id": requests[i]["id"],
                    "scores": [float(at_mask[c0]), float(at_mask[c1])],
                }
        assert all(r is not None for r in responses)
        return responses  # type: ignore[return-value]

    def debug_mask(self, request: dict) -> dict:
        """The exact model-side token sequence and mask position, for
        masking-correctness checks."""
        problem = self._validate(request)
        if problem is not None:
            return _error(request.get("id"), ERROR_BAD_REQUEST, problem)
        ids, mask_pos = self._encode(request)
        return {
            "id": request["id"],
            "model_tokens": self.tokenizer.convert_ids_to_tokens(ids),
            "mask_position": mask_pos,
        }
