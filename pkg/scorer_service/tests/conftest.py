from __future__ import annotations

import pytest
import torch
from transformers import BertConfig, BertForMaskedLM, BertTokenizer

WORDS = [
    "the", "my", "that", "and", "near",
    "boy", "boys", "girl", "girls", "plate", "glasses", "cat", "cats",
    "laughs", "laugh", "runs", "run", "plays", "play", "breaks", "break",
    "chases", "chase",
]
PIECES = ["za", "##rp", "##ing"]
SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A saved random-weight masked LM with a case-sensitive WordPiece vocab;
    small enough to build offline in milliseconds."""
    model_dir = tmp_path_factory.mktemp("tiny-mlm")
    vocab = SPECIALS + WORDS + PIECES
    (model_dir / "vocab.txt").write_text("\n".join(vocab) + "\n")
    tokenizer = BertTokenizer(str(model_dir / "vocab.txt"), do_lower_case=False)
    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(vocab), hidden_size=32, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=64, max_position_embeddings=48,
        pad_token_id=0)
    model = BertForMaskedLM(config)
    model.eval()
    tokenizer.save_pretrained(model_dir)
    model.save_pretrained(model_dir)
    return model_dir


@pytest.fixture(scope="session")
def session(tiny_model_dir):
    from scorer_service import ModelSession
    return ModelSession(str(tiny_model_dir), batch_size=4)
