"""Fine-tuning of the pretrained checkpoint on labeled headlines.

Headlines are subword-tokenized, padded/truncated to the fixed 32-token
length, and trained through the classification head with cross-entropy.
The best dev-loss epoch wins; zero epochs returns the base model untouched
(its hidden states are the un-tuned embeddings).
"""

from __future__ import annotations

import copy

import torch
from transformers import AutoModelForSequenceClassification, AutoTokenizer

from .config import ExportConfig


def load_checkpoint(config: ExportConfig):
    tokenizer = AutoTokenizer.from_pretrained(config.checkpoint)
    model = AutoModelForSequenceClassification.from_pretrained(config.checkpoint, num_labels=2)
    model.eval()
    return model, tokenizer


def encode(tokenizer, headlines, max_tokens: int):
    return tokenizer(
        list(headlines),
        padding="max_length",
        truncation=True,
        max_length=max_tokens,
        return_tensors="pt",
    )


def _batches(n: int, size: int):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


@torch.no_grad()
def _dataset_loss(model, tokenizer, docs, config) -> float:
    model.eval()
    total = 0.0
    for chunk in _batches(len(docs), config.batch_size):
        batch = docs[chunk]
        enc = encode(tokenizer, [d.headline for d in batch], config.max_tokens)
        labels = torch.tensor([d.label for d in batch])
        out = model(**enc, labels=labels)
        total += float(out.loss) * len(batch)
    return total / len(docs)


def fine_tune(config: ExportConfig, train_docs, dev_docs):
    """Train the encoder plus classification head; return (model, tokenizer).

    Deterministic given the seed. With `epochs == 0` the pretrained weights
    come back unchanged.
    """
    torch.manual_seed(config.seed)
    model, tokenizer = load_checkpoint(config)
    if config.epochs == 0 or not train_docs:
        return model, tokenizer
    if any(d.label not in (0, 1) for d in train_docs):
        raise ValueError("fine-tune labels must be 0 or 1")

    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    best_loss = float("inf")
    best_state = copy.deepcopy(model.state_dict())
    evaluate_on = dev_docs if dev_docs else train_docs
    for _ in range(config.epochs):
        model.train()
        for chunk in _batches(len(train_docs), config.batch_size):
            batch = train_docs[chunk]
            enc = encode(tokenizer, [d.headline for d in batch], config.max_tokens)
            labels = torch.tensor([d.label for d in batch])
            loss = model(**enc, labels=labels).loss
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        dev_loss = _dataset_loss(model, tokenizer, evaluate_on, config)
        if dev_loss < best_loss:
            best_loss = dev_loss
            best_state = copy.deepcopy(model.state_dict())
    model.load_state_dict(best_state)
    model.eval()
    return model, tokenizer


@torch.no_grad()
def head_probabilities(model, tokenizer, docs, config) -> list:
    """Positive-class probability from the classification head, per doc."""
    model.eval()
    out = []
    for chunk in _batches(len(docs), config.batch_size):
        batch = docs[chunk]
        enc = encode(tokenizer, [d.headline for d in batch], config.max_tokens)
        logits = model(**enc).logits
        probs = torch.softmax(logits, dim=-1)[:, 1]
        out.extend((d.news_id, float(p)) for d, p in zip(batch, probs))
    return out


@torch.no_grad()
def accuracy(model, tokenizer, docs, config) -> float:
    probs = head_probabilities(model, tokenizer, docs, config)
    labels = {d.news_id: d.label for d in docs}
    hits = sum(1 for nid, p in probs if (p > 0.5) == bool(labels[nid]))
    return hits / len(docs)
