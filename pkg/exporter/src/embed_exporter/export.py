"""Hidden-state export.

For each requested layer (offsets from the top of the encoder) one binary
embedding file is written holding, per headline, the hidden vectors of token
positions 2..32 — 31 rows; position 1 is the classification slot and is
excluded. Padded positions are exported as-is: their hidden states are real
model outputs. A `news_id,p_plus` CSV from the classification head rides
along as the sentence-level baseline score.
"""

from __future__ import annotations

from pathlib import Path

import torch

from .config import ExportConfig
from .finetune import encode, head_probabilities
from .store import write_embedding_file, write_scores_csv


def layer_index(model, offset: int) -> int:
    """Absolute 1-based encoder layer index for an offset from the top."""
    total = model.config.num_hidden_layers
    index = total - offset
    if index < 1:
        raise ValueError(f"layer offset {offset} out of range for a {total}-layer encoder")
    return index


@torch.no_grad()
def export_embeddings(model, tokenizer, docs, config: ExportConfig, out_dir, source: str) -> dict:
    """Write one embedding file per configured layer plus the score CSV.

    Returns {"layer_<index>": path, ..., "scores": path, "index_<index>": path}.
    """
    if source not in ("base", "tuned"):
        raise ValueError(f"source must be base or tuned, got {source!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.eval()

    indices = [layer_index(model, offset) for offset in config.layers]
    collected = {index: [] for index in indices}
    for start in range(0, len(docs), config.batch_size):
        batch = docs[start : start + config.batch_size]
        enc = encode(tokenizer, [d.headline for d in batch], config.max_tokens)
        states = model(**enc, output_hidden_states=True).hidden_states
        for index in indices:
            # hidden_states[0] is the embedding layer; [index] is encoder layer `index`
            layer_out = states[index][:, 1:, :]  # drop the classification slot
            for doc, matrix in zip(batch, layer_out):
                collected[index].append((doc.news_id, matrix.numpy().astype("<f4")))

    paths = {}
    for index in indices:
        path = out_dir / f"embeddings_{source}_layer{index}.bin"
        index_path = out_dir / f"embeddings_{source}_layer{index}.idx.csv"
        write_embedding_file(path, source, index, collected[index], index_path)
        paths[f"layer_{index}"] = path
        paths[f"index_{index}"] = index_path

    scores_path = out_dir / f"cls_scores_{source}.csv"
    write_scores_csv(scores_path, head_probabilities(model, tokenizer, docs, config))
    paths["scores"] = scores_path
    return paths
