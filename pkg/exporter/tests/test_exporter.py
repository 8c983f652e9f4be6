"""Exporter acceptance: separable fine-tune, 31-row exports for the top three
layers, and byte-level compatibility with the primary embedding store."""

import random
from pathlib import Path

import numpy as np
import pytest
import torch

from conftest import HIDDEN, LAYERS, WORDS
from embed_exporter.config import MAX_TOKENS, ExportConfig
from embed_exporter.data import Doc, load_docs, training_split
from embed_exporter.export import export_embeddings, layer_index
from embed_exporter.finetune import accuracy, fine_tune, load_checkpoint
from embed_exporter.store import write_embedding_file

# the cross-component contract: files written here must parse in the
# pipeline's own store
from newssignal.embeddings import read_embedding_at, read_embeddings, read_index


def separable_docs(n=20, split="train"):
    random.seed(0)
    docs = []
    for i in range(n):
        label = i % 2
        fillers = " ".join(random.choice(WORDS[4:]) for _ in range(4))
        text = ("up good " if label else "down bad ") + fillers
        docs.append(Doc(news_id=i + 1, headline=text, label=label, split=split))
    return docs


@pytest.fixture(scope="session")
def tuned(checkpoint):
    docs = separable_docs()
    config = ExportConfig(checkpoint=checkpoint, learning_rate=5e-3, epochs=30, seed=3)
    model, tokenizer = fine_tune(config, docs, docs)
    return model, tokenizer, config, docs


# ---------------------------------------------------------------------------
# config


def test_config_fixes_sequence_length(checkpoint):
    with pytest.raises(ValueError):
        ExportConfig(checkpoint=checkpoint, max_tokens=16)
    with pytest.raises(ValueError):
        ExportConfig(checkpoint=checkpoint, layers=())
    with pytest.raises(ValueError):
        ExportConfig(checkpoint=checkpoint, layers=(5,))
    with pytest.raises(ValueError):
        ExportConfig(checkpoint=checkpoint, layers=(0, 0))
    assert ExportConfig(checkpoint=checkpoint).layers == (0, 1, 2)


# ---------------------------------------------------------------------------
# fine-tune


def test_separable_fine_tune_reaches_dev_accuracy_one(tuned):
    model, tokenizer, config, docs = tuned
    assert accuracy(model, tokenizer, docs, config) == 1.0


def test_zero_epochs_returns_base_model_unchanged(checkpoint):
    config = ExportConfig(checkpoint=checkpoint, epochs=0)
    model, _ = fine_tune(config, separable_docs(), [])
    fresh, _ = load_checkpoint(config)
    for (name, a), (_, b) in zip(model.state_dict().items(), fresh.state_dict().items()):
        assert torch.equal(a, b), name


def test_tuned_embeddings_differ_from_base(checkpoint, tuned, tmp_path):
    model, tokenizer, config, docs = tuned
    base_model, base_tokenizer = load_checkpoint(ExportConfig(checkpoint=checkpoint, epochs=0))
    base_paths = export_embeddings(
        base_model, base_tokenizer, docs, config, tmp_path / "base", "base"
    )
    tuned_paths = export_embeddings(model, tokenizer, docs, config, tmp_path / "tuned", "tuned")
    top = layer_index(model, 0)
    base_records = read_embeddings(base_paths[f"layer_{top}"])
    tuned_records = read_embeddings(tuned_paths[f"layer_{top}"])
    assert any(
        not np.array_equal(a.matrix, b.matrix) for a, b in zip(base_records, tuned_records)
    )


# ---------------------------------------------------------------------------
# export


def test_export_has_31_rows_per_headline_for_top_three_layers(tuned, tmp_path):
    model, tokenizer, config, docs = tuned
    paths = export_embeddings(model, tokenizer, docs, config, tmp_path, "tuned")
    layers = sorted(
        int(key.split("_")[1]) for key in paths if key.startswith("layer_")
    )
    assert layers == [LAYERS - 2, LAYERS - 1, LAYERS]  # L-2, L-1, L with distinct tags
    for layer in layers:
        records = read_embeddings(paths[f"layer_{layer}"])
        assert len(records) == len(docs)
        for record in records:
            assert record.matrix.shape == (MAX_TOKENS - 1, HIDDEN)
            assert record.source == "tuned"
            assert record.layer == layer


def test_round_trip_through_primary_store_with_index(tuned, tmp_path):
    model, tokenizer, config, docs = tuned
    paths = export_embeddings(model, tokenizer, config=config, docs=docs, out_dir=tmp_path, source="tuned")
    top = layer_index(model, 0)
    records = read_embeddings(paths[f"layer_{top}"])
    assert [r.news_id for r in records] == [d.news_id for d in docs]
    index = read_index(paths[f"index_{top}"])
    for record in records:
        direct = read_embedding_at(paths[f"layer_{top}"], index[record.news_id])
        assert direct == record


def test_cls_scores_csv(tuned, tmp_path):
    model, tokenizer, config, docs = tuned
    paths = export_embeddings(model, tokenizer, docs, config, tmp_path, "tuned")
    lines = Path(paths["scores"]).read_text().splitlines()
    assert lines[0] == "news_id,p_plus"
    assert len(lines) == len(docs) + 1
    probs = {int(line.split(",")[0]): float(line.split(",")[1]) for line in lines[1:]}
    labels = {d.news_id: d.label for d in docs}
    assert all(0.0 <= p <= 1.0 for p in probs.values())
    # the tuned head separates the toy set, so its scores agree with labels
    assert all((p > 0.5) == bool(labels[nid]) for nid, p in probs.items())


def test_no_temporary_files_left_behind(tuned, tmp_path):
    model, tokenizer, config, docs = tuned
    export_embeddings(model, tokenizer, docs, config, tmp_path, "tuned")
    assert not list(tmp_path.glob("*.tmp"))


def test_store_writer_validates(tmp_path):
    with pytest.raises(ValueError):
        write_embedding_file(tmp_path / "x.bin", "nonsense", 1, [])
    with pytest.raises(ValueError):
        write_embedding_file(
            tmp_path / "x.bin", "tuned", 1, [(1, np.zeros((0, 4), dtype=np.float32))]
        )


# ---------------------------------------------------------------------------
# data loading


def write_input_files(tmp_path, docs):
    news_lines = ["id,timestamp,ticker,headline,vendor_score,vendor_confidence"]
    labeled_lines = ["news_id,adjusted_return,label,split"]
    for doc in docs:
        news_lines.append(f'{doc.news_id},2021-01-04T10:00:00.000Z,STK,"{doc.headline}",,')
        labeled_lines.append(f"{doc.news_id},0.01,{doc.label},{doc.split}")
    news_path = tmp_path / "news.csv"
    labeled_path = tmp_path / "labeled.csv"
    news_path.write_text("\n".join(news_lines) + "\n")
    labeled_path.write_text("\n".join(labeled_lines) + "\n")
    return labeled_path, news_path


def test_load_docs_joins_text(tmp_path):
    docs = separable_docs(6)
    labeled_path, news_path = write_input_files(tmp_path, docs)
    loaded = load_docs(labeled_path, news_path)
    assert [(d.news_id, d.headline, d.label, d.split) for d in loaded] == [
        (d.news_id, d.headline, d.label, d.split) for d in docs
    ]
    train, dev = training_split(loaded)
    assert len(train) == 6 and dev == []


def test_load_docs_missing_headline(tmp_path):
    docs = separable_docs(2)
    labeled_path, news_path = write_input_files(tmp_path, docs)
    labeled_path.write_text(labeled_path.read_text() + "99,0.0,1,train\n")
    with pytest.raises(ValueError):
        load_docs(labeled_path, news_path)


def test_excluded_rows_carry_no_label(tmp_path):
    labeled = tmp_path / "labeled.csv"
    news = tmp_path / "news.csv"
    news.write_text(
        'id,timestamp,ticker,headline,vendor_score,vendor_confidence\n'
        '1,2021-01-04T10:00:00.000Z,STK,"up good",,\n'
    )
    labeled.write_text("news_id,adjusted_return,label,split\n1,0.0,excluded,train\n")
    docs = load_docs(labeled, news)
    assert docs[0].label is None
    assert training_split(docs) == ([], [])


# ---------------------------------------------------------------------------
# CLI


def test_cli_end_to_end(checkpoint, tmp_path):
    from click.testing import CliRunner

    from embed_exporter.cli import main

    docs = separable_docs(20)
    dev = [
        Doc(news_id=100 + d.news_id, headline=d.headline, label=d.label, split="dev")
        for d in docs[:6]
    ]
    labeled_path, news_path = write_input_files(tmp_path, docs + dev)
    out_dir = tmp_path / "out"
    result = CliRunner().invoke(
        main,
        [
            "--checkpoint", str(checkpoint), "--labeled", str(labeled_path),
            "--news", str(news_path), "--out-dir", str(out_dir),
            "--layers", "0,1,2", "--epochs", "30", "--batch-size", "32",
            "--learning-rate", "5e-3", "--seed", "3",
        ],
        catch_exceptions=False,
    )
    assert result.exit_code == 0, result.output
    assert "dev accuracy" in result.output
    files = sorted(p.name for p in out_dir.iterdir())
    assert [n for n in files if n.endswith(".bin")] == [
        f"embeddings_tuned_layer{i}.bin" for i in (1, 2, 3)
    ]
    records = read_embeddings(out_dir / f"embeddings_tuned_layer{LAYERS}.bin")
    assert len(records) == len(docs) + len(dev)
    assert records[0].matrix.shape == (31, HIDDEN)


def test_cli_bad_layers_exit_2(checkpoint, tmp_path):
    from click.testing import CliRunner

    from embed_exporter.cli import main

    labeled_path, news_path = write_input_files(tmp_path, separable_docs(2))
    result = CliRunner().invoke(
        main,
        ["--checkpoint", str(checkpoint), "--labeled", str(labeled_path),
         "--news", str(news_path), "--out-dir", str(tmp_path / "out"), "--layers", "9"],
    )
    assert result.exit_code == 2
