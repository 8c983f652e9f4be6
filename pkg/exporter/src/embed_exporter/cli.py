"""Command line for the batch exporter: fine-tune (optionally) and export."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import __version__
from .config import ExportConfig
from .data import load_docs, training_split
from .export import export_embeddings
from .finetune import accuracy, fine_tune


@click.command()
@click.version_option(__version__, prog_name="embed-export")
@click.option("--checkpoint", required=True, type=click.Path(exists=True),
              help="Pretrained bidirectional-transformer checkpoint directory.")
@click.option("--labeled", "labeled_path", required=True, type=click.Path(exists=True))
@click.option("--news", "news_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--layers", default="0,1,2", help="Offsets from the top layer (0 = last).")
@click.option("--epochs", type=int, default=3, help="0 exports the base model unchanged.")
@click.option("--batch-size", type=int, default=32)
@click.option("--learning-rate", type=float, default=2e-6)
@click.option("--seed", type=int, default=0)
@click.option("--save-checkpoint", type=click.Path(), default=None,
              help="Optionally save the fine-tuned checkpoint here.")
def main(checkpoint, labeled_path, news_path, out_dir, layers, epochs, batch_size,
         learning_rate, seed, save_checkpoint):
    """Fine-tune on the labeled train split and export hidden-state files."""
    try:
        config = ExportConfig(
            checkpoint=Path(checkpoint),
            batch_size=batch_size,
            learning_rate=learning_rate,
            epochs=epochs,
            layers=tuple(int(v) for v in layers.split(",") if v.strip()),
            seed=seed,
        )
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)

    docs = load_docs(labeled_path, news_path)
    train_docs, dev_docs = training_split(docs)
    model, tokenizer = fine_tune(config, train_docs, dev_docs)
    if epochs > 0 and dev_docs:
        click.echo(f"dev accuracy after fine-tune: {accuracy(model, tokenizer, dev_docs, config):.4f}")
    if save_checkpoint:
        model.save_pretrained(save_checkpoint)
        tokenizer.save_pretrained(save_checkpoint)
    source = "base" if epochs == 0 else "tuned"
    paths = export_embeddings(model, tokenizer, docs, config, out_dir, source)
    click.echo(f"wrote {len(paths)} artifacts to {out_dir}")


if __name__ == "__main__":
    main()
