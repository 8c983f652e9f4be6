"""Batch exporter: fine-tune a pretrained bidirectional transformer on labeled
headlines, then write per-headline hidden-state matrices (top layers) and the
classification-head scores in the shared file formats."""

__version__ = "0.1.0"
