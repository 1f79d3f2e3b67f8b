"""Climate-disclosure question answering: extraction, segmentation,
embeddings, pair classification, evaluation, and a batch inference
service."""

__version__ = "0.1.0"
