"""Ranking autoencoder for extreme multi-label classification."""
from .data import Dataset, DataFormatError, LabelSet, SparseVector, parse_xml_repo, read_dataset, serialize_xml_repo
from .loss import bce_loss, rank_loss, rank_loss_bruteforce
from .metrics import MetricsReport, evaluate, ndcg_at_k, precision_at_k
from .model import ModelConfig, ModelParams, TrainReport, predict, train
from .checkpoint import load_checkpoint, save_checkpoint
from .noise import NoiseSpec, inject

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DataFormatError", "LabelSet", "SparseVector", "parse_xml_repo", "read_dataset",
    "serialize_xml_repo", "bce_loss", "rank_loss", "rank_loss_bruteforce", "MetricsReport", "evaluate",
    "ndcg_at_k", "precision_at_k", "ModelConfig", "ModelParams", "TrainReport", "predict", "train",
    "load_checkpoint", "save_checkpoint", "NoiseSpec", "inject",
]
