"""Rate-adaptive codebook resizing."""
from holocodec.adapt.adapter import (
    AdapterModel,
    AdapterPair,
    adapt,
    export_books,
    supported_sizes,
    train_adapter,
)
from holocodec.adapt.clustering import cluster_reduce, export_cluster_books, kmeans

__all__ = [
    "AdapterModel",
    "AdapterPair",
    "adapt",
    "cluster_reduce",
    "export_books",
    "export_cluster_books",
    "kmeans",
    "supported_sizes",
    "train_adapter",
]
