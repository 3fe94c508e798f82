"""Lipschitz-constrained learning on k-NN graphs: primal-dual training with
KKT certificates, p-seminorm robustification, and robustness-performance
tradeoff curves."""

from .data import (
    CheckerboardSpec,
    LabeledDataset,
    checkerboard_label,
    gen_checkerboard,
    kmeans,
    load_idx_dataset,
    read_idx,
    split,
    write_idx,
)
from .graph import (
    DatasetPartition,
    Graph,
    VertexSet,
    build_knn_graph,
    graph_lipschitz,
    partition_dataset,
    select_vertices,
)
from .loss import LossSpec, empirical_loss, project_to_simplex, sample_loss, sample_loss_grad

__version__ = "0.1.0"
