"""graphforget: edge and node unlearning for link-prediction GNNs.

Train a GCN or GIN on a graph, carve out a forget set, erase its influence by
distilling against a frozen preserver and a destroyer model, and evaluate the
result against a from-scratch retrained reference.
"""
from .graphs import (
    Graph,
    EdgeSplit,
    ForgetSet,
    delete_nodes,
    generate_sbm,
    load_graph,
    sample_forget_edges,
    sample_negatives,
    save_edges,
    split_edges,
)
from .losses import bce_loss, kl_bernoulli, mse_embeddings
from .metrics import (
    EvalReport,
    assemble_report,
    auc,
    eval_forget,
    eval_retain,
    flops_estimate,
    mi_ratio,
)
from .models import (
    LayerEmbeddings,
    ModelParams,
    NormAdj,
    forward,
    gcn_normalize,
    load_params,
    save_params,
    score_edges,
)
from .optim import OptState, adam_step
from .pipeline import PipelineResult, run_pipeline, sweep
from .training import TrainConfig, init_params, train
from .unlearning import (
    DestroyerSpec,
    UnlearnConfig,
    UnlearnTrace,
    distill_unlearn,
    grad_ascent_unlearn,
    make_destroyer,
)

__version__ = "0.1.0"

__all__ = [
    "Graph", "EdgeSplit", "ForgetSet", "delete_nodes", "generate_sbm", "load_graph",
    "sample_forget_edges", "sample_negatives", "save_edges", "split_edges",
    "bce_loss", "kl_bernoulli", "mse_embeddings",
    "EvalReport", "assemble_report", "auc", "eval_forget", "eval_retain",
    "flops_estimate", "mi_ratio",
    "LayerEmbeddings", "ModelParams", "NormAdj", "forward", "gcn_normalize",
    "load_params", "save_params", "score_edges",
    "OptState", "adam_step",
    "PipelineResult", "run_pipeline", "sweep",
    "TrainConfig", "init_params", "train",
    "DestroyerSpec", "UnlearnConfig", "UnlearnTrace", "distill_unlearn",
    "grad_ascent_unlearn", "make_destroyer",
    "__version__",
]
