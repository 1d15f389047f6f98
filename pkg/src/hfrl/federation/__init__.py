from .kmeans import ClusterAssignment, kmeans_cluster
from .server import (
    METHODS,
    AgentUpload,
    FederationRound,
    cluster_aggregate,
    fedavg_aggregate,
    fomo_importance,
    fomo_update,
    run_round,
)

__all__ = [
    "ClusterAssignment",
    "kmeans_cluster",
    "METHODS",
    "AgentUpload",
    "FederationRound",
    "cluster_aggregate",
    "fedavg_aggregate",
    "fomo_importance",
    "fomo_update",
    "run_round",
]
