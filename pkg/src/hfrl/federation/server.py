"""Round-based parameter aggregation.

Agents train locally, upload flattened parameter vectors, and the server
answers with one broadcast vector per agent.  Three schemes:

``fedavg``
    Everyone receives the plain mean of all uploads.

``cluster``
    Uploads are k-means grouped (see :mod:`.kmeans`); each agent receives
    its own cluster's mean, so only structurally similar agents share.

``fomo``
    Each agent evaluates every upload on its own recent experience and
    blends the helpful ones.  With ``w_prev`` the agent's round-start
    parameters and ``L_n`` its local loss, the raw importance of
    candidate ``w_i`` is

        rho_ni = -alpha * (L_n(w_i) - L_n(w_prev)) / ||w_i - w_prev||,

    negative parts are clipped, the remainder is normalised to sum to 1,
    and the agent moves to ``w_prev + sum_i rho*_ni (w_i - w_prev)``.
    When no candidate helps at all the agent simply keeps its own local
    update (recorded in the round diagnostics).

``none``
    Identity round: every agent keeps its upload.  This makes fully
    decentralised runs share the orchestration code path.

Uploads are sorted by agent name before any aggregation, so the results
do not depend on arrival order.  ``HFRL_THREADS`` caps the worker pool
used for the fomo loss evaluations (default: serial).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kmeans import kmeans_cluster

METHODS = ("fedavg", "cluster", "fomo", "none")


@dataclass(frozen=True)
class AgentUpload:
    """One agent's contribution to a federation round."""

    agent: str
    params: np.ndarray       # flat vector after local training
    prev_params: np.ndarray  # flat vector the round started from
    loss: float              # surrogate loss of ``params`` on the round's data
    n_steps: int = 0

    def __post_init__(self) -> None:
        p = np.asarray(self.params, dtype=np.float64).ravel()
        q = np.asarray(self.prev_params, dtype=np.float64).ravel()
        if p.size == 0 or p.shape != q.shape:
            raise ValueError("params and prev_params must be equal-length non-empty vectors")
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "prev_params", q)


@dataclass(frozen=True)
class FederationRound:
    method: str
    broadcasts: dict[str, np.ndarray]
    diagnostics: dict = field(default_factory=dict)


def fedavg_aggregate(vectors: list[np.ndarray]) -> np.ndarray:
    """Unweighted coordinate-wise mean of parameter vectors."""
    if not vectors:
        raise ValueError("nothing to aggregate")
    stack = np.stack([np.asarray(v, dtype=np.float64) for v in vectors])
    return stack.mean(axis=0)


def cluster_aggregate(
    uploads: list[AgentUpload],
    n_clusters: int,
    seed: int = 0,
) -> tuple[dict[str, np.ndarray], dict]:
    """K-means the uploads; each agent gets its cluster's mean."""
    points = np.stack([u.params for u in uploads])
    assignment = kmeans_cluster(points, k=n_clusters, seed=seed)
    broadcasts: dict[str, np.ndarray] = {}
    for u, lab in zip(uploads, assignment.labels):
        members = points[assignment.labels == lab]
        broadcasts[u.agent] = members.mean(axis=0)
    diag = {
        "cluster_labels": {u.agent: int(lab) for u, lab in zip(uploads, assignment.labels)},
        "cluster_sizes": np.bincount(assignment.labels, minlength=n_clusters).tolist(),
        "cluster_wcss": assignment.wcss,
    }
    return broadcasts, diag


def fomo_importance(
    prev: np.ndarray,
    candidates: list[np.ndarray],
    prev_loss: float,
    candidate_losses: list[float],
    alpha: float = 1.0,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Raw and normalised importances of candidates for one agent.

    Returns (raw, weights, fell_back): ``weights`` is a simplex vector;
    when every raw importance is non-positive it is undefined by the
    normalisation, so ``fell_back`` is set and weights is all zeros (the
    caller keeps the agent's own update instead).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    raw = np.zeros(len(candidates), dtype=np.float64)
    for i, (cand, cl) in enumerate(zip(candidates, candidate_losses)):
        gap = np.linalg.norm(cand - prev)
        if gap > 0.0:
            raw[i] = -alpha * (cl - prev_loss) / gap
    clipped = np.maximum(raw, 0.0)
    total = clipped.sum()
    if total <= 0.0:
        return raw, np.zeros_like(raw), True
    return raw, clipped / total, False


def fomo_update(prev: np.ndarray, candidates: list[np.ndarray], weights: np.ndarray) -> np.ndarray:
    """Move ``prev`` toward the weighted candidates.

    An exact one-hot weight vector returns that candidate bit for bit,
    so "adopt neighbour j wholesale" introduces no rounding noise.
    """
    hot = np.flatnonzero(weights == 1.0)
    if hot.size == 1 and weights.sum() == 1.0:
        return candidates[int(hot[0])].copy()
    out = prev.astype(np.float64).copy()
    for w, cand in zip(weights, candidates):
        if w != 0.0:
            out += w * (cand - prev)
    return out


def _fomo_round(
    uploads: list[AgentUpload],
    loss_fns: dict[str, Callable[[np.ndarray], float]],
    alpha: float,
) -> tuple[dict[str, np.ndarray], dict]:
    names = [u.agent for u in uploads]
    candidates = [u.params for u in uploads]

    def evaluate(n: int) -> tuple[float, list[float]]:
        fn = loss_fns[names[n]]
        return float(fn(uploads[n].prev_params)), [float(fn(c)) for c in candidates]

    workers = int(os.environ.get("HFRL_THREADS", "1") or "1")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            evals = list(pool.map(evaluate, range(len(uploads))))
    else:
        evals = [evaluate(n) for n in range(len(uploads))]

    broadcasts: dict[str, np.ndarray] = {}
    weight_rows: dict[str, dict[str, float]] = {}
    raw_rows: dict[str, dict[str, float]] = {}
    fallbacks: list[str] = []
    for n, u in enumerate(uploads):
        prev_loss, cand_losses = evals[n]
        raw, weights, fell_back = fomo_importance(u.prev_params, candidates, prev_loss, cand_losses, alpha)
        if fell_back:
            fallbacks.append(u.agent)
            broadcasts[u.agent] = u.params.copy()
        else:
            broadcasts[u.agent] = fomo_update(u.prev_params, candidates, weights)
        weight_rows[u.agent] = {m: float(w) for m, w in zip(names, weights)}
        raw_rows[u.agent] = {m: float(r) for m, r in zip(names, raw)}
    diag = {"fomo_weights": weight_rows, "fomo_raw": raw_rows, "fomo_fallback": fallbacks}
    return broadcasts, diag


def run_round(
    uploads: list[AgentUpload],
    method: str,
    n_clusters: int = 2,
    fomo_alpha: float = 1.0,
    loss_fns: dict[str, Callable[[np.ndarray], float]] | None = None,
    seed: int = 0,
) -> FederationRound:
    """Aggregate one round of uploads; see the module docstring for methods."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if not uploads:
        raise ValueError("no uploads")
    names = [u.agent for u in uploads]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate agent names in uploads: {sorted(names)}")
    sizes = {u.params.size for u in uploads}
    if len(sizes) != 1:
        raise ValueError(f"uploads disagree on parameter count: {sorted(sizes)}")

    uploads = sorted(uploads, key=lambda u: u.agent)
    points = np.stack([u.params for u in uploads])

    if method == "fedavg":
        mean = fedavg_aggregate([u.params for u in uploads])
        broadcasts = {u.agent: mean.copy() for u in uploads}
        extra: dict = {}
    elif method == "cluster":
        broadcasts, extra = cluster_aggregate(uploads, n_clusters=n_clusters, seed=seed)
    elif method == "fomo":
        if loss_fns is None or set(loss_fns) < set(names):
            raise ValueError("fomo requires a loss function for every uploading agent")
        broadcasts, extra = _fomo_round(uploads, loss_fns, fomo_alpha)
    else:
        broadcasts = {u.agent: u.params.copy() for u in uploads}
        extra = {}

    n = len(uploads)
    pair_dists = [
        float(np.linalg.norm(points[i] - points[j])) for i in range(n) for j in range(i + 1, n)
    ]
    diagnostics = {
        "method": method,
        "n_agents": n,
        "param_dim": int(points.shape[1]),
        "losses": {u.agent: float(u.loss) for u in uploads},
        "update_norms": {
            u.agent: float(np.linalg.norm(u.params - u.prev_params)) for u in uploads
        },
        "mean_pairwise_dist": float(np.mean(pair_dists)) if pair_dists else 0.0,
        **extra,
    }
    return FederationRound(method=method, broadcasts=broadcasts, diagnostics=diagnostics)
