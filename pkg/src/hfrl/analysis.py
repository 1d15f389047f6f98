"""Post-hoc analysis of parameter vectors and federation round logs.

Similarity between agents is plain cosine similarity of their flattened
parameter vectors.  An optional per-coordinate standardisation (z-score
across agents) is available for pipelines that want scale-free structure;
the default stays raw so that hand-checkable examples hold exactly.

Hierarchical grouping is agglomerative average linkage on the distance
1 - similarity, written out here rather than imported so every tie-break
is pinned down: the pair with the smallest distance merges first, and
equal distances resolve toward the lexicographically smallest cluster-id
pair.  Average linkage makes merge heights non-decreasing, which the test
suite asserts.

Round logs are JSON-lines files, one object per federation round, as the
experiment runner emits them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .svgplot import heatmap


@dataclass(frozen=True)
class SimilarityResult:
    names: list[str]        # sorted agent names; row/column order of the matrix
    matrix: np.ndarray      # (N, N) cosine similarities, diagonal fixed at 1
    zero_agents: list[str]  # agents whose (possibly standardised) vector is zero


def similarity_matrix(params: dict[str, np.ndarray], standardize: bool = False) -> SimilarityResult:
    """Pairwise cosine similarity of the agents' parameter vectors.

    A zero vector has no direction; its similarity to everything else is
    reported as 0 and the agent is listed in ``zero_agents``.
    """
    if not params:
        raise ValueError("no parameter vectors given")
    names = sorted(params)
    stack = np.stack([np.asarray(params[n], dtype=np.float64).ravel() for n in names])
    if standardize and len(names) > 1:
        centered = stack - stack.mean(axis=0)
        std = stack.std(axis=0)
        stack = np.divide(centered, std, out=np.zeros_like(centered), where=std > 0)
    norms = np.linalg.norm(stack, axis=1)
    zero = norms == 0.0
    safe = np.where(zero, 1.0, norms)
    unit = stack / safe[:, None]
    matrix = unit @ unit.T
    matrix[zero, :] = 0.0
    matrix[:, zero] = 0.0
    np.fill_diagonal(matrix, 1.0)
    np.clip(matrix, -1.0, 1.0, out=matrix)
    return SimilarityResult(
        names=names,
        matrix=matrix,
        zero_agents=[n for n, z in zip(names, zero) if z],
    )


def top_k_similar(result: SimilarityResult, agent: str, k: int) -> list[tuple[str, float]]:
    """The ``k`` most similar other agents, ties broken by ascending name."""
    if agent not in result.names:
        raise KeyError(f"unknown agent {agent!r}; have {result.names}")
    if k < 1:
        raise ValueError("k must be at least 1")
    row = result.matrix[result.names.index(agent)]
    others = [(name, float(s)) for name, s in zip(result.names, row) if name != agent]
    others.sort(key=lambda item: (-item[1], item[0]))
    return others[:k]


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge tree over ``leaves``.

    ``merges[i]`` is (left_id, right_id, height, size): leaf ids are
    0..N-1, merge ``i`` creates cluster id N+i.  Heights never decrease.
    """

    leaves: list[str]
    merges: list[tuple[int, int, float, int]]

    def cut(self, k: int) -> dict[str, int]:
        """Labels from keeping the last k-1 merges unapplied.

        Labels are canonical: scanning leaves in order, the first cluster
        seen is 0, the next new one 1, and so on.
        """
        n = len(self.leaves)
        if not 1 <= k <= n:
            raise ValueError(f"k must be in [1, {n}], got {k}")
        parent = list(range(2 * n - 1))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for step, (a, b, _, _) in enumerate(self.merges[: n - k]):
            new_id = n + step
            parent[find(a)] = new_id
            parent[find(b)] = new_id

        remap: dict[int, int] = {}
        labels: dict[str, int] = {}
        for i, leaf in enumerate(self.leaves):
            root = find(i)
            if root not in remap:
                remap[root] = len(remap)
            labels[leaf] = remap[root]
        return labels


def hierarchical_cluster(result: SimilarityResult) -> Dendrogram:
    """Average-linkage clustering on the distance 1 - similarity."""
    names = result.names
    n = len(names)
    dist = 1.0 - result.matrix
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    merges: list[tuple[int, int, float, int]] = []
    next_id = n
    while len(members) > 1:
        best: tuple[float, int, int] | None = None
        ids = sorted(members)
        for ai in range(len(ids)):
            for bi in range(ai + 1, len(ids)):
                a, b = ids[ai], ids[bi]
                d = float(np.mean([dist[i, j] for i in members[a] for j in members[b]]))
                if best is None or d < best[0] or (d == best[0] and (a, b) < best[1:]):
                    best = (d, a, b)
        d, a, b = best
        members[next_id] = members.pop(a) + members.pop(b)
        merges.append((a, b, d, len(members[next_id])))
        next_id += 1
    return Dendrogram(leaves=list(names), merges=merges)


def fomo_affinity(weights: dict[str, dict[str, float]]) -> SimilarityResult:
    """Symmetrised importance-weight matrix from a fomo round.

    ``weights[n][i]`` is how much agent ``n`` leaned on candidate ``i``;
    affinity is the average of the two directions, so it reads as "how
    much this pair pulls toward each other".
    """
    if not weights:
        raise ValueError("no weight rows given")
    names = sorted(weights)
    w = np.zeros((len(names), len(names)))
    for i, n in enumerate(names):
        for j, m in enumerate(names):
            w[i, j] = float(weights[n].get(m, 0.0))
    sym = (w + w.T) / 2.0
    return SimilarityResult(names=names, matrix=sym, zero_agents=[])


def similarity_heatmap_svg(result: SimilarityResult, title: str = "parameter similarity") -> str:
    return heatmap(result.matrix.tolist(), result.names, result.names, title=title)


# -- round logs -------------------------------------------------------------


def load_rounds(path: str | Path) -> list[dict]:
    """Parse a JSON-lines round log; every record must carry a "round" key."""
    rounds = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "round" not in record:
                raise ValueError(f"{path}:{lineno}: record without a 'round' field")
            rounds.append(record)
    return rounds


def round_snapshot(rounds: list[dict], round_no: int) -> dict:
    """The record for one round; lists what exists when it is missing."""
    for record in rounds:
        if record["round"] == round_no:
            return record
    available = ", ".join(str(r["round"]) for r in rounds) or "none"
    raise KeyError(f"round {round_no} not logged; available rounds: {available}")


def snapshot_series(rounds: list[dict], key: str) -> list[tuple[int, object]]:
    """(round, value) pairs for one top-level key, skipping absent rounds."""
    return [(r["round"], r[key]) for r in rounds if key in r]
