"""Signed weighted digraphs, their Laplacians, threshold graphs and mixing quantities.

Convention: entry a[i, j] is the weight of the link j -> i (column influences row),
weights may be negative, and the diagonal is zero (no self-links). The signed
Laplacian has l_ij = -a_ij off the diagonal and zero row sums. Node indices are
0-based in this API; file formats and reports use 1-based labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tvkuramoto.signals import TimeSignal


@dataclass(frozen=True)
class SignedNetwork:
    """Weighted signed adjacency for m oscillators at one time instant."""

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if np.any(np.abs(np.diag(a)) > 0):
            raise ValueError("self-links are not allowed (nonzero diagonal)")
        object.__setattr__(self, "adjacency", a)

    @property
    def m(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> list:
        """Derived link set {(i, j): a_ij != 0}, never stored."""
        i, j = np.nonzero(self.adjacency)
        return list(zip(i.tolist(), j.tolist()))


@dataclass(frozen=True)
class ThresholdGraph:
    """Boolean digraph keeping edges whose Laplacian entry lies below -eta."""

    edges: np.ndarray  # m x m bool, edges[i, j] True means j -> i present

    @property
    def m(self) -> int:
        return self.edges.shape[0]


def _adjacency_of(net) -> np.ndarray:
    if isinstance(net, SignedNetwork):
        return net.adjacency
    return SignedNetwork(np.asarray(net, dtype=float)).adjacency


def load_adjacency_json(path) -> SignedNetwork:
    """Adjacency from a JSON row-major array of arrays (row i: weights into node i+1)."""
    data = json.loads(Path(path).read_text())
    return SignedNetwork(np.asarray(data, dtype=float))


def load_adjacency_csv(path) -> SignedNetwork:
    """Adjacency from a headerless CSV matrix; row i holds the weights into node i+1."""
    rows = np.loadtxt(Path(path), delimiter=",", ndmin=2)
    return SignedNetwork(rows)


def laplacian_from_adjacency(net) -> np.ndarray:
    """Signed Laplacian: l_ij = -a_ij off-diagonal, diagonal set for zero row sums."""
    a = _adjacency_of(net)
    lap = -a
    np.fill_diagonal(lap, 0.0)
    np.fill_diagonal(lap, -lap.sum(axis=1))
    return lap


def adjacency_from_laplacian(lap: np.ndarray) -> np.ndarray:
    """Recover couplings a_ij = -l_ij (i != j) from a zero-row-sum Laplacian."""
    lap = np.asarray(lap, dtype=float)
    a = -lap.copy()
    np.fill_diagonal(a, 0.0)
    return a


def threshold_graph(lap: np.ndarray, eta: float) -> ThresholdGraph:
    """Keep directed edges (i, j), i != j, with l_ij strictly below -eta."""
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    lap = np.asarray(lap, dtype=float)
    edges = lap < -eta
    np.fill_diagonal(edges, False)
    return ThresholdGraph(edges)


def has_spanning_tree(g) -> bool:
    """True iff some root reaches every node along the influence direction.

    Edge (i, j) means j influences i, so reachability follows j -> i: from a
    candidate root r, nodes i with edges[i, r] are reached, and so on. BFS from
    each candidate root, O(m * (m + |E|)).
    """
    edges = g.edges if isinstance(g, ThresholdGraph) else np.asarray(g, dtype=bool)
    m = edges.shape[0]
    for root in range(m):
        seen = np.zeros(m, dtype=bool)
        seen[root] = True
        stack = [root]
        while stack:
            j = stack.pop()
            for i in np.nonzero(edges[:, j])[0]:
                if not seen[i]:
                    seen[i] = True
                    stack.append(int(i))
        if seen.all():
            return True
    return False


def common_positive_neighbors(net, i: int, j: int) -> set:
    """Nodes k with a_ik > 0 and a_jk > 0 (positive influencers of both i and j).

    Returns the raw set; callers exclude k = i, j where a formula requires it
    (the zero diagonal already keeps i and j themselves out).
    """
    if i == j:
        raise ValueError("common_positive_neighbors needs two distinct nodes")
    a = _adjacency_of(net)
    return set(np.nonzero((a[i] > 0) & (a[j] > 0))[0].tolist())


def ergodic_quantities(coupling: TimeSignal, grid: np.ndarray) -> tuple:
    """Mixing quantities (mu0, mu1, mu2) of a coupling-matrix signal over a grid.

    mu0: grid max of the pairwise minimum of sum_{k in common positive
         neighborhood} min(a_ik, a_jk) -- the ergodic coefficient of the
         positive part of the graph.
    mu1: grid max of the pairwise maximum of the summed negative mass
         -[a_ik]^- - [a_jk]^- outside the common positive neighborhood.
    mu2: grid max of the pairwise minimum of a_ij + a_ji.

    Grid extrema stand in for suprema over continuous time; exact for
    piecewise-constant signals when the grid includes all breakpoints.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty sampling grid")
    mu0s, mu1s, mu2s = [], [], []
    for t in grid:
        a = np.asarray(coupling.evaluate(float(t)), dtype=float)
        m = a.shape[0]
        best0, best1, best2 = None, None, None
        for i in range(m):
            for j in range(m):
                if i == j:
                    continue
                pos = (a[i] > 0) & (a[j] > 0)
                s0 = float(np.minimum(a[i], a[j])[pos].sum())
                neg = ~pos
                neg[i] = neg[j] = False
                s1 = float((-np.minimum(a[i][neg], 0.0) - np.minimum(a[j][neg], 0.0)).sum())
                s2 = float(a[i, j] + a[j, i])
                best0 = s0 if best0 is None else min(best0, s0)
                best1 = s1 if best1 is None else max(best1, s1)
                best2 = s2 if best2 is None else min(best2, s2)
        if best0 is None:  # m < 2
            best0 = best1 = best2 = 0.0
        mu0s.append(best0)
        mu1s.append(best1)
        mu2s.append(best2)
    return max(mu0s), max(mu1s), max(mu2s)
