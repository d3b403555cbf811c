"""Multiplex graph structures and supra-matrix algebra.

A multiplex graph holds K binary symmetric P x P plane adjacencies over a
shared node set. Supra-nodes are indexed plane-major: supra index of node
i in plane k (0-based) is k * P + i. The supra-adjacency is the direct
sum of the plane adjacencies; the transition control matrix connects all
copies of the same node across planes (including staying in place).
Matrices are kept sparse (CSR).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class MultiplexGraph:
    """K plane adjacencies (binary, symmetric, zero diagonal) over P nodes."""

    def __init__(self, planes):
        planes = [sp.csr_matrix(a, dtype=np.float64) for a in planes]
        if not planes:
            raise ValueError("a multiplex graph needs at least one plane")
        p = planes[0].shape[0]
        for k, a in enumerate(planes):
            if a.shape != (p, p):
                raise ValueError(f"plane {k} has shape {a.shape}, expected {(p, p)}")
            dense = a.toarray()
            if not np.array_equal(dense, dense.T):
                raise ValueError(f"plane {k} adjacency is not symmetric")
            if np.any(dense.diagonal() != 0):
                raise ValueError(f"plane {k} adjacency has nonzero diagonal")
            if not np.all(np.isin(dense, (0.0, 1.0))):
                raise ValueError(f"plane {k} adjacency is not binary")
        self.planes = planes
        self.P = p
        self.K = len(planes)

    @property
    def num_supra_nodes(self):
        return self.P * self.K

    def supra_index(self, k, i):
        if not (0 <= k < self.K and 0 <= i < self.P):
            raise IndexError(f"(plane, node) = ({k}, {i}) out of range")
        return k * self.P + i

    def plane_node(self, supra):
        if not (0 <= supra < self.P * self.K):
            raise IndexError(f"supra index {supra} out of range")
        return divmod(supra, self.P)

    def edge_list(self):
        """Sorted (k, m, n) triples with m < n."""
        edges = []
        for k, a in enumerate(self.planes):
            coo = sp.triu(a, k=1).tocoo()
            for m, n in zip(coo.row, coo.col):
                edges.append((k, int(m), int(n)))
        edges.sort()
        return edges

    def __eq__(self, other):
        if not isinstance(other, MultiplexGraph):
            return NotImplemented
        return (
            self.P == other.P
            and self.K == other.K
            and self.edge_list() == other.edge_list()
        )


def build_supra_adjacency(g):
    """Block-diagonal direct sum of the plane adjacencies (PK x PK)."""
    return sp.block_diag(g.planes, format="csr", dtype=np.float64)


def build_transition_control(p, k):
    """K x K grid of P x P identity blocks: kron(ones(K, K), eye(P))."""
    if p < 1 or k < 1:
        raise ValueError(f"P and K must be >= 1, got P={p}, K={k}")
    ones = np.ones((k, k))
    return sp.kron(sp.csr_matrix(ones), sp.identity(p), format="csr")


def supra_walk_matrices(supra_adj, control):
    """Type I (intra-step then plane move) and Type II (plane move then step)."""
    if supra_adj.shape != control.shape:
        raise ValueError(
            f"shape mismatch: {supra_adj.shape} vs {control.shape}"
        )
    walk_i = (supra_adj @ control).tocsr()
    walk_ii = (control @ supra_adj).tocsr()
    walk_i.sort_indices()  # canonical storage: summation order deterministic
    walk_ii.sort_indices()
    return walk_i, walk_ii


def count_walks(s, length, i, j):
    """Number of length-L walks from supra-node i to j: (S^L)[i, j]."""
    if length < 1:
        raise ValueError(f"walk length must be >= 1, got {length}")
    row = s.getrow(i)
    for _ in range(length - 1):
        row = row @ s
    return int(round(row[0, j]))


def neighbors(s, i):
    """Out-neighborhood of supra-node i with walk multiplicities.

    Returns a dict mapping supra index j to the (integer) entry S[i, j]
    for every j with S[i, j] >= 1.
    """
    n = s.shape[0]
    if not (0 <= i < n):
        raise IndexError(f"supra index {i} out of range [0, {n})")
    row = s.getrow(i).tocoo()
    return {int(j): int(round(w)) for j, w in zip(row.col, row.data) if w >= 1}


def lift_node_features(x, k):
    """Replicate per-node inputs across planes: H0[k*P + i] = x[i]."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return np.tile(x, k).reshape(-1, 1)


def save_graph(g, path):
    """Edge-list text format: header 'P K', then sorted 'k m n' lines."""
    lines = [f"{g.P} {g.K}"]
    lines.extend(f"{k} {m} {n}" for k, m, n in g.edge_list())
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def load_graph(path):
    with open(path, encoding="utf-8") as f:
        lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    p, k = (int(tok) for tok in lines[0].split())
    planes = [sp.lil_matrix((p, p)) for _ in range(k)]
    for ln in lines[1:]:
        kk, m, n = (int(tok) for tok in ln.split())
        planes[kk][m, n] = 1.0
        planes[kk][n, m] = 1.0
    return MultiplexGraph([pl.tocsr() for pl in planes])
