"""Perturbation saliency over the concept space and multiplex construction.

Zeroing one input feature at a time and recording the absolute change in
the concept code gives a P x K saliency matrix; the top fraction of
features per concept axis (ties broken by lowest index) form a complete
subgraph in that concept's plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mplexgraph import MultiplexGraph


@dataclass
class SparsityRule:
    fraction: float = 0.01
    min_nodes: int = 2

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")
        if self.min_nodes < 2:
            raise ValueError(f"min_nodes must be >= 2, got {self.min_nodes}")

    def count(self, p):
        return min(p, max(self.min_nodes, int(np.ceil(self.fraction * p))))


def perturb_input(x, i):
    """Copy of x with coordinate i zeroed."""
    x = np.asarray(x, dtype=np.float64)
    if not (0 <= i < x.shape[0]):
        raise IndexError(f"feature index {i} out of range [0, {x.shape[0]})")
    out = x.copy()
    out[i] = 0.0
    return out


def saliency(stack, x):
    """P x K matrix of |code(perturbed x) - code(x)| per zeroed feature.

    All P perturbed inputs go through the encoder as one batch. Rows for
    features that are already zero come out exactly zero.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    p = x.shape[0]
    # the unperturbed input rides along as the last batch row so the
    # baseline code goes through the identical batched computation
    batch = np.tile(x, (p + 1, 1))
    np.fill_diagonal(batch[:p], 0.0)
    z = stack.cae_encode(batch)
    return np.abs(z[:p] - z[p])


def select_salient(p_col, rule):
    """Indices of the top max(min_nodes, ceil(fraction*P)) saliency values.

    Ties resolve to the lowest index; the result is sorted ascending.
    """
    p_col = np.asarray(p_col, dtype=np.float64)
    s = rule.count(p_col.shape[0])
    order = np.lexsort((np.arange(p_col.shape[0]), -p_col))
    return sorted(int(i) for i in order[:s])


def complete_plane(p, nodes):
    a = sp.lil_matrix((p, p))
    for ai, m in enumerate(nodes):
        for n in nodes[ai + 1 :]:
            a[m, n] = 1.0
            a[n, m] = 1.0
    return a.tocsr()


def build_patient_multiplex(stack, x, rule=None):
    """One plane per concept: the complete graph on that concept's salient nodes."""
    rule = rule if rule is not None else SparsityRule()
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    sal = saliency(stack, x)
    p, k = sal.shape
    planes = [complete_plane(p, select_salient(sal[:, c], rule)) for c in range(k)]
    return MultiplexGraph(planes)


def build_mean_multiplex(stack, x_rows, rule=None):
    """Global-graph mode: one shared topology from the mean training saliency."""
    rule = rule if rule is not None else SparsityRule()
    x_rows = np.atleast_2d(np.asarray(x_rows, dtype=np.float64))
    sal = np.mean([saliency(stack, row) for row in x_rows], axis=0)
    p, k = sal.shape
    planes = [complete_plane(p, select_salient(sal[:, c], rule)) for c in range(k)]
    return MultiplexGraph(planes)
