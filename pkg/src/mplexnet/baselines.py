"""The seven comparison systems: flat fusion MLPs, probability-averaged
late fusion, relational GCNs on multiplex or modality planes, and a GCN
on the fully connected monoplex feature graph.

All baselines share the diffcore substrate, the training loop, and the
splits/normalization of the primary model. Late fusion deliberately
simplifies the cited uncertainty-weighted scheme to plain probability
averaging and is labeled as such in reports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .diffcore import Tensor, add, affine, leaky_relu, parameter, reshape, spmm
from .training import FitConfig, fit_classifier, predict_proba

BASELINE_KINDS = (
    "no_fusion",
    "early_fusion",
    "intermediate_fusion",
    "late_fusion_avg",
    "rgcn_multiplex",
    "rgcn_modality_planes",
    "gcn_monoplex",
)

NO_FUSION_HIDDEN = (400, 20)
INTERMEDIATE_HIDDEN = (150, 20)
GRAPH_READOUT_HIDDEN = (100, 20)


@dataclass
class VectorSample:
    x: np.ndarray
    label: int
    patient_id: str = ""


@dataclass
class PlaneSample:
    """Node features over P nodes plus normalized plane adjacencies."""

    x: np.ndarray
    planes: list  # K sparse P x P matrices, already normalized
    label: int
    patient_id: str = ""


class MlpClassifier:
    def __init__(self, d_in, hidden, num_classes=5, slope=0.01, seed=0):
        rng = np.random.default_rng(seed)
        widths = [d_in, *hidden, num_classes]
        self.slope = slope
        self.layers = [
            (parameter(rng, a, b), Tensor(np.zeros(b), requires_grad=True))
            for a, b in zip(widths[:-1], widths[1:])
        ]

    def parameters(self):
        params = {}
        for i, (w, b) in enumerate(self.layers):
            params[f"fc{i}.W"] = w
            params[f"fc{i}.b"] = b
        return params

    def forward_t(self, sample):
        out = Tensor(sample.x.reshape(1, -1))
        for i, (w, b) in enumerate(self.layers):
            out = affine(out, w, b)
            if i < len(self.layers) - 1:
                out = leaky_relu(out, self.slope)
        return out


class RelationalGcn:
    """Per-plane propagations summed post-hoc, then a flatten readout.

    Each layer computes leaky_relu(sum_k A_hat_k H W_k + b) with separate
    weights per plane; width and readout match the multiplex GNN family.
    """

    def __init__(self, p, k, num_layers=2, hidden_width=1,
                 readout_hidden=GRAPH_READOUT_HIDDEN, num_classes=5,
                 slope=0.01, seed=0):
        rng = np.random.default_rng(seed)
        self.P, self.K = p, k
        self.slope = slope
        self.layers = []
        d_in = 1
        for _ in range(num_layers):
            weights = [parameter(rng, d_in, hidden_width) for _ in range(k)]
            bias = Tensor(np.zeros(hidden_width), requires_grad=True)
            self.layers.append((weights, bias))
            d_in = hidden_width
        widths = [p * d_in, *readout_hidden, num_classes]
        self.readout = [
            (parameter(rng, a, b), Tensor(np.zeros(b), requires_grad=True))
            for a, b in zip(widths[:-1], widths[1:])
        ]

    def parameters(self):
        params = {}
        for i, (weights, bias) in enumerate(self.layers):
            for kk, w in enumerate(weights):
                params[f"layer{i}.plane{kk}.W"] = w
            params[f"layer{i}.b"] = bias
        for i, (w, b) in enumerate(self.readout):
            params[f"readout{i}.W"] = w
            params[f"readout{i}.b"] = b
        return params

    def forward_t(self, sample):
        if len(sample.planes) != self.K:
            raise ValueError(f"sample has {len(sample.planes)} planes, expected {self.K}")
        h = Tensor(sample.x.reshape(-1, 1))
        for weights, bias in self.layers:
            total = None
            for a_hat, w in zip(sample.planes, weights):
                # self contribution lives in a_hat's self-loops
                term = affine(spmm(a_hat, h), w, bias)
                total = term if total is None else add(total, term)
            h = leaky_relu(total, self.slope)
        out = reshape(h, (1, -1))
        for i, (w, b) in enumerate(self.readout):
            out = affine(out, w, b)
            if i < len(self.readout) - 1:
                out = leaky_relu(out, self.slope)
        return out


def normalized_adjacency(a, p=None):
    """Symmetric normalization with self-loops: D^-1/2 (A + I) D^-1/2."""
    a = sp.csr_matrix(a, dtype=np.float64)
    a = a + sp.identity(a.shape[0], format="csr")
    deg = np.asarray(a.sum(axis=1)).reshape(-1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    d = sp.diags(inv_sqrt)
    return (d @ a @ d).tocsr()


def complete_graph_normalized(p):
    """Complete graph with self-loops: every normalized entry is 1/P."""
    return sp.csr_matrix(np.full((p, p), 1.0 / p))


def modality_plane_adjacencies(block_widths):
    """One plane per modality: complete subgraph over that modality's
    reduced-feature block, normalized."""
    p = sum(block_widths)
    planes = []
    offset = 0
    for w in block_widths:
        a = sp.lil_matrix((p, p))
        idx = range(offset, offset + w)
        for m in idx:
            for n in idx:
                if m != n:
                    a[m, n] = 1.0
        planes.append(normalized_adjacency(a.tocsr()))
        offset += w
    return planes


class GcnMonoplex(RelationalGcn):
    """Two-layer GCN over the fully connected feature graph (K = 1)."""

    def __init__(self, p, **kwargs):
        super().__init__(p, 1, **kwargs)


def fit_and_score(model, train, val, test, fit_cfg=None):
    """Train a baseline and score the evaluation splits.

    Returns (result, val_probs, test_probs) with rows in split order.
    """
    cfg = fit_cfg if fit_cfg is not None else FitConfig()
    result = fit_classifier(model, train, val, cfg)
    return result, predict_proba(model, val), predict_proba(model, test)


def run_late_fusion_avg(score_sets):
    """Unweighted mean of per-class probabilities, renormalized.

    A labeled simplification of the uncertainty-weighted late fusion it
    stands in for: every modality classifier votes with equal weight.
    """
    if len(score_sets) < 2:
        raise ValueError("late fusion needs at least 2 score sets")
    shapes = {np.asarray(s).shape for s in score_sets}
    if len(shapes) != 1:
        raise ValueError(f"score sets disagree on patients/classes: {sorted(shapes)}")
    mean = np.mean([np.asarray(s, dtype=np.float64) for s in score_sets], axis=0)
    return mean / mean.sum(axis=1, keepdims=True)


def scores_csv_rows(patient_ids, probs):
    num_classes = np.asarray(probs).shape[1]
    header = "patient_id," + ",".join(f"class_{c}" for c in range(num_classes))
    yield header
    for pid, row in zip(patient_ids, probs):
        yield pid + "," + ",".join(repr(float(v)) for v in row)


def load_scores_csv(path):
    ids = []
    rows = []
    with open(path, encoding="utf-8") as f:
        lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    for ln in lines[1:]:
        cells = ln.split(",")
        ids.append(cells[0])
        rows.append([float(c) for c in cells[1:]])
    return ids, np.asarray(rows)
