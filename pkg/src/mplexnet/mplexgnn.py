"""Walk-based multiplexed GNN: GIN aggregation over the Type I and
Type II supra-walk neighborhoods, concatenation, and an MLP readout.

Neighbor sums are weighted by the supra-walk entries (walk
multiplicities), so stacked aggregations with the self term disabled
reproduce the matrix-power walk algebra exactly. A binary-mask mode is
available for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .diffcore import (
    Tensor,
    add,
    affine,
    concat,
    leaky_relu,
    mul,
    parameter,
    reshape,
    scale,
    spmm,
)
from .mplexgraph import (
    build_supra_adjacency,
    build_transition_control,
    lift_node_features,
    supra_walk_matrices,
)
from .training import FitConfig, fit_classifier


@dataclass
class MplexGnnConfig:
    num_layers: int = 2
    hidden_width: int = 1
    gin_epsilon: float = 0.0
    learn_epsilon: bool = False
    readout_hidden: tuple = (100, 20)
    num_classes: int = 5
    activation_slope: float = 0.01
    readout: str = "flatten"  # or "mean"
    binary_walk: bool = False

    def __post_init__(self):
        if self.num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.readout not in ("flatten", "mean"):
            raise ValueError(f"unknown readout mode {self.readout!r}")


class GinMlp:
    """The per-aggregator map: one affine layer with LeakyReLU."""

    def __init__(self, rng, d_in, d_out, slope):
        self.w = parameter(rng, d_in, d_out)
        self.b = Tensor(np.zeros(d_out), requires_grad=True)
        self.slope = slope

    def __call__(self, t):
        return leaky_relu(affine(t, self.w, self.b), self.slope)


def gin_aggregate(h, s, eps, mlp):
    """(1 + eps)-scaled self term plus the multiplicity-weighted neighbor
    sum, then the aggregator MLP. ``mlp=None`` means identity. ``eps``
    may be a scalar Tensor (learnable) or a float.
    """
    agg = spmm(s, h)
    if isinstance(eps, Tensor):
        agg = add(agg, mul(h, add(eps, Tensor(1.0))))
    else:
        agg = add(agg, scale(h, 1.0 + float(eps)))
    return mlp(agg) if mlp is not None else agg


def mplex_layer(h, walk_i, walk_ii, mlp_i=None, mlp_ii=None, eps=0.0):
    """Concatenate the Type I and Type II GIN aggregations feature-wise."""
    return concat(
        [gin_aggregate(h, walk_i, eps, mlp_i), gin_aggregate(h, walk_ii, eps, mlp_ii)],
        axis=1,
    )


@dataclass
class GraphSample:
    """Per-patient input: node features, precomputed walk matrices, label."""

    x: np.ndarray
    walk_i: sp.csr_matrix
    walk_ii: sp.csr_matrix
    label: int
    patient_id: str = ""


def prepare_sample(g, x, label, patient_id="", binary_walk=False):
    supra = build_supra_adjacency(g)
    control = build_transition_control(g.P, g.K)
    walk_i, walk_ii = supra_walk_matrices(supra, control)
    if binary_walk:
        walk_i = (walk_i >= 1).astype(np.float64).tocsr()
        walk_ii = (walk_ii >= 1).astype(np.float64).tocsr()
    return GraphSample(
        x=np.asarray(x, dtype=np.float64).reshape(-1),
        walk_i=walk_i,
        walk_ii=walk_ii,
        label=int(label),
        patient_id=patient_id,
    )


class MplexGNN:
    """Cascade of multiplex layers plus an MLP readout over supra-node states."""

    def __init__(self, p, k, cfg=None, seed=0):
        self.cfg = cfg if cfg is not None else MplexGnnConfig()
        self.P = p
        self.K = k
        cfg = self.cfg
        rng = np.random.default_rng(seed)
        self.layers = []
        d_in = 1
        for _ in range(cfg.num_layers):
            mlp_i = GinMlp(rng, d_in, cfg.hidden_width, cfg.activation_slope)
            mlp_ii = GinMlp(rng, d_in, cfg.hidden_width, cfg.activation_slope)
            self.layers.append((mlp_i, mlp_ii))
            d_in = 2 * cfg.hidden_width
        if cfg.learn_epsilon:
            self.eps = Tensor(np.float64(cfg.gin_epsilon), requires_grad=True)
        else:
            self.eps = float(cfg.gin_epsilon)
        readout_in = p * k * d_in if cfg.readout == "flatten" else d_in
        widths = [readout_in, *cfg.readout_hidden, cfg.num_classes]
        self.readout = []
        for a, b in zip(widths[:-1], widths[1:]):
            self.readout.append(
                (parameter(rng, a, b), Tensor(np.zeros(b), requires_grad=True))
            )

    def parameters(self):
        params = {}
        for i, (mlp_i, mlp_ii) in enumerate(self.layers):
            params[f"layer{i}.I.W"] = mlp_i.w
            params[f"layer{i}.I.b"] = mlp_i.b
            params[f"layer{i}.II.W"] = mlp_ii.w
            params[f"layer{i}.II.b"] = mlp_ii.b
        if isinstance(self.eps, Tensor):
            params["eps"] = self.eps
        for i, (w, b) in enumerate(self.readout):
            params[f"readout{i}.W"] = w
            params[f"readout{i}.b"] = b
        return params

    def forward_t(self, sample):
        x = sample.x
        if x.shape[0] != self.P:
            raise ValueError(f"node feature length {x.shape[0]} != P={self.P}")
        if sample.walk_i.shape[0] != self.P * self.K:
            raise ValueError(
                f"walk matrix size {sample.walk_i.shape[0]} != P*K={self.P * self.K}"
            )
        h = Tensor(lift_node_features(x, self.K))
        for mlp_i, mlp_ii in self.layers:
            h = mplex_layer(h, sample.walk_i, sample.walk_ii, mlp_i, mlp_ii, self.eps)
        if self.cfg.readout == "flatten":
            out = reshape(h, (1, -1))
        else:
            out = scale(
                reshape(spmm(_ones_row(self.P * self.K), h), (1, -1)),
                1.0 / (self.P * self.K),
            )
        slope = self.cfg.activation_slope
        for i, (w, b) in enumerate(self.readout):
            out = affine(out, w, b)
            if i < len(self.readout) - 1:
                out = leaky_relu(out, slope)
        return out

    def state_arrays(self):
        return {k: p.data.copy() for k, p in self.parameters().items()}

    def load_state_arrays(self, arrays):
        for k, p in self.parameters().items():
            p.data = np.asarray(arrays[k], dtype=np.float64).reshape(p.data.shape)


def _ones_row(n):
    return sp.csr_matrix(np.ones((1, n)))


def train(train_samples, val_samples, p, k, cfg=None, fit_cfg=None, seed=0):
    """Train an MplexGNN; returns (model, FitResult)."""
    model = MplexGNN(p, k, cfg, seed=seed)
    fit_cfg = fit_cfg if fit_cfg is not None else FitConfig(seed=seed)
    result = fit_classifier(model, train_samples, val_samples, fit_cfg)
    return model, result
