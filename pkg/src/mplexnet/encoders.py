"""Tied-weight autoencoders: per-modality d-AEs and the common c-AE.

Each autoencoder has a single bottleneck layer. The encoder is
z = leaky_relu(x @ W + b_enc); the decoder reuses the transpose of the
same weight tensor, x_hat = z @ W.T + b_dec, so tied weights hold by
identity of storage. The stack of trained d-AEs plus the c-AE defines
the concept space used for graph construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import checkpoint as ckpt
from .diffcore import (
    AdamW,
    AdamWHyper,
    LrSchedule,
    Tensor,
    add,
    affine,
    backward,
    leaky_relu,
    matmul,
    mse_loss,
    parameter,
    transpose,
)


@dataclass
class AutoencoderSpec:
    input_dim: int
    bottleneck_dim: int
    tied_weights: bool = True
    activation_slope: float = 0.01

    def __post_init__(self):
        if self.bottleneck_dim >= self.input_dim:
            raise ValueError(
                f"bottleneck {self.bottleneck_dim} must be < input dim {self.input_dim}"
            )


@dataclass
class TrainConfig:
    epochs: int = 40
    schedule: LrSchedule = field(default_factory=LrSchedule)
    weight_decay: float = 0.001
    batch_size: int = 32
    seed: int = 0


class TiedAutoencoder:
    def __init__(self, spec, seed=0):
        self.spec = spec
        rng = np.random.default_rng(seed)
        d, b = spec.input_dim, spec.bottleneck_dim
        self.w = parameter(rng, d, b)
        self.b_enc = Tensor(np.zeros(b), requires_grad=True)
        self.b_dec = Tensor(np.zeros(d), requires_grad=True)
        self.converged = None
        self.history = []

    def parameters(self):
        return {"W": self.w, "b_enc": self.b_enc, "b_dec": self.b_dec}

    def encode_t(self, x):
        return leaky_relu(affine(x, self.w, self.b_enc), self.spec.activation_slope)

    def decode_t(self, z):
        return add(matmul(z, transpose(self.w)), self.b_dec)

    def reconstruct_t(self, x):
        return self.decode_t(self.encode_t(x))

    def encode(self, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if rows.shape[1] != self.spec.input_dim:
            raise ValueError(
                f"input width {rows.shape[1]} != expected {self.spec.input_dim}"
            )
        z = rows @ self.w.data + self.b_enc.data
        slope = self.spec.activation_slope
        return np.where(z >= 0.0, z, slope * z)

    def reconstruction_mse(self, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        slope = self.spec.activation_slope
        z = rows @ self.w.data + self.b_enc.data
        z = np.where(z >= 0.0, z, slope * z)
        xh = z @ self.w.data.T + self.b_dec.data
        return float(np.mean((xh - rows) ** 2))


def train_autoencoder(matrix, spec, cfg=None):
    """Train a tied AE to reconstruct its input rows.

    Flags the model as non-converged when the final training MSE fails
    to fall below half the initial MSE.
    """
    cfg = cfg if cfg is not None else TrainConfig()
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need a 2-D matrix with at least 2 rows, got shape {x.shape}")
    if x.shape[1] != spec.input_dim:
        raise ValueError(f"data width {x.shape[1]} != spec input_dim {spec.input_dim}")
    if np.isnan(x).any():
        raise ValueError("NaN in autoencoder input; impute missing values first")

    model = TiedAutoencoder(spec, seed=cfg.seed)
    hyper = AdamWHyper(weight_decay=cfg.weight_decay)
    opt = AdamW(model.parameters(), hyper)
    rng = np.random.default_rng(cfg.seed)
    n = x.shape[0]
    initial_mse = model.reconstruction_mse(x)
    model.history = []
    for epoch in range(cfg.epochs):
        hyper.lr = cfg.schedule.lr(epoch)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = x[order[start : start + cfg.batch_size]]
            opt.zero_grad()
            loss = mse_loss(model.reconstruct_t(Tensor(batch)), Tensor(batch))
            backward(loss)
            opt.step()
        model.history.append(model.reconstruction_mse(x))
    final_mse = model.history[-1] if model.history else initial_mse
    model.converged = final_mse <= 0.5 * initial_mse
    return model


def train_dae(modality_matrix, spec, train_cfg=None):
    return train_autoencoder(modality_matrix, spec, train_cfg)


def train_cae(concat_features, k, train_cfg=None, activation_slope=0.01):
    p = np.asarray(concat_features).shape[1]
    spec = AutoencoderSpec(input_dim=p, bottleneck_dim=k, activation_slope=activation_slope)
    return train_autoencoder(concat_features, spec, train_cfg)


def encode(dae, rows):
    return dae.encode(rows)


@dataclass
class NormStats:
    """Train-set per-feature mean/std; categorical columns pass through."""

    mean: np.ndarray
    std: np.ndarray
    continuous: np.ndarray  # boolean mask over features

    @classmethod
    def fit(cls, rows, continuous=None):
        rows = np.asarray(rows, dtype=np.float64)
        if continuous is None:
            continuous = np.ones(rows.shape[1], dtype=bool)
        continuous = np.asarray(continuous, dtype=bool)
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        std[std == 0.0] = 1.0
        mean[~continuous] = 0.0
        std[~continuous] = 1.0
        return cls(mean=mean, std=std, continuous=continuous)

    def apply(self, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        return (rows - self.mean) / self.std


class EncoderStack:
    """Trained d-AEs plus the c-AE and the train-set normalization stats."""

    def __init__(self, modality_order, daes, norms, cae):
        self.modality_order = list(modality_order)
        self.daes = dict(daes)
        self.norms = dict(norms)
        self.cae = cae

    @property
    def concat_width(self):
        return sum(self.daes[m].spec.bottleneck_dim for m in self.modality_order)

    @property
    def num_concepts(self):
        return self.cae.spec.bottleneck_dim

    def reduce(self, features_by_modality):
        """Normalize and encode each modality block, then concatenate."""
        blocks = []
        for m in self.modality_order:
            rows = self.norms[m].apply(features_by_modality[m])
            blocks.append(self.daes[m].encode(rows))
        return np.concatenate(blocks, axis=1)

    def cae_encode(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        z = self.cae.encode(np.atleast_2d(x))
        return z[0] if single else z

    def save(self, path, extra=None):
        arrays = {}
        meta = {"modality_order": self.modality_order, "specs": {}, "cae_spec": None}
        for m in self.modality_order:
            dae = self.daes[m]
            arrays[f"dae.{m}.W"] = dae.w.data
            arrays[f"dae.{m}.b_enc"] = dae.b_enc.data
            arrays[f"dae.{m}.b_dec"] = dae.b_dec.data
            arrays[f"norm.{m}.mean"] = self.norms[m].mean
            arrays[f"norm.{m}.std"] = self.norms[m].std
            arrays[f"norm.{m}.continuous"] = self.norms[m].continuous.astype(np.float64)
            meta["specs"][m] = {
                "input_dim": dae.spec.input_dim,
                "bottleneck_dim": dae.spec.bottleneck_dim,
                "activation_slope": dae.spec.activation_slope,
            }
        arrays["cae.W"] = self.cae.w.data
        arrays["cae.b_enc"] = self.cae.b_enc.data
        arrays["cae.b_dec"] = self.cae.b_dec.data
        meta["cae_spec"] = {
            "input_dim": self.cae.spec.input_dim,
            "bottleneck_dim": self.cae.spec.bottleneck_dim,
            "activation_slope": self.cae.spec.activation_slope,
        }
        if extra:
            meta.update(extra)
        return ckpt.save_checkpoint(path, arrays, extra=meta)

    @classmethod
    def load(cls, path):
        arrays, meta = ckpt.load_checkpoint(path)
        daes, norms = {}, {}
        for m in meta["modality_order"]:
            spec = AutoencoderSpec(**meta["specs"][m])
            dae = TiedAutoencoder(spec)
            dae.w.data = arrays[f"dae.{m}.W"]
            dae.b_enc.data = arrays[f"dae.{m}.b_enc"]
            dae.b_dec.data = arrays[f"dae.{m}.b_dec"]
            daes[m] = dae
            norms[m] = NormStats(
                mean=arrays[f"norm.{m}.mean"],
                std=arrays[f"norm.{m}.std"],
                continuous=arrays[f"norm.{m}.continuous"].astype(bool),
            )
        cae = TiedAutoencoder(AutoencoderSpec(**meta["cae_spec"]))
        cae.w.data = arrays["cae.W"]
        cae.b_enc.data = arrays["cae.b_enc"]
        cae.b_dec.data = arrays["cae.b_dec"]
        return cls(meta["modality_order"], daes, norms, cae)


def train_stack(features_by_modality, dae_specs, k, train_cfg=None,
                continuous_masks=None, cae_slope=0.01):
    """Train d-AEs per modality, then the c-AE on the frozen concatenated codes."""
    cfg = train_cfg if train_cfg is not None else TrainConfig()
    order = list(dae_specs.keys())
    daes, norms = {}, {}
    for idx, m in enumerate(order):
        rows = np.asarray(features_by_modality[m], dtype=np.float64)
        mask = None if continuous_masks is None else continuous_masks.get(m)
        norms[m] = NormStats.fit(rows, continuous=mask)
        sub_cfg = TrainConfig(
            epochs=cfg.epochs,
            schedule=cfg.schedule,
            weight_decay=cfg.weight_decay,
            batch_size=cfg.batch_size,
            seed=cfg.seed + idx + 1,
        )
        daes[m] = train_dae(norms[m].apply(rows), dae_specs[m], sub_cfg)
    concat = np.concatenate(
        [daes[m].encode(norms[m].apply(features_by_modality[m])) for m in order],
        axis=1,
    )
    cae = train_cae(concat, k, cfg, activation_slope=cae_slope)
    return EncoderStack(order, daes, norms, cae)
