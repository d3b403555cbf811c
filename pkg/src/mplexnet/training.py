"""Shared classifier training loop: AdamW, step-decayed lr, minibatch
gradient accumulation, best checkpoint by validation weighted AU-ROC.

All shuffling is keyed on (seed, epoch) so an interrupted run resumed
from a checkpoint walks the identical parameter trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffcore import AdamW, AdamWHyper, LrSchedule, backward, scale, softmax, softmax_cross_entropy
from .metrics import weighted_auc_or_nan


@dataclass
class FitConfig:
    epochs: int = 40
    schedule: LrSchedule = field(default_factory=LrSchedule)
    weight_decay: float = 0.001
    batch_size: int = 32
    seed: int = 0


@dataclass
class FitResult:
    history: list  # rows: {epoch, lr, train_loss, val_loss, val_wauc}
    best_epoch: int
    best_val_wauc: float
    final_state: dict  # last-epoch parameter arrays, for resuming


def _epoch_rng(seed, epoch):
    return np.random.default_rng(np.random.SeedSequence((seed, epoch)))


def predict_proba(model, samples):
    logits = np.vstack([model.forward_t(s).data.reshape(1, -1) for s in samples])
    return softmax(logits)


def _mean_loss(model, samples):
    total = 0.0
    for s in samples:
        total += float(softmax_cross_entropy(model.forward_t(s), [s.label]).data)
    return total / len(samples)


def fit_classifier(model, train, val, cfg=None, start_epoch=0, optimizer=None):
    """Train in place; returns a FitResult. Model ends at its best-val state."""
    cfg = cfg if cfg is not None else FitConfig()
    if not train or not val:
        raise ValueError("train and validation splits must be non-empty")
    params = model.parameters()
    if optimizer is None:
        optimizer = AdamW(params, AdamWHyper(weight_decay=cfg.weight_decay))
    history = []
    best_wauc = -np.inf
    best_epoch = -1
    best_state = None
    val_labels = np.array([s.label for s in val])
    for epoch in range(start_epoch, cfg.epochs):
        optimizer.hyper.lr = cfg.schedule.lr(epoch)
        order = _epoch_rng(cfg.seed, epoch).permutation(len(train))
        batch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            optimizer.zero_grad()
            batch_total = 0.0
            for i in idx:
                s = train[i]
                loss = softmax_cross_entropy(model.forward_t(s), [s.label])
                batch_total += float(loss.data)
                backward(scale(loss, 1.0 / len(idx)))
            optimizer.step()
            batch_losses.append(batch_total / len(idx))
        val_probs = predict_proba(model, val)
        val_loss = _mean_loss(model, val)
        val_wauc = weighted_auc_or_nan(val_probs, val_labels)
        history.append(
            {
                "epoch": epoch,
                "lr": optimizer.hyper.lr,
                "train_loss": float(np.mean(batch_losses)),
                "val_loss": val_loss,
                "val_wauc": val_wauc,
            }
        )
        score = -np.inf if np.isnan(val_wauc) else val_wauc
        if score > best_wauc:
            best_wauc = score
            best_epoch = epoch
            best_state = {k: p.data.copy() for k, p in params.items()}
    final_state = {k: p.data.copy() for k, p in params.items()}
    if best_state is not None:
        for k, p in params.items():
            p.data = best_state[k].copy()
    return FitResult(
        history=history,
        best_epoch=best_epoch,
        best_val_wauc=best_wauc,
        final_state=final_state,
    )


def history_csv_rows(history):
    yield "epoch,lr,train_loss,val_loss,val_wauc"
    for row in history:
        yield "{epoch},{lr!r},{train_loss!r},{val_loss!r},{val_wauc!r}".format(**row)
