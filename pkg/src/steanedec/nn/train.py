"""Minibatch training loop with per-epoch checkpointing."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .adam import AdamState
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .losses import (MASKED, bce_loss, bce_loss_grad, masked_bce_loss,
                     masked_bce_loss_grad)
from .model import Model


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0


def _losses_for(y: np.ndarray):
    if y.ndim == 2 and y.shape[1] > 1 and np.any(y == MASKED):
        return masked_bce_loss, masked_bce_loss_grad
    return bce_loss, bce_loss_grad


def train(model: Model, x, y, config: TrainConfig, config_hash: str = "",
          checkpoint_dir=None, eval_fn=None, start_epoch: int = 0,
          adam: AdamState | None = None, stop_fn=None) -> list[dict]:
    """Train ``model`` on (x, y); returns a per-epoch history.

    ``eval_fn(model, epoch)`` may supply extra metrics recorded in the
    history and in each epoch checkpoint; ``stop_fn(record)`` can end the
    run early (e.g. once an evaluation metric reaches its target).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    loss_fn, grad_fn = _losses_for(y)
    n = x.shape[0]
    if adam is None:
        adam = AdamState(lr=config.lr)
    weights = model.weights_flat()
    history = []
    for epoch in range(start_epoch, config.epochs):
        rng = np.random.default_rng((config.seed, epoch))
        order = rng.permutation(n)
        total = 0.0
        batches = 0
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            xb, yb = x[idx], y[idx]
            q = model.forward(xb, train=True, rng=rng)
            total += loss_fn(yb, q)
            batches += 1
            model.zero_grads()
            model.backward(grad_fn(yb, q))
            adam.update(weights, model.grads_flat())
        record = {"epoch": epoch, "loss": total / max(batches, 1)}
        if eval_fn is not None:
            record.update(eval_fn(model, epoch))
        history.append(record)
        if checkpoint_dir is not None:
            state = dict(model.weights_flat())
            for name, mom in adam.m.items():
                state[f"adam.m.{name}"] = mom
            for name, mom in adam.v.items():
                state[f"adam.v.{name}"] = mom
            extra = {"adam_step": adam.step_count, "lr": adam.lr,
                     "metrics": {k: float(v) for k, v in record.items()}}
            save_checkpoint(os.path.join(checkpoint_dir,
                                         f"epoch_{epoch:04d}.ckpt"),
                            Checkpoint(epoch=epoch, weights=state,
                                       config_hash=config_hash, extra=extra))
        if stop_fn is not None and stop_fn(record):
            break
    return history


def restore(model: Model, path) -> AdamState:
    """Load a checkpoint into ``model`` and rebuild the optimizer state;
    returns the AdamState so training can continue where it stopped."""
    ckpt = load_checkpoint(path)
    weights = {k: v for k, v in ckpt.weights.items()
               if not k.startswith("adam.")}
    model.set_weights_flat(weights)
    adam = AdamState(lr=ckpt.extra.get("lr", 1e-3))
    adam.step_count = ckpt.extra.get("adam_step", 0)
    for k, v in ckpt.weights.items():
        if k.startswith("adam.m."):
            adam.m[k[len("adam.m."):]] = v.copy()
        elif k.startswith("adam.v."):
            adam.v[k[len("adam.v."):]] = v.copy()
    return adam
