"""Behavior-cloning training: windowed dataset assembly and Adam on the MLP."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import Episode, ValidationError
from .model import (
    DOWNSAMPLE,
    TRAINABLE,
    Params,
    PolicyConfig,
    downsample,
    init_params,
    loss_and_grad,
    set_input_stats,
)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # Decoupled L2 shrinkage on weights (biases untouched). The input is much
    # wider than the dataset, so some explicit capacity control is needed for
    # the fit to transfer to unseen scenes.
    weight_decay: float = 1e-4
    # Translation augmentation, in downsampled pixels per axis. Each epoch
    # every sample is re-drawn at a random cyclic shift with its position
    # labels offset to match, which teaches the translation equivariance that
    # ninety scene layouts alone cannot pin down. Zero disables.
    shift_aug_x: int = 4
    shift_aug_y: int = 2
    # "constant" or "cosine" (anneal to learning_rate/20 by the final epoch)
    lr_schedule: str = "cosine"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be >= 0")
        if self.shift_aug_x < 0 or self.shift_aug_y < 0:
            raise ValidationError("shift augmentation amplitudes must be >= 0")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValidationError(f"unknown lr_schedule {self.lr_schedule!r}")

    def epoch_lr(self, epoch: int) -> float:
        if self.lr_schedule == "constant" or self.epochs == 1:
            return self.learning_rate
        lo = self.learning_rate / 20.0
        t = epoch / (self.epochs - 1)
        return lo + 0.5 * (self.learning_rate - lo) * (1.0 + np.cos(np.pi * t))


def build_training_set(
    episodes: Sequence[Episode], config: PolicyConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One sample per timestep of every episode.

    Observations are the last obs_horizon frames, left-padded by repeating the
    first frame; labels are the next action_horizon actions, right-padded by
    repeating the last (so the policy learns to hold at the goal). Positions
    are normalized by the world bounds.
    """
    if not episodes:
        raise ValidationError("no episodes to train on")
    xs: list[np.ndarray] = []
    ys_xy: list[np.ndarray] = []
    ys_grip: list[np.ndarray] = []
    w, h = config.bounds
    for episode in episodes:
        if episode.width != config.frame_width or episode.height != config.frame_height:
            raise ValidationError(
                f"episode frames {episode.width}x{episode.height} do not match policy "
                f"input {config.frame_width}x{config.frame_height}"
            )
        flats = [downsample(s.frame).ravel() for s in episode.steps]
        actions = [s.action for s in episode.steps]
        n = len(episode.steps)
        for t in range(n):
            window = [flats[max(0, t - k)] for k in range(config.obs_horizon - 1, -1, -1)]
            xs.append(np.concatenate(window))
            chunk = [actions[min(t + k, n - 1)] for k in range(config.action_horizon)]
            ys_xy.append(np.array([[a.x / w, a.y / h] for a in chunk]))
            ys_grip.append(np.array([float(a.grip) for a in chunk]))
    return np.stack(xs), np.stack(ys_xy), np.stack(ys_grip)


def _shifted_batch(
    xb: np.ndarray,
    yb: np.ndarray,
    config: PolicyConfig,
    dx: int,
    dy: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Roll a batch's frames by (dx, dy) downsampled pixels, cyclically, with
    position labels offset to match (pixel +y is world −y). The strip that
    wraps is table-colored on both edges, so the rolled frame still looks
    like a plausible scene."""
    if dx == 0 and dy == 0:
        return xb, yb
    dh = config.frame_height // DOWNSAMPLE
    dw = config.frame_width // DOWNSAMPLE
    frames = xb.reshape(xb.shape[0], config.obs_horizon, dh, dw, 3)
    out = np.roll(frames, (dy, dx), axis=(2, 3)).reshape(xb.shape)
    yb = yb.copy()
    yb[:, :, 0] += dx * DOWNSAMPLE / config.frame_width
    yb[:, :, 1] -= dy * DOWNSAMPLE / config.frame_height
    return out, yb


def train(
    episodes: Sequence[Episode],
    policy_config: PolicyConfig,
    train_config: TrainConfig = TrainConfig(),
) -> tuple[Params, list[tuple[int, float]]]:
    """Train from scratch; returns (params, per-epoch mean loss history).

    The optimizer loop runs in float32 for throughput; the returned parameters
    (and therefore checkpoints and inference) are float64.
    """
    x, y_xy, y_grip = build_training_set(episodes, policy_config)
    n = x.shape[0]
    params = init_params(policy_config, train_config.seed)
    set_input_stats(params, x)
    work: Params = {k: p.astype(np.float32) for k, p in params.items()}
    x = x.astype(np.float32)
    y_xy = y_xy.astype(np.float32)
    y_grip = y_grip.astype(np.float32)
    m = {k: np.zeros_like(work[k]) for k in TRAINABLE}
    v = {k: np.zeros_like(work[k]) for k in TRAINABLE}
    rng = np.random.default_rng(train_config.seed + 1)
    b1, b2, eps = train_config.beta1, train_config.beta2, train_config.eps
    history: list[tuple[int, float]] = []
    step = 0
    augment = train_config.shift_aug_x > 0 or train_config.shift_aug_y > 0
    for epoch in range(train_config.epochs):
        lr = train_config.epoch_lr(epoch)
        order = rng.permutation(n)
        weighted = 0.0
        for lo in range(0, n, train_config.batch_size):
            idx = order[lo : lo + train_config.batch_size]
            xb, yb = x[idx], y_xy[idx]
            if augment:
                # one shift per mini-batch: over an epoch the dataset still
                # sees the whole shift grid, but only batch-sized arrays move
                dx = int(rng.integers(-train_config.shift_aug_x, train_config.shift_aug_x + 1))
                dy = int(rng.integers(-train_config.shift_aug_y, train_config.shift_aug_y + 1))
                xb, yb = _shifted_batch(xb, yb, policy_config, dx, dy)
            loss, grads = loss_and_grad(work, xb, yb, y_grip[idx])
            weighted += float(loss) * len(idx)
            step += 1
            # bias correction folded into the step size (scalar, not arrays)
            lr_t = lr * np.sqrt(1.0 - b2**step) / (1.0 - b1**step)
            for k in grads:
                g = grads[k]
                mk, vk = m[k], v[k]
                mk += (1.0 - b1) * (g - mk)
                vk += (1.0 - b2) * (g * g - vk)
                work[k] -= lr_t * mk / (np.sqrt(vk) + eps)
                if train_config.weight_decay > 0.0 and k.startswith("W"):
                    work[k] -= lr * train_config.weight_decay * work[k]
        history.append((epoch, weighted / n))
    return {k: p.astype(np.float64) for k, p in work.items()}, history


def history_csv(history: Sequence[tuple[int, float]]) -> str:
    lines = ["epoch,loss"]
    for epoch, loss in history:
        lines.append(f"{epoch},{loss:.10g}")
    return "\n".join(lines) + "\n"
