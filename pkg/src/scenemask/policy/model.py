"""Behavior-cloning policy: a small tanh MLP over downsampled frame stacks.

Input: the last obs_horizon frames, each box-averaged 5x5 to 64x36 RGB in
[0, 1], flattened oldest-first. Output: action_horizon (x, y, grip) triples;
x/y are trained normalized to the world bounds, grip is a logit. Stored
parameters and inference are float64 (the training loop itself runs float32
for speed) and every source of randomness is an explicit seed, so training
and inference are bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..core import ActionVector, Frame, ValidationError

DOWNSAMPLE = 5

_CHECKPOINT_VERSION = 1
_PARAM_ORDER = ("input_mean", "input_scale", "W1", "b1", "W2", "b2", "W3", "b3")
# input_mean/input_scale standardize features and are frozen at training time
TRAINABLE = ("W1", "b1", "W2", "b2", "W3", "b3")


@dataclass(frozen=True)
class PolicyConfig:
    """Architecture plus the coordinate frame actions are normalized against."""

    obs_horizon: int = 2
    action_horizon: int = 6
    frame_width: int = 320
    frame_height: int = 180
    hidden: tuple[int, int] = (256, 256)
    bounds: tuple[float, float] = (32.0, 18.0)  # world width, height

    def __post_init__(self) -> None:
        if self.obs_horizon < 1 or self.action_horizon < 1:
            raise ValidationError("horizons must be >= 1")
        if self.frame_width % DOWNSAMPLE or self.frame_height % DOWNSAMPLE:
            raise ValidationError(f"frame size must be divisible by {DOWNSAMPLE}")

    @property
    def input_dim(self) -> int:
        return self.obs_horizon * (self.frame_width // DOWNSAMPLE) * (
            self.frame_height // DOWNSAMPLE
        ) * 3

    @property
    def output_dim(self) -> int:
        return self.action_horizon * 3


Params = dict[str, np.ndarray]


def downsample(frame: Frame) -> np.ndarray:
    """Exact 5x5 box mean, scaled to [0, 1] float64, shape (H/5, W/5, 3)."""
    h, w = frame.height, frame.width
    if h % DOWNSAMPLE or w % DOWNSAMPLE:
        raise ValidationError(f"frame {w}x{h} not divisible by {DOWNSAMPLE}")
    px = frame.pixels.astype(np.float64)
    px = px.reshape(h // DOWNSAMPLE, DOWNSAMPLE, w // DOWNSAMPLE, DOWNSAMPLE, 3)
    return px.mean(axis=(1, 3)) / 255.0


def observation_vector(config: PolicyConfig, frames: Sequence[Frame]) -> np.ndarray:
    """Stack the last obs_horizon frames (left-padded by repeating the first)."""
    if not frames:
        raise ValidationError("need at least one observation frame")
    window = list(frames)[-config.obs_horizon :]
    while len(window) < config.obs_horizon:
        window.insert(0, window[0])
    for f in window:
        if f.width != config.frame_width or f.height != config.frame_height:
            raise ValidationError(
                f"observation frame {f.width}x{f.height} does not match policy "
                f"input {config.frame_width}x{config.frame_height}"
            )
    return np.concatenate([downsample(f).ravel() for f in window])


def init_params(config: PolicyConfig, seed: int) -> Params:
    rng = np.random.default_rng(seed)
    dims = (config.input_dim, *config.hidden, config.output_dim)
    params: Params = {
        "input_mean": np.zeros(config.input_dim, dtype=np.float64),
        "input_scale": np.ones(config.input_dim, dtype=np.float64),
    }
    for i in range(3):
        fan_in = dims[i]
        params[f"W{i + 1}"] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(dims[i], dims[i + 1]))
        params[f"b{i + 1}"] = np.zeros(dims[i + 1], dtype=np.float64)
    return params


def set_input_stats(params: Params, x: np.ndarray, floor: float = 1e-3) -> None:
    """Freeze feature standardization from a training matrix (n, input_dim).

    Constant features (untouched background) standardize to zero instead of
    drowning out the few features that actually move.
    """
    params["input_mean"] = x.mean(axis=0)
    params["input_scale"] = np.maximum(x.std(axis=0), floor)


def _standardize(params: Params, x: np.ndarray) -> np.ndarray:
    return (x - params["input_mean"]) / params["input_scale"]


def forward(params: Params, x: np.ndarray) -> np.ndarray:
    """Raw network output (..., action_horizon * 3). Accepts one vector or a batch."""
    h1 = np.tanh(_standardize(params, x) @ params["W1"] + params["b1"])
    h2 = np.tanh(h1 @ params["W2"] + params["b2"])
    return h2 @ params["W3"] + params["b3"]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_grad(
    params: Params, x: np.ndarray, y_xy: np.ndarray, y_grip: np.ndarray
) -> tuple[float, Params]:
    """Mean-squared position error plus mean grip cross-entropy, with gradients.

    x: (n, input_dim); y_xy: (n, action_horizon, 2) normalized; y_grip: (n, action_horizon).
    """
    n, a = y_grip.shape
    x = _standardize(params, x)
    z1 = x @ params["W1"] + params["b1"]
    h1 = np.tanh(z1)
    z2 = h1 @ params["W2"] + params["b2"]
    h2 = np.tanh(z2)
    out = h2 @ params["W3"] + params["b3"]

    triples = out.reshape(n, a, 3)
    xy = triples[:, :, :2]
    logit = triples[:, :, 2]

    xy_err = xy - y_xy
    mse = float(np.mean(xy_err**2))
    # log(1 + e^z) - z*y, computed stably
    bce = float(np.mean(np.logaddexp(0.0, logit) - logit * y_grip))
    loss = mse + bce

    d_triples = np.empty_like(triples)
    d_triples[:, :, :2] = 2.0 * xy_err / xy_err.size
    d_triples[:, :, 2] = (_sigmoid(logit) - y_grip) / y_grip.size
    d_out = d_triples.reshape(n, a * 3)

    grads: Params = {}
    grads["W3"] = h2.T @ d_out
    grads["b3"] = d_out.sum(axis=0)
    d_h2 = (d_out @ params["W3"].T) * (1.0 - h2**2)
    grads["W2"] = h1.T @ d_h2
    grads["b2"] = d_h2.sum(axis=0)
    d_h1 = (d_h2 @ params["W2"].T) * (1.0 - h1**2)
    grads["W1"] = x.T @ d_h1
    grads["b1"] = d_h1.sum(axis=0)
    return loss, grads


def predict(params: Params, config: PolicyConfig, frames: Sequence[Frame]) -> list[ActionVector]:
    """Action chunk for the current observation window, denormalized and clamped."""
    x = observation_vector(config, frames)
    out = forward(params, x).reshape(config.action_horizon, 3)
    w, h = config.bounds
    actions = []
    for row in out:
        ax = float(min(max(row[0] * w, 0.0), w))
        ay = float(min(max(row[1] * h, 0.0), h))
        actions.append(ActionVector(ax, ay, 1 if row[2] > 0.0 else 0))
    return actions


def save_checkpoint(path: str | Path, params: Params, config: PolicyConfig) -> None:
    """One sorted-JSON header line, then the parameters as raw little-endian float64."""
    header = {
        "version": _CHECKPOINT_VERSION,
        "dtype": "<f8",
        "order": list(_PARAM_ORDER),
        "shapes": {k: list(params[k].shape) for k in _PARAM_ORDER},
        "config": {
            "obs_horizon": config.obs_horizon,
            "action_horizon": config.action_horizon,
            "frame_width": config.frame_width,
            "frame_height": config.frame_height,
            "hidden": list(config.hidden),
            "bounds": list(config.bounds),
        },
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("ascii") + b"\n")
        for k in _PARAM_ORDER:
            f.write(np.ascontiguousarray(params[k], dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[Params, PolicyConfig]:
    with open(path, "rb") as f:
        header_line = f.readline()
        blob = f.read()
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad checkpoint header: {exc}") from exc
    if header.get("version") != _CHECKPOINT_VERSION or header.get("dtype") != "<f8":
        raise ValidationError("unsupported checkpoint version or dtype")
    cfg = header["config"]
    config = PolicyConfig(
        obs_horizon=cfg["obs_horizon"],
        action_horizon=cfg["action_horizon"],
        frame_width=cfg["frame_width"],
        frame_height=cfg["frame_height"],
        hidden=tuple(cfg["hidden"]),
        bounds=tuple(cfg["bounds"]),
    )
    params: Params = {}
    offset = 0
    for k in header["order"]:
        shape = tuple(header["shapes"][k])
        size = int(np.prod(shape)) * 8
        chunk = blob[offset : offset + size]
        if len(chunk) != size:
            raise ValidationError("checkpoint payload truncated")
        params[k] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += size
    if offset != len(blob):
        raise ValidationError("checkpoint payload has trailing bytes")
    return params, config


def finite_difference_check(
    params: Params,
    x: np.ndarray,
    y_xy: np.ndarray,
    y_grip: np.ndarray,
    n_checks: int = 120,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    _, grads = loss_and_grad(params, x, y_xy, y_grip)
    rng = np.random.default_rng(seed)
    names = sorted(TRAINABLE)
    worst = 0.0
    for _ in range(n_checks):
        name = names[int(rng.integers(len(names)))]
        flat_index = int(rng.integers(params[name].size))
        idx = np.unravel_index(flat_index, params[name].shape)
        perturbed = {k: v.copy() for k, v in params.items()}
        perturbed[name][idx] += step
        hi, _ = loss_and_grad(perturbed, x, y_xy, y_grip)
        perturbed[name][idx] -= 2.0 * step
        lo, _ = loss_and_grad(perturbed, x, y_xy, y_grip)
        fd = (hi - lo) / (2.0 * step)
        an = float(grads[name][idx])
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
        worst = max(worst, rel)
    return worst
