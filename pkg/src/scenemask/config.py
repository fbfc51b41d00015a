"""Experiment configuration files: versioned JSON, strictly validated.

Unknown keys anywhere in the document are rejected by full dotted path, so a
typo fails loudly instead of silently falling back to a default. The parsed
config can be dumped back out fully populated (every default made explicit)
for reproducibility records.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .core import ScenemaskError
from .pipeline import BackendConfig
from .sim.world import TASKS, ShiftSpec

CONFIG_VERSION = 1

_VARIANTS = ("vanilla", "masked", "arro")


class ConfigError(ScenemaskError):
    """Malformed or invalid configuration document."""


def _require_keys(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown config key: {where}")


def _expect(value, types, path: str):
    if not isinstance(value, types):
        names = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise ConfigError(f"config key {path}: expected {names}, got {type(value).__name__}")
    return value


_SHIFT_KEYS = {
    "background_texture",
    "texture_seed",
    "gripper_color",
    "distractor_count",
    "distractor_palette",
    "table_tint",
}

_BACKEND_KEYS = {"kind", "endpoint", "timeout", "tau_iou", "tau_color", "gripper_color"}

_TOP_KEYS = {
    "version",
    "task",
    "trials",
    "base_seed",
    "max_steps",
    "out_dir",
    "backend",
    "variants",
    "conditions",
}


def _parse_shift(obj: dict, path: str) -> ShiftSpec:
    _expect(obj, dict, path)
    _require_keys(obj, _SHIFT_KEYS, path)
    kwargs: dict = {}
    if "background_texture" in obj:
        kwargs["background_texture"] = _expect(obj["background_texture"], str, f"{path}.background_texture")
    if "texture_seed" in obj:
        kwargs["texture_seed"] = _expect(obj["texture_seed"], int, f"{path}.texture_seed")
    if "gripper_color" in obj:
        kwargs["gripper_color"] = _expect(obj["gripper_color"], str, f"{path}.gripper_color")
    if "distractor_count" in obj:
        kwargs["distractor_count"] = _expect(obj["distractor_count"], int, f"{path}.distractor_count")
    if "distractor_palette" in obj:
        seq = _expect(obj["distractor_palette"], list, f"{path}.distractor_palette")
        kwargs["distractor_palette"] = tuple(
            _expect(v, str, f"{path}.distractor_palette[{i}]") for i, v in enumerate(seq)
        )
    if "table_tint" in obj and obj["table_tint"] is not None:
        seq = _expect(obj["table_tint"], list, f"{path}.table_tint")
        kwargs["table_tint"] = tuple(
            _expect(v, int, f"{path}.table_tint[{i}]") for i, v in enumerate(seq)
        )
    try:
        return ShiftSpec(**kwargs)
    except ScenemaskError as exc:
        raise ConfigError(f"config key {path}: {exc}") from exc


def _parse_backend(obj: dict, path: str) -> BackendConfig:
    _expect(obj, dict, path)
    _require_keys(obj, _BACKEND_KEYS, path)
    kwargs: dict = {}
    if "kind" in obj:
        kwargs["kind"] = _expect(obj["kind"], str, f"{path}.kind")
    if "endpoint" in obj and obj["endpoint"] is not None:
        kwargs["endpoint"] = _expect(obj["endpoint"], str, f"{path}.endpoint")
    if "timeout" in obj:
        kwargs["timeout"] = float(_expect(obj["timeout"], (int, float), f"{path}.timeout"))
    if "tau_iou" in obj:
        kwargs["tau_iou"] = float(_expect(obj["tau_iou"], (int, float), f"{path}.tau_iou"))
    if "tau_color" in obj:
        kwargs["tau_color"] = float(_expect(obj["tau_color"], (int, float), f"{path}.tau_color"))
    if "gripper_color" in obj:
        kwargs["gripper_color"] = _expect(obj["gripper_color"], str, f"{path}.gripper_color")
    try:
        return BackendConfig(**kwargs)
    except ScenemaskError as exc:
        raise ConfigError(f"config key {path}: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    """A full evaluation matrix: task, models per variant, shift conditions."""

    task: str
    variants: dict[str, str | None]  # variant -> checkpoint path (None: absent)
    conditions: dict[str, ShiftSpec]
    trials: int = 50
    base_seed: int = 1000
    max_steps: int = 90
    out_dir: str = "results"
    backend: BackendConfig = field(default_factory=BackendConfig)

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"config key task: unknown task {self.task!r}")
        if self.trials < 1:
            raise ConfigError("config key trials: must be >= 1")
        if self.max_steps < 1:
            raise ConfigError("config key max_steps: must be >= 1")
        if not self.variants:
            raise ConfigError("config key variants: at least one variant required")
        for v in self.variants:
            if v not in _VARIANTS:
                raise ConfigError(f"config key variants.{v}: unknown variant")
        if not self.conditions:
            raise ConfigError("config key conditions: at least one condition required")


def parse_experiment_config(data: dict) -> ExperimentConfig:
    _expect(data, dict, "")
    _require_keys(data, _TOP_KEYS, "")
    if "version" not in data:
        raise ConfigError("config key version: required")
    if data["version"] != CONFIG_VERSION:
        raise ConfigError(
            f"config key version: expected {CONFIG_VERSION}, got {data['version']!r}"
        )
    if "task" not in data:
        raise ConfigError("config key task: required")
    task = _expect(data["task"], str, "task")

    variants_obj = _expect(data.get("variants", {}), dict, "variants")
    variants: dict[str, str | None] = {}
    for name, value in variants_obj.items():
        if value is None:
            variants[name] = None
        else:
            variants[name] = _expect(value, str, f"variants.{name}")

    conditions_obj = _expect(data.get("conditions", {"unshifted": {}}), dict, "conditions")
    conditions = {
        name: _parse_shift(obj, f"conditions.{name}") for name, obj in conditions_obj.items()
    }

    kwargs: dict = {"task": task, "variants": variants, "conditions": conditions}
    if "trials" in data:
        kwargs["trials"] = _expect(data["trials"], int, "trials")
    if "base_seed" in data:
        kwargs["base_seed"] = _expect(data["base_seed"], int, "base_seed")
    if "max_steps" in data:
        kwargs["max_steps"] = _expect(data["max_steps"], int, "max_steps")
    if "out_dir" in data:
        kwargs["out_dir"] = _expect(data["out_dir"], str, "out_dir")
    if "backend" in data:
        kwargs["backend"] = _parse_backend(data["backend"], "backend")
    return ExperimentConfig(**kwargs)


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: invalid JSON ({exc})") from exc
    return parse_experiment_config(data)


def effective_config_dict(cfg: ExperimentConfig) -> dict:
    """The config with every default made explicit; JSON round-trips to itself."""
    return {
        "version": CONFIG_VERSION,
        "task": cfg.task,
        "trials": cfg.trials,
        "base_seed": cfg.base_seed,
        "max_steps": cfg.max_steps,
        "out_dir": cfg.out_dir,
        "backend": {
            "kind": cfg.backend.kind,
            "endpoint": cfg.backend.endpoint,
            "timeout": cfg.backend.timeout,
            "tau_iou": cfg.backend.tau_iou,
            "tau_color": cfg.backend.tau_color,
            "gripper_color": cfg.backend.gripper_color,
        },
        "variants": {k: cfg.variants[k] for k in sorted(cfg.variants)},
        "conditions": {
            name: {
                "background_texture": shift.background_texture,
                "texture_seed": shift.texture_seed,
                "gripper_color": shift.gripper_color,
                "distractor_count": shift.distractor_count,
                "distractor_palette": list(shift.distractor_palette),
                "table_tint": list(shift.table_tint) if shift.table_tint is not None else None,
            }
            for name, shift in sorted(cfg.conditions.items())
        },
    }
