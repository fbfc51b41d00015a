"""Command-line interface.

Every command exits 0 on success and 1 on any handled failure (bad inputs,
missing files, backend errors); tracebacks are reserved for genuine bugs.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .compositor import BackgroundSpec, make_background
from .config import effective_config_dict, load_experiment_config
from .core import ScenemaskError
from .episode_io import encode_frame_png, list_episode_dirs, load_episode
from .evaluation import MatrixSpec, run_matrix, spatial_suite
from .pipeline import BACKEND_KINDS, BackendConfig, PipelineConfig, transform_dataset
from .policy.model import PolicyConfig, load_checkpoint, save_checkpoint
from .policy.train import TrainConfig, history_csv, train
from .sim.world import TASKS, TEXTURES, ShiftSpec
from .sim.dataset import generate_dataset

_VARIANT_CHOICES = ("vanilla", "masked", "arro")


def friendly(fn):
    """Convert expected failures into exit code 1 with a one-line message."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ScenemaskError, OSError, RuntimeError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main() -> None:
    """Task-relevant scene recomposition: data, training, and evaluation tools."""


@main.command()
@click.option("--task", "task_name", type=click.Choice(sorted(TASKS)), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--n", type=int, required=True, help="Number of successful episodes to write.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--texture", type=click.Choice(TEXTURES), default="plain", show_default=True)
@click.option("--texture-seed", type=int, default=0, show_default=True)
@click.option("--gripper-color", default="green", show_default=True)
@click.option("--distractors", type=int, default=0, show_default=True)
@click.option("--overwrite", is_flag=True, help="Replace existing episode directories.")
@friendly
def generate(
    task_name: str,
    out_dir: str,
    n: int,
    seed: int,
    texture: str,
    texture_seed: int,
    gripper_color: str,
    distractors: int,
    overwrite: bool,
) -> None:
    """Roll the scripted expert and save demonstration episodes."""
    if n < 1:
        raise ScenemaskError("--n must be >= 1")
    shift = ShiftSpec(
        background_texture=texture,
        texture_seed=texture_seed,
        gripper_color=gripper_color,
        distractor_count=distractors,
    )
    paths = generate_dataset(out_dir, TASKS[task_name], n, base_seed=seed, shift=shift, overwrite=overwrite)
    click.echo(f"wrote {len(paths)} episodes to {out_dir}")


@main.command()
@click.option("--in", "in_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--variant", type=click.Choice(_VARIANT_CHOICES), required=True)
@click.option("--backend", "backend_kind", type=click.Choice(BACKEND_KINDS), default="oracle", show_default=True)
@click.option("--endpoint", default=None, help="Remote backend URL (or set ARRO_REMOTE_ENDPOINT).")
@click.option("--timeout", type=float, default=10.0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@friendly
def transform(
    in_dir: str,
    out_dir: str,
    variant: str,
    backend_kind: str,
    endpoint: str | None,
    timeout: float,
    workers: int,
) -> None:
    """Recompose every episode in a dataset; failures are recorded, not fatal."""
    backend = BackendConfig(kind=backend_kind, endpoint=endpoint, timeout=timeout)
    config = PipelineConfig(variant=variant, background=None, backend=backend)
    manifest = transform_dataset(in_dir, out_dir, config, workers=workers)
    if not manifest:
        raise ScenemaskError(f"no episodes found under {in_dir}")
    failed = sorted(name for name, entry in manifest.items() if entry["status"] == "failed")
    ok = len(manifest) - len(failed)
    click.echo(f"transformed {ok}/{len(manifest)} episodes into {out_dir}")
    if failed:
        click.echo(f"warning: {len(failed)} episodes failed (see manifest.json)", err=True)
        for name in failed[:5]:
            click.echo(f"warning:   {name}: {manifest[name]['reason']}", err=True)


@main.command("train")
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--epochs", type=int, default=30, show_default=True)
@click.option("--batch-size", type=int, default=128, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--obs-horizon", type=int, default=None, help="Default: from the episodes' task.")
@click.option("--action-horizon", type=int, default=None, help="Default: from the episodes' task.")
@friendly
def train_cmd(
    data_dir: str,
    out_path: str,
    epochs: int,
    batch_size: int,
    lr: float,
    seed: int,
    obs_horizon: int | None,
    action_horizon: int | None,
) -> None:
    """Behavior-clone a policy from an episode dataset; writes a checkpoint."""
    dirs = list_episode_dirs(data_dir)
    if not dirs:
        raise ScenemaskError(f"no episodes found under {data_dir}")
    episodes = [load_episode(d) for d in dirs]
    task = TASKS.get(episodes[0].task_id)
    horizons = task.horizons if task is not None else None
    policy_config = PolicyConfig(
        obs_horizon=obs_horizon or (horizons.obs_horizon if horizons else 2),
        action_horizon=action_horizon or (horizons.action_horizon if horizons else 6),
        frame_width=episodes[0].width,
        frame_height=episodes[0].height,
    )
    params, history = train(
        episodes,
        policy_config,
        TrainConfig(epochs=epochs, batch_size=batch_size, learning_rate=lr, seed=seed),
    )
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, params, policy_config)
    losses = out.with_name(out.name + ".losses.csv")
    losses.write_text(history_csv(history))
    click.echo(f"trained on {len(episodes)} episodes; final loss {history[-1][1]:.6f}")
    click.echo(f"checkpoint: {out}")


@main.command("eval")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Override the config's out_dir.")
@click.option(
    "--print-effective-config",
    is_flag=True,
    help="Print the fully populated config as JSON and exit without running.",
)
@friendly
def eval_cmd(config_path: str, out_dir: str | None, print_effective_config: bool) -> None:
    """Run an evaluation matrix from a JSON config; writes all report artifacts."""
    cfg = load_experiment_config(config_path)
    if print_effective_config:
        click.echo(json.dumps(effective_config_dict(cfg), indent=2, sort_keys=True))
        return
    bundles: dict = {}
    for variant, ckpt in cfg.variants.items():
        if ckpt is None or not Path(ckpt).is_file():
            if ckpt is not None:
                click.echo(f"warning: checkpoint {ckpt} for {variant} not found", err=True)
            bundles[variant] = None
            continue
        params, policy_config = load_checkpoint(ckpt)
        bundles[variant] = (params, policy_config)
    spec = MatrixSpec(
        task_name=cfg.task,
        variants=bundles,
        conditions=cfg.conditions,
        trials=cfg.trials,
        base_seed=cfg.base_seed,
        backend=cfg.backend,
        max_steps=cfg.max_steps,
    )
    destination = out_dir if out_dir is not None else cfg.out_dir
    results = run_matrix(spec, destination)
    for variant in sorted(results[cfg.task]):
        for condition, cell in sorted(results[cfg.task][variant].items()):
            if "status" in cell:
                click.echo(f"{cfg.task}/{variant}/{condition}: {cell['status']}")
            else:
                click.echo(
                    f"{cfg.task}/{variant}/{condition}: "
                    f"success {cell['success_rate']:.2f} over {cell['trials']} trials"
                )
    click.echo(f"reports written to {destination}")


@main.command("spatial-suite")
@click.option("--n", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--mirror", "n_mirror", type=int, default=100, show_default=True)
@friendly
def spatial_suite_cmd(n: int, seed: int, n_mirror: int) -> None:
    """Check the reference resolver against a brute-force oracle."""
    result = spatial_suite(n_scenes=n, seed=seed, n_mirror=n_mirror)
    click.echo(f"agreement: {result.n_agree}/{result.n_scenes}")
    click.echo(f"mirror consistency: {result.n_mirror_ok}/{result.n_mirror}")
    for line in result.failures:
        click.echo(f"failure: {line}", err=True)
    if not result.passed:
        raise ScenemaskError("spatial suite failed")
    click.echo("spatial suite passed")


@main.command("render-background")
@click.option("--kind", type=click.Choice(("black", "grid")), required=True)
@click.option("--width", type=int, default=320, show_default=True)
@click.option("--height", type=int, default=180, show_default=True)
@click.option("--spacing", type=int, default=32, show_default=True)
@click.option("--thickness", type=int, default=2, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@friendly
def render_background(
    kind: str, width: int, height: int, spacing: int, thickness: int, out_path: str
) -> None:
    """Write a virtual background as a PNG (deterministic for given options)."""
    spec = BackgroundSpec(kind=kind, spacing=spacing, thickness=thickness)
    frame = make_background(spec, width, height)
    Path(out_path).write_bytes(encode_frame_png(frame))
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
