"""Command-line interface: simulate, decompose, evaluate, compare,
export-maps.

Exit codes: 0 on success, 2 on usage or configuration errors, 1 on
runtime errors (missing or malformed inputs). All randomness flows from
the configured seed, so re-running a command reproduces its outputs byte
for byte.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .config import RunConfig, load_config, resolve_feature_sets
from .errors import ConfigError, HierdmfError
from .evaluation import EvaluationReport, loso_evaluate, wilcoxon_signed_rank
from .parallel import resolve_threads
from .pipeline import STRATEGIES, decompose, load_result, result_grid, save_result
from .storage import (
    _write_meta,
    load_cohort,
    load_matrix,
    parse_grid,
    save_cohort,
    save_truth,
    store_matrix,
)
from .synthetic import generate_synthetic_cohort


class _Ctx:
    def __init__(self, config: str | None, seed: int | None, threads: int | None, quiet: bool):
        self.config_path = config
        self.seed = seed
        self.threads = resolve_threads(threads)
        self.quiet = quiet

    def load(self) -> RunConfig:
        if self.config_path is None:
            raise ConfigError("this command requires --config")
        return load_config(self.config_path, seed_override=self.seed)

    def say(self, message: str) -> None:
        if not self.quiet:
            click.echo(message)


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    code = 2 if isinstance(exc, ConfigError) else 1
    sys.exit(code)


@click.group()
@click.option("--config", type=click.Path(), default=None, help="Path to a run configuration file.")
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
@click.option("--threads", type=int, default=None, help="Worker threads (0 = auto).")
@click.option("--quiet", is_flag=True, help="Suppress summary output.")
@click.pass_context
def main(ctx, config, seed, threads, quiet):
    """Multi-scale hierarchical component maps for cohorts of time series."""
    try:
        ctx.obj = _Ctx(config, seed, threads, quiet)
    except HierdmfError as exc:
        _fail(exc)


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_obj
def simulate(ctx: _Ctx, out_dir):
    """Generate a synthetic cohort plus ground truth."""
    try:
        cfg = ctx.load()
        if cfg.simulate is None:
            raise ConfigError("simulate requires a [simulate] section")
        sim = cfg.simulate
        cohort, truth = generate_synthetic_cohort(
            cfg.spec,
            n_subjects=sim.n_subjects,
            grid=sim.grid,
            n_timepoints=sim.n_timepoints,
            noise_sigma=sim.noise_sigma,
            subject_jitter=sim.subject_jitter,
            seed=cfg.spec.seed,
        )
        save_cohort(cohort, out_dir, grid=sim.grid)
        save_truth(truth, out_dir)
        ctx.say(
            f"wrote cohort n={cohort.n_subjects} T={cohort.n_timepoints} "
            f"S={cohort.n_voxels} grid={sim.grid[0]}x{sim.grid[1]} -> {out_dir}"
        )
    except HierdmfError as exc:
        _fail(exc)


@main.command("decompose")
@click.option("--data", "data_dir", type=click.Path(), default=None)
@click.option("--strategy", type=click.Choice(sorted(STRATEGIES)), required=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_obj
def decompose_cmd(ctx: _Ctx, data_dir, strategy, out_dir):
    """Decompose a cohort directory with the chosen strategy."""
    try:
        cfg = ctx.load()
        data_dir = data_dir or cfg.data_dir
        if data_dir is None:
            raise ConfigError("decompose needs --data or [data] dir")
        cohort, meta = load_cohort(data_dir)
        result = decompose(cohort, cfg.spec, strategy, threads=ctx.threads)
        grid = parse_grid(meta["grid"]) if "grid" in meta else None
        save_result(result, out_dir, grid=grid)
        last = result.objective_trace[-1]
        ctx.say(
            f"{strategy}: {result.iterations} iterations, "
            f"converged={result.converged}, final objective {last.total:.6g} -> {out_dir}"
        )
    except HierdmfError as exc:
        _fail(exc)


@main.command()
@click.option("--result", "result_dir", required=True, type=click.Path())
@click.option("--data", "data_dir", type=click.Path(), default=None)
@click.option("--activations", "act_dir", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_obj
def evaluate(ctx: _Ctx, result_dir, data_dir, act_dir, out_path):
    """Score leave-one-subject-out activation prediction."""
    try:
        cfg = ctx.load()
        data_dir = data_dir or cfg.data_dir
        if data_dir is None:
            raise ConfigError("evaluate needs --data or [data] dir")
        cohort, _ = load_cohort(data_dir)
        result, _ = load_result(result_dir)
        if result.subject_ids != cohort.subject_ids:
            raise ConfigError(
                "result subjects do not match cohort subjects: "
                f"{result.subject_ids} vs {cohort.subject_ids}"
            )
        act_dir = Path(act_dir)
        events_path = (
            Path(cfg.evaluate.events) if cfg.evaluate.events else act_dir / "events.meta"
        )
        if not events_path.exists():
            raise HierdmfError(f"missing events manifest {events_path}")
        events = [
            line.strip()
            for line in events_path.read_text().splitlines()
            if line.strip() and not line.strip().startswith("#")
        ]
        activations = {}
        for sid in cohort.subject_ids:
            per_event = []
            for event in events:
                p = act_dir / f"activation_{sid}_{event}.dmat"
                if not p.exists():
                    raise HierdmfError(f"missing activation file {p}")
                per_event.append(load_matrix(p).reshape(-1))
            activations[sid] = np.stack(per_event)
        sets = resolve_feature_sets(cfg.evaluate.scales_used, result.n_scales)
        report = loso_evaluate(cohort, result, activations, events, feature_sets=sets)
        report.save(out_path)
        parts = ", ".join(
            f"{name}={report.mean_r(name):.4f}" for name, _ in report.feature_sets
        )
        ctx.say(f"mean r by feature set: {parts} -> {out_path}")
    except HierdmfError as exc:
        _fail(exc)


@main.command()
@click.argument("reports", nargs=-1, required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_obj
def compare(ctx: _Ctx, reports, out_path):
    """Pairwise Wilcoxon comparison of evaluation reports."""
    try:
        if len(reports) < 2:
            raise ConfigError("compare needs at least two reports")
        loaded = []
        labels = []
        for path in reports:
            p = Path(path)
            if not p.exists():
                raise HierdmfError(f"missing report {p}")
            loaded.append(EvaluationReport.load(p))
            label = p.stem
            if label in labels:
                label = f"{label}#{len(labels)}"
            labels.append(label)
        keys = {
            tuple(sorted((r.subject, r.event, r.feature_set) for r in rep.rows))
            for rep in loaded
        }
        if len(keys) != 1:
            raise HierdmfError(
                "reports do not cover the same (subject, event, feature_set) keys"
            )
        subjects = loaded[0].subjects
        means = []
        for rep in loaded:
            by_subject: dict[str, list[float]] = {s: [] for s in subjects}
            for row in rep.rows:
                by_subject[row.subject].append(row.r)
            means.append({s: float(np.mean(v)) for s, v in by_subject.items()})
        pairwise = []
        for ia in range(len(loaded)):
            for ib in range(ia + 1, len(loaded)):
                va = np.array([means[ia][s] for s in subjects])
                vb = np.array([means[ib][s] for s in subjects])
                w = wilcoxon_signed_rank(va, vb)
                pairwise.append(
                    {
                        "a": labels[ia],
                        "b": labels[ib],
                        "statistic": w.statistic,
                        "p": w.p_value,
                        "flagged": w.flagged,
                    }
                )
        payload = {
            "labels": labels,
            "subjects": list(subjects),
            "mean_r": {
                labels[i]: float(np.mean(list(means[i].values())))
                for i in range(len(loaded))
            },
            "per_subject_mean": {labels[i]: means[i] for i in range(len(loaded))},
            "pairwise": pairwise,
        }
        Path(out_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        if not ctx.quiet:
            width = max(len(lbl) for lbl in labels)
            click.echo("mean r per report:")
            for lbl in labels:
                click.echo(f"  {lbl:<{width}}  {payload['mean_r'][lbl]:.4f}")
            click.echo("pairwise Wilcoxon (two-sided):")
            for row in pairwise:
                click.echo(
                    f"  {row['a']} vs {row['b']}: W={row['statistic']:.1f} p={row['p']:.5g}"
                    + (" [degenerate]" if row["flagged"] else "")
                )
        ctx.say(f"wrote {out_path}")
    except HierdmfError as exc:
        _fail(exc)


@main.command("export-maps")
@click.option("--result", "result_dir", required=True, type=click.Path())
@click.option("--scale", type=int, required=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["csv", "pgm"]), default="csv")
@click.pass_obj
def export_maps(ctx: _Ctx, result_dir, scale, out_dir, fmt):
    """Export mean-over-subjects component maps at one scale."""
    try:
        result, meta = load_result(result_dir)
        if scale < 1 or scale > result.n_scales:
            raise ConfigError(f"scale {scale} out of range 1..{result.n_scales}")
        n = len(result.subject_ids)
        mean_map = np.mean([result.scale_map(i, scale) for i in range(n)], axis=0)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        dead = [k for k in range(mean_map.shape[0]) if mean_map[k].max() <= 0]
        _write_meta(
            out / f"maps_scale{scale}.meta",
            [
                ("scale", str(scale)),
                ("components", str(mean_map.shape[0])),
                ("format", fmt),
                ("dead", ",".join(str(k) for k in dead) if dead else "-"),
            ],
        )
        if fmt == "csv":
            path = out / f"maps_scale{scale}.csv"
            lines = [
                ",".join(f"{v:.17g}" for v in row) for row in mean_map
            ]
            path.write_text("\n".join(lines) + "\n")
            ctx.say(f"wrote {mean_map.shape[0]} rows -> {path}")
        else:
            grid = result_grid(meta)
            if grid is None:
                raise HierdmfError(
                    "pgm export needs grid metadata; this result has none"
                )
            rows, cols = grid
            if rows * cols != mean_map.shape[1]:
                raise HierdmfError(
                    f"grid {rows}x{cols} does not match map width {mean_map.shape[1]}"
                )
            written = 0
            for k, row in enumerate(mean_map):
                peak = row.max()
                scaled = (
                    np.zeros(row.shape, dtype=np.uint8)
                    if peak <= 0
                    else np.rint(255.0 * row / peak).astype(np.uint8)
                )
                img = scaled.reshape(rows, cols)
                header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
                (out / f"map_scale{scale}_comp{k}.pgm").write_bytes(
                    header + img.tobytes()
                )
                written += 1
            ctx.say(f"wrote {written} PGM maps -> {out}")
    except HierdmfError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
