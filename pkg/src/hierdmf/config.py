"""Run configuration: INI-style key=value files with a fixed schema.

Sections: [data] (dir), [hierarchy] (h, K, alpha, beta, seed,
max_outer_iters, rel_tol), [simulate] (grid, n, T, noise_sigma,
subject_jitter), [evaluate] (scales_used, events). Unknown sections or
keys are rejected. Command-line flags override file keys.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .datamodel import HierarchySpec
from .errors import ConfigError
from .storage import parse_grid

_SCHEMA = {
    "data": {"dir"},
    "hierarchy": {"h", "k", "alpha", "beta", "seed", "max_outer_iters", "rel_tol"},
    "simulate": {"grid", "n", "t", "noise_sigma", "subject_jitter"},
    "evaluate": {"scales_used", "events"},
}


@dataclass(frozen=True)
class SimulateConfig:
    grid: tuple[int, int]
    n_subjects: int
    n_timepoints: int
    noise_sigma: float
    subject_jitter: float


@dataclass(frozen=True)
class EvaluateConfig:
    scales_used: tuple[str, ...] | None
    events: str | None


@dataclass(frozen=True)
class RunConfig:
    spec: HierarchySpec
    data_dir: str | None
    simulate: SimulateConfig | None
    evaluate: EvaluateConfig


def _parse_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}={raw!r} is not an integer")


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}={raw!r} is not a number")


def _parse_int_list(section: str, key: str, raw: str) -> tuple[int, ...]:
    parts = raw.replace(",", " ").split()
    if not parts:
        raise ConfigError(f"[{section}] {key} is empty")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"[{section}] {key}={raw!r} is not an integer list")


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    """Parse and validate a configuration file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(p.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"{p}: {exc}")

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{p}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{p}: unknown key {key!r} in [{section}]")

    hier = parser["hierarchy"] if parser.has_section("hierarchy") else {}
    if "k" not in hier:
        raise ConfigError(f"{p}: [hierarchy] must define K")
    k = _parse_int_list("hierarchy", "K", hier["k"])
    seed = _parse_int("hierarchy", "seed", hier.get("seed", "0"))
    if seed_override is not None:
        seed = seed_override
    try:
        spec = HierarchySpec(
            K=k,
            alpha=_parse_float("hierarchy", "alpha", hier.get("alpha", "1.0")),
            beta=_parse_float("hierarchy", "beta", hier.get("beta", "10.0")),
            max_outer_iters=_parse_int(
                "hierarchy", "max_outer_iters", hier.get("max_outer_iters", "100")
            ),
            rel_tol=_parse_float("hierarchy", "rel_tol", hier.get("rel_tol", "1e-6")),
            seed=seed,
        )
    except ConfigError:
        raise
    if "h" in hier:
        h = _parse_int("hierarchy", "h", hier["h"])
        if h != spec.h:
            raise ConfigError(
                f"{p}: [hierarchy] h={h} contradicts K with {spec.h} scales"
            )

    simulate = None
    if parser.has_section("simulate"):
        sim = parser["simulate"]
        for key in ("grid", "n", "t"):
            if key not in sim:
                raise ConfigError(f"{p}: [simulate] must define {key}")
        try:
            grid = parse_grid(sim["grid"])
        except Exception:
            raise ConfigError(f"{p}: [simulate] grid={sim['grid']!r} is not ROWSxCOLS")
        simulate = SimulateConfig(
            grid=grid,
            n_subjects=_parse_int("simulate", "n", sim["n"]),
            n_timepoints=_parse_int("simulate", "T", sim["t"]),
            noise_sigma=_parse_float(
                "simulate", "noise_sigma", sim.get("noise_sigma", "0.0")
            ),
            subject_jitter=_parse_float(
                "simulate", "subject_jitter", sim.get("subject_jitter", "0.0")
            ),
        )

    scales_used = None
    events = None
    if parser.has_section("evaluate"):
        ev = parser["evaluate"]
        if "scales_used" in ev:
            tokens = tuple(ev["scales_used"].replace(",", " ").split())
            if not tokens:
                raise ConfigError(f"{p}: [evaluate] scales_used is empty")
            scales_used = tokens
        if "events" in ev:
            events = ev["events"]

    data_dir = None
    if parser.has_section("data") and "dir" in parser["data"]:
        data_dir = parser["data"]["dir"]

    return RunConfig(
        spec=spec,
        data_dir=data_dir,
        simulate=simulate,
        evaluate=EvaluateConfig(scales_used=scales_used, events=events),
    )


def resolve_feature_sets(
    tokens: tuple[str, ...] | None, n_scales: int
) -> tuple[tuple[str, tuple[int, ...]], ...]:
    """Turn scales_used tokens (s1, s2, ..., multi, all) into feature sets."""
    from .evaluation import default_feature_sets

    if tokens is None or tokens == ("all",):
        return default_feature_sets(n_scales)
    sets: list[tuple[str, tuple[int, ...]]] = []
    for tok in tokens:
        if tok == "multi":
            sets.append(("multi", tuple(range(1, n_scales + 1))))
        elif tok.startswith("s") and tok[1:].isdigit():
            j = int(tok[1:])
            if j < 1 or j > n_scales:
                raise ConfigError(f"scales_used token {tok!r} is out of range 1..{n_scales}")
            sets.append((tok, (j,)))
        else:
            raise ConfigError(
                f"scales_used token {tok!r} not understood (use s<j>, multi, or all)"
            )
    return tuple(sets)
