"""Flat key-value experiment configuration files.

One experiment per file, ``key = value`` lines, ``#`` comments.  The model
identity hash covers the fields that analyze and simulate must agree on,
so downstream joins can refuse mismatched inputs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

from .analytic import ChoiceVector
from .errors import ConfigError
from .growth import INITIAL_TREES, ModelParams

__all__ = ["ExperimentConfig", "parse_config", "splitmix64_stream"]

_MASK = (1 << 64) - 1


def splitmix64_stream(seed: int, count: int) -> list[int]:
    """Deterministic 64-bit seed derivation for replicas and sweep points."""
    state = seed & _MASK
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(z ^ (z >> 31))
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    choice: ChoiceVector
    alpha: float = 0.0
    n0: int = 100
    steps: int = 10_000
    seed: int = 20_240_809
    initial_tree: str = "random_recursive"
    replicas: int = 1
    snapshots: tuple[int, ...] = ()
    x_grid: int = 101
    bins: int = 50
    k_list: tuple[int, ...] = tuple(range(1, 26))
    k_min_fit: int = 10
    k_max_fit: int | None = None
    alphas: tuple[float, ...] = ()
    out: str = "results"
    threads: int = 1

    def __post_init__(self):
        if self.replicas < 1:
            raise ConfigError("replicas must be at least 1")
        if self.x_grid < 2:
            raise ConfigError("x_grid must be at least 2")
        if self.bins < 1:
            raise ConfigError("bins must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.initial_tree not in INITIAL_TREES:
            raise ConfigError(f"initial_tree must be one of {INITIAL_TREES}")
        schedule = self.snapshots or (self.steps,)
        if list(schedule) != sorted(schedule):
            raise ConfigError("snapshots must be sorted")
        if schedule[0] < 0 or schedule[-1] > self.steps:
            raise ConfigError("snapshots must lie within the step count")

    @property
    def schedule(self) -> tuple[int, ...]:
        return self.snapshots or (self.steps,)

    def config_hash(self) -> str:
        """Model identity: the fields shared by analytic and simulated output."""
        ident = ";".join([
            "choice=" + ",".join(repr(p) for p in self.choice.probs),
            f"alpha={self.alpha!r}",
            f"n0={self.n0}",
            f"steps={self.steps}",
            f"initial_tree={self.initial_tree}",
        ])
        return hashlib.sha256(ident.encode()).hexdigest()[:16]

    def model_params(self, seed: int | None = None) -> ModelParams:
        return ModelParams(
            choice=self.choice,
            alpha=self.alpha,
            n0=self.n0,
            steps=self.steps,
            seed=self.seed if seed is None else seed,
            initial_tree=self.initial_tree,
        )

    def replica_seeds(self) -> list[int]:
        return splitmix64_stream(self.seed, self.replicas)

    def with_overrides(self, *, seed=None, replicas=None, out=None,
                       threads=None, alpha=None) -> "ExperimentConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if replicas is not None:
            changes["replicas"] = replicas
        if out is not None:
            changes["out"] = out
        if threads is not None:
            changes["threads"] = threads
        if alpha is not None:
            changes["alpha"] = alpha
        return replace(self, **changes) if changes else self


def _parse_int_list(raw: str) -> tuple[int, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(int(tok) for tok in raw.split(","))


def _parse_float_list(raw: str) -> tuple[float, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(float(tok) for tok in raw.split(","))


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if key in pairs:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        pairs[key] = value.strip()

    if "choice" not in pairs:
        raise ConfigError(f"{path}: missing required key 'choice'")

    def take(key, conv, default):
        if key not in pairs:
            return default
        try:
            return conv(pairs.pop(key))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {exc}") from exc

    try:
        choice = ChoiceVector(_parse_float_list(pairs.pop("choice")))
    except ValueError as exc:
        raise ConfigError(f"{path}: bad choice vector: {exc}") from exc

    kwargs = dict(
        choice=choice,
        alpha=take("alpha", float, 0.0),
        n0=take("n0", int, 100),
        steps=take("steps", int, 10_000),
        seed=take("seed", int, 20_240_809),
        initial_tree=take("initial_tree", str, "random_recursive"),
        replicas=take("replicas", int, 1),
        snapshots=take("snapshots", _parse_int_list, ()),
        x_grid=take("x_grid", int, 101),
        bins=take("bins", int, 50),
        k_list=take("k_list", _parse_int_list, tuple(range(1, 26))),
        k_min_fit=take("k_min_fit", int, 10),
        k_max_fit=take("k_max_fit", lambda s: int(s) or None, None),
        alphas=take("alphas", _parse_float_list, ()),
        out=take("out", str, "results"),
        threads=take("threads", int, 1),
    )
    if pairs:
        raise ConfigError(f"{path}: unknown keys {sorted(pairs)}")
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"{path}: {exc}") from exc
