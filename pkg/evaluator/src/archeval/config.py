"""Worker configuration.

The config file path arrives in the ``ARCHEVAL_CONFIG`` environment
variable; without it the defaults below apply. User-supplied priors merge
over the defaults per dataset, so extending the dataset set never silently
drops the built-in entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

CONFIG_ENV = "ARCHEVAL_CONFIG"

SIMULATE = "simulate"
REAL = "real"

# Per-dataset (mean, spread) accuracy priors. Means follow the published
# per-dataset averages; the spread bounds the deterministic perturbation.
# Simulation parameters, not reproduction claims.
DEFAULT_PRIORS: dict[str, tuple[float, float]] = {
    "mnist": (0.985, 0.02),
    "celeba": (0.887, 0.02),
    "svhn": (0.784, 0.02),
    "cifar10": (0.646, 0.02),
    "imagenette": (0.607, 0.02),
    "cifar100": (0.264, 0.02),
}


class ConfigError(ValueError):
    """The config file is unreadable or a field is out of contract."""


@dataclass(frozen=True)
class WorkerConfig:
    mode: str = SIMULATE
    seed: int = 0
    priors: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_PRIORS)
    )
    train_command: tuple[str, ...] = ()


def _parse_priors(raw: object) -> dict[str, tuple[float, float]]:
    if not isinstance(raw, dict):
        raise ConfigError("priors: expected an object of dataset -> [mean, spread]")
    priors = dict(DEFAULT_PRIORS)
    for dataset, pair in raw.items():
        if (
            not isinstance(pair, (list, tuple))
            or len(pair) != 2
            or not all(isinstance(v, (int, float)) for v in pair)
        ):
            raise ConfigError(f"priors[{dataset!r}]: expected [mean, spread]")
        mean, spread = float(pair[0]), float(pair[1])
        if not 0.0 <= mean <= 1.0:
            raise ConfigError(f"priors[{dataset!r}]: mean must be in [0, 1]")
        if spread < 0.0:
            raise ConfigError(f"priors[{dataset!r}]: spread must be >= 0")
        priors[dataset] = (mean, spread)
    return priors


def load_config(path: str | None) -> WorkerConfig:
    """Load a config file, or return the defaults when ``path`` is falsy."""
    if not path:
        return WorkerConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")

    mode = data.get("mode", SIMULATE)
    if mode not in (SIMULATE, REAL):
        raise ConfigError(f"mode: unknown mode {mode!r}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed: must be an integer")
    priors = _parse_priors(data["priors"]) if "priors" in data else dict(DEFAULT_PRIORS)
    command_raw = data.get("train_command", [])
    if not isinstance(command_raw, list) or not all(
        isinstance(part, str) for part in command_raw
    ):
        raise ConfigError("train_command: must be a list of strings")
    return WorkerConfig(
        mode=mode, seed=seed, priors=priors, train_command=tuple(command_raw)
    )
