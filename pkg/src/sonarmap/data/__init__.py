"""Scenes and scenario configurations shipped with the package.

Three worlds ship ready to run: ``piling_marina`` (repeated structure, a
perimeter loop with closures), ``mixed_marina`` (pilings, a floating dock,
and a seawall), and ``aircraft`` (a one-of-a-kind wreck outside the inference
whitelist).  Each has a matching scenario config.
"""

from importlib.resources import files
from pathlib import Path

__all__ = ["builtin_scenarios", "builtin_scenes", "scenario_path", "scene_path"]


def _data_dir() -> Path:
    return Path(str(files("sonarmap") / "data"))


def builtin_scenes() -> tuple:
    """Names of the shipped scene files."""
    return tuple(sorted(p.stem for p in (_data_dir() / "scenes").glob("*.yaml")))


def builtin_scenarios() -> tuple:
    """Names of the shipped scenario configs."""
    return tuple(sorted(p.stem for p in (_data_dir() / "configs").glob("*.yaml")))


def scene_path(name: str) -> Path:
    """Filesystem path of a shipped scene, by name."""
    path = _data_dir() / "scenes" / f"{name}.yaml"
    if not path.is_file():
        raise KeyError(f"no shipped scene {name!r}; available: {builtin_scenes()}")
    return path


def scenario_path(name: str) -> Path:
    """Filesystem path of a shipped scenario config, by name."""
    path = _data_dir() / "configs" / f"{name}.yaml"
    if not path.is_file():
        raise KeyError(
            f"no shipped scenario {name!r}; available: {builtin_scenarios()}")
    return path
