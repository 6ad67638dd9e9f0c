"""Pipeline configuration: one JSON file covering every stage.

The file holds one section per stage plus a paths section; every key
is optional and falls back to the documented default. Unknown keys are
rejected so typos fail loudly instead of silently running with
defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .centerline import CenterlineParams
from .changedet import M3C2Params
from .errors import ConfigError, ParseError, ValidationError
from .ground import BandParams
from .obstacles import ClusterParams
from .widthmap import RouteParams


@dataclass(frozen=True)
class PathsConfig:
    """Input and output locations; unset inputs stay None."""

    sidewalks: str | None = None
    cloud_epoch_a: str | None = None
    cloud_epoch_b: str | None = None
    elevation: str | None = None
    trees: str | None = None
    containers: str | None = None
    terraces: str | None = None
    output_dir: str = "out"


def _section(cls, data: dict, name: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"section {name!r}: unknown keys {unknown}")
    try:
        return cls(**data)
    except ValidationError as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc


@dataclass(frozen=True)
class PipelineConfig:
    """Validated settings for every pipeline stage."""

    paths: PathsConfig = field(default_factory=PathsConfig)
    band: BandParams = field(default_factory=BandParams)
    m3c2: M3C2Params = field(default_factory=M3C2Params)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    centerline: CenterlineParams = field(default_factory=CenterlineParams)
    routing: RouteParams = field(default_factory=RouteParams)
    workers: int = 1

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    _SECTIONS = {
        "paths": PathsConfig,
        "band": BandParams,
        "m3c2": M3C2Params,
        "cluster": ClusterParams,
        "centerline": CenterlineParams,
        "routing": RouteParams,
    }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be an object")
        unknown = sorted(set(data) - set(cls._SECTIONS) - {"workers"})
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        kwargs = {}
        for name, section_cls in cls._SECTIONS.items():
            if name in data:
                kwargs[name] = _section(section_cls, data[name], name)
        if "workers" in data:
            workers = data["workers"]
            if not isinstance(workers, int) or isinstance(workers, bool):
                raise ConfigError("workers must be an integer")
            kwargs["workers"] = workers
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        text = path.read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(
                f"{path}: invalid JSON at offset {exc.pos}: {exc.msg}"
            ) from exc
        return cls.from_dict(data)

    def with_overrides(
        self, workers: int | None = None, output_dir: str | None = None
    ) -> "PipelineConfig":
        cfg = self
        if workers is not None:
            cfg = dataclasses.replace(cfg, workers=workers)
        if output_dir is not None:
            cfg = dataclasses.replace(
                cfg, paths=dataclasses.replace(cfg.paths, output_dir=output_dir)
            )
        return cfg

    def require_inputs(self, *names: str) -> None:
        """Check that the named path entries are set and exist on disk."""
        for name in names:
            value = getattr(self.paths, name)
            if value is None:
                raise ConfigError(f"paths.{name} is required for this command")
            if not Path(value).exists():
                raise ConfigError(f"paths.{name}: no such file: {value}")
        for name in ("trees", "containers", "terraces"):
            value = getattr(self.paths, name)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"paths.{name}: no such file: {value}")
