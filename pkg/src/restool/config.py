"""Pipeline configuration: one JSON file, strict schema, stable hashing."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .density import MODES
from .detector import DISCRETIZE_METHODS
from .errors import ConfigError


@dataclass
class PathsConfig:
    values: str
    spec: str
    centroids: str
    adjacency: str
    output_dir: str
    drivers: str | None = None


@dataclass
class NormalizationConfig:
    mode: str = "fixed_base"  # "fixed_base" | "minmax"
    base_year: int | None = None
    scope: str = "pooled"  # minmax only: "pooled" | "per_year"


@dataclass
class WeightsConfig:
    source: str = "entropy"  # "entropy" | "file"
    file: str | None = None


@dataclass
class ClassificationConfig:
    k: int = 5


@dataclass
class EllipseConfig:
    years: list[int] | str = "all"


@dataclass
class DensityConfig:
    modes: list[str] = field(default_factory=lambda: list(MODES))
    delta: int = 3
    grid_size: int = 256
    h_x: float | None = None
    h_y: float | None = None
    weights: str = "contiguity"  # "contiguity" | "knn"
    k_nearest: int = 4


@dataclass
class DetectorConfig:
    factors: list[str] | str = "all"
    years: list[int] | str = "all"
    methods: list[str] = field(default_factory=lambda: list(DISCRETIZE_METHODS))
    l_range: list[int] = field(default_factory=lambda: [3, 8])
    permutations: int = 999
    seed: int | None = None  # falls back to the top-level seed


@dataclass
class PipelineConfig:
    paths: PathsConfig
    normalization: NormalizationConfig
    weights: WeightsConfig
    classification: ClassificationConfig
    ellipse: EllipseConfig
    density: DensityConfig
    detector: DetectorConfig
    seed: int | None = None
    base_dir: Path = Path(".")

    def resolve(self, name: str) -> Path:
        """A path field resolved relative to the config file's directory."""
        raw = getattr(self.paths, name)
        if raw is None:
            raise ConfigError(f"paths.{name} is required for this stage", field=f"paths.{name}")
        return (self.base_dir / raw).resolve()

    def output_dir(self) -> Path:
        return (self.base_dir / self.paths.output_dir).resolve()


_SECTIONS = {
    "paths": PathsConfig,
    "normalization": NormalizationConfig,
    "weights": WeightsConfig,
    "classification": ClassificationConfig,
    "ellipse": EllipseConfig,
    "density": DensityConfig,
    "detector": DetectorConfig,
}


def _build_section(name: str, cls, raw: dict):
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be an object", field=name)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown field(s) {unknown} in section {name!r}",
                          field=f"{name}.{unknown[0]}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"section {name!r}: {exc}", field=name) from exc


def load_config(path) -> PipelineConfig:
    """Parse and validate the pipeline config JSON.

    Relative paths inside the file resolve against the file's directory.
    Unknown sections or fields are schema violations.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    unknown = sorted(set(raw) - set(_SECTIONS) - {"seed"})
    if unknown:
        raise ConfigError(f"unknown top-level field(s) {unknown}", field=unknown[0])
    if "paths" not in raw:
        raise ConfigError("config must define the paths section", field="paths")

    sections = {}
    for name, cls in _SECTIONS.items():
        sections[name] = _build_section(name, cls, raw[name]) if name in raw else cls()
    seed = raw.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ConfigError("seed must be an integer", field="seed")

    config = PipelineConfig(seed=seed, base_dir=path.parent.resolve(), **sections)
    _validate(config)
    return config


def _validate(config: PipelineConfig) -> None:
    norm = config.normalization
    if norm.mode not in ("fixed_base", "minmax"):
        raise ConfigError(f"normalization.mode must be fixed_base or minmax, got {norm.mode!r}",
                          field="normalization.mode")
    if norm.mode == "fixed_base" and norm.base_year is None:
        raise ConfigError("normalization.base_year is required for fixed_base",
                          field="normalization.base_year")
    if norm.scope not in ("pooled", "per_year"):
        raise ConfigError(f"normalization.scope must be pooled or per_year, got {norm.scope!r}",
                          field="normalization.scope")

    if config.weights.source not in ("entropy", "file"):
        raise ConfigError("weights.source must be entropy or file", field="weights.source")
    if config.weights.source == "file" and not config.weights.file:
        raise ConfigError("weights.file is required when weights.source is file",
                          field="weights.file")

    if config.classification.k < 2:
        raise ConfigError("classification.k must be >= 2", field="classification.k")

    dens = config.density
    bad_modes = sorted(set(dens.modes) - set(MODES))
    if bad_modes:
        raise ConfigError(f"unknown density modes {bad_modes}", field="density.modes")
    if dens.delta < 1:
        raise ConfigError("density.delta must be >= 1", field="density.delta")
    if dens.grid_size < 2:
        raise ConfigError("density.grid_size must be >= 2", field="density.grid_size")
    if dens.weights not in ("contiguity", "knn"):
        raise ConfigError("density.weights must be contiguity or knn", field="density.weights")

    det = config.detector
    bad_methods = sorted(set(det.methods) - set(DISCRETIZE_METHODS))
    if bad_methods:
        raise ConfigError(f"unknown detector methods {bad_methods}", field="detector.methods")
    if (not isinstance(det.l_range, list) or len(det.l_range) != 2
            or det.l_range[0] > det.l_range[1] or det.l_range[0] < 2):
        raise ConfigError("detector.l_range must be [lo, hi] with 2 <= lo <= hi",
                          field="detector.l_range")
    if det.permutations < 99:
        raise ConfigError("detector.permutations must be >= 99",
                          field="detector.permutations")
    if det.seed is None and config.seed is None:
        raise ConfigError("a seed is required when permutations are requested",
                          field="seed")
    for name, value in (("seed", config.seed), ("detector.seed", det.seed)):
        if value is not None and value < 0:
            raise ConfigError(f"{name} must be a non-negative integer", field=name)

    # Input files must exist up front; the output dir is created later.
    for name in ("values", "spec", "centroids", "adjacency", "drivers"):
        raw = getattr(config.paths, name)
        if raw is None:
            continue
        if not config.resolve(name).is_file():
            raise ConfigError(f"paths.{name}: file not found: {config.resolve(name)}",
                              field=f"paths.{name}")


def config_hash(config: PipelineConfig) -> str:
    """SHA-256 over the canonical config, excluding the output location.

    Every field that can change pipeline results participates; moving the
    output directory does not.
    """
    payload = {
        "seed": config.seed,
        "paths": {k: getattr(config.paths, k)
                  for k in ("values", "spec", "centroids", "adjacency", "drivers")},
        "normalization": vars(config.normalization),
        "weights": vars(config.weights),
        "classification": vars(config.classification),
        "ellipse": vars(config.ellipse),
        "density": vars(config.density),
        "detector": vars(config.detector),
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def apply_overrides(config: PipelineConfig, assignments: list[str]) -> PipelineConfig:
    """Apply ``section.field=value`` overrides (values parsed as JSON, else string)."""
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.field=value")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        parts = key.split(".")
        if len(parts) == 1 and parts[0] == "seed":
            if not isinstance(value, int):
                raise ConfigError("seed must be an integer", field="seed")
            config.seed = value
            continue
        if len(parts) != 2 or parts[0] not in _SECTIONS:
            raise ConfigError(f"unknown override target {key!r}", field=key)
        section = getattr(config, parts[0])
        if parts[1] not in {f.name for f in fields(section)}:
            raise ConfigError(f"unknown override field {key!r}", field=key)
        setattr(section, parts[1], value)
    _validate(config)
    return config
