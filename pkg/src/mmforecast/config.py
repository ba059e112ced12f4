"""Run configuration: one flat key = value file driving every stage.

Every knob of the corpus generator, windowing, mining, model dims, embedding,
training schedule, evaluation, and serving lives in one dataclass. Files use
`key = value` lines with `#` comments; unknown keys are hard errors, and the
fully resolved config is echoed into every output directory for provenance.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from mmforecast.autoencoder import AutoencoderConfig
from mmforecast.embedding import EmbeddingConfig
from mmforecast.motionmap import HeatmapModelConfig, MotionMapConfig
from mmforecast.pipeline import TrainingParams
from mmforecast.synthetic import GeneratorConfig

PROTOCOLS = ("train-mined", "test-mined")


class ConfigError(ValueError):
    """Malformed config file, unknown key, or invalid value."""


@dataclass(frozen=True)
class RunConfig:
    # corpus generation
    seed: int = 0
    families: int = 5
    sequences_per_family: tuple[int, ...] = (12, 10, 8, 6, 4)
    frames_per_sequence: int = 164
    prefix_frames: int = 64
    actor_scale_min: float = 0.85
    actor_scale_max: float = 1.15
    noise_level: float = 0.01
    fps: float = 25.0
    # windowing, mining, split
    observed_frames: int = 25
    future_frames: int = 100
    window_stride: int = 39
    test_fraction: float = 0.25
    tau: float = 0.08
    # model dimensions
    latent_dim: int = 80
    grid_size: int = 48
    heatmap_hidden_dim: int = 128
    heatmap_conv_channels: tuple[int, ...] = (16, 16)
    # heatmap construction and mode extraction
    stamp_sigma: float = 1.5
    positive_weight: float = 25.0
    maxima_threshold: float = 0.2
    nms_radius: int = 3
    lookup_radius: float = 5.0
    # embedding
    perplexity: float = 10.0
    embedding_iterations: int = 750
    exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_switch: int = 250
    transform_neighbors: int = 5
    transform_steps: int = 50
    transform_lr: float = 0.02
    # training schedule
    autoencoder_epochs: int = 220
    autoencoder_lr: float = 1e-3
    autoencoder_batch: int = 32
    heatmap_epochs: int = 150
    heatmap_lr: float = 2e-3
    heatmap_batch: int = 32
    finetune_epochs: int = 220
    finetune_lr: float = 3e-4
    # evaluation and serving
    budget: int = 7
    protocol: str = "train-mined"
    port: int = 8707
    out_dir: str = "runs/desk"

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.window_stride < 1:
            raise ConfigError("window_stride must be >= 1")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.actor_scale_min > self.actor_scale_max:
            raise ConfigError("actor_scale_min must not exceed actor_scale_max")
        self.generator_config().validate()
        self.autoencoder_config().validate()
        self.map_config().validate()

    # -- per-module views ---------------------------------------------------

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            fps=self.fps,
            families=self.families,
            sequences_per_family=self.sequences_per_family,
            frames_per_sequence=self.frames_per_sequence,
            prefix_frames=self.prefix_frames,
            actor_scale_range=(self.actor_scale_min, self.actor_scale_max),
            noise_level=self.noise_level,
        )

    def autoencoder_config(self) -> AutoencoderConfig:
        return AutoencoderConfig(
            observed_frames=self.observed_frames,
            future_frames=self.future_frames,
            joint_count=17,
            latent_dim=self.latent_dim,
            seed=self.seed,
        )

    def heatmap_config(self) -> HeatmapModelConfig:
        return HeatmapModelConfig(
            joint_count=17,
            grid_size=self.grid_size,
            hidden_dim=self.heatmap_hidden_dim,
            conv_channels=self.heatmap_conv_channels,
            seed=self.seed,
        )

    def map_config(self) -> MotionMapConfig:
        return MotionMapConfig(
            grid_size=self.grid_size,
            stamp_sigma=self.stamp_sigma,
            positive_weight=self.positive_weight,
            maxima_threshold=self.maxima_threshold,
            nms_radius=self.nms_radius,
            lookup_radius=self.lookup_radius,
        )

    def embedding_config(self) -> EmbeddingConfig:
        return EmbeddingConfig(
            perplexity=self.perplexity,
            iterations=self.embedding_iterations,
            exaggeration=self.exaggeration,
            exaggeration_iters=self.exaggeration_iters,
            momentum_switch=self.momentum_switch,
            transform_neighbors=self.transform_neighbors,
            transform_steps=self.transform_steps,
            transform_lr=self.transform_lr,
            seed=self.seed,
        )

    def training_params(self) -> TrainingParams:
        return TrainingParams(
            autoencoder_epochs=self.autoencoder_epochs,
            autoencoder_lr=self.autoencoder_lr,
            autoencoder_batch=self.autoencoder_batch,
            heatmap_epochs=self.heatmap_epochs,
            heatmap_lr=self.heatmap_lr,
            heatmap_batch=self.heatmap_batch,
            finetune_epochs=self.finetune_epochs,
            finetune_lr=self.finetune_lr,
            embedding=self.embedding_config(),
            seed=self.seed,
        )

    # -- artifact paths -------------------------------------------------------

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    @property
    def corpus_path(self) -> Path:
        return self.out_path / "corpus.mmcorpus"

    @property
    def checkpoint_path(self) -> Path:
        return self.out_path / "models.mmap1"

    @property
    def export_dir(self) -> Path:
        return self.out_path / "exports"

    def report_path(self, kind: str) -> Path:
        return self.out_path / f"report_{self.protocol}.{kind}"


def _coerce(name: str, raw: str, example) -> object:
    raw = raw.strip()
    try:
        if isinstance(example, bool):
            if raw not in ("true", "false"):
                raise ValueError("expected true or false")
            return raw == "true"
        if isinstance(example, int):
            return int(raw)
        if isinstance(example, float):
            return float(raw)
        if isinstance(example, tuple):
            return tuple(int(part) for part in raw.split(",") if part.strip())
        return raw
    except ValueError as err:
        raise ConfigError(f"bad value for {name!r}: {raw!r} ({err})") from err


def apply_overrides(config: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Apply key -> raw-string overrides; unknown keys are hard errors."""
    known = {f.name for f in fields(RunConfig)}
    updates = {}
    for name, raw in overrides.items():
        if name not in known:
            raise ConfigError(f"unknown config key {name!r}")
        updates[name] = _coerce(name, raw, getattr(config, name))
    return replace(config, **updates)


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    overrides: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key in overrides:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        overrides[key] = value
    return apply_overrides(base or RunConfig(), overrides)


def load_config(path) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def render_config(config: RunConfig) -> str:
    """Echo as `key = value` lines that parse back to an equal config."""
    lines = []
    for name, value in sorted(asdict(config).items()):
        if isinstance(value, tuple):
            rendered = ",".join(str(part) for part in value)
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{name} = {rendered}")
    return "\n".join(lines) + "\n"
