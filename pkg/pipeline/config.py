"""
Study config file: flat ``key = value`` text.

``#`` starts a comment, blank lines are skipped, list values are comma
separated and booleans accept true/false/1/0/yes/no. Unknown or repeated
keys are errors. Every key has a default, so an absent file is valid.
"""

import logging
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from diffusion.schedule import NoiseSchedule, make_schedule
from errors import ConfigError
from nets.classifier import ClassifierArch
from nets.denoiser import DenoiserArch
from nets.training import TrainConfig
from noise_synthesis.manipulations import MANIPULATIONS
from noise_synthesis.models import IGConfig
from pipeline.dataset import SHAPE_CLASSES, DatasetSpec
from pipeline.generation import GenerationConfig

logger = logging.getLogger(__name__)

LIST_KEYS = ("clf_conv_channels", "ig_snapshot_steps", "targets", "manipulations")
OPTIONAL_KEYS = ("region_top", "region_left", "region_bottom", "region_right")


class StudyConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, ge=0)
    precision: Literal["f32", "f64"] = "f64"

    # dataset
    image_size: int = Field(24, ge=4)
    dataset_count: int = Field(400, ge=2)
    object_size_min: int = Field(6, ge=2)
    object_size_max: int = Field(10, ge=2)
    region_top: Optional[int] = None
    region_left: Optional[int] = None
    region_bottom: Optional[int] = None
    region_right: Optional[int] = None
    intensity_min: float = Field(0.6, gt=0, le=1)
    intensity_max: float = Field(1.0, gt=0, le=1)

    # classifier
    clf_conv_channels: List[int] = Field(default_factory=lambda: [8, 16])
    clf_epochs: int = Field(15, ge=1)
    clf_batch_size: int = Field(32, ge=1)
    clf_lr: float = Field(3e-3, gt=0)
    clf_optimizer: Literal["sgd", "adam"] = "adam"
    clf_holdout: float = Field(0.2, ge=0, lt=1)

    # diffusion
    ddpm_T: int = Field(200, ge=1)
    ddpm_beta_min: float = Field(1e-4, gt=0, lt=1)
    ddpm_beta_max: float = Field(0.02, gt=0, lt=1)
    ddpm_channels: int = Field(32, ge=1)
    ddpm_depth: int = Field(4, ge=2)
    ddpm_time_dim: int = Field(32, ge=2)
    ddpm_embed_dim: int = Field(64, ge=1)
    ddpm_epochs: int = Field(40, ge=1)
    ddpm_batch_size: int = Field(32, ge=1)
    ddpm_lr: float = Field(2e-3, gt=0)
    ddpm_optimizer: Literal["sgd", "adam"] = "adam"

    # inverting gradients
    ig_k: int = Field(5000, ge=0)
    ig_lr: float = Field(0.1, gt=0)
    ig_optimizer: Literal["sgd", "adam"] = "adam"
    ig_snapshot_steps: List[int] = Field(default_factory=lambda: [0, 1000, 3000, 5000])
    ig_total_variation: float = Field(0.0, ge=0)
    ig_signed: bool = False
    ig_boxed: bool = False
    ig_lr_decay: bool = False
    ig_log_every: int = Field(500, ge=0)

    # studies
    targets: List[int] = Field(default_factory=lambda: [0, 1])
    study_cells: int = Field(20, ge=1)
    mask_percentile: float = Field(80.0, gt=0, lt=100)
    fgsm_epsilon: float = Field(0.1, gt=0)
    feature_layer: int = Field(0, ge=0)
    manipulations: List[str] = Field(default_factory=lambda: ["hflip", "rotate90"])
    standardize_altmaps: Literal["both", "raw", "standardized"] = "both"
    keep_trajectory: bool = False
    trajectory_stride: int = Field(0, ge=0)
    accuracy_samples_per_class: int = Field(10, ge=1)
    workers: int = Field(1, ge=1)

    @field_validator(*LIST_KEYS, mode="before")
    @classmethod
    def split_list(cls, value):
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator(*OPTIONAL_KEYS, mode="before")
    @classmethod
    def none_marker(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "none"):
            return None
        return value

    @field_validator("manipulations")
    @classmethod
    def known_manipulations(cls, value: List[str]) -> List[str]:
        unknown = [m for m in value if m not in MANIPULATIONS]
        if unknown:
            raise ValueError(f"unknown manipulations {unknown}, expected any of {sorted(MANIPULATIONS)}")
        return value

    @model_validator(mode="after")
    def check_consistency(self) -> "StudyConfig":
        if any(t < 0 or t >= len(SHAPE_CLASSES) for t in self.targets):
            raise ValueError(f"targets must be class ids in [0, {len(SHAPE_CLASSES)}), got {self.targets}")
        if not self.targets:
            raise ValueError("targets must name at least one class")
        if self.feature_layer >= len(self.clf_conv_channels):
            raise ValueError(f"feature_layer {self.feature_layer} exceeds the {len(self.clf_conv_channels)} conv layers")
        if self.ddpm_beta_min > self.ddpm_beta_max:
            raise ValueError("ddpm_beta_min exceeds ddpm_beta_max")
        regions = [getattr(self, k) for k in OPTIONAL_KEYS]
        if any(r is None for r in regions) and any(r is not None for r in regions):
            raise ValueError("region_top/left/bottom/right must be given together")
        # IGConfig re-checks the steps against k
        self.ig_config(0)
        return self

    @property
    def region(self) -> Optional[Tuple[int, int, int, int]]:
        if self.region_top is None:
            return None
        return self.region_top, self.region_left, self.region_bottom, self.region_right

    def dataset_spec(self) -> DatasetSpec:
        return DatasetSpec(
            image_size=self.image_size,
            object_size_min=self.object_size_min,
            object_size_max=self.object_size_max,
            region=self.region,
            intensity_min=self.intensity_min,
            intensity_max=self.intensity_max,
            count=self.dataset_count,
            seed=self.seed,
        )

    def classifier_arch(self) -> ClassifierArch:
        return ClassifierArch(
            image_size=self.image_size,
            num_classes=len(SHAPE_CLASSES),
            conv_channels=tuple(self.clf_conv_channels),
            precision=self.precision,
        )

    def denoiser_arch(self) -> DenoiserArch:
        return DenoiserArch(
            num_timesteps=self.ddpm_T,
            num_classes=len(SHAPE_CLASSES),
            channels=self.ddpm_channels,
            depth=self.ddpm_depth,
            time_dim=self.ddpm_time_dim,
            embed_dim=self.ddpm_embed_dim,
            precision=self.precision,
        )

    def classifier_train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.clf_epochs, batch_size=self.clf_batch_size, learning_rate=self.clf_lr,
                           optimizer=self.clf_optimizer, seed=self.seed, holdout_fraction=self.clf_holdout)

    def denoiser_train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.ddpm_epochs, batch_size=self.ddpm_batch_size, learning_rate=self.ddpm_lr,
                           optimizer=self.ddpm_optimizer, seed=self.seed, holdout_fraction=0.0)

    def ig_config(self, init_seed: int) -> IGConfig:
        try:
            return IGConfig(
                k=self.ig_k,
                learning_rate=self.ig_lr,
                optimizer=self.ig_optimizer,
                snapshot_steps=self.ig_snapshot_steps,
                init_seed=init_seed,
                image_shape=(self.image_size, self.image_size),
                total_variation=self.ig_total_variation,
                signed=self.ig_signed,
                boxed=self.ig_boxed,
                lr_decay=self.ig_lr_decay,
                log_every=self.ig_log_every,
            )
        except ValidationError as e:
            raise ValueError(f"inverting-gradients settings: {e}") from None

    def generation_config(self, seed: int) -> GenerationConfig:
        """Inversion and sampling both seeded from the cell seed"""
        return GenerationConfig(
            ig=self.ig_config(seed),
            sample_seed=seed,
            mask_percentile=self.mask_percentile,
            keep_trajectory=self.keep_trajectory,
            trajectory_stride=self.trajectory_stride,
        )

    def schedule(self) -> NoiseSchedule:
        return make_schedule(self.ddpm_T, "linear", self.ddpm_beta_min, self.ddpm_beta_max)

    def to_text(self) -> str:
        """The config in its own file format, every key spelled out"""
        lines = []
        for key, value in self.model_dump().items():
            if isinstance(value, (list, tuple)):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif value is None:
                value = "none"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, source: str = "<config>") -> dict:
    entries = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{number}: missing key")
        if key in entries:
            raise ConfigError(f"{source}:{number}: duplicate key {key!r}")
        entries[key] = value
    return entries


def build_config(entries: dict, source: str = "<config>") -> StudyConfig:
    try:
        return StudyConfig(**entries)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"{source}: {problems}") from None


def load_config(path: Optional[Union[str, Path]] = None, **overrides) -> StudyConfig:
    """Read a config file (defaults when ``path`` is None); ``overrides`` win over the file"""
    entries = {}
    source = "<defaults>"
    if path is not None:
        path = Path(path)
        source = str(path)
        try:
            entries = parse_config_text(path.read_text(encoding="utf-8"), source)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
    entries.update({k: v for k, v in overrides.items() if v is not None})
    config = build_config(entries, source)
    logger.debug(f"Loaded config from {source}")
    return config
