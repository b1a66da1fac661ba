"""Pipeline configuration: one JSON-serializable bundle of every knob."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .ann import TrainConfig
from .dsp import FilterSpec
from .errors import DataError
from . import segmentation as seg


@dataclass
class SegmentationConfig:
    min_distance: int = seg.MIN_PEAK_DISTANCE
    min_len: int = seg.MIN_BEAT_LEN
    max_len: int = seg.MAX_BEAT_LEN
    amp_k: float = seg.AMPLITUDE_STD_LIMIT

    def validate(self) -> "SegmentationConfig":
        if self.min_distance < 1:
            raise DataError("min_distance must be >= 1")
        if not 1 <= self.min_len <= self.max_len:
            raise DataError("need 1 <= min_len <= max_len")
        if self.max_len > seg.VECTOR_LEN:
            raise DataError(f"max_len cannot exceed the vector length {seg.VECTOR_LEN}")
        if self.amp_k <= 0:
            raise DataError("amp_k must be positive")
        return self

    def to_dict(self) -> dict:
        return {
            "min_distance": self.min_distance,
            "min_len": self.min_len,
            "max_len": self.max_len,
            "amp_k": self.amp_k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentationConfig":
        cfg = cls(**{k: d[k] for k in d})
        return cfg.validate()


@dataclass
class PipelineConfig:
    filter: FilterSpec = field(default_factory=FilterSpec)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    label_k: float = 5.0
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def validate(self) -> "PipelineConfig":
        self.filter.validate()
        self.segmentation.validate()
        self.train.validate()
        if self.label_k <= 0:
            raise DataError("label_k must be positive")
        return self

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "filter": self.filter.to_dict(),
            "segmentation": self.segmentation.to_dict(),
            "label_k": self.label_k,
            "train": self.train.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {"seed", "filter", "segmentation", "label_k", "train"}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(
            filter=FilterSpec.from_dict(d.get("filter", {})),
            segmentation=SegmentationConfig.from_dict(d.get("segmentation", {})),
            label_k=float(d.get("label_k", 5.0)),
            train=TrainConfig.from_dict(d.get("train", {})),
            seed=int(d.get("seed", 0)),
        )
        return cfg.validate()

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid config JSON ({exc})") from None
        return cls.from_dict(raw)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def with_seed(self, seed: int) -> "PipelineConfig":
        self.seed = seed
        self.train.seed = seed
        return self
