"""Run configuration loaded from YAML; every field falls back to its default."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .anchors import APLConfig
from .errors import InvalidInputError
from .losses import LossWeights, OhemPolicy
from .postprocess import FusionConfig


@dataclass(frozen=True)
class RunConfig:
    anchors: APLConfig = field(default_factory=APLConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    ohem: OhemPolicy = field(default_factory=OhemPolicy)
    shrink_ratio: float = 0.3
    pixel_stride: int = 4
    input_size: tuple = (640, 640)
    pos_iou: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.shrink_ratio < 0.5:
            raise InvalidInputError("shrink_ratio must be in [0, 0.5)")
        if self.pixel_stride < 1:
            raise InvalidInputError("pixel_stride must be >= 1")
        size = tuple(int(v) for v in self.input_size)
        if len(size) != 2 or min(size) <= 0:
            raise InvalidInputError("input_size must be two positive integers (width, height)")
        object.__setattr__(self, "input_size", size)

    def to_dict(self) -> dict:
        return {
            "anchors": self.anchors.to_dict(),
            "fusion": self.fusion.to_dict(),
            "weights": asdict(self.weights),
            "ohem": asdict(self.ohem),
            "shrink_ratio": self.shrink_ratio,
            "pixel_stride": self.pixel_stride,
            "input_size": list(self.input_size),
            "pos_iou": self.pos_iou,
        }

    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        data = dict(data or {})
        known = {"anchors", "fusion", "weights", "ohem", "shrink_ratio", "pixel_stride", "input_size", "pos_iou"}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        try:
            if "anchors" in data:
                kw["anchors"] = APLConfig.from_dict(data.pop("anchors") or {})
            if "fusion" in data:
                kw["fusion"] = FusionConfig(**(data.pop("fusion") or {}))
            if "weights" in data:
                kw["weights"] = LossWeights(**(data.pop("weights") or {}))
            if "ohem" in data:
                kw["ohem"] = OhemPolicy(**(data.pop("ohem") or {}))
            return cls(**kw, **data)
        except TypeError as exc:
            raise InvalidInputError(f"bad config: {exc}") from None
        except ValueError as exc:
            raise InvalidInputError(str(exc)) from None

    def with_input_size(self, size) -> "RunConfig":
        d = self.to_dict()
        d["input_size"] = list(size)
        return RunConfig.from_dict(d)


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise InvalidInputError(f"cannot parse {path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise InvalidInputError(f"{path}: top level must be a mapping")
    return RunConfig.from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
