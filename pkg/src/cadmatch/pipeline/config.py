"""Experiment configuration: one file drives every stage.

Accepted on disk as TOML or JSON with the same section names. The config
hash (sha256 of the canonical JSON form) is embedded in every stage report
so artifacts from different configs can never be mixed silently.
"""

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field

from ..encoders import ArchConfig, TrainConfig
from ..errors import ValidationError
from ..geometry import generator_classes
from ..render import RenderConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["DatasetSection", "ExperimentConfig", "RetrievalSection",
           "SamplingSection", "config_hash", "load_config"]


def _reject_unknown(d, allowed, where):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown {where} keys: {sorted(unknown)}")


@dataclass
class DatasetSection:
    kind: str = "desk"  # desk | manifest
    classes: tuple = ()  # empty = every procedural class
    per_class: int = 40
    manifest: str = ""
    train_fraction: float = 0.8

    def __post_init__(self):
        if self.kind not in ("desk", "manifest"):
            raise ValidationError(f"dataset.kind must be desk or manifest, got {self.kind!r}")
        if self.kind == "manifest" and not self.manifest:
            raise ValidationError("dataset.kind = manifest requires dataset.manifest")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("dataset.train_fraction must lie in (0, 1)")
        self.classes = tuple(self.classes)

    def resolved_classes(self):
        return list(self.classes) if self.classes else list(generator_classes())


@dataclass
class SamplingSection:
    n_points: int = 2048

    def __post_init__(self):
        if self.n_points < 8:
            raise ValidationError("sampling.n_points must be >= 8")


@dataclass
class RetrievalSection:
    ks: tuple = (1, 3, 5)
    threshold: float = None  # None = calibrate by F1 at evaluate time
    occlusion_fraction: float = 0.5

    def __post_init__(self):
        self.ks = tuple(int(k) for k in self.ks)
        if not self.ks or any(k < 1 for k in self.ks):
            raise ValidationError("retrieval.ks must be positive")
        if not 0.0 <= self.occlusion_fraction < 1.0:
            raise ValidationError("retrieval.occlusion_fraction must lie in [0, 1)")


# encoder widths only; class count, image size, view count and point count
# are derived from the other sections when a model is built
ARCH_KEYS = ("d_img", "d_pts", "point_widths", "stem_channels",
             "block_channels", "head_channels", "expansion")


@dataclass
class ExperimentConfig:
    out_dir: str
    seed: int = 0
    dataset: DatasetSection = field(default_factory=DatasetSection)
    render: RenderConfig = field(default_factory=RenderConfig)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    arch: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    retrieval: RetrievalSection = field(default_factory=RetrievalSection)

    def __post_init__(self):
        if not self.out_dir:
            raise ValidationError("out_dir is required")
        if self.render.width != self.render.height:
            raise ValidationError("render.width must equal render.height")
        _reject_unknown(self.arch, ARCH_KEYS, "arch")

    def build_arch(self, n_classes, branch):
        arch = dict(self.arch)
        for key in ("point_widths", "block_channels"):
            if key in arch:
                arch[key] = tuple(arch[key])
        return ArchConfig(
            n_classes=n_classes,
            branch=branch,
            image_size=self.render.width,
            view_count=self.render.view_count,
            n_points=self.sampling.n_points,
            **arch,
        )

    def to_dict(self):
        return {
            "out_dir": self.out_dir,
            "seed": self.seed,
            "dataset": asdict(self.dataset) | {"classes": list(self.dataset.classes)},
            "render": self.render.to_dict(),
            "sampling": asdict(self.sampling),
            "arch": dict(self.arch),
            "train": self.train.to_dict(),
            "retrieval": asdict(self.retrieval) | {"ks": list(self.retrieval.ks)},
        }

    @classmethod
    def from_dict(cls, d):
        _reject_unknown(
            d,
            ("out_dir", "seed", "dataset", "render", "sampling", "arch",
             "train", "retrieval"),
            "config",
        )
        if "out_dir" not in d:
            raise ValidationError("config needs out_dir")
        kwargs = {"out_dir": d["out_dir"], "seed": int(d.get("seed", 0))}
        sections = {
            "dataset": lambda v: DatasetSection(**v),
            "render": RenderConfig.from_dict,
            "sampling": lambda v: SamplingSection(**v),
            "arch": dict,
            "train": TrainConfig.from_dict,
            "retrieval": lambda v: RetrievalSection(**v),
        }
        for name, build in sections.items():
            if name in d:
                try:
                    kwargs[name] = build(d[name])
                except TypeError as exc:
                    raise ValidationError(f"bad {name} section: {exc}") from None
        return cls(**kwargs)


def load_config(path):
    path = str(path)
    if path.endswith(".toml"):
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    elif path.endswith(".json"):
        with open(path) as fh:
            raw = json.load(fh)
    else:
        raise ValidationError(f"config must be .toml or .json: {path}")
    return ExperimentConfig.from_dict(raw)


def config_hash(cfg):
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
