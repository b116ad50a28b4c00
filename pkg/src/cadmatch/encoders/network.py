"""The joint classifier: a depthwise-separable CNN over rendered views, a
shared per-point MLP with symmetric max-pooling over sampled points, and a
single linear softmax head over the concatenated features.

The retrieval feature is the pre-logit activation: image feature (width
d_img), point feature (width d_pts), or their concatenation (image first).
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError, ValidationError
from .layers import (
    Conv2d,
    Dense,
    DepthwiseConv2d,
    GlobalAvgPool,
    InstanceNorm,
    MaxPoints,
    ReLU,
    ReLU6,
    Residual,
    Sequential,
    FeatureNorm,
    softmax,
)

__all__ = [
    "ArchConfig",
    "FeatureVector",
    "JointModel",
    "classify_views",
]

BRANCHES = ("joint", "image", "point")


@dataclass
class ArchConfig:
    n_classes: int = 8
    branch: str = "joint"
    image_size: int = 224
    view_count: int = 4
    n_points: int = 2048
    d_img: int = 256
    d_pts: int = 256
    point_widths: tuple = (64, 64, 128)
    stem_channels: int = 16
    block_channels: tuple = (24, 32, 32)
    head_channels: int = 64
    expansion: int = 4

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise ValidationError(f"branch must be one of {BRANCHES}, got {self.branch!r}")
        if self.n_classes < 2:
            raise ValidationError("need at least 2 classes")

    @property
    def feature_width(self):
        if self.branch == "image":
            return self.d_img
        if self.branch == "point":
            return self.d_pts
        return self.d_img + self.d_pts

    def to_dict(self):
        d = dict(self.__dict__)
        d["point_widths"] = list(self.point_widths)
        d["block_channels"] = list(self.block_channels)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("point_widths", "block_channels"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class FeatureVector:
    values: np.ndarray
    modality: str
    source_id: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.modality not in ("image", "point", "joint"):
            raise ValidationError(f"unknown modality {self.modality!r}")
        if not np.isfinite(self.values).all():
            raise ValidationError("feature values must be finite")


def _inverted_residual(c_in, c_out, stride, expansion, rng, dtype):
    mid = c_in * expansion
    inner = Sequential(
        [
            ("expand", Conv2d(1, 1, c_in, mid, rng, dtype=dtype)),
            ("expand_norm", InstanceNorm()),
            ("expand_act", ReLU6()),
            ("dw", DepthwiseConv2d(3, 3, mid, rng, stride=stride, pad=1, dtype=dtype)),
            ("dw_norm", InstanceNorm()),
            ("dw_act", ReLU6()),
            ("project", Conv2d(1, 1, mid, c_out, rng, dtype=dtype)),
            ("project_norm", InstanceNorm()),
        ]
    )
    if stride == 1 and c_in == c_out:
        return Residual(inner)
    return inner


def _build_image_backbone(arch, rng, dtype):
    c = arch.stem_channels
    layers = [
        ("stem", Conv2d(3, 3, 1, c, rng, stride=2, pad=1, dtype=dtype)),
        ("stem_norm", InstanceNorm()),
        ("stem_act", ReLU6()),
    ]
    strides = (2, 2, 1)
    for i, (c_out, stride) in enumerate(zip(arch.block_channels, strides), start=1):
        layers.append(
            (f"b{i}", _inverted_residual(c, c_out, stride, arch.expansion, rng, dtype))
        )
        c = c_out
    layers += [
        ("head", Conv2d(1, 1, c, arch.head_channels, rng, dtype=dtype)),
        ("head_norm", InstanceNorm()),
        ("head_act", ReLU6()),
        ("gap", GlobalAvgPool()),
    ]
    return Sequential(layers)


def _build_image_head(arch, rng, dtype):
    # each view lands on the unit sphere, so the view mean weighs all views
    # equally and stays on a scale comparable with the point feature
    return Sequential(
        [
            ("fc", Dense(arch.head_channels, arch.d_img, rng, dtype=dtype)),
            ("act", ReLU()),
            ("norm", FeatureNorm()),
        ]
    )


def _build_point_backbone(arch, rng, dtype):
    layers = []
    widths = (3,) + tuple(arch.point_widths) + (arch.d_pts,)
    for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:]), start=1):
        layers.append((f"fc{i}", Dense(n_in, n_out, rng, dtype=dtype)))
        layers.append((f"act{i}", ReLU()))
    layers.append(("pool", MaxPoints()))
    layers.append(("norm", FeatureNorm()))
    return Sequential(layers)


def _canonical_order(points):
    """Sort points lexicographically by (x, y, z).

    The max-pool is permutation invariant in exact arithmetic; sorting makes
    the whole forward pass invariant bitwise, whatever BLAS does inside.
    """
    return points[np.lexsort((points[:, 2], points[:, 1], points[:, 0]))]


class JointModel:
    """Classifier over (rendered views, sampled points) pairs.

    ``arch.branch`` selects which encoders exist: "joint" uses both, "image"
    and "point" are the single-modality ablations with the same head shape
    conventions (the head always consumes ``arch.feature_width``).
    """

    def __init__(self, arch, seed=0, dtype=np.float32):
        self.arch = arch
        self.dtype = dtype
        streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
        self.groups = {}
        if arch.branch in ("joint", "image"):
            self.groups["image_backbone"] = _build_image_backbone(arch, streams[0], dtype)
            self.groups["image_head"] = _build_image_head(arch, streams[1], dtype)
        if arch.branch in ("joint", "point"):
            self.groups["point_backbone"] = _build_point_backbone(arch, streams[2], dtype)
        self.groups["joint_head"] = Sequential(
            [("fc", Dense(arch.feature_width, arch.n_classes, streams[3], dtype=dtype, init="glorot"))]
        )

    # ---- parameter access ----

    def state(self):
        """name -> array over all groups, names like 'image_backbone/stem.w'."""
        out = {}
        for gname, group in self.groups.items():
            for pname, val in group.params.items():
                out[f"{gname}/{pname}"] = val
        return out

    def load_state(self, state):
        own = self.state()
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise ShapeError(
                f"checkpoint mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        for gname, group in self.groups.items():
            for lname, layer in _iter_layers(group):
                for pname in layer.params:
                    key = f"{gname}/{lname}.{pname}"
                    val = np.asarray(state[key], dtype=self.dtype)
                    if val.shape != layer.params[pname].shape:
                        raise ShapeError(f"{key}: shape {val.shape} != {layer.params[pname].shape}")
                    layer.params[pname] = val

    def gradients(self):
        out = {}
        for gname, group in self.groups.items():
            for pname, val in group.grads.items():
                out[f"{gname}/{pname}"] = val
        return out

    # ---- batched forward/backward used by training ----

    def _check_views(self, views):
        size = self.arch.image_size
        if views.ndim != 4 or views.shape[2:] != (size, size):
            raise ShapeError(f"expected (B, K, {size}, {size}) views, got {views.shape}")

    def forward_batch(self, views=None, points=None):
        """Logits for a batch; inputs depend on the branch.

        views: (B, K, H, W) float32, points: (B, N, 3) float. Returns logits
        (B, n_classes); caches intermediates for backward_batch.
        """
        feats = []
        self._cache = {}
        if "image_backbone" in self.groups:
            self._check_views(views)
            b, k, h, w = views.shape
            flat = views.reshape(b * k, h, w, 1).astype(self.dtype)
            per_view = self.groups["image_head"].forward(
                self.groups["image_backbone"].forward(flat)
            )
            self._cache["view_shape"] = (b, k)
            feats.append(per_view.reshape(b, k, -1).mean(axis=1))
        if "point_backbone" in self.groups:
            if points.ndim != 3 or points.shape[2] != 3:
                raise ShapeError(f"expected (B, N, 3) points, got {points.shape}")
            if points.shape[1] != self.arch.n_points:
                raise ShapeError(
                    f"expected {self.arch.n_points} points per cloud, got {points.shape[1]}"
                )
            canon = np.stack([_canonical_order(p) for p in points]).astype(self.dtype)
            feats.append(self.groups["point_backbone"].forward(canon))
        joint = feats[0] if len(feats) == 1 else np.concatenate(feats, axis=1)
        self._cache["joint"] = joint
        return self.groups["joint_head"].forward(joint)

    def backward_batch(self, grad_logits, heads_only=False):
        """Backpropagate from the logits gradient.

        heads_only skips the backbone backward passes entirely (their
        parameters are frozen in training phase 1 and nothing upstream needs
        the input gradients).
        """
        grad = self.groups["joint_head"].backward(grad_logits)
        if "image_backbone" in self.groups:
            g_img, grad = grad[:, : self.arch.d_img], grad[:, self.arch.d_img :]
            b, k = self._cache["view_shape"]
            per_view = np.repeat(g_img[:, None, :], k, axis=1).reshape(b * k, -1) / k
            g_backbone = self.groups["image_head"].backward(per_view.astype(self.dtype))
            if not heads_only:
                self.groups["image_backbone"].backward(g_backbone)
        if "point_backbone" in self.groups and not heads_only:
            self.groups["point_backbone"].backward(grad.astype(self.dtype))

    # ---- single-instance inference API ----

    def encode_points(self, pc):
        """Point-branch feature of one cloud; bitwise permutation invariant."""
        if "point_backbone" not in self.groups:
            raise ValidationError(f"branch {self.arch.branch!r} has no point encoder")
        pts = np.asarray(pc.points, dtype=np.float64)
        if pts.shape != (self.arch.n_points, 3):
            raise ShapeError(
                f"expected ({self.arch.n_points}, 3) points, got {pts.shape}"
            )
        canon = _canonical_order(pts)[None].astype(self.dtype)
        values = self.groups["point_backbone"].forward(canon)[0]
        return FeatureVector(values, "point", source_id=pc.source_id)

    def _view_features(self, vs):
        if "image_backbone" not in self.groups:
            raise ValidationError(f"branch {self.arch.branch!r} has no image encoder")
        arr = vs.as_array()
        size = self.arch.image_size
        if arr.shape[1:] != (size, size):
            raise ShapeError(f"expected {size}x{size} views, got {arr.shape[1:]}")
        flat = arr[:, :, :, None].astype(self.dtype)
        return self.groups["image_head"].forward(
            self.groups["image_backbone"].forward(flat)
        )

    def encode_views(self, vs):
        """Image-branch feature: per-view embeddings averaged elementwise."""
        per_view = self._view_features(vs)
        return FeatureVector(per_view.mean(axis=0), "image", source_id=vs.model_id)

    def joint_feature(self, fi, fp):
        """Concatenate image and point features, image first."""
        if fi.modality != "image" or fp.modality != "point":
            raise ValidationError(
                f"need (image, point) features, got ({fi.modality}, {fp.modality})"
            )
        return FeatureVector(
            np.concatenate([fi.values, fp.values]), "joint",
            source_id=fi.source_id or fp.source_id,
        )

    def feature(self, vs=None, pc=None):
        """The retrieval feature for this model's branch."""
        if self.arch.branch == "image":
            return self.encode_views(vs)
        if self.arch.branch == "point":
            return self.encode_points(pc)
        return self.joint_feature(self.encode_views(vs), self.encode_points(pc))

    def classify(self, vs=None, pc=None):
        """(label, probabilities, feature) for one instance.

        Ties on the probability vector break toward the lowest class index.
        """
        feat = self.feature(vs=vs, pc=pc)
        logits = self.groups["joint_head"].forward(
            feat.values[None].astype(self.dtype)
        )[0]
        probs = softmax(logits.astype(np.float64))
        return int(np.argmax(probs)), probs, feat

    def per_view_probs(self, vs, pc=None):
        """One probability vector per view, for product aggregation.

        The point feature (joint branch) is computed once and paired with
        each view's image feature.
        """
        per_view = self._view_features(vs).astype(np.float64)
        if self.arch.branch == "joint":
            fp = self.encode_points(pc).values
            per_view = np.concatenate(
                [per_view, np.repeat(fp[None], len(per_view), axis=0)], axis=1
            )
        logits = self.groups["joint_head"].forward(per_view.astype(self.dtype))
        return [softmax(row.astype(np.float64)) for row in logits]


def _iter_layers(group, prefix=""):
    seq = group.inner if isinstance(group, Residual) else group
    for name, layer in seq.layers:
        if isinstance(layer, (Sequential, Residual)):
            yield from _iter_layers(layer, prefix=f"{prefix}{name}.")
        else:
            yield f"{prefix}{name}", layer


def classify_views(per_view_probs):
    """Combine per-view class distributions by elementwise product.

    Computed in log space so many views cannot underflow; if every class has
    zero probability in some view (disjoint supports), the result falls back
    to uniform.
    """
    stacked = np.asarray(per_view_probs, dtype=np.float64)
    if stacked.ndim != 2:
        raise ValidationError("need a list of probability vectors")
    if not np.isfinite(stacked).all() or (stacked < 0).any():
        raise ValidationError("probabilities must be finite and nonnegative")
    sums = stacked.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-6:
        raise ValidationError("each view distribution must sum to 1 within 1e-6")
    with np.errstate(divide="ignore"):
        logs = np.log(stacked)
    total = logs.sum(axis=0)
    peak = total.max()
    if not np.isfinite(peak):
        m = stacked.shape[1]
        return np.full(m, 1.0 / m)
    weights = np.exp(total - peak)
    return weights / weights.sum()
