"""Two-phase training: heads first with frozen backbones, then everything.

Determinism contract: for a fixed (examples, arch, cfg) the whole run,
including the internal train/validation split, augmentation draws and final
weights, depends only on cfg.seed.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateDatasetError, DivergenceError, ValidationError
from ..render.augment import AugmentParams, augment
from ..render.image import Image
from .layers import cross_entropy, softmax
from .network import JointModel

__all__ = ["TrainConfig", "TrainExample", "train"]

HEAD_GROUPS = ("image_head", "joint_head")


@dataclass
class TrainConfig:
    phase1_epochs: int = 20
    phase2_epochs: int = 40
    batch_size: int = 16
    lr_phase1: float = 0.05
    lr_phase2: float = None  # defaults to lr_phase1 / 10
    momentum: float = 0.5
    train_fraction: float = 0.8
    seed: int = 0
    augment: AugmentParams = field(default_factory=AugmentParams)
    class_weights: bool = False

    def __post_init__(self):
        if self.phase1_epochs < 1 or self.phase2_epochs < 1:
            raise ValidationError("both phases need at least one epoch")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie in (0, 1)")
        if self.lr_phase2 is None:
            self.lr_phase2 = self.lr_phase1 / 10.0

    def to_dict(self):
        d = dict(self.__dict__)
        d["augment"] = None if self.augment is None else dict(self.augment.__dict__)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("augment") is False:  # TOML's stand-in for null
            d["augment"] = None
        elif d.get("augment") is not None:
            d["augment"] = AugmentParams(**d["augment"])
        return cls(**d)


@dataclass
class TrainExample:
    """One labeled instance: rendered views and/or a sampled point cloud."""

    label: int
    example_id: str
    views: np.ndarray = None  # (K, H, W) float32 in [0, 1]
    points: np.ndarray = None  # (N, 3) float64
    masks: np.ndarray = None  # (K, H, W) bool foreground, optional


def _stratified_indices(labels, fraction, rng):
    """Per-class shuffle and cut; both sides stay nonempty for every class."""
    labels = np.asarray(labels)
    train_idx, val_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if len(members) < 2:
            raise DegenerateDatasetError(
                f"class {cls} has {len(members)} example(s); need at least 2"
            )
        members = rng.permutation(members)
        n_train = int(np.clip(round(fraction * len(members)), 1, len(members) - 1))
        train_idx.extend(members[:n_train])
        val_idx.extend(members[n_train:])
    return np.sort(train_idx), np.sort(val_idx)


def _hash_group(model, group_names):
    digest = hashlib.sha256()
    state = model.state()
    for name in sorted(state):
        if name.split("/")[0] in group_names:
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(state[name]).tobytes())
    return digest.hexdigest()


def _augment_views(views, masks, params, seed_tuple):
    out = np.empty_like(views)
    for v in range(views.shape[0]):
        mask = None if masks is None else masks[v]
        img = augment(Image(views[v], mask=mask), params, seed=seed_tuple + (v,))
        out[v] = img.data
    return out


def _batch_arrays(examples, idx, needs_views, needs_points, aug=None, seed_prefix=()):
    views = None
    points = None
    if needs_views:
        stack = []
        for i in idx:
            v = examples[i].views
            if aug is not None:
                v = _augment_views(v, examples[i].masks, aug, seed_prefix + (int(i),))
            stack.append(v)
        views = np.stack(stack)
    if needs_points:
        points = np.stack([examples[i].points for i in idx])
    labels = np.array([examples[i].label for i in idx])
    return views, points, labels


def _predict(model, examples, idx, batch_size):
    needs_views = "image_backbone" in model.groups
    needs_points = "point_backbone" in model.groups
    preds = []
    for start in range(0, len(idx), batch_size):
        chunk = idx[start : start + batch_size]
        views, points, _ = _batch_arrays(examples, chunk, needs_views, needs_points)
        logits = model.forward_batch(views=views, points=points)
        preds.extend(np.argmax(softmax(logits.astype(np.float64)), axis=1))
    return np.array(preds)


def train(examples, arch, cfg):
    """Train a model of ``arch.branch`` on labeled examples.

    Returns (model, report). The report carries per-epoch mean losses, the
    validation accuracy, and sha256 hashes of the backbone and head tensors
    at initialization and after each phase, so freeze contracts can be
    audited without keeping weight snapshots around.
    """
    labels = [e.label for e in examples]
    if len(set(labels)) < 2:
        raise DegenerateDatasetError("training needs at least 2 classes")
    n_classes = max(labels) + 1
    if arch.n_classes != n_classes:
        raise ValidationError(
            f"arch.n_classes = {arch.n_classes} but labels span {n_classes} classes"
        )

    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = _stratified_indices(labels, cfg.train_fraction, rng)
    model = JointModel(arch, seed=cfg.seed)

    backbones = tuple(g for g in model.groups if g.endswith("_backbone"))
    heads = tuple(g for g in model.groups if g in HEAD_GROUPS)
    needs_views = "image_backbone" in model.groups
    needs_points = "point_backbone" in model.groups

    weights = None
    if cfg.class_weights:
        counts = np.bincount([labels[i] for i in train_idx], minlength=n_classes)
        weights = len(train_idx) / (n_classes * np.maximum(counts, 1))

    hashes = {
        "backbone_init": _hash_group(model, backbones),
        "heads_init": _hash_group(model, heads),
    }
    epoch_losses = []
    phases = [
        ("phase1", cfg.phase1_epochs, cfg.lr_phase1, heads),
        ("phase2", cfg.phase2_epochs, cfg.lr_phase2, tuple(model.groups)),
    ]
    global_epoch = 0
    for phase_name, epochs, lr, trainable in phases:
        heads_only = set(trainable) <= set(HEAD_GROUPS)
        velocity = {}
        for _ in range(epochs):
            order = rng.permutation(train_idx)
            batch_losses, batch_sizes = [], []
            for start in range(0, len(order), cfg.batch_size):
                chunk = order[start : start + cfg.batch_size]
                views, points, batch_labels = _batch_arrays(
                    examples, chunk, needs_views, needs_points,
                    aug=cfg.augment, seed_prefix=(cfg.seed, global_epoch),
                )
                logits = model.forward_batch(views=views, points=points)
                loss, grad = cross_entropy(
                    logits.astype(np.float64), batch_labels, class_weights=weights
                )
                if not np.isfinite(loss):
                    raise DivergenceError("loss is not finite", epoch=global_epoch)
                model.backward_batch(grad, heads_only=heads_only)
                grads = model.gradients()
                for gname in trainable:
                    for pname, param in model.groups[gname].params.items():
                        key = f"{gname}/{pname}"
                        v = velocity.get(key)
                        if v is None:
                            v = np.zeros_like(param)
                        v = cfg.momentum * v - lr * grads[key].astype(param.dtype)
                        velocity[key] = v
                        param += v
                batch_losses.append(loss)
                batch_sizes.append(len(chunk))
            epoch_losses.append(
                float(np.average(batch_losses, weights=batch_sizes))
            )
            global_epoch += 1
        hashes[f"backbone_after_{phase_name}"] = _hash_group(model, backbones)
        hashes[f"heads_after_{phase_name}"] = _hash_group(model, heads)

    val_pred = _predict(model, examples, val_idx, cfg.batch_size)
    val_truth = np.array([labels[i] for i in val_idx])
    train_pred = _predict(model, examples, train_idx, cfg.batch_size)
    train_truth = np.array([labels[i] for i in train_idx])
    report = {
        "branch": arch.branch,
        "epoch_losses": epoch_losses,
        "phase1_epochs": cfg.phase1_epochs,
        "phase2_epochs": cfg.phase2_epochs,
        "train_count": int(len(train_idx)),
        "val_count": int(len(val_idx)),
        "train_accuracy": float(100.0 * (train_pred == train_truth).mean()),
        "val_accuracy": float(100.0 * (val_pred == val_truth).mean()),
        "hashes": hashes,
    }
    return model, report
