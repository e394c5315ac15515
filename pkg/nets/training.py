import logging
from dataclasses import dataclass
from typing import Iterator, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from autodiff import ComputationRecord, Tensor, gradient
from autodiff import ops
from errors import ContractViolation, ShapeMismatch
from nets.classifier import Classifier, ClassifierArch, build_classifier
from nets.optim import make_optimizer

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    epochs: int = Field(10, ge=1)
    batch_size: int = Field(32, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    optimizer: Literal["sgd", "adam"] = "adam"
    seed: int = Field(0, ge=0)
    holdout_fraction: float = Field(0.2, ge=0.0, lt=1.0)


@dataclass
class LabeledImages:
    images: np.ndarray  # (N, H, W)
    labels: np.ndarray  # (N,)

    def __post_init__(self):
        self.images = np.asarray(self.images)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.shape[0] != self.labels.shape[0]:
            raise ShapeMismatch("dataset", self.images.shape, self.labels.shape)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, index: np.ndarray) -> "LabeledImages":
        return LabeledImages(self.images[index], self.labels[index])

    def split(self, holdout_fraction: float, rng: np.random.Generator) -> Tuple["LabeledImages", "LabeledImages"]:
        order = rng.permutation(len(self))
        n_holdout = int(round(holdout_fraction * len(self)))
        if n_holdout >= len(self):
            n_holdout = len(self) - 1
        return self.subset(np.sort(order[n_holdout:])), self.subset(np.sort(order[:n_holdout]))


def check_dataset(data: LabeledImages, num_classes: int) -> None:
    if len(data) == 0:
        raise ContractViolation("training needs a nonempty dataset")
    if np.any(data.labels < 0) or np.any(data.labels >= num_classes):
        raise ContractViolation(f"dataset labels out of range [0, {num_classes})")


def iterate_batches(data: LabeledImages, batch_size: int, rng: np.random.Generator) -> Iterator[LabeledImages]:
    """One shuffled pass; the order depends only on the generator state"""
    order = rng.permutation(len(data))
    for start in range(0, len(data), batch_size):
        yield data.subset(order[start:start + batch_size])


def accuracy(clf: Classifier, data: LabeledImages) -> float:
    if len(data) == 0:
        return float("nan")
    return float(np.mean(clf.predict(data.images) == data.labels))


def train_classifier(data: LabeledImages, cfg: TrainConfig, arch: Optional[ClassifierArch] = None) -> Classifier:
    """Minibatch cross-entropy training; held-out accuracy lands in ``clf.summary``"""
    if arch is None:
        arch = ClassifierArch(image_size=data.images.shape[-1], num_classes=max(2, int(data.labels.max()) + 1))
    check_dataset(data, arch.num_classes)
    rng = np.random.default_rng(cfg.seed)
    train, holdout = data.split(cfg.holdout_fraction, rng) if cfg.holdout_fraction > 0 else (data, data.subset(np.arange(0)))
    clf = build_classifier(arch, cfg.seed)
    params = clf.parameters
    dtype = params["head.weight"].dtype
    optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate)
    epoch_losses = []

    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        for batch in iterate_batches(train, cfg.batch_size, rng):
            record = ComputationRecord()
            bound = params.bind(record)
            logits = clf.forward(Tensor(batch.images.astype(dtype)), bound)
            loss = ops.softmax_cross_entropy(logits, batch.labels)
            grads = gradient(loss, list(bound.values()))
            optimizer.step(params, {name: g.data for name, g in zip(bound, grads)})
            total += float(loss.data) * len(batch)
            count += len(batch)
        epoch_losses.append(total / count)
        logger.info(f"classifier epoch {epoch + 1}/{cfg.epochs}: loss={epoch_losses[-1]:.5f}")

    heldout = accuracy(clf, holdout)
    clf.summary = {
        "epoch_losses": epoch_losses,
        "train_accuracy": accuracy(clf, train),
        "heldout_accuracy": heldout,
        "heldout_size": len(holdout),
    }
    logger.info(f"classifier held-out accuracy {heldout:.4f} on {len(holdout)} images")
    return clf
