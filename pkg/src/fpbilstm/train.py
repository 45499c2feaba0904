"""Training protocol: stratified split, shuffled mini-batches, plateau LR
decay, early stopping on validation loss, best-checkpoint selection."""

from __future__ import annotations

import csv
import time
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from .dsp import stack_channel_sets
from .errors import TrainingDiverged
from .ingest import NUM_MODES, Dataset
from .model import FPBiLSTM, ModelConfig, predict
from .nn import ops
from .nn.optim import Adam, PlateauLR

SHUFFLE_STREAM = 202
SPLIT_STREAM = 303


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 50
    lr: float = 1e-4
    min_lr: float = 1e-5
    lr_factor: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    l2: float = 0.001
    early_stop_patience: int = 5
    lr_patience: int = 3
    max_epochs: int = 100
    seed: int = 0
    split_ratio: float = 0.9
    single_threaded: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError(f"split_ratio must be in (0, 1), got {self.split_ratio}")
        if self.early_stop_patience < 1 or self.lr_patience < 1:
            raise ValueError("patience values must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float
    seconds: float

    def trajectory(self) -> tuple:
        """All deterministic fields (everything except wall time)."""
        return (self.epoch, self.train_loss, self.train_acc, self.val_loss, self.val_acc, self.lr)


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    CSV_HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr", "seconds")

    def append(self, record: EpochRecord):
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def trajectory(self) -> tuple:
        return tuple(r.trajectory() for r in self.records)

    def val_losses(self) -> list:
        return [r.val_loss for r in self.records]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_HEADER)
            for r in self.records:
                writer.writerow(
                    [r.epoch, f"{r.train_loss:.17g}", f"{r.train_acc:.17g}",
                     f"{r.val_loss:.17g}", f"{r.val_acc:.17g}", f"{r.lr:.17g}",
                     f"{r.seconds:.3f}"]
                )

    @classmethod
    def from_csv(cls, path) -> "TrainLog":
        log = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                log.append(
                    EpochRecord(
                        epoch=int(row["epoch"]),
                        train_loss=float(row["train_loss"]),
                        train_acc=float(row["train_acc"]),
                        val_loss=float(row["val_loss"]),
                        val_acc=float(row["val_acc"]),
                        lr=float(row["lr"]),
                        seconds=float(row["seconds"]),
                    )
                )
        return log


def stratified_split_indices(labels, ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class split of indices into (first, second) parts.

    Each class's count is divided by largest-remainder rounding of
    (ratio, 1-ratio); remainder ties go to the first part. Classes with a
    single member are rejected. Deterministic for a fixed seed.
    """
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), SPLIT_STREAM]))
    first, second = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        n = idx.size
        if n < 2:
            raise ValueError(f"class {cls} has only {n} frame(s); cannot split")
        shares = np.array([ratio * n, (1.0 - ratio) * n])
        counts = np.floor(shares).astype(np.int64)
        remainders = shares - counts
        leftover = n - counts.sum()
        # stable argsort descending: ties keep list order, first part wins
        for pos in np.argsort(-remainders, kind="stable")[:leftover]:
            counts[pos] += 1
        perm = rng.permutation(n)
        first.append(idx[perm[: counts[0]]])
        second.append(idx[perm[counts[0] :]])
    return np.sort(np.concatenate(first)), np.sort(np.concatenate(second))


def stratified_split(ds: Dataset, ratio: float, seed: int) -> tuple[Dataset, Dataset]:
    """Split a Dataset by majority frame label."""
    labels = ds.frame_labels()
    a, b = stratified_split_indices(labels, ratio, seed)
    return (
        Dataset([ds.frames[i] for i in a], split_tag="sub-train"),
        Dataset([ds.frames[i] for i in b], split_tag="sub-validation"),
    )


class ChannelBatches:
    """Per-channel [N, L, width] arrays plus frame labels, sliceable."""

    def __init__(self, arrays: list, labels: np.ndarray):
        self.arrays = arrays
        self.labels = np.asarray(labels, dtype=np.int64)
        n = {a.shape[0] for a in arrays} | {self.labels.shape[0]}
        if len(n) != 1:
            raise ValueError(f"channel arrays and labels disagree on frame count: {sorted(n)}")

    @classmethod
    def from_channel_sets(cls, sets: list) -> "ChannelBatches":
        arrays, labels = stack_channel_sets(sets)
        return cls(arrays, labels)

    def __len__(self):
        return self.labels.shape[0]

    def select(self, idx) -> "ChannelBatches":
        return ChannelBatches([a[idx] for a in self.arrays], self.labels[idx])

    def one_hot(self) -> np.ndarray:
        if (self.labels < 1).any():
            raise ValueError("cannot one-hot encode unlabeled frames")
        out = np.zeros((len(self), NUM_MODES))
        out[np.arange(len(self)), self.labels - 1] = 1.0
        return out


def one_hot(labels: np.ndarray, num_classes: int = NUM_MODES) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels - 1] = 1.0
    return out


def evaluate(model: FPBiLSTM, data: ChannelBatches, batch_size: int = 100) -> tuple[float, float, np.ndarray]:
    """Inference-mode loss/accuracy plus per-frame predictions."""
    total_loss = 0.0
    preds = np.empty(len(data), dtype=np.int64)
    for lo in range(0, len(data), batch_size):
        batch = data.select(slice(lo, lo + batch_size))
        probs = model.forward(batch.arrays, training=False)
        loss = ops.mse_loss(probs, batch.one_hot())
        total_loss += loss.item() * len(batch)
        preds[lo : lo + len(batch)] = predict(probs)
    accuracy = float(np.mean(preds == data.labels))
    return total_loss / len(data), accuracy, preds


@dataclass
class FitResult:
    model: FPBiLSTM
    log: TrainLog
    best_epoch: int
    best_val_loss: float
    optimizer_state: dict
    stopped_early: bool


def fit(
    train_data: ChannelBatches,
    val_data: ChannelBatches,
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    verbose: bool = False,
) -> FitResult:
    """Train until early stopping or the epoch cap; the returned model holds
    the parameters of the best validation-loss epoch.

    Epoch shuffling derives from (seed, epoch) only; with
    ``cfg.single_threaded`` the BLAS pool is pinned to one thread so two
    identical runs produce bitwise-identical parameters.
    """
    if len(train_data) == 0 or len(val_data) == 0:
        raise ValueError("fit needs non-empty train and validation splits")

    if cfg.single_threaded:
        from threadpoolctl import threadpool_limits

        limits = threadpool_limits(limits=1)
    else:
        limits = nullcontext()

    model = FPBiLSTM(model_cfg, seed=cfg.seed)
    opt = Adam(
        model.params,
        lr=cfg.lr,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        l2=cfg.l2,
        l2_params=frozenset({FPBiLSTM.L2_PARAM}),
    )
    sched = PlateauLR(opt, factor=cfg.lr_factor, patience=cfg.lr_patience, min_lr=cfg.min_lr)
    log = TrainLog()
    best_val = np.inf
    best_epoch = 0
    best_state = model.state_arrays()
    best_opt = opt.state_dict()
    stopped_early = False

    with limits:
        for epoch in range(1, cfg.max_epochs + 1):
            t0 = time.perf_counter()
            lr_used = opt.lr
            order = np.random.default_rng(
                np.random.SeedSequence([int(cfg.seed), SHUFFLE_STREAM, epoch])
            ).permutation(len(train_data))
            loss_sum = 0.0
            hit_sum = 0
            for lo in range(0, len(order), cfg.batch_size):
                batch_idx = order[lo : lo + cfg.batch_size]
                batch = train_data.select(batch_idx)
                probs = model.forward(batch.arrays, training=True)
                loss = ops.mse_loss(probs, batch.one_hot())
                if not np.isfinite(loss.item()):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch}, batch {lo // cfg.batch_size}"
                    )
                opt.zero_grad()
                loss.backward()
                try:
                    opt.step()
                except TrainingDiverged as exc:
                    raise TrainingDiverged(
                        f"epoch {epoch}, batch {lo // cfg.batch_size}: {exc}"
                    ) from exc
                loss_sum += loss.item() * len(batch)
                hit_sum += int((predict(probs) == batch.labels).sum())

            val_loss, val_acc, _ = evaluate(model, val_data, batch_size=cfg.batch_size)
            record = EpochRecord(
                epoch=epoch,
                train_loss=loss_sum / len(train_data),
                train_acc=hit_sum / len(train_data),
                val_loss=val_loss,
                val_acc=val_acc,
                lr=lr_used,
                seconds=time.perf_counter() - t0,
            )
            log.append(record)
            if verbose:
                print(
                    f"epoch {epoch:3d}  loss {record.train_loss:.5f}  acc {record.train_acc:.3f}  "
                    f"val_loss {val_loss:.5f}  val_acc {val_acc:.3f}  lr {lr_used:g}"
                )

            if val_loss < best_val:
                best_val = val_loss
                best_epoch = epoch
                best_state = model.state_arrays()
                best_opt = opt.state_dict()
            sched.update(val_loss)
            if epoch - best_epoch >= cfg.early_stop_patience:
                stopped_early = True
                break

    model.load_state_arrays(*best_state)
    return FitResult(
        model=model,
        log=log,
        best_epoch=best_epoch,
        best_val_loss=float(best_val),
        optimizer_state=best_opt,
        stopped_early=stopped_early,
    )
