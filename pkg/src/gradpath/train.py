"""Optimizer, training/evaluation loops, metrics CSV, and the two-arm
experiment runner (baseline vs dual-path from identical initial weights).

The paper behind this architecture reports accuracy curves without
numbers, so the harness is built for reproducibility instead: same config
and seed give bit-identical metrics. Wall time is the one non-reproducible
column; pass timing=False (CLI: --no-timing) to write zeros there when
byte-identical CSV output matters.
"""

import csv
import time
from dataclasses import dataclass

import numpy as np

from . import data as data_mod
from .errors import DivergenceError, ParameterError, ShapeError
from .layers import softmax_cross_entropy
from .models import build

CSV_HEADER = ["epoch", "arch", "train_loss", "train_acc", "test_loss",
              "test_acc", "wall_time_s"]

ARCH_TOPOLOGY = {"baseline": "single", "dualpath": "dual"}

EVAL_BATCH = 256


@dataclass
class TrainConfig:
    dataset_kind: str
    topology: str = "single"
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 1
    subset_size: int | None = None
    precision: int = 32

    def __post_init__(self):
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ParameterError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ParameterError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.precision not in (32, 64):
            raise ParameterError(f"precision must be 32 or 64, got {self.precision}")

    @property
    def dtype(self):
        return np.float64 if self.precision == 64 else np.float32


@dataclass
class MetricsRow:
    epoch: int
    arch: str
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float
    wall_time_s: float


def sgd_step(params, grads, velocity, lr, momentum):
    """v <- momentum * v + g; w <- w - lr * v; grads are zeroed afterwards."""
    if not (len(params) == len(grads) == len(velocity)):
        raise ShapeError("params, grads and velocity lists differ in length")
    for w, g, v in zip(params, grads, velocity):
        if not (w.shape == g.shape == v.shape):
            raise ShapeError(f"misaligned shapes {w.shape}/{g.shape}/{v.shape}")
        v *= momentum
        v += g
        w -= lr * v
        g[...] = 0


def make_velocity(net):
    return [np.zeros_like(p) for p in net.parameters()]


def _cast(images, dtype):
    return images if images.dtype == dtype else images.astype(dtype)


def train_epoch(net, dataset, config, rng, velocity=None):
    """One pass over shuffled batches; returns (mean loss, accuracy).

    ``velocity`` holds the momentum buffers and should be carried across
    epochs by the caller (a fresh one is created when omitted).
    """
    if velocity is None:
        velocity = make_velocity(net)
    params, grads = net.parameters(), net.gradients()
    epoch_seed = int(rng.integers(0, 2**31 - 1))
    loss_sum, correct, seen = 0.0, 0, 0
    it = data_mod.batches(dataset, config.batch_size, seed=epoch_seed, shuffle=True)
    for i, batch in enumerate(it):
        logits, trace = net.forward(_cast(batch.images, net.dtype), train=True)
        lv = softmax_cross_entropy(logits, batch.labels)
        if not np.isfinite(lv.loss):
            raise DivergenceError(f"non-finite loss at batch {i} "
                                  f"(epoch seed {epoch_seed})")
        net.backward(trace, lv.dlogits)
        sgd_step(params, grads, velocity, config.learning_rate, config.momentum)
        nb = batch.labels.shape[0]
        loss_sum += lv.loss * nb
        correct += int((logits.argmax(axis=1) == batch.labels).sum())
        seen += nb
    return loss_sum / seen, correct / seen


def evaluate(net, dataset, batch_size=EVAL_BATCH):
    """Eval-mode loss and accuracy over a dataset; deterministic."""
    loss_sum, correct, seen = 0.0, 0, 0
    for batch in data_mod.batches(dataset, batch_size, shuffle=False):
        logits, _ = net.forward(_cast(batch.images, net.dtype), train=False)
        lv = softmax_cross_entropy(logits, batch.labels)
        nb = batch.labels.shape[0]
        loss_sum += lv.loss * nb
        correct += int((logits.argmax(axis=1) == batch.labels).sum())
        seen += nb
    return loss_sum / seen, correct / seen


def train_arm(config, arch, train_set, test_set, timing=True, log=None):
    """Train one architecture arm; returns its per-epoch MetricsRow list."""
    if arch not in ARCH_TOPOLOGY:
        raise ParameterError(f"unknown arch {arch!r}, expected one of "
                             f"{tuple(ARCH_TOPOLOGY)}")
    topology = ARCH_TOPOLOGY[arch]
    net = build(_model_kind(train_set.kind), topology,
                seed=config.seed, dtype=config.dtype)
    train_set = data_mod.subset(train_set, config.subset_size)
    rng = np.random.default_rng(config.seed)
    velocity = make_velocity(net)
    rows = []
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        tr_loss, tr_acc = train_epoch(net, train_set, config, rng, velocity)
        te_loss, te_acc = evaluate(net, test_set)
        wall = time.perf_counter() - t0 if timing else 0.0
        row = MetricsRow(epoch, arch, tr_loss, tr_acc, te_loss, te_acc, wall)
        rows.append(row)
        if log:
            log(f"{arch} epoch {epoch}/{config.epochs}  "
                f"train loss {tr_loss:.4f} acc {tr_acc:.4f}  "
                f"test loss {te_loss:.4f} acc {te_acc:.4f}")
    return rows, net


def _model_kind(dataset_kind):
    # the synthetic toy set is 28x28x1, so it rides the MNIST architecture
    return "mnist" if dataset_kind == "toy" else dataset_kind


def run_experiment(config, train_set, test_set, out_path=None, timing=True,
                   log=None):
    """Train baseline and dual-path arms from identical initialization.

    Both arms are built from config.seed (bit-identical starting weights
    and data order). Returns the combined MetricsRow list; writes the
    metrics CSV when out_path is given.
    """
    rows = []
    for arch in ("baseline", "dualpath"):
        arm_rows, _ = train_arm(config, arch, train_set, test_set,
                                timing=timing, log=log)
        rows.extend(arm_rows)
    if out_path is not None:
        write_metrics_csv(rows, out_path)
    return rows


def final_test_accuracy(rows, arch):
    last = [r for r in rows if r.arch == arch][-1]
    return last.test_acc


def accuracy_delta(rows):
    """Final-epoch test-accuracy delta, dual minus single."""
    return final_test_accuracy(rows, "dualpath") - final_test_accuracy(rows, "baseline")


def write_metrics_csv(rows, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([r.epoch, r.arch,
                             f"{r.train_loss:.6f}", f"{r.train_acc:.6f}",
                             f"{r.test_loss:.6f}", f"{r.test_acc:.6f}",
                             f"{r.wall_time_s:.6f}"])


def read_metrics_csv(path):
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_HEADER:
            raise ParameterError(f"unexpected CSV header {reader.fieldnames} in {path}")
        for rec in reader:
            rows.append(MetricsRow(int(rec["epoch"]), rec["arch"],
                                   float(rec["train_loss"]), float(rec["train_acc"]),
                                   float(rec["test_loss"]), float(rec["test_acc"]),
                                   float(rec["wall_time_s"])))
    return rows
