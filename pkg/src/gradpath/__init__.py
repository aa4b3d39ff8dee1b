"""Dual-input image-gradient CNN training engine and experiment harness."""

from .data import Batch, Dataset, batches, load_cifar10, load_cifar100, \
    load_dataset, load_mnist, subset, toy_dataset
from .gradcheck import gradcheck_suite
from .gradinput import gradient_transform, spatial_gradients
from .layers import LossValue, softmax_cross_entropy
from .models import (Network, build, build_baseline, build_dualpath,
                     load_checkpoint, param_count, save_checkpoint)
from .train import (MetricsRow, TrainConfig, evaluate, run_experiment,
                    sgd_step, train_epoch)

__version__ = "0.1.0"

__all__ = [
    "Batch", "Dataset", "batches", "load_cifar10", "load_cifar100",
    "load_dataset", "load_mnist", "subset", "toy_dataset",
    "gradcheck_suite", "gradient_transform", "spatial_gradients",
    "LossValue", "softmax_cross_entropy",
    "Network", "build", "build_baseline", "build_dualpath",
    "load_checkpoint", "param_count", "save_checkpoint",
    "MetricsRow", "TrainConfig", "evaluate", "run_experiment",
    "sgd_step", "train_epoch",
]
