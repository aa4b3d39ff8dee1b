"""Central finite-difference verification of every layer kind and of both
full topologies, run in 64-bit precision on small random shapes.

The scalar probe is L = sum(forward(x) * U) for a fixed random U (the full
model checks use the actual cross-entropy loss instead), so the analytic
backward pass can be compared against (L(t + e) - L(t - e)) / 2e per
tensor element. Dropout is reseeded before every forward so all
evaluations see the same mask.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .layers import (BatchNorm, Conv2d, Dense, Dropout, Flatten, MaxPool2x2,
                     ReLU, softmax_cross_entropy)
from .models import Network

EPS = 1e-5
TOLERANCE = 1e-4


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tolerance: float

    @property
    def passed(self):
        return self.max_rel_err < self.tolerance


@dataclass
class GradCheckReport:
    results: list = field(default_factory=list)
    elapsed_s: float = 0.0

    @property
    def ok(self):
        return all(r.passed for r in self.results)

    def failures(self):
        return [r for r in self.results if not r.passed]

    def lines(self):
        out = []
        for r in self.results:
            status = "ok" if r.passed else "FAIL"
            out.append(f"{r.name:<28} max rel err {r.max_rel_err:10.3e}   {status}")
        out.append(f"{'overall':<28} {'PASS' if self.ok else 'FAIL'}"
                   f"   ({self.elapsed_s:.1f}s)")
        return out


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float((np.abs(analytic - numeric) / scale).max()) if analytic.size else 0.0


def central_difference(f, arr, eps=EPS):
    """Numeric gradient of scalar f w.r.t. every element of arr (in place)."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + eps
        hi = f()
        arr[idx] = orig - eps
        lo = f()
        arr[idx] = orig
        grad[idx] = (hi - lo) / (2 * eps)
        it.iternext()
    return grad


def _away_from_zero(rng, shape, margin=0.2):
    """Uniform values with |v| >= margin, keeping relu/maxpool FD clean."""
    x = rng.uniform(margin, 1.0, size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return x * sign


def _check_layer(layer, x, seed, eps, tol, want_params=True):
    """Compare analytic vs numeric grads for one layer; returns max rel err."""
    rng = np.random.default_rng(seed)

    def fresh_forward():
        if isinstance(layer, Dropout):
            layer.reseed(seed)
        return layer.forward(x)

    out = fresh_forward()
    upstream = rng.normal(size=out.shape)

    def probe():
        return float((fresh_forward() * upstream).sum())

    layer.zero_grads()
    fresh_forward()
    analytic_dx = layer.backward(upstream)
    analytic_grads = {k: v.copy() for k, v in layer.grads.items()}

    worst = relative_error(analytic_dx, central_difference(probe, x, eps))
    if want_params:
        for name, p in layer.params.items():
            numeric = central_difference(probe, p, eps)
            worst = max(worst, relative_error(analytic_grads[name], numeric))
    return worst


def _layer_cases(seed):
    rng = np.random.default_rng(seed)

    def conv():
        return (Conv2d(3, 2, kernel_size=3, padding=1, rng=rng, dtype=np.float64),
                rng.normal(size=(2, 3, 5, 6)))

    def conv_stride2():
        return (Conv2d(2, 2, kernel_size=3, padding=1, stride=2, rng=rng,
                       dtype=np.float64),
                rng.normal(size=(2, 2, 5, 5)))

    def relu():
        return ReLU(), _away_from_zero(rng, (3, 4, 4, 4))

    def maxpool():
        return MaxPool2x2(), rng.normal(size=(2, 3, 6, 6))

    def dropout():
        layer = Dropout(0.3)
        return layer, rng.normal(size=(3, 5, 4, 4))

    def batchnorm4d():
        return BatchNorm(3, dtype=np.float64), rng.normal(size=(4, 3, 4, 4))

    def batchnorm2d():
        return BatchNorm(5, dtype=np.float64), rng.normal(size=(6, 5))

    def flatten():
        return Flatten(), rng.normal(size=(3, 2, 4, 4))

    def dense():
        return Dense(6, 4, rng=rng, dtype=np.float64), rng.normal(size=(5, 6))

    return [("conv2d", conv), ("conv2d_stride2", conv_stride2), ("relu", relu),
            ("maxpool2x2", maxpool), ("dropout", dropout),
            ("batchnorm_4d", batchnorm4d), ("batchnorm_2d", batchnorm2d),
            ("flatten", flatten), ("dense", dense)]


def _check_softmax(seed, eps):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(4, 5))
    labels = rng.integers(0, 5, size=4)
    analytic = softmax_cross_entropy(logits, labels).dlogits

    def probe():
        return softmax_cross_entropy(logits, labels).loss

    return relative_error(analytic, central_difference(probe, logits, eps))


def tiny_network(topology, seed, dtype=np.float64, image_size=8):
    """MNIST-shaped topology at toy scale (2 filters, 8x8 input, 3 classes)."""
    rng = np.random.default_rng(seed)
    width = 2 * (image_size // 2) ** 2
    trunk = [Conv2d(1, 2, kernel_size=3, padding=1, rng=rng, dtype=dtype),
             ReLU(),
             MaxPool2x2(),
             Dropout(0.2),
             BatchNorm(2, dtype=dtype),
             Flatten()]
    head = [Dense(width, 8, rng=rng, dtype=dtype), Dense(8, 3, rng=rng, dtype=dtype)]
    return Network("tiny", topology, trunk, head, dtype=dtype)


def _check_model(topology, seed, eps):
    rng = np.random.default_rng(seed)
    net = tiny_network(topology, seed)
    x = _away_from_zero(rng, (3, 1, 8, 8))
    labels = rng.integers(0, 3, size=3)

    def probe():
        net.reseed_dropout(seed)
        logits, _ = net.forward(x, train=True)
        return softmax_cross_entropy(logits, labels).loss

    net.zero_grads()
    net.reseed_dropout(seed)
    logits, trace = net.forward(x, train=True)
    net.backward(trace, softmax_cross_entropy(logits, labels).dlogits)
    analytic = [g.copy() for g in net.gradients()]

    worst = 0.0
    for (name, p), a in zip(net.named_params(), analytic):
        numeric = central_difference(probe, p, eps)
        worst = max(worst, relative_error(a, numeric))
    return worst


def gradcheck_suite(seed=0, eps=EPS, tolerance=TOLERANCE):
    """Run every layer-kind and full-topology check; returns a report."""
    t0 = time.perf_counter()
    results = []
    for i, (name, make) in enumerate(_layer_cases(seed)):
        layer, x = make()
        err = _check_layer(layer, x, seed + i, eps, tolerance)
        results.append(CheckResult(name, err, tolerance))
    results.append(CheckResult("softmax_cross_entropy", _check_softmax(seed, eps),
                               tolerance))
    for topology in ("single", "dual"):
        err = _check_model(topology, seed + 100, eps)
        results.append(CheckResult(f"model_{topology}", err, tolerance))
    return GradCheckReport(results, elapsed_s=time.perf_counter() - t0)
