"""Network builders and the shared-trunk dual-path forward/backward.

Three baseline stacks are supported (mnist, cifar10, cifar100). The
dual-path variant reuses the identical trunk and head tensors and only
flips the topology flag: the input batch and its gradient-transformed copy
are concatenated along the batch axis, pushed through the trunk once, the
flattened halves are summed (the ADD point), and the sum feeds the dense
head. Running the trunk once over the concatenated batch makes weight
sharing true by construction and computes batchnorm statistics jointly
over both input forms; it also means the two branches draw independent
dropout masks.

Checkpoints are a small versioned binary format (magic "GPTH1"); see
``save_checkpoint``.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ParameterError, ShapeError, StateError
from .gradinput import gradient_transform
from .layers import BatchNorm, Conv2d, Dense, Dropout, Flatten, MaxPool2x2, ReLU
from .tensor import DTYPE, add_elementwise

DATASET_KINDS = ("mnist", "cifar10", "cifar100")

CHECKPOINT_MAGIC = b"GPTH1"

# per dataset kind: input (channels, height, width), conv widths, dense widths
_ARCH = {
    "mnist": dict(input_shape=(1, 28, 28), conv_channels=(4,), dense_widths=(64, 10)),
    "cifar10": dict(input_shape=(3, 32, 32), conv_channels=(16, 32, 64),
                    dense_widths=(128, 128, 10)),
    "cifar100": dict(input_shape=(3, 32, 32), conv_channels=(16, 32, 64),
                     dense_widths=(128, 128, 100)),
}


@dataclass
class ForwardTrace:
    """What backward needs to know about the most recent forward call.

    For the dual topology, branch_a/branch_b are the two flattened branch
    vectors at the ADD point (original image first) and fused is their sum.
    For single, branch_a is the flatten output, branch_b is None and fused
    aliases branch_a.
    """

    token: int
    train: bool
    topology: str
    batch_size: int
    branch_a: np.ndarray
    branch_b: np.ndarray | None
    fused: np.ndarray


class Network:
    """An ordered trunk + head layer stack with a topology flag."""

    def __init__(self, kind, topology, trunk, head, dtype=DTYPE):
        if topology not in ("single", "dual"):
            raise ParameterError(f"unknown topology {topology!r}")
        self.kind = kind
        self.topology = topology
        self.trunk = trunk
        self.head = head
        self.dtype = dtype
        # pluggable so tests can stub the transform (identity / zero)
        self.input_transform = gradient_transform
        self._token = 0

    # -- mode handling -------------------------------------------------

    def layers(self):
        return self.trunk + self.head

    def train(self):
        for layer in self.layers():
            layer.training = True

    def eval(self):
        for layer in self.layers():
            layer.training = False

    def reseed_dropout(self, seed):
        for i, layer in enumerate(self.layers()):
            if isinstance(layer, Dropout):
                layer.reseed(seed + i)

    # -- forward / backward ---------------------------------------------

    def forward(self, batch, train=True):
        """Run the stack; returns (logits, trace).

        Dual topology concatenates [batch; transform(batch)] along the
        batch axis, runs the shared trunk once, splits the flattened
        output back into its two halves and sums them before the head.
        """
        if train:
            self.train()
        else:
            self.eval()
        self._token += 1
        b = batch.shape[0]

        if self.topology == "single":
            h = batch
            for layer in self.trunk:
                h = layer.forward(h)
            branch_a, branch_b, fused = h, None, h
        else:
            g = self.input_transform(batch)
            both = np.concatenate([batch, g], axis=0)
            for layer in self.trunk:
                both = layer.forward(both)
            branch_a, branch_b = both[:b], both[b:]
            if branch_a.shape != branch_b.shape:
                raise ShapeError("dual branches disagree in shape at the ADD point")
            fused = add_elementwise(branch_a, branch_b)

        h = fused
        for layer in self.head:
            h = layer.forward(h)
        trace = ForwardTrace(token=self._token, train=train, topology=self.topology,
                             batch_size=b, branch_a=branch_a, branch_b=branch_b,
                             fused=fused)
        return h, trace

    def backward(self, trace, dlogits):
        """Backpropagate from the logits gradient; accumulates into grads.

        For the dual topology the ADD point routes the head gradient
        unchanged to both branch halves, which are stacked back along the
        batch axis and pushed through the shared trunk once.
        """
        if trace.token != self._token:
            raise StateError("stale trace: the network ran another forward since")
        if not trace.train:
            raise StateError("backward needs a trace from a train-mode forward")
        g = dlogits
        for layer in reversed(self.head):
            g = layer.backward(g)
        if self.topology == "dual":
            g = np.concatenate([g, g], axis=0)
        for layer in reversed(self.trunk):
            g = layer.backward(g)
        return g

    # -- parameter bookkeeping -------------------------------------------

    def named_params(self):
        out = []
        for prefix, stack in (("trunk", self.trunk), ("head", self.head)):
            for i, layer in enumerate(stack):
                for name, p in layer.params.items():
                    out.append((f"{prefix}.{i}.{name}", p))
        return out

    def named_state(self):
        out = []
        for prefix, stack in (("trunk", self.trunk), ("head", self.head)):
            for i, layer in enumerate(stack):
                for name, s in layer.state_tensors().items():
                    out.append((f"{prefix}.{i}.{name}", s))
        return out

    def parameters(self):
        return [p for _, p in self.named_params()]

    def gradients(self):
        out = []
        for stack in (self.trunk, self.head):
            for layer in stack:
                for name in layer.params:
                    out.append(layer.grads[name])
        return out

    def zero_grads(self):
        for layer in self.layers():
            layer.zero_grads()

    def layer_kinds(self):
        return [layer.kind for layer in self.layers()]


def param_count(net):
    """Total element count over all trainable tensors (running stats excluded)."""
    return sum(layer.param_count() for layer in net.layers())


def _build_layers(kind, rng, dtype):
    arch = _ARCH[kind]
    cin, h, w = arch["input_shape"]
    trunk = []
    for block, cout in enumerate(arch["conv_channels"]):
        trunk.append(Conv2d(cin, cout, kernel_size=3, padding=1, rng=rng, dtype=dtype))
        trunk.append(ReLU())
        if block == 0:  # Table layout: pooling in the first block only
            trunk.append(MaxPool2x2())
            h, w = h // 2, w // 2
        trunk.append(Dropout(0.2, rng=np.random.default_rng(int(rng.integers(2**63)))))
        trunk.append(BatchNorm(cout, dtype=dtype))
        cin = cout
    trunk.append(Flatten())

    fan_in = cin * h * w
    head = []
    for width in arch["dense_widths"]:
        head.append(Dense(fan_in, width, rng=rng, dtype=dtype))
        fan_in = width
    return trunk, head


def _check_kind(kind):
    if kind not in _ARCH:
        raise ParameterError(
            f"unknown dataset kind {kind!r}, expected one of {DATASET_KINDS}")


def build_baseline(kind, seed=0, dtype=DTYPE):
    """Single-input stack for the given dataset kind."""
    _check_kind(kind)
    rng = np.random.default_rng(seed)
    trunk, head = _build_layers(kind, rng, dtype)
    return Network(kind, "single", trunk, head, dtype=dtype)


def build_dualpath(kind, seed=0, dtype=DTYPE):
    """Dual-input variant: same layers and weight count, topology flag dual."""
    _check_kind(kind)
    rng = np.random.default_rng(seed)
    trunk, head = _build_layers(kind, rng, dtype)
    return Network(kind, "dual", trunk, head, dtype=dtype)


def build(kind, topology, seed=0, dtype=DTYPE):
    if topology == "single":
        return build_baseline(kind, seed=seed, dtype=dtype)
    if topology == "dual":
        return build_dualpath(kind, seed=seed, dtype=dtype)
    raise ParameterError(f"unknown topology {topology!r}")


def input_shape(kind):
    _check_kind(kind)
    return _ARCH[kind]["input_shape"]


def class_count(kind):
    _check_kind(kind)
    return _ARCH[kind]["dense_widths"][-1]


# -- checkpoint format ----------------------------------------------------
#
#   magic "GPTH1"
#   u32 len + utf8  dataset kind
#   u32 len + utf8  topology
#   u32             tensor count
#   per tensor:     u32 name len, utf8 name, u32 rank, u32 * rank dims,
#                   float32 little-endian raw data
#
# All integers little-endian. Weights and batchnorm running statistics are
# stored; the round trip is bit-exact.


def _pack_str(s):
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def save_checkpoint(net, path):
    if net.kind not in _ARCH:
        raise ParameterError(f"cannot checkpoint a network of kind {net.kind!r}")
    if net.dtype != np.float32:
        raise ParameterError("checkpoint format stores float32 tensors only")
    tensors = net.named_params() + net.named_state()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(_pack_str(net.kind))
        f.write(_pack_str(net.topology))
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors:
            f.write(_pack_str(name))
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise FormatError(f"checkpoint truncated while reading {what}", offset=self.pos)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def string(self, what):
        n = self.u32(f"{what} length")
        return self.take(n, what).decode("utf-8")


def load_checkpoint(path):
    """Rebuild a Network from a checkpoint file; bit-exact w.r.t. save."""
    with open(path, "rb") as f:
        buf = f.read()
    r = _Reader(buf)
    if r.take(len(CHECKPOINT_MAGIC), "magic") != CHECKPOINT_MAGIC:
        raise FormatError("not a GPTH1 checkpoint (bad magic)", offset=0)
    kind = r.string("dataset kind")
    topology = r.string("topology")
    if kind not in _ARCH:
        raise FormatError(f"checkpoint names unknown dataset kind {kind!r}")
    if topology not in ("single", "dual"):
        raise FormatError(f"checkpoint names unknown topology {topology!r}")
    net = build(kind, topology, seed=0)
    targets = dict(net.named_params() + net.named_state())
    count = r.u32("tensor count")
    seen = set()
    for _ in range(count):
        name = r.string("tensor name")
        if name not in targets:
            raise FormatError(f"checkpoint tensor {name!r} not present in a "
                              f"{kind}/{topology} network", offset=r.pos)
        rank = r.u32("rank")
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, "dims"))
        target = targets[name]
        if tuple(dims) != target.shape:
            raise FormatError(f"tensor {name!r} has shape {dims}, expected "
                              f"{target.shape}", offset=r.pos)
        n = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(r.take(4 * n, f"data of {name}"), dtype="<f4")
        target[...] = data.reshape(dims)
        seen.add(name)
    if r.pos != len(buf):
        raise FormatError("trailing bytes after last tensor", offset=r.pos)
    if len(seen) != len(targets):
        missing = sorted(set(targets) - seen)
        raise FormatError(f"checkpoint is missing tensors: {missing[:4]}...")
    return net
