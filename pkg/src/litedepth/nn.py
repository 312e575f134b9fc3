"""Minimal module tree: parameter registry, name-keyed deterministic init,
and the layers the encoder/decoder/pose networks are assembled from."""

from __future__ import annotations

import zlib

import numpy as np

from .tensor import Tensor
from .ops import conv2d, dropout, leaky_relu, normalize


class Parameter(Tensor):
    """Learnable tensor with an init recipe and a weight-decay exemption flag.

    Data is filled in by :meth:`Module.init_parameters`, seeded from the
    parameter's path name, so removing one module never shifts another
    module's initialization stream.
    """

    __slots__ = ("init_kind", "fan_in", "no_decay")

    def __init__(self, shape, init_kind="kaiming", fan_in=None, no_decay=False):
        super().__init__(np.zeros(shape), requires_grad=True)
        self.init_kind = init_kind
        self.fan_in = fan_in
        self.no_decay = no_decay


class Module:
    """Base class; submodules and parameters register via attribute assignment."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = ""):
        for name, p in self._params.items():
            yield (f"{prefix}{name}", p)
        for name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def modules(self):
        yield self
        for child in self._children.values():
            yield from child.modules()

    def train(self, mode: bool = True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def init_parameters(self, seed: int = 0):
        """Fill every parameter from a generator keyed by (seed, path name)."""
        for name, p in self.named_parameters():
            rng = np.random.default_rng((seed, zlib.crc32(name.encode())))
            if p.init_kind == "kaiming":
                fan = p.fan_in or int(np.prod(p.shape[1:])) or 1
                bound = np.sqrt(6.0 / fan)
                p.data[...] = rng.uniform(-bound, bound, p.shape)
            elif p.init_kind == "zeros":
                p.data[...] = 0.0
            elif p.init_kind == "ones":
                p.data[...] = 1.0
            elif isinstance(p.init_kind, (int, float)):
                p.data[...] = float(p.init_kind)
            # "keep" leaves preset data untouched (e.g. the low-pass mask)
        return self

    def state_arrays(self, prefix: str = ""):
        """Parameters plus persistent buffers (running statistics)."""
        for name, p in self._params.items():
            yield (f"{prefix}{name}", p.data)
        for name, buf in getattr(self, "_buffers", {}).items():
            yield (f"{prefix}{name}", buf)
        for name, child in self._children.items():
            yield from child.state_arrays(f"{prefix}{name}.")

    def load_state(self, arrays: dict):
        for name, arr in self.state_arrays():
            if name not in arrays:
                raise KeyError(f"checkpoint missing tensor {name!r}")
            if arrays[name].shape != arr.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: {arrays[name].shape} vs {arr.shape}"
                )
            arr[...] = arrays[name]
        return self

    def register_buffer(self, name: str, value: np.ndarray):
        if not hasattr(self, "_buffers"):
            object.__setattr__(self, "_buffers", {})
        self._buffers[name] = value
        object.__setattr__(self, name, value)


class Conv2d(Module):
    def __init__(self, cin, cout, k, stride=1, dilation=1, groups=1,
                 padding=0, bias=True):
        super().__init__()
        self.stride, self.dilation, self.groups, self.padding = stride, dilation, groups, padding
        self.weight = Parameter((cout, cin // groups, k, k), fan_in=(cin // groups) * k * k)
        self.bias = Parameter((cout,), init_kind="zeros", no_decay=True) if bias else None

    def __call__(self, x):
        return conv2d(x, self.weight, self.bias, self.stride,
                      self.dilation, self.groups, self.padding)


class LayerNormChannels(Module):
    """Per-sample normalization over the channel axis."""

    def __init__(self, C, eps=1e-5):
        super().__init__()
        self.eps = eps
        self.gain = Parameter((C,), init_kind="ones", no_decay=True)
        self.bias = Parameter((C,), init_kind="zeros", no_decay=True)

    def __call__(self, x):
        return normalize(x, "layer", self.gain, self.bias, self.eps)


class BatchNorm2d(Module):
    def __init__(self, C, eps=1e-5, momentum=0.1):
        super().__init__()
        self.eps, self.momentum = eps, momentum
        self.gain = Parameter((C,), init_kind="ones", no_decay=True)
        self.bias = Parameter((C,), init_kind="zeros", no_decay=True)
        self.register_buffer("running_mean", np.zeros(C))
        self.register_buffer("running_var", np.ones(C))

    def __call__(self, x):
        stats = {"mean": self.running_mean, "var": self.running_var}
        return normalize(x, "batch", self.gain, self.bias, self.eps,
                         running_stats=stats, training=self.training,
                         momentum=self.momentum)


class Dropout(Module):
    def __init__(self, p):
        super().__init__()
        self.p = p

    def __call__(self, x, rng=None):
        if rng is None or not self.training:
            return x
        return dropout(x, self.p, rng, training=True)


class ConvBnAct(Module):
    """3x3 conv + batch-norm + LeakyReLU, the stem/downsample workhorse."""

    def __init__(self, cin, cout, k=3, stride=1, slope=0.01):
        super().__init__()
        self.conv = Conv2d(cin, cout, k, stride=stride, padding=k // 2, bias=False)
        self.bn = BatchNorm2d(cout)
        self.slope = slope

    def __call__(self, x):
        return leaky_relu(self.bn(self.conv(x)), self.slope)
