"""Disparity decoder and the pose regression network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .nn import Conv2d, ConvBnAct, Module, Parameter
from .ops import bilinear_upsample, leaky_relu, pool2d, sigmoid
from .tensor import DimensionError, Tensor, concat, tmean
from .geometry import pose_from_vector_tensor
from . import flops as _flops


@dataclass
class DisparityOutput:
    """Sigmoid disparities, finest first: full, 1/2, 1/4 resolution."""

    disparities: list

    def __iter__(self):
        return iter(self.disparities)

    def __len__(self):
        return len(self.disparities)

    def __getitem__(self, i):
        return self.disparities[i]


class _UpBlock(Module):
    """Pre-conv, x2 bilinear upsample, optional skip concat, post-conv."""

    def __init__(self, cin, cout, skip=0):
        super().__init__()
        self.pre = Conv2d(cin, cout, 3, padding=1)
        self.post = Conv2d(cout + skip, cout, 3, padding=1)

    def __call__(self, x, skip=None):
        x = bilinear_upsample(leaky_relu(self.pre(x)), 2)
        if skip is not None:
            x = concat([x, skip], axis=1)
        return leaky_relu(self.post(x))


class DepthDecoder(Module):
    """Coarse-to-fine decoder over the three encoder scales; emits sigmoid
    disparity heads at the ``scales`` finest levels."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c1, c2, c3 = cfg.stage_channels
        d4, d3, d2, d1, d0 = cfg.decoder_channels
        if not (1 <= cfg.scales <= 3):
            raise DimensionError(f"scales must be 1..3, got {cfg.scales}")
        self.scales = cfg.scales
        self.entry = Conv2d(c3, d4, 3, padding=1)
        self.up3 = _UpBlock(d4, d3, skip=c2)   # 1/16 -> 1/8
        self.up2 = _UpBlock(d3, d2, skip=c1)   # 1/8 -> 1/4
        self.up1 = _UpBlock(d2, d1)            # 1/4 -> 1/2
        self.up0 = _UpBlock(d1, d0)            # 1/2 -> full
        self.head_quarter = Conv2d(d2, 1, 3, padding=1)
        self.head_half = Conv2d(d1, 1, 3, padding=1)
        self.head_full = Conv2d(d0, 1, 3, padding=1)
        for head in (self.head_quarter, self.head_half, self.head_full):
            head.bias.init_kind = cfg.disp_head_bias  # start in a plausible depth range

    def __call__(self, features) -> DisparityOutput:
        f1, f2, f3 = features
        with _flops.scope("decoder"):
            x = leaky_relu(self.entry(f3))
            x = self.up3(x, f2)
            x = self.up2(x, f1)
            disp_q = sigmoid(self.head_quarter(x))
            x = self.up1(x)
            disp_h = sigmoid(self.head_half(x))
            x = self.up0(x)
            disp_f = sigmoid(self.head_full(x))
        return DisparityOutput([disp_f, disp_h, disp_q][: self.scales])


def decoder_forward(features, decoder: DepthDecoder) -> DisparityOutput:
    return decoder(features)


class _ResidualBlock(Module):
    def __init__(self, cin, cout, stride=1):
        super().__init__()
        self.conv1 = ConvBnAct(cin, cout, stride=stride)
        self.conv2 = ConvBnAct(cout, cout)
        self.proj = Conv2d(cin, cout, 1, stride=stride, bias=False) if (
            stride != 1 or cin != cout) else None

    def __call__(self, x):
        y = self.conv2(self.conv1(x))
        return y + (self.proj(x) if self.proj is not None else x)


class PoseNet(Module):
    """Residual encoder (18-layer topology at configurable width) over a
    concatenated frame pair, then a four-conv pose decoder producing an
    axis-angle + translation 6-vector (scaled by 0.01 before SE(3))."""

    def __init__(self, width: int = 16):
        super().__init__()
        w = width
        self.stem = ConvBnAct(6, w, k=7, stride=2)
        widths = [w, 2 * w, 4 * w, 8 * w]
        cin = w
        for i, cout in enumerate(widths):
            stride = 1 if i == 0 else 2
            setattr(self, f"layer{i}a", _ResidualBlock(cin, cout, stride))
            setattr(self, f"layer{i}b", _ResidualBlock(cout, cout))
            cin = cout
        self.pconv0 = Conv2d(cin, 8 * w, 1)
        self.pconv1 = Conv2d(8 * w, 8 * w, 3, padding=1)
        self.pconv2 = Conv2d(8 * w, 8 * w, 3, padding=1)
        self.pconv3 = Conv2d(8 * w, 6, 1)
        self.pconv3.weight.init_kind = "zeros"  # identity pose at init

    def __call__(self, pair: Tensor):
        if pair.shape[1] != 6:
            raise DimensionError(
                f"pose network expects two stacked RGB frames (6 channels), got {pair.shape[1]}"
            )
        with _flops.scope("posenet"):
            x = pool2d(self.stem(pair), "max", window=2)
            for i in range(4):
                x = getattr(self, f"layer{i}a")(x)
                x = getattr(self, f"layer{i}b")(x)
            x = leaky_relu(self.pconv0(x))
            x = leaky_relu(self.pconv1(x))
            x = leaky_relu(self.pconv2(x))
            x = self.pconv3(x)
        vec = tmean(x, axis=(2, 3)) * 0.01  # (B, 6)
        return pose_from_vector_tensor(vec)


def posenet_forward(pair: Tensor, net: PoseNet):
    return net(pair)
