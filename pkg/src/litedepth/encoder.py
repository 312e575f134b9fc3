"""Three-stage feature encoder: shuffle-dilation blocks for local context,
rotation-based attention for cross-dimension reweighting, and the spectral
purification block (final stage only) for global structure.

All three block types preserve the BCHW shape of their input.
"""

from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .nn import BatchNorm2d, Conv2d, ConvBnAct, Dropout, LayerNormChannels, Module, Parameter
from .ops import channel_shuffle, channel_split, conv2d, leaky_relu, pool2d, sigmoid
from .spectral import LowPassMask, build_mask, dfsp_global
from .fft import next_pow2
from .tensor import ArgumentError, DimensionError, Tensor, concat, tmax, tmean, transpose
from . import flops as _flops


def adaptive_kernel_size(C: int) -> int:
    """Nearest odd kernel size >= 3 for (log2(C) + 1) / 2 channels."""
    if C < 1:
        raise ArgumentError(f"channel count must be >= 1, got {C}")
    v = (np.log2(C) + 1.0) / 2.0
    k = 2 * int(round((v - 1.0) / 2.0)) + 1
    return max(k, 3)


class DilatedUnit(Module):
    """One composition step: depthwise dilated 3x3, LayerNorm+BatchNorm,
    LeakyReLU, then a pointwise linear projection."""

    def __init__(self, C, dilation):
        super().__init__()
        self.dconv = Conv2d(C, C, 3, dilation=dilation, groups=C,
                            padding=dilation, bias=False)
        self.ln = LayerNormChannels(C)
        self.bn = BatchNorm2d(C)
        self.linear = Conv2d(C, C, 1, bias=True)

    def __call__(self, x):
        return self.linear(leaky_relu(self.bn(self.ln(self.dconv(x)))))


class ShuffleDilationBlock(Module):
    """Half-channel bypass around a stack of dilated units with a residual,
    re-mixed by a two-group shuffle on both ends.

    With ``plain=True`` (the "adjust" ablation) every dilation collapses to 1
    and both shuffles are dropped; the parameter count is unchanged.
    """

    def __init__(self, C, dilations, dropout_rate=0.1, plain=False):
        super().__init__()
        if C % 2 != 0:
            raise DimensionError(f"shuffle-dilation block needs even channels, got {C}")
        self.plain = plain
        half = C // 2
        for i, r in enumerate(dilations):
            setattr(self, f"unit{i}", DilatedUnit(half, 1 if plain else r))
        self.n_units = len(dilations)
        self.drop = Dropout(dropout_rate)

    def __call__(self, x, rng=None):
        if x.shape[1] % 2 != 0:
            raise DimensionError(f"expected even channel count, got {x.shape[1]}")
        if not self.plain:
            x = channel_shuffle(x, 2)
        bypass, body = channel_split(x)
        y = body
        for i in range(self.n_units):
            y = getattr(self, f"unit{i}")(y)
        y = self.drop(y, rng) + body
        out = concat([bypass, y], axis=1)
        if not self.plain:
            out = channel_shuffle(out, 2)
        return out


def raka_rotate(x: Tensor, branch: int) -> Tensor:
    """Axis permutation per attention branch: 0 identity, 1 swaps
    channel/height, 2 swaps channel/width. Each is its own inverse."""
    if branch == 0:
        return x
    if branch == 1:
        return transpose(x, (0, 2, 1, 3))
    if branch == 2:
        return transpose(x, (0, 3, 2, 1))
    raise ArgumentError(f"rotation branch must be 0, 1 or 2, got {branch}")


class RotationAttention(Module):
    """Three-branch attention: rotate, pool the leading feature axis to
    max/avg maps, gate through a small conv + sigmoid, rotate back, and
    combine with learnable branch weights."""

    def __init__(self, C, lambda_init=1.0 / 3.0):
        super().__init__()
        k = adaptive_kernel_size(C)
        for i in range(3):
            setattr(self, f"gate{i}", Conv2d(2, 1, k, padding=k // 2, bias=False))
        self.lambdas = Parameter((3,), init_kind=lambda_init, no_decay=True)

    def __call__(self, x):
        parts = []
        for i in range(3):
            xi = raka_rotate(x, i)
            pooled = concat(
                [tmax(xi, axis=1, keepdims=True), tmean(xi, axis=1, keepdims=True)],
                axis=1,
            )
            gate = sigmoid(getattr(self, f"gate{i}")(pooled))
            parts.append(raka_rotate(xi * gate, i) * self.lambdas[i])
        return parts[0] + parts[1] + parts[2]


class SpectralPurifyBlock(Module):
    """Global-feature block: purified-spectrum product on half the channels,
    3x3 conv on the other half, pointwise fusion. Holds the learnable
    frequency mask, sized to the (power-of-two padded) feature plane."""

    def __init__(self, C, H, W, gamma, dropout_rate=0.1, frozen_mask=False):
        super().__init__()
        if C % 2 != 0:
            raise DimensionError(f"spectral block needs even channels, got {C}")
        half = C // 2
        ph, pw = next_pow2(H), next_pow2(W)
        seed_mask = build_mask(half, ph, pw, gamma, frozen=frozen_mask)
        self.gamma = gamma
        self.frozen_mask = frozen_mask
        if frozen_mask:
            self.register_buffer("mask_data", seed_mask.mask.data)
            self._mask_param = None
        else:
            p = Parameter((half, ph, pw), init_kind="keep", no_decay=True)
            p.data[...] = seed_mask.mask.data
            self.mask = p
            self._mask_param = p
        self.conv_first = Conv2d(half, half, 3, padding=1, bias=False)
        self.conv_real_m = Conv2d(half, half, 1, bias=False)
        self.conv_imag_m = Conv2d(half, half, 1, bias=False)
        self.bn_real_m = BatchNorm2d(half)
        self.bn_imag_m = BatchNorm2d(half)
        self.fuse = Conv2d(C, C, 1, bias=True)
        self.gate_param = Parameter((), init_kind=1.0, no_decay=True)
        self.drop = Dropout(dropout_rate)

    # parameter-bundle views consumed by the spectral functions
    @property
    def conv_real(self):  # noqa: D401 - plain accessors
        return self.conv_real_m.weight

    @property
    def conv_imag(self):
        return self.conv_imag_m.weight

    @property
    def bn_real(self):
        return {
            "gain": self.bn_real_m.gain, "bias": self.bn_real_m.bias,
            "stats": {"mean": self.bn_real_m.running_mean, "var": self.bn_real_m.running_var},
        }

    @property
    def bn_imag(self):
        return {
            "gain": self.bn_imag_m.gain, "bias": self.bn_imag_m.bias,
            "stats": {"mean": self.bn_imag_m.running_mean, "var": self.bn_imag_m.running_var},
        }

    @property
    def conv_first_w(self):
        return self.conv_first.weight

    @property
    def fuse_w(self):
        return self.fuse.weight

    @property
    def fuse_b(self):
        return self.fuse.bias

    @property
    def gate(self):
        return self.gate_param

    def low_pass_mask(self) -> LowPassMask:
        if self._mask_param is None:
            return LowPassMask(Tensor(self.mask_data), self.gamma, frozen=True)
        return LowPassMask(self._mask_param, self.gamma, frozen=False)

    def clamp_mask(self):
        if self._mask_param is not None:
            np.clip(self._mask_param.data, 0.0, 1.0, out=self._mask_param.data)

    def __call__(self, x, rng=None):
        out = _dfsp_apply(x, self)
        return self.drop(out, rng)


class _BundleView:
    """Adapter giving the spectral functions flat attribute access."""

    def __init__(self, block: SpectralPurifyBlock):
        self.conv_first = block.conv_first.weight
        self.conv_real = block.conv_real
        self.conv_imag = block.conv_imag
        self.bn_real = block.bn_real
        self.bn_imag = block.bn_imag
        self.fuse_w = block.fuse.weight
        self.fuse_b = block.fuse.bias
        self.gate = block.gate_param


def _dfsp_apply(x, block: SpectralPurifyBlock):
    return dfsp_global(x, block.low_pass_mask(), _BundleView(block),
                       training=block.training)


class Stage(Module):
    def __init__(self, C, n_sdc, dilations, dropout_rate, cfg: ModelConfig,
                 spatial=None):
        super().__init__()
        self.n_sdc = n_sdc
        for i in range(n_sdc):
            setattr(self, f"sdc{i}",
                    ShuffleDilationBlock(C, dilations, dropout_rate, plain=cfg.ablate_sdc))
        self.use_raka = not cfg.without_raka
        if self.use_raka:
            self.raka = RotationAttention(C, cfg.raka_branch_weights_init)
        self.use_dfsp = spatial is not None and not cfg.without_dfsp
        if self.use_dfsp:
            self.dfsp = SpectralPurifyBlock(
                C, spatial[0], spatial[1], cfg.gamma,
                cfg.dropout_dfsp, cfg.frozen_mask,
            )

    def __call__(self, x, rng=None):
        for i in range(self.n_sdc):
            x = getattr(self, f"sdc{i}")(x, rng)
        if self.use_raka:
            x = self.raka(x)
        if self.use_dfsp:
            x = self.dfsp(x, rng)
        return x


class Encoder(Module):
    """Stem to 1/4 resolution, then three stages emitting features at
    1/4, 1/8 and 1/16 with pooled-image concatenation between stages."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        c1, c2, c3 = cfg.stage_channels
        H, W = cfg.input_size
        self.stem1 = ConvBnAct(3, cfg.stem_channels)
        self.stem2 = ConvBnAct(cfg.stem_channels, c1)
        self.stage1 = Stage(c1, cfg.sdc_per_stage[0], cfg.dilation_sequence,
                            cfg.dropout_sdc, cfg)
        self.down12 = ConvBnAct(c1 + 3, c2)
        self.stage2 = Stage(c2, cfg.sdc_per_stage[1], cfg.dilation_sequence,
                            cfg.dropout_sdc, cfg)
        self.down23 = ConvBnAct(c2 + 3, c3)
        self.stage3 = Stage(c3, cfg.sdc_per_stage[2], cfg.dilation_sequence,
                            cfg.dropout_sdc, cfg, spatial=(H // 16, W // 16))

    def __call__(self, image, rng=None):
        B, C, H, W = image.shape
        if C != 3:
            raise DimensionError(f"expected 3 input channels, got {C}")
        if H % 16 != 0 or W % 16 != 0:
            raise DimensionError(
                f"input size {H}x{W} must be divisible by 16 (stem + two stage reductions)"
            )
        with _flops.scope("encoder.stem"):
            x = pool2d(self.stem1(image), "max", window=2)
            x = pool2d(self.stem2(x), "max", window=2)
        with _flops.scope("encoder.stage1"):
            f1 = self.stage1(x, rng)
        with _flops.scope("encoder.stage2"):
            img8 = pool2d(image, "avg", window=8)
            x = self.down12(concat([pool2d(f1, "avg", window=2), img8], axis=1))
            f2 = self.stage2(x, rng)
        with _flops.scope("encoder.stage3"):
            img16 = pool2d(image, "avg", window=16)
            x = self.down23(concat([pool2d(f2, "avg", window=2), img16], axis=1))
            f3 = self.stage3(x, rng)
        return (f1, f2, f3)


# functional entry points ------------------------------------------------------


def sdc_forward(x: Tensor, block: ShuffleDilationBlock, rng=None) -> Tensor:
    return block(x, rng)


def raka_forward(x: Tensor, block: RotationAttention) -> Tensor:
    return block(x)


def encoder_forward(image: Tensor, encoder: Encoder, rng=None):
    return encoder(image, rng)
