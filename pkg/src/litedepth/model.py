"""Full trainable model: encoder + disparity decoder + pose network."""

from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .depthnet import DepthDecoder, PoseNet
from .encoder import Encoder, SpectralPurifyBlock
from .nn import Module
from .tensor import Tensor, concat


class DepthModel(Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.decoder = DepthDecoder(cfg)
        self.posenet = PoseNet(cfg.pose_width)

    def predict_disparity(self, image: Tensor, rng=None):
        return self.decoder(self.encoder(image, rng))

    def predict_pose(self, target: Tensor, source: Tensor):
        """Relative pose mapping target-frame points into the source frame."""
        return self.posenet(concat([target, source], axis=1))

    def clamp_masks(self):
        for m in self.modules():
            if isinstance(m, SpectralPurifyBlock):
                m.clamp_mask()


def build_model(cfg: ModelConfig, seed: int = 0) -> DepthModel:
    return DepthModel(cfg).init_parameters(seed)


def count_params(model: Module) -> int:
    """Exact sum of parameter element counts over the module tree."""
    return sum(int(np.prod(p.shape)) for p in model.parameters())
