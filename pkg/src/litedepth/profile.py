"""Parameter and FLOP accounting for a built model.

Counting conventions (stated in every report):
- MACs are exact integers from shape arithmetic, collected during one
  forward pass; elementwise activations/normalizations are excluded.
- FLOPs = 2 * MACs.
- FFTs count 2.5*N*log2(N) MAC-equivalents per plane (i.e. the usual
  5*N*log2(N) real operations under the 2x convention).
- The depth path (encoder + decoder) is the default inference boundary;
  the pose network is reported separately and included on request.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flops import MacCounter
from .model import DepthModel, count_params
from .tensor import Tensor, no_grad

REFERENCE_PARAMS = 2.7e6   # published full-model budget
REFERENCE_FLOPS = 7.1e9    # published budget at 640x192


@dataclass
class FlopReport:
    input_size: tuple[int, int]
    per_module: dict[str, int] = field(default_factory=dict)
    per_kind: dict[str, int] = field(default_factory=dict)
    params: int = 0
    pose_macs: int = 0

    @property
    def total_macs(self) -> int:
        return sum(self.per_module.values())

    @property
    def total_flops(self) -> int:
        return 2 * self.total_macs

    def as_table(self) -> str:
        lines = [f"input {self.input_size[1]}x{self.input_size[0]} (WxH)"]
        lines.append(f"{'module':24s} {'MACs':>16s} {'FLOPs (2xMAC)':>16s}")
        for name, macs in sorted(self.per_module.items()):
            lines.append(f"{name:24s} {macs:16,d} {2 * macs:16,d}")
        lines.append(f"{'total (depth path)':24s} {self.total_macs:16,d} {self.total_flops:16,d}")
        lines.append(f"{'posenet (separate)':24s} {self.pose_macs:16,d} {2 * self.pose_macs:16,d}")
        lines.append(f"parameters (full model incl. pose net): {self.params:,d}")
        lines.append(
            f"reference budgets: {REFERENCE_PARAMS / 1e6:.1f}M params, "
            f"{REFERENCE_FLOPS / 1e9:.1f}G FLOPs; "
            f"this model: {self.params / 1e6:.3f}M params, "
            f"{self.total_flops / 1e9:.3f}G FLOPs (2xMAC) / "
            f"{self.total_macs / 1e9:.3f}G (1xMAC)"
        )
        return "\n".join(lines)

    def as_csv(self) -> str:
        rows = ["module,macs,flops"]
        for name, macs in sorted(self.per_module.items()):
            rows.append(f"{name},{macs},{2 * macs}")
        rows.append(f"total,{self.total_macs},{self.total_flops}")
        rows.append(f"posenet,{self.pose_macs},{2 * self.pose_macs}")
        rows.append(f"params,{self.params},")
        return "\n".join(rows) + "\n"


def count_flops(model: DepthModel, input_size: tuple[int, int] | None = None) -> FlopReport:
    """Analytic MAC counts from one traced forward pass at batch 1."""
    H, W = input_size or model.cfg.input_size
    was_training = model.encoder.training
    model.eval()
    counter = MacCounter()
    with no_grad(), counter:
        x = Tensor(np.zeros((1, 3, H, W)))
        model.decoder(model.encoder(x))
    pose_counter = MacCounter()
    with no_grad(), pose_counter:
        pair = Tensor(np.zeros((1, 6, H, W)))
        model.posenet(pair)
    if was_training:
        model.train()
    return FlopReport(
        input_size=(H, W),
        per_module=dict(counter.by_scope),
        per_kind=dict(counter.by_kind),
        params=count_params(model),
        pose_macs=pose_counter.total_macs,
    )
