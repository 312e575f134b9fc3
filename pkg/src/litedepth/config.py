"""Model/training configuration and its flat key=value file format."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .tensor import ArgumentError, DimensionError


@dataclass
class ModelConfig:
    """Everything the architecture diagram leaves numeric-free.

    Channel counts must be even (the shuffle blocks split them in half).
    ``dilation_sequence`` lists the dilation of each stacked dilated-conv
    layer inside one shuffle-dilation block.
    """

    stage_channels: tuple[int, int, int] = (48, 80, 128)
    sdc_per_stage: tuple[int, int, int] = (2, 2, 2)
    dilation_sequence: tuple[int, ...] = (1, 2, 3)
    gamma: float = 0.5
    raka_branch_weights_init: float = 1.0 / 3.0
    dropout_sdc: float = 0.1
    dropout_dfsp: float = 0.1
    input_size: tuple[int, int] = (192, 640)  # (H, W)
    scales: int = 3
    stem_channels: int = 24
    decoder_channels: tuple[int, ...] = (96, 64, 48, 32, 24)
    pose_width: int = 16
    min_depth: float = 0.1
    max_depth: float = 100.0
    disp_head_bias: float = -4.0  # sigmoid starts near 0.018 -> ~5 m depth
    # ablations (one flag each)
    ablate_sdc: bool = False      # dilations forced to 1, shuffles removed
    without_raka: bool = False
    without_dfsp: bool = False
    frozen_mask: bool = False     # keep the hard 0/1 cutoff fixed

    def __post_init__(self):
        for c in self.stage_channels:
            if c % 2 != 0:
                raise DimensionError(f"stage channels must be even, got {c}")
        if not self.dilation_sequence or any(d < 1 for d in self.dilation_sequence):
            raise ArgumentError(
                f"dilation sequence must be nonempty with entries >= 1, got {self.dilation_sequence}"
            )
        if not (0.0 <= self.gamma <= 1.0):
            raise ArgumentError(f"gamma must lie in [0, 1], got {self.gamma}")
        for p in (self.dropout_sdc, self.dropout_dfsp):
            if not (0.0 <= p < 1.0):
                raise ArgumentError(f"dropout rate must lie in [0, 1), got {p}")

    def with_ablation(self, which: str | None) -> "ModelConfig":
        if which is None:
            return self
        if which == "sdc":
            return replace(self, ablate_sdc=True)
        if which == "raka":
            return replace(self, without_raka=True)
        if which == "dfsp":
            return replace(self, without_dfsp=True)
        raise ArgumentError(f"unknown ablation {which!r} (expected sdc|raka|dfsp)")


@dataclass
class TrainConfig:
    """Toy-scale training schedule; the full-scale schedule is documentation."""

    steps: int = 500
    batch_size: int = 4
    base_lr: float = 3e-4
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    smoothness_lambda: float = 1e-3
    photometric_alpha: float = 0.85
    seed: int = 0
    num_scenes: int = 4
    eval_every: int = 100
    augment: bool = True


_TUPLE_FIELDS = {
    "stage_channels", "sdc_per_stage", "dilation_sequence",
    "input_size", "decoder_channels", "betas",
}


def _format_value(v):
    if isinstance(v, (tuple, list)):
        return ",".join(repr(x) for x in v)
    return repr(v)


def _parse_value(name, text, kind):
    text = text.strip()
    if name in _TUPLE_FIELDS:
        return tuple(_parse_scalar(x) for x in text.split(","))
    return _parse_scalar(text) if kind is not bool else text.lower() in ("1", "true", "yes")


def _parse_scalar(x):
    x = x.strip()
    try:
        return int(x)
    except ValueError:
        return float(x)


def save_config(path, model: ModelConfig, train: TrainConfig | None = None):
    lines = []
    for f in fields(ModelConfig):
        lines.append(f"model.{f.name}={_format_value(getattr(model, f.name))}")
    if train is not None:
        for f in fields(TrainConfig):
            lines.append(f"train.{f.name}={_format_value(getattr(train, f.name))}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_config(path) -> tuple[ModelConfig, TrainConfig]:
    model_kw, train_kw = {}, {}
    model_fields = {f.name: f.type for f in fields(ModelConfig)}
    train_fields = {f.name: f.type for f in fields(TrainConfig)}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ArgumentError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, val = line.split("=", 1)
            key = key.strip()
            if key.startswith("model."):
                name = key[6:]
                if name not in model_fields:
                    raise ArgumentError(f"{path}:{lineno}: unknown model key {name!r}")
                kind = bool if isinstance(getattr(ModelConfig(), name), bool) else None
                model_kw[name] = _parse_value(name, val, kind)
            elif key.startswith("train."):
                name = key[6:]
                if name not in train_fields:
                    raise ArgumentError(f"{path}:{lineno}: unknown train key {name!r}")
                kind = bool if isinstance(getattr(TrainConfig(), name), bool) else None
                train_kw[name] = _parse_value(name, val, kind)
            else:
                raise ArgumentError(f"{path}:{lineno}: keys must start with model./train.")
    return ModelConfig(**model_kw), TrainConfig(**train_kw)
