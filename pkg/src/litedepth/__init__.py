"""litedepth: lightweight self-supervised monocular depth estimation built on
a from-scratch differentiable numpy engine.

Layers of the library:

- ``tensor`` / ``ops`` / ``gradcheck``: dense float64 autograd engine.
- ``fft`` / ``spectral``: radix-2 transforms and the purified-spectrum
  global-feature path with its spatial-convolution oracle.
- ``encoder`` / ``depthnet`` / ``model``: the three-stage encoder
  (shuffle-dilation, rotation attention, spectral purification), disparity
  decoder and pose network.
- ``geometry`` / ``losses``: differentiable view synthesis and the
  min-reprojection photometric objective.
- ``optim`` / ``augment`` / ``synthetic`` / ``metrics`` / ``trainer``:
  toy-scale training on procedural scenes.
- ``profile`` / ``bench`` / ``ppm`` / ``cli``: budgets, scaling benchmark,
  image files and the command line.
"""

from .tensor import (
    ArgumentError,
    ContractError,
    DimensionError,
    NumericError,
    Tensor,
    no_grad,
)
from .ops import (
    activation,
    bilinear_upsample,
    channel_shuffle,
    channel_split,
    conv2d,
    grid_sample,
    normalize,
    pool2d,
    resize_bilinear,
)
from .gradcheck import grad_check
from .spectral import (
    ComplexPlanes,
    LowPassMask,
    build_mask,
    dfsp_global,
    fft2,
    ifft2,
    purify,
    spatial_oracle,
)
from .config import ModelConfig, TrainConfig, load_config, save_config
from .encoder import (
    Encoder,
    RotationAttention,
    ShuffleDilationBlock,
    SpectralPurifyBlock,
    adaptive_kernel_size,
    encoder_forward,
    raka_forward,
    raka_rotate,
    sdc_forward,
)
from .depthnet import DepthDecoder, DisparityOutput, PoseNet, decoder_forward, posenet_forward
from .geometry import CameraIntrinsics, Pose, disp_to_depth, project_and_warp
from .losses import (
    LossReport,
    auto_mask,
    min_reprojection,
    photometric_error,
    smoothness_loss,
    ssim,
    total_loss,
)
from .model import DepthModel, build_model, count_params
from .optim import AdamW, adamw_step, cosine_lr
from .augment import augment
from .synthetic import SyntheticScene, make_scene, make_scene_set, render_scene
from .metrics import DepthMetrics, eigen_metrics, spearman
from .trainer import TrainResult, train_loop
from .profile import FlopReport, count_flops
from .bench import BenchmarkCurve, bench_complexity

__version__ = "0.1.0"
