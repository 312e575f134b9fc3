"""Toy-scale training loop over the synthetic scene set.

Full-scale schedules from the original setting (batch 16, cosine schedule
from 8e-6, 30/60 epochs) are documented in the README; the loop here runs the
same machinery at desk scale with a configurable step budget.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .augment import augment
from .checkpoint import save_arrays
from .config import ModelConfig, TrainConfig
from .geometry import disp_to_depth
from .losses import total_loss
from .metrics import DepthMetrics, eigen_metrics, spearman
from .model import DepthModel, build_model
from .optim import AdamW, cosine_lr
from .synthetic import SyntheticScene, make_scene_set, render_scene
from .tensor import NumericError, Tensor, concat, no_grad

TRACE_COLUMNS = (
    "step", "lr", "total", "photometric", "smoothness", "mask_fraction",
    "abs_rel", "sq_rel", "rmse", "rmse_log", "delta1", "delta2", "delta3",
)


@dataclass
class TrainResult:
    model: DepthModel
    trace: list[dict] = field(default_factory=list)
    initial_loss: float = 0.0
    final_loss: float = 0.0
    metrics: DepthMetrics | None = None
    spearman: float = 0.0

    def trace_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(TRACE_COLUMNS) + "\n")
        for row in self.trace:
            buf.write(",".join(
                repr(row[c]) if c in row else "" for c in TRACE_COLUMNS
            ) + "\n")
        return buf.getvalue()


def _sample_batch(scenes, train_cfg, rng):
    prevs, targets, nexts, depths = [], [], [], []
    K = scenes[0].intrinsics
    for _ in range(train_cfg.batch_size):
        scene = scenes[rng.integers(len(scenes))]
        t = int(rng.integers(1, len(scene) - 1))
        ip, it, inx, d = render_scene(scene, t)
        prevs.append(ip)
        targets.append(it)
        nexts.append(inx)
        depths.append(d)
    return (
        np.stack(prevs), np.stack(targets), np.stack(nexts), np.stack(depths), K
    )


def evaluate(model: DepthModel, scenes, train_cfg: TrainConfig):
    """Median-scaled depth metrics over one held-out frame per scene, plus
    the mean per-scene rank correlation between predicted and true inverse
    depth (per-scene, so cross-scene scale differences do not blur ranking)."""
    model.eval()
    disps, gts = [], []
    with no_grad():
        for scene in scenes:
            _, target, _, gt = render_scene(scene, len(scene) // 2)
            disp = model.predict_disparity(Tensor(target[None]))[0]
            disps.append(disp.data[0, 0])
            gts.append(gt)
    model.train()
    disp = np.stack(disps)
    gt = np.stack(gts)
    depth = disp_to_depth(Tensor(disp[:, None]), model.cfg.min_depth,
                          model.cfg.max_depth).data[:, 0]
    m = eigen_metrics(depth, gt)
    rho = float(np.mean([spearman(d, 1.0 / g) for d, g in zip(disps, gts)]))
    return m, rho


def train_loop(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    scenes: list[SyntheticScene] | None = None,
    trace_path=None,
    checkpoint_path=None,
) -> TrainResult:
    seed = train_cfg.seed
    if scenes is None:
        scenes = make_scene_set(train_cfg.num_scenes, seed, model_cfg.input_size)
    model = build_model(model_cfg, seed)
    opt = AdamW(
        list(model.named_parameters()),
        lr=train_cfg.base_lr,
        betas=train_cfg.betas,
        eps=train_cfg.adam_eps,
        weight_decay=train_cfg.weight_decay,
    )
    rng = np.random.default_rng((seed, 0xD1CE))
    result = TrainResult(model=model)
    last_good = {name: arr.copy() for name, arr in model.state_arrays()}

    for step in range(train_cfg.steps):
        lr = cosine_lr(step, train_cfg.steps, train_cfg.base_lr)
        prev, target, nxt, _, K = _sample_batch(scenes, train_cfg, rng)
        if train_cfg.augment:
            (prev, target, nxt), K = augment((prev, target, nxt), K, rng)
        t_prev, t_tgt, t_nxt = Tensor(prev), Tensor(target), Tensor(nxt)

        disps = model.predict_disparity(t_tgt, rng)
        pose_p = model.posenet(concat([t_tgt, t_prev], axis=1))
        pose_n = model.posenet(concat([t_tgt, t_nxt], axis=1))
        report = total_loss(
            t_tgt, [t_prev, t_nxt], disps, [pose_p, pose_n], K,
            lam=train_cfg.smoothness_lambda, alpha=train_cfg.photometric_alpha,
            min_depth=model_cfg.min_depth, max_depth=model_cfg.max_depth,
        )
        loss_val = report.value()
        if not np.isfinite(loss_val):
            if checkpoint_path is not None:
                save_arrays(checkpoint_path, last_good)
            raise NumericError(
                f"non-finite loss at step {step}; last good state "
                f"{'saved to ' + str(checkpoint_path) if checkpoint_path else 'discarded'}"
            )
        model.zero_grad()
        report.total.backward()
        opt.step(lr)
        model.clamp_masks()

        if step == 0:
            result.initial_loss = loss_val
        row = {
            "step": step,
            "lr": lr,
            "total": loss_val,
            "photometric": report.photometric,
            "smoothness": report.smoothness,
            "mask_fraction": report.mask_fraction,
        }
        if train_cfg.eval_every and (step + 1) % train_cfg.eval_every == 0:
            m, rho = evaluate(model, scenes, train_cfg)
            row.update(
                abs_rel=m.abs_rel, sq_rel=m.sq_rel, rmse=m.rmse,
                rmse_log=m.rmse_log, delta1=m.delta1, delta2=m.delta2,
                delta3=m.delta3,
            )
            result.metrics = m
            result.spearman = rho
        result.trace.append(row)
        if step % 25 == 0:
            last_good = {name: arr.copy() for name, arr in model.state_arrays()}

    result.final_loss = result.trace[-1]["total"]
    if result.metrics is None:
        m, rho = evaluate(model, scenes, train_cfg)
        result.metrics = m
        result.spearman = rho
    if trace_path is not None:
        with open(trace_path, "w") as fh:
            fh.write(result.trace_csv())
    if checkpoint_path is not None:
        save_arrays(checkpoint_path, dict(model.state_arrays()))
    return result
