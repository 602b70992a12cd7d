"""Photometric fitting of a fixed-cardinality splat set to posed images."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from ..errors import EmptyScene, NoViews
from .losses import SSIM_WEIGHT, recon_loss_tensor
from .render import render_views_tensor
from .types import DTYPE, CameraView, Image, SplatScene, as_tensor

log = logging.getLogger(__name__)

SCALE_MIN = 1e-5


@dataclass
class FitConfig:
    lr: float = 0.001
    epochs: int = 2000
    beta: float = SSIM_WEIGHT
    background: tuple = (0.0, 0.0, 0.0)


def scene_loss(scene: SplatScene, views, background, beta: float = SSIM_WEIGHT) -> torch.Tensor:
    """Reconstruction loss summed over ``views`` of (Image, CameraView) pairs."""
    gt = torch.stack([as_tensor(img.rgb if isinstance(img, Image) else img) for img, _ in views])
    recon = render_views_tensor(scene, [cam for _, cam in views], background)
    return recon_loss_tensor(recon, gt, beta).sum()


def fit_scene(views: list[tuple[Image, CameraView]], init: SplatScene,
              config: FitConfig | None = None, history: list | None = None) -> SplatScene:
    """Optimize all splat parameters with Adam against the given views.

    Scales are optimized in log space, quaternions as raw 4-vectors that are
    renormalized after each step; opacity and color are clamped to [0, 1].
    The lowest-loss parameters seen are returned, so the result never scores
    worse than ``init``. Per-epoch losses are appended to ``history`` if given.
    """
    config = config or FitConfig()
    if not views:
        raise NoViews("fit_scene needs at least one view")
    if len(init) == 0:
        raise EmptyScene("fit_scene needs a non-empty initial scene")
    init = init.numpy()
    if config.epochs <= 0:
        return init.copy()

    g = torch.tensor(init.g, dtype=DTYPE, requires_grad=True)
    r = torch.tensor(init.r, dtype=DTYPE, requires_grad=True)
    log_s = torch.tensor(np.log(np.maximum(init.s, SCALE_MIN)), dtype=DTYPE, requires_grad=True)
    sigma = torch.tensor(init.sigma, dtype=DTYPE, requires_grad=True)
    c = torch.tensor(init.c, dtype=DTYPE, requires_grad=True)
    opt = torch.optim.Adam([g, r, log_s, sigma, c], lr=config.lr)
    views = [(as_tensor(img.rgb if isinstance(img, Image) else img), cam) for img, cam in views]

    def current():
        return SplatScene(g, r, torch.exp(log_s), sigma, c, init.frame_id)

    best_loss, best = None, None
    for epoch in range(config.epochs + 1):
        opt.zero_grad()
        loss = scene_loss(current(), views, config.background, config.beta)
        value = float(loss.detach())
        if history is not None and epoch < config.epochs:
            history.append(value)
        if best_loss is None or value < best_loss:
            best_loss = value
            best = None if epoch == 0 else current().numpy().copy()
        if epoch == config.epochs:
            break
        loss.backward()
        opt.step()
        with torch.no_grad():
            r /= torch.linalg.norm(r, dim=-1, keepdim=True)
            sigma.clamp_(0.0, 1.0)
            c.clamp_(0.0, 1.0)
        if epoch % 100 == 0:
            log.debug("fit epoch %d loss %.6f", epoch, value)
    return init.copy() if best is None else best


__all__ = ["FitConfig", "fit_scene", "scene_loss"]
