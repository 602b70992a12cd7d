"""Image comparison: windowed SSIM and the L1 + SSIM reconstruction loss."""
from __future__ import annotations

import torch
import torch.nn.functional as F

from ..errors import DimensionMismatch
from .types import Image, as_tensor

SSIM_WINDOW = 8
SSIM_STRIDE = 4
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
SSIM_WEIGHT = 0.25


def _pixels(img) -> torch.Tensor:
    if isinstance(img, Image):
        img = img.rgb
    return as_tensor(img)


def _check(a: torch.Tensor, b: torch.Tensor):
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def ssim_tensor(a: torch.Tensor, b: torch.Tensor, window: int = SSIM_WINDOW,
                stride: int = SSIM_STRIDE) -> torch.Tensor:
    """Mean SSIM over uniform sliding windows and all channels.

    Accepts (H, W, 3) images, or (B, H, W, 3) batches for which one value per
    image is returned.
    """
    _check(a, b)
    batched = a.dim() == 4
    x = (a if batched else a[None]).permute(0, 3, 1, 2)
    y = (b if batched else b[None]).permute(0, 3, 1, 2)
    h, w = x.shape[-2:]
    k = (min(window, h), min(window, w))

    def pool(t):
        return F.avg_pool2d(t, k, stride=stride)

    mu_x, mu_y = pool(x), pool(y)
    var_x = pool(x * x) - mu_x * mu_x
    var_y = pool(y * y) - mu_y * mu_y
    cov = pool(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    per_image = (num / den).flatten(1).mean(1)
    return per_image if batched else per_image[0]


def ssim(a, b) -> float:
    with torch.no_grad():
        return float(ssim_tensor(_pixels(a), _pixels(b)))


def recon_loss_tensor(recon: torch.Tensor, gt: torch.Tensor, beta: float = SSIM_WEIGHT) -> torch.Tensor:
    """L1 + beta * (1 - SSIM); batched (B, H, W, 3) inputs give one loss per image."""
    _check(recon, gt)
    l1 = (recon - gt).abs().flatten(-3).mean(-1)
    if beta == 0:
        return l1
    return l1 + beta * (1 - ssim_tensor(recon, gt))


def recon_loss(recon, gt, beta: float = SSIM_WEIGHT) -> float:
    """Mean absolute error plus ``beta * (1 - SSIM)``."""
    with torch.no_grad():
        return float(recon_loss_tensor(_pixels(recon), _pixels(gt), beta))
