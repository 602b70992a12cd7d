"""Gaussian splat representation: data model, rasterizer, losses, fitting
and density field."""
from .density import density, density_field
from .fit import FitConfig, fit_scene, scene_loss
from .losses import recon_loss, recon_loss_tensor, ssim, ssim_tensor
from .render import (build_covariance, covariances, project_covariance, render, render_tensor,
                     render_views_tensor)
from .types import (CameraView, Image, Splat, SplatScene, as_numpy, as_tensor,
                    normalize_quat, quat_about_axis, quat_multiply, quat_to_rotmat)
