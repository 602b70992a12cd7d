"""Camera rig around the table and ray-cast RGBD observation of particles."""
from __future__ import annotations

import numpy as np

from ..scene_init import RGBDObservation
from ..splat_core import CameraView, Image
from .physics import ParticleState, SimConfig


def make_rig(n_cameras: int = 8, config: SimConfig | None = None, distance: float = 0.5,
             elevation_deg: float = 45.0, size: int = 64, margin_px: float = 2.0) -> list[CameraView]:
    """Cameras evenly spaced in azimuth, all looking at the table center.

    The focal length is the largest that keeps every workspace corner (at the
    table and at twice the particle height) inside every image.
    """
    config = config or SimConfig()
    h = config.half_extent
    elev = np.deg2rad(elevation_deg)
    corners = np.array([[x, y, z] for x in (-h, h) for y in (-h, h)
                        for z in (0.0, 2 * config.radius)])
    eyes = []
    for k in range(n_cameras):
        az = 2 * np.pi * k / n_cameras
        eyes.append(distance * np.array([np.cos(elev) * np.cos(az),
                                         np.cos(elev) * np.sin(az), np.sin(elev)]))
    half_px = (size - 1) / 2 - margin_px
    extent = 0.0
    for eye in eyes:
        cam = CameraView.look_at(eye, [0, 0, 0], 1.0, 1.0, size, size)
        pc = cam.to_camera(corners)
        extent = max(extent, float(np.abs(pc[:, :2] / pc[:, 2:3]).max()))
    f = half_px / extent
    return [CameraView.look_at(eye, [0, 0, 0], f, f, size, size) for eye in eyes]


def _pixel_rays(cam: CameraView):
    v, u = np.mgrid[0:cam.height, 0:cam.width]
    dirs_cam = np.stack([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, np.ones(u.shape)], -1)
    # Direction scaled so that the camera-frame z component is 1: ray
    # parameter t equals depth.
    return dirs_cam.reshape(-1, 3) @ cam.rotation


def observe(state: ParticleState, rig: list[CameraView], config: SimConfig | None = None) -> list[RGBDObservation]:
    """Flat-shaded RGBD images of the particles (spheres of the state's
    radius) on a flat table at z = 0."""
    config = config or SimConfig()
    pcol = np.asarray(config.particle_color, dtype=np.float64)
    bcol = np.asarray(config.background_color, dtype=np.float64)
    out = []
    for cam in rig:
        origin = cam.center
        dirs = _pixel_rays(cam)
        depth = np.zeros(len(dirs))
        with np.errstate(divide="ignore", invalid="ignore"):
            t_table = np.where(dirs[:, 2] < 0, -origin[2] / dirs[:, 2], np.inf)
        depth_best = t_table.copy()
        hit_particle = np.zeros(len(dirs), dtype=bool)
        if len(state):
            oc = origin - state.positions                      # (n, 3)
            a = (dirs * dirs).sum(-1)                          # (P,)
            b = 2 * dirs @ oc.T                                # (P, n)
            c = (oc * oc).sum(-1) - state.radius ** 2          # (n,)
            disc = b * b - 4 * a[:, None] * c[None, :]
            with np.errstate(invalid="ignore"):
                t = (-b - np.sqrt(disc)) / (2 * a[:, None])
            t = np.where((disc >= 0) & (t > 0), t, np.inf)
            t_sph = t.min(1)
            hit_particle = t_sph < depth_best
            depth_best = np.minimum(depth_best, t_sph)
        valid = np.isfinite(depth_best)
        depth[valid] = depth_best[valid]
        rgb = np.where(hit_particle[:, None], pcol, bcol)
        rgb[~valid] = 0.0
        img = Image(rgb.reshape(cam.height, cam.width, 3), depth.reshape(cam.height, cam.width))
        out.append(RGBDObservation(img, cam))
    return out
