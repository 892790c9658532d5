"""Articulated volumetric primitives: synthetic scenes, differentiable ray
marching, and inverse fitting of texel-aligned payloads and correctives."""

from avp._core import (
    AvpError,
    eval_scene,
    fit_scene,
    gen_scene,
    gradcheck,
    psnr,
    read_pfm,
    render_scene,
    scene_presets,
    texel_count,
    unwrap_scene,
    write_pfm,
)

__all__ = [
    "AvpError",
    "eval_scene",
    "fit_scene",
    "gen_scene",
    "gradcheck",
    "psnr",
    "read_pfm",
    "render_scene",
    "scene_presets",
    "texel_count",
    "unwrap_scene",
    "write_pfm",
]
