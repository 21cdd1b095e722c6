"""Audio-assisted face video restoration: synthetic clips, degradations,
restoration model and quality metrics, backed by the C++ core."""

from ._gavn import (
    bicubic_resize,
    compress_proxy,
    conv2d,
    gaussian_blur,
    gen_clip,
    gradcheck,
    load_clip_dir,
    ms_ssim,
    pixel_shuffle,
    psnr,
    restore_dir,
    save_clip_dir,
    ssim,
)

__all__ = [
    "bicubic_resize",
    "compress_proxy",
    "conv2d",
    "gaussian_blur",
    "gen_clip",
    "gradcheck",
    "load_clip_dir",
    "ms_ssim",
    "pixel_shuffle",
    "psnr",
    "restore_dir",
    "save_clip_dir",
    "ssim",
]
