"""
Reconstruction quality metrics reported in experiment tables.
"""
import math

import numpy as np
import param
from skimage.metrics import structural_similarity

from .image import as_image
from .util import PEAK, TVPhiConfigError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _pair(u, ref):
    u, ref = as_image(u), as_image(ref)
    if u.shape != ref.shape:
        raise TVPhiConfigError(f'Image dimensions differ: {u.shape} vs {ref.shape}')
    return u.data, ref.data


def psnr(u, ref):
    """Peak signal-to-noise ratio 10 log10(255² / MSE) in dB; +inf for identical images."""
    a, b = _pair(u, ref)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10 * math.log10(PEAK ** 2 / mse)


def ssim(u, ref):
    """Mean structural similarity over all 11×11 windows lying fully inside the image.

    Gaussian window σ = 1.5, K1 = 0.01, K2 = 0.03, dynamic range 255, population covariances.

    Raises:
        TVPhiConfigError: Dimensions differ or the image is smaller than the window
    """
    a, b = _pair(u, ref)
    if min(a.shape) < SSIM_WINDOW:
        raise TVPhiConfigError(f'SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.shape}')
    return float(structural_similarity(
        a, b,
        data_range=PEAK,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        K1=0.01,
        K2=0.03,
    ))


class MetricPair(param.Parameterized):
    """PSNR and SSIM of one reconstruction."""

    psnr = param.Number(label='PSNR (dB)', default=0.0, doc='Peak signal-to-noise ratio, +inf for a perfect match')

    ssim = param.Number(label='SSIM', default=0.0, bounds=(-1, 1), doc='Mean structural similarity')

    def __str__(self):
        p = 'inf' if math.isinf(self.psnr) else f'{self.psnr:.4f}'
        return f'PSNR={p} SSIM={self.ssim:.4f}'


def measure(u, ref):
    """PSNR and SSIM of `u` against the reference `ref`."""
    return MetricPair(psnr=psnr(u, ref), ssim=ssim(u, ref))
