"""
Grid functions on the regularly spaced grid Ω_h and the discrete operators every other module is built on.

Images are `param.Parameterized` objects wrapping a read-only float64 array in row-major (rows = y, columns = x)
layout. Gradients use forward differences divided by h with a zero difference at the far edge (Neumann), and
`divergence` is the exact negative adjoint of `gradient`.
"""

import logging
import pathlib

import numpy as np
import param
from PIL import Image as PILImage
from scipy import ndimage

from .util import PEAK, TVPhiConfigError, TVPhiException, atomic_write

log = logging.getLogger(__name__)


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


class Image(param.Parameterized):
    """Grayscale image u on a regular grid with spacing h."""

    data = param.Array(
        label='Data',
        doc='2D float64 array of intensities in gray levels, shape (height, width). Nominal range is [0, 255] but values outside are allowed.',
        default=np.zeros((1, 1)),
    )

    h = param.Number(
        label='Grid spacing',
        doc='Spacing of the regular grid. Defaults to 1 (pixel units).',
        default=1.0,
        bounds=(0, None),
        inclusive_bounds=(False, True),
    )

    def __init__(self, data=None, **params):
        if data is not None:
            params['data'] = data
        if 'data' in params:
            params['data'] = _frozen(params['data'])
        super().__init__(**params)

    @param.depends('data', watch=True, on_init=True)
    def _validate(self):
        if self.data.ndim != 2 or self.data.size == 0:
            raise TVPhiException(f'Image data must be a non-empty 2D array, got shape {self.data.shape}')
        if not np.all(np.isfinite(self.data)):
            raise TVPhiException('Image data contains NaN or Inf values')

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape

    def like(self, data):
        """New image on the same grid with different data."""
        return Image(data, h=self.h)


class GradientField(param.Parameterized):
    """Per-pixel 2-vector (g_x, g_y) in gray levels per h."""

    gx = param.Array(label='g_x', doc='Horizontal (column direction) component', default=np.zeros((1, 1)))

    gy = param.Array(label='g_y', doc='Vertical (row direction) component', default=np.zeros((1, 1)))

    h = param.Number(label='Grid spacing', default=1.0, bounds=(0, None), inclusive_bounds=(False, True))

    def __init__(self, **params):
        for k in ('gx', 'gy'):
            if k in params:
                params[k] = _frozen(params[k])
        super().__init__(**params)
        if self.gx.shape != self.gy.shape:
            raise TVPhiConfigError(f'Gradient components differ in shape: {self.gx.shape} vs {self.gy.shape}')

    @property
    def shape(self):
        return self.gx.shape

    def stack(self):
        """Components stacked along a leading axis, shape (2, height, width)."""
        return np.stack([self.gx, self.gy])

    def magnitude(self):
        """Euclidean norm |∇u(k)| per pixel."""
        return np.hypot(self.gx, self.gy)


def as_image(u, h=None):
    """Accept an `Image` or anything array-like and return an `Image`. A given `h` overrides the grid spacing."""
    if isinstance(u, Image):
        return u if h is None or h == u.h else Image(u.data, h=h)
    arr = np.asarray(u, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    return Image(arr, h=1.0 if h is None else h)


def forward_differences(arr):
    """Unscaled forward differences (Δ_x, Δ_y) with zero at the last column / row."""
    dx = np.zeros_like(arr)
    dy = np.zeros_like(arr)
    dx[:, :-1] = arr[:, 1:] - arr[:, :-1]
    dy[:-1, :] = arr[1:, :] - arr[:-1, :]
    return dx, dy


def gradient_arrays(arr, h=1.0):
    dx, dy = forward_differences(arr)
    return dx / h, dy / h


def divergence_arrays(gx, gy, h=1.0):
    """Negative adjoint of `gradient_arrays`: backward differences with the matching boundary rule."""
    out = np.zeros_like(gx)
    out[:, :-1] += gx[:, :-1]
    out[:, 1:] -= gx[:, :-1]
    out[:-1, :] += gy[:-1, :]
    out[1:, :] -= gy[:-1, :]
    return out / h


def gradient(u):
    """Discrete gradient ∇_h u.

    Args:
        u (Image | array-like): Input image

    Returns:
        GradientField: Forward differences divided by h, zero at the last column (g_x) and last row (g_y).
    """
    u = as_image(u)
    gx, gy = gradient_arrays(u.data, u.h)
    return GradientField(gx=gx, gy=gy, h=u.h)


def divergence(g):
    """Discrete divergence, satisfying ⟨gradient(u), g⟩ = −⟨u, divergence(g)⟩.

    Args:
        g (GradientField): Input vector field

    Returns:
        Image: Divergence on the same grid.
    """
    return Image(divergence_arrays(g.gx, g.gy, g.h), h=g.h)


def check_kernel(kernel):
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise TVPhiConfigError(f'Kernel must be 2D with odd side lengths, got shape {kernel.shape}')
    if abs(kernel.sum() - 1.0) > 1e-9:
        raise TVPhiConfigError(f'Kernel must be normalized to sum 1, got {kernel.sum():.12g}')
    return kernel


def convolve_array(arr, kernel):
    """Zero-padded linear convolution restricted to the input grid."""
    return ndimage.convolve(arr, kernel, mode='constant', cval=0.0)


def convolve_separable(arr, profile):
    """Zero-padded convolution with the kernel profile ⊗ profile, one 1D pass per axis."""
    out = ndimage.convolve1d(arr, profile, axis=0, mode='constant', cval=0.0)
    return ndimage.convolve1d(out, profile, axis=1, mode='constant', cval=0.0)


def convolve(u, kernel):
    """Convolve an image with a normalized kernel of odd side length.

    Mass leaving the grid is dropped (zero padding); output has the input's dimensions.

    Raises:
        TVPhiConfigError: Kernel is not normalized or has an even side length
    """
    u = as_image(u)
    kernel = check_kernel(kernel)
    return u.like(convolve_array(u.data, kernel))


def standard_normal(shape, seed):
    """Standard normal samples by the Box–Muller transform of uniforms drawn from numpy's PCG64 generator.

    Identical `seed` and `shape` produce bit-identical samples.
    """
    n = int(np.prod(shape))
    m = (n + 1) // 2
    rng = np.random.Generator(np.random.PCG64(seed))
    u1 = 1.0 - rng.random(m)  # (0, 1] so the log is finite
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
    return z.reshape(shape)


def add_gaussian_noise(u, sigma, seed):
    """Add i.i.d. Gaussian noise of standard deviation `sigma`. No clamping is applied.

    Args:
        u (Image | array-like): Clean image
        sigma (float): Noise standard deviation in gray levels, >= 0
        seed (int): Seed of the PCG64 generator

    Returns:
        Image: Noisy image u + σ·N(0, 1).
    """
    if sigma < 0:
        raise TVPhiConfigError(f'Noise level must be non-negative, got {sigma}')
    u = as_image(u)
    if sigma == 0:
        return u
    return u.like(u.data + sigma * standard_normal(u.shape, seed))


def _pgm_maxval(path):
    """Maxval field of a PGM header. `#` comments run to the end of their line."""
    with open(path, 'rb') as f:
        head = f.read(1024)
    tokens = []
    for line in head.split(b'\n'):
        tokens += line.split(b'#', 1)[0].split()
        if len(tokens) >= 4:
            break
    if len(tokens) < 4 or tokens[0] not in (b'P2', b'P5'):
        raise TVPhiConfigError(f'"{path}" is not a PGM image')
    return int(tokens[3])


def read_pgm(path: str | pathlib.Path, h: float = 1.0):
    """Read an 8-bit grayscale PGM (binary P5 or ASCII P2) with maxval 255.

    Raises:
        TVPhiConfigError: File cannot be read, is not a PGM or has a maxval other than 255
    """
    try:
        maxval = _pgm_maxval(path)
        if maxval != PEAK:
            raise TVPhiConfigError(f'Only PGM images with maxval {PEAK:.0f} are supported, "{path}" has maxval {maxval}')
        with PILImage.open(path) as img:
            if img.mode != 'L':
                raise TVPhiConfigError(f'Only 8-bit grayscale PGM images are supported, "{path}" has mode {img.mode}')
            data = np.asarray(img, dtype=np.float64)
    except (OSError, ValueError) as e:
        raise TVPhiConfigError(f'Cannot read image "{path}": {e}')
    log.debug('read %s (%d x %d)', path, data.shape[1], data.shape[0])
    return Image(data, h=h)


def to_uint8(u):
    """Clamp to [0, 255] and round to 8-bit gray levels."""
    return np.clip(np.rint(as_image(u).data), 0, PEAK).astype(np.uint8)


def write_pgm(u, path: str | pathlib.Path):
    """Write an image as binary P5 PGM with maxval 255. Values are clamped and rounded here only."""
    img = PILImage.fromarray(to_uint8(u))
    with atomic_write(path, 'wb') as f:
        img.save(f, format='PPM')


def two_region_phantom(n=64, low=64.0, high=192.0):
    """Piecewise-constant test image: left half at `low`, right half at `high`, plus a centered square at `low`."""
    data = np.full((n, n), low)
    data[:, n // 2:] = high
    q = n // 4
    data[q:n - q, n // 2 + q // 2:n - q // 2] = low
    return Image(data)


def gaussian_blob(n=64, sigma=10.0, amplitude=128.0):
    """Smooth test image: isotropic Gaussian bump centered on an n×n grid."""
    y, x = np.mgrid[0:n, 0:n] - (n - 1) / 2
    return Image(amplitude * np.exp(-(x ** 2 + y ** 2) / (2 * sigma ** 2)))
