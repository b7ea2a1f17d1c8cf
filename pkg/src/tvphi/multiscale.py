"""
Multiscale analysis functional η on lifted gradients.

For an image u the lifting U = (1, u) has the discrete derivative DU(k) = (1, ∇_h u(k)), whose per-cell norm is
√(1 + |∇_h u(k)|²). Each level compares the total variation of DU with the total variation of its mollification at
scale ε_ℓ:

    η_ℓ(u) = Σ h² [ √(1 + |∇_h u|²) − √(1 + |ρ_ε_ℓ ∗ ∇_h u|²) ]

with the gradient extended by zero outside the grid and the sum running over the whole extended support, the
discrete counterpart of integrating over R^n. The mollifiers are discrete Gaussians e^(−t) I_n(t), t = ε², which form
an exact semigroup on the integer lattice; truncation to a finite radius is the only source of semigroup defect.
"""

import logging
import math
from functools import lru_cache

import numpy as np
import param
from scipy import signal, special

from .image import Image, as_image, convolve_separable, divergence_arrays, gradient_arrays
from .util import TVPhiConfigError

log = logging.getLogger(__name__)


@lru_cache(maxsize=64)
def discrete_gaussian_profile(eps, truncate=4.0, margin=2):
    """Normalized 1D discrete Gaussian e^(−ε²) I_n(ε²) for |n| <= ceil(truncate·ε) + margin. Read-only, shared."""
    if eps <= 0:
        raise TVPhiConfigError(f'Mollifier scale must be positive, got {eps}')
    r = int(math.ceil(truncate * eps)) + margin
    n = np.arange(-r, r + 1)
    k1 = special.ive(n, eps * eps)
    k1 /= k1.sum()
    k1.setflags(write=False)
    return k1


@lru_cache(maxsize=64)
def discrete_gaussian(eps, truncate=4.0, margin=2):
    """Normalized 2D discrete Gaussian kernel of standard deviation `eps` pixels.

    The kernel is the outer product of `discrete_gaussian_profile`. The returned array is read-only and shared
    between callers.
    """
    k1 = discrete_gaussian_profile(eps, truncate, margin)
    k2 = np.outer(k1, k1)
    k2 /= k2.sum()
    k2.setflags(write=False)
    return k2


class MollifierFamily(param.Parameterized):
    """Family {ρ_ε} of discrete Gaussian mollifiers with dyadic scales ε_ℓ = ε_1 2^-(ℓ-1), ℓ = 1..levels."""

    eps1 = param.Number(
        label='ε_1',
        doc='Largest scale (standard deviation in pixels) of the family.',
        default=1.0,
        bounds=(0, None),
        inclusive_bounds=(False, True)
    )

    levels = param.Integer(
        label='Levels',
        doc='Number of precomputed scales K_max.',
        default=3,
        bounds=(1, 32)
    )

    eta0 = param.Number(
        label='η_0',
        doc='Weight of the multiscale functional η.',
        default=1.0,
        bounds=(0, None)
    )

    truncate = param.Number(
        label='Truncation',
        doc='Kernel radius in units of ε, rounded up. A fixed margin of pixels is added on top.',
        default=4.0,
        bounds=(1, None)
    )

    margin = param.Integer(
        label='Margin (px)',
        doc='Extra kernel radius in pixels. Keeps the heavier tails of small-scale discrete kernels.',
        default=2,
        bounds=(0, None)
    )

    custom_scales = param.List(
        label='Custom scales',
        doc='Optional explicit scale list overriding the dyadic sequence. Used to build non-nested families.',
        default=None,
        allow_None=True
    )

    enforce_nested = param.Boolean(
        label='Enforce nested',
        doc='Reject scale lists that are not strictly decreasing.',
        default=True
    )

    def __init__(self, **params):
        self._kernels = []
        self._profiles = []
        super().__init__(**params)

    @param.output(param.Array(label='Scales', doc='Scale ε_ℓ of every level'))
    @param.depends('eps1', 'levels', 'custom_scales')
    def scales(self):
        if self.custom_scales is not None:
            return np.asarray(self.custom_scales, dtype=np.float64)
        return self.eps1 * 2.0 ** -np.arange(self.levels)

    @property
    def K_max(self):
        return len(self.scales())

    @param.depends('eps1', 'levels', 'custom_scales', 'truncate', 'margin', 'enforce_nested', watch=True, on_init=True)
    def _update_kernels(self):
        """Precompute the kernel of every level. Runs automatically whenever a scale parameter changes."""
        eps = self.scales()
        if len(eps) == 0 or np.any(eps <= 0):
            raise TVPhiConfigError('Mollifier scales must be positive')
        if self.enforce_nested and not np.all(np.diff(eps) < 0):
            raise TVPhiConfigError('Mollifier scales must be strictly decreasing')
        self._kernels = [self.kernel(e) for e in eps]
        self._profiles = [self.profile(e) for e in eps]

    def kernel(self, eps):
        """Normalized kernel ρ_ε for any scale ε > 0."""
        return discrete_gaussian(float(eps), float(self.truncate), int(self.margin))

    def profile(self, eps):
        """1D profile of ρ_ε; ρ_ε is its outer product with itself."""
        return discrete_gaussian_profile(float(eps), float(self.truncate), int(self.margin))

    def _check(self, level):
        if not 1 <= level <= len(self._kernels):
            raise TVPhiConfigError(f'Level {level} out of range 1..{len(self._kernels)}')

    def level_kernel(self, level):
        """Kernel of level ℓ (1-based)."""
        self._check(level)
        return self._kernels[level - 1]

    def level_profile(self, level):
        """1D profile of the level ℓ kernel."""
        self._check(level)
        return self._profiles[level - 1]

    def semigroup_defect(self):
        """L¹ distance ‖ρ_√(ε²+δ²) − ρ_ε ∗ ρ_δ‖ for every pair of adjacent levels (ε, δ)."""
        eps = self.scales()
        out = []
        for e, d in zip(eps[:-1], eps[1:]):
            composed = signal.convolve(self.kernel(e), self.kernel(d), mode='full')
            direct = self.kernel(math.hypot(e, d))
            size = max(composed.shape[0], direct.shape[0])
            out.append(float(np.abs(_center_pad(composed, size) - _center_pad(direct, size)).sum()))
        return out


def _center_pad(k, size):
    p = (size - k.shape[0]) // 2
    return np.pad(k, p)


class LiftedGradient(param.Parameterized):
    """Discrete derivative DU of the lifting U(x) = (1, u(x)): per cell the 3-vector (1, g_x, g_y)."""

    components = param.Array(label='Components', doc='Array of shape (3, height, width)', default=np.zeros((3, 1, 1)))

    h = param.Number(label='Grid spacing', default=1.0, bounds=(0, None), inclusive_bounds=(False, True))

    def magnitude(self):
        """Per-cell norm |DU(k)| = √(1 + |∇_h u(k)|²)."""
        return np.sqrt(np.sum(self.components ** 2, axis=0))


def lift(u):
    """Lift an image to the per-cell derivative (1, ∇_h u)."""
    u = as_image(u)
    gx, gy = gradient_arrays(u.data, u.h)
    return LiftedGradient(components=np.stack([np.ones_like(gx), gx, gy]), h=u.h)


def _area_excess(gx, gy):
    """√(1 + |g|²) − 1, accurate for small |g|."""
    s = gx ** 2 + gy ** 2
    return s / (np.sqrt(1 + s) + 1)


def _mollify(gx, gy, profile):
    """Componentwise mollification of the zero-extended field over grid ⊕ kernel radius, one pass per axis."""
    r = len(profile) // 2
    return convolve_separable(np.pad(gx, r), profile), convolve_separable(np.pad(gy, r), profile)


def _check_level(family, level):
    if not 1 <= level <= family.K_max:
        raise TVPhiConfigError(f'Level {level} out of range 1..{family.K_max}')


def _eta_level_arrays(gx, gy, h, profile):
    mx, my = _mollify(gx, gy, profile)
    return h * h * (np.sum(_area_excess(gx, gy)) - np.sum(_area_excess(mx, my)))


def _clamp_dust(value, u, what):
    if value >= 0:
        return float(value)
    scale = 1e-9 * max(1.0, float(np.linalg.norm(u.data)))
    if value < -scale:
        log.warning('%s is negative (%.3e) beyond round-off; clamping to 0', what, value)
    return 0.0


def eta_level(u, family, level):
    """Level term η_ℓ(DU) >= 0.

    Args:
        u (Image | array-like): Input image
        family (MollifierFamily): Mollifier family
        level (int): Level ℓ, 1-based

    Raises:
        TVPhiConfigError: Level out of range
    """
    _check_level(family, level)
    u = as_image(u)
    gx, gy = gradient_arrays(u.data, u.h)
    value = _eta_level_arrays(gx, gy, u.h, family.level_profile(level))
    return _clamp_dust(value, u, f'η_{level}')


def eta(u, family, K=None):
    """Truncated multiscale functional η_0 Σ_{ℓ=1}^K η_ℓ(DU). K defaults to all levels of the family."""
    K = family.K_max if K is None else K
    if not 0 <= K <= family.K_max:
        raise TVPhiConfigError(f'K = {K} out of range 0..{family.K_max}')
    if K == 0 or family.eta0 == 0:
        return 0.0
    u = as_image(u)
    return family.eta0 * sum(eta_level(u, family, ell) for ell in range(1, K + 1))


def eta_levels(u, family):
    """All level terms η_1, ..., η_Kmax."""
    u = as_image(u)
    return [eta_level(u, family, ell) for ell in range(1, family.K_max + 1)]


def eta_level_decreasing_check(u, family):
    """True iff η_ℓ >= η_{ℓ+1} − tol for all adjacent levels, tol = 1e-6 η_1 + 1e-12."""
    if family.K_max < 2:
        raise TVPhiConfigError('Level monotonicity needs at least two levels')
    values = eta_levels(u, family)
    tol = 1e-6 * values[0] + 1e-12
    ok = all(a >= b - tol for a, b in zip(values[:-1], values[1:]))
    if not ok:
        log.info('η levels not decreasing: %s', values)
    return ok


def _lp_norm(gx, gy, h, p):
    return float((h * h * np.sum(np.hypot(gx, gy) ** p)) ** (1.0 / p))


def eta_bar_level(g, family, level, p=2.0):
    """L^p level term ‖g‖_p − ‖ρ_ε_ℓ ∗ g‖_p of a vector field, h²-weighted discrete norms, zero extension.

    Args:
        g (GradientField): Vector field
        family (MollifierFamily): Mollifier family
        level (int): Level ℓ, 1-based
        p (float, optional): Exponent in (1, ∞). Defaults to 2.
    """
    if not p > 1 or math.isinf(p):
        raise TVPhiConfigError(f'Exponent p must lie in (1, ∞), got {p}')
    _check_level(family, level)
    mx, my = _mollify(g.gx, g.gy, family.level_profile(level))
    return _lp_norm(g.gx, g.gy, g.h, p) - _lp_norm(mx, my, g.h, p)


def eta_bar(g, family, K=None, p=2.0):
    """η̄(g) = η_0 Σ_{ℓ=1}^K η̄_ℓ(g)."""
    K = family.K_max if K is None else K
    return family.eta0 * sum(eta_bar_level(g, family, ell, p) for ell in range(1, K + 1))


def eta_gradient(u, family, K=None):
    """First variation of η with respect to u.

    With V_ℓ = h² [∇u / √(1+|∇u|²) − ρ̃_ℓ ∗ (m_ℓ / √(1+|m_ℓ|²))], m_ℓ = ρ_ℓ ∗ ∇u, the gradient is
    −div(η_0 Σ_ℓ V_ℓ). The reflected kernel ρ̃ equals ρ since the discrete Gaussians are symmetric.

    Returns:
        Image: Gradient field on the grid of u.
    """
    K = family.K_max if K is None else K
    if not 0 <= K <= family.K_max:
        raise TVPhiConfigError(f'K = {K} out of range 0..{family.K_max}')
    u = as_image(u)
    gx, gy = gradient_arrays(u.data, u.h)
    if K == 0 or family.eta0 == 0:
        return u.like(np.zeros_like(u.data))
    f = np.sqrt(1 + gx ** 2 + gy ** 2)
    vx = np.zeros_like(gx)
    vy = np.zeros_like(gy)
    for ell in range(1, K + 1):
        profile = family.level_profile(ell)
        r = len(profile) // 2
        mx, my = _mollify(gx, gy, profile)
        fm = np.sqrt(1 + mx ** 2 + my ** 2)
        crop = (slice(r, r + gx.shape[0]), slice(r, r + gx.shape[1]))
        vx += gx / f - convolve_separable(mx / fm, profile[::-1])[crop]
        vy += gy / f - convolve_separable(my / fm, profile[::-1])[crop]
    scale = family.eta0 * u.h * u.h
    return Image(-divergence_arrays(scale * vx, scale * vy, u.h), h=u.h)
