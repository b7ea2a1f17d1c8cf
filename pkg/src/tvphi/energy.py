"""
This module defines the energy integrand φ and the discrete TV^φ functionals built from it.

`PhiSpec` leverages the 'param' library in the same way the rest of this package does: every constant of the
integrand (exponent q, cut-off M, Huber knee γ, slope, scale a) is a documented class-level parameter, and
invalid combinations are rejected by a dependency hook that runs on construction and on every update.

All functionals take an `Image` (or array) and sum in a fixed order, so results are deterministic.
"""

import math

import numpy as np
import param

from .image import as_image, convolve_separable, forward_differences, gradient_arrays
from .util import TVPhiConfigError, TVPhiDomainError

VARIANTS = ('power', 'linearized', 'huber', 'linear', 'rational', 'log')

# all functionals are defined on 2D grids
DIM = 2


class PhiSpec(param.Parameterized):
    """Integrand φ: [0, ∞) → [0, ∞) of a TV^φ energy.

    Variants:
        power       φ(t) = t^q
        linearized  φ(t) = t^q for t <= M, (1-q)M^q + q M^(q-1) t above
        huber       Huber regularization of (1/q) t^q with knee γ
        linear      φ(t) = slope · t
        rational    φ(t) = a t / (1 + a t)
        log         φ(t) = log(1 + a t)

    Any variant can additionally be Huber-smoothed with knee `gamma` (see `smoothed`); for the `huber`
    variant the knee is mandatory.
    """

    variant = param.Selector(
        label='Variant',
        objects=list(VARIANTS),
        default='power',
        doc='Closed form of the integrand. See class documentation for the formulas.'
    )

    q = param.Number(
        label='Exponent q',
        doc='Exponent of the t^q based variants (power, linearized, huber). Must lie in (0, 2).',
        default=0.5,
        bounds=(0, 2),
        inclusive_bounds=(False, False)
    )

    M = param.Number(
        label='Cut-off M',
        doc='Gradient magnitude (gray levels per h) above which the linearized variant follows the tangent line of t^q.',
        default=10.0,
        bounds=(0, None),
        inclusive_bounds=(False, True)
    )

    gamma = param.Number(
        label='Huber knee γ',
        doc='Knee of the quadratic smoothing near t = 0. Zero disables smoothing (not allowed for the huber variant).',
        default=0.0,
        bounds=(0, None)
    )

    slope = param.Number(
        label='Slope',
        doc='Slope of the linear variant.',
        default=1.0,
        bounds=(0, None),
        inclusive_bounds=(False, True)
    )

    a = param.Number(
        label='Scale a',
        doc='Scale of the rational and log variants; equals φ_0 for both.',
        default=1.0,
        bounds=(0, None),
        inclusive_bounds=(False, True)
    )

    def __init__(self, **params):
        self._offset = 0.0
        super().__init__(**params)

    @param.depends('variant', 'q', 'M', 'gamma', 'slope', 'a', watch=True, on_init=True)
    def _update_smoothing(self):
        """Validate the parameter combination and cache the constant that keeps the smoothed φ at φ(0) = 0."""
        if self.variant == 'huber' and self.gamma <= 0:
            raise TVPhiConfigError('The huber variant requires a knee gamma > 0')
        if self.gamma > 0:
            g = self.gamma
            self._offset = self._base(np.float64(g)) - 0.5 * g * self._base_prime(np.float64(g))
        else:
            self._offset = 0.0

    def __repr__(self):
        keys = {
            'power': ('q',), 'linearized': ('q', 'M'), 'huber': ('q',), 'linear': ('slope',),
            'rational': ('a',), 'log': ('a',)
        }[self.variant]
        args = ', '.join(f'{k}={getattr(self, k):g}' for k in keys)
        if self.gamma > 0:
            args += f', gamma={self.gamma:g}'
        return f'PhiSpec.{self.variant}({args})'

    # constructors

    @classmethod
    def power(cls, q, **params):
        return cls(variant='power', q=q, **params)

    @classmethod
    def linearized(cls, q, M, **params):
        return cls(variant='linearized', q=q, M=M, **params)

    @classmethod
    def huber(cls, q, gamma):
        return cls(variant='huber', q=q, gamma=gamma)

    @classmethod
    def linear(cls, slope=1.0, **params):
        return cls(variant='linear', slope=slope, **params)

    @classmethod
    def rational(cls, a, **params):
        return cls(variant='rational', a=a, **params)

    @classmethod
    def log(cls, a, **params):
        return cls(variant='log', a=a, **params)

    @classmethod
    def from_cutoff(cls, q, M):
        """Integrand of the denoising protocol: M = ∞ is plain t^q, M = 0 is plain TV, otherwise linearized t^q."""
        if math.isinf(M):
            return cls.power(q)
        if M == 0:
            return cls.linear(1.0)
        return cls.linearized(q, M)

    def smoothed(self, gamma):
        """Copy of this integrand Huber-smoothed with knee `gamma`:

        φ_γ(t) = φ'(γ) t² / (2γ) for t <= γ, and φ(t) − (φ(γ) − γ φ'(γ)/2) above.
        """
        values = {k: v for k, v in self.param.values().items() if k != 'name'}
        return PhiSpec(**(values | {'gamma': gamma}))

    # unsmoothed closed forms

    def _base(self, t):
        v, q = self.variant, self.q
        if v == 'power':
            return t ** q
        if v == 'linearized':
            M = self.M
            return np.where(t <= M, np.minimum(t, M) ** q, (1 - q) * M ** q + q * M ** (q - 1) * t)
        if v == 'huber':
            return t ** q / q
        if v == 'linear':
            return self.slope * t
        if v == 'rational':
            return self.a * t / (1 + self.a * t)
        return np.log1p(self.a * t)

    def _base_prime(self, t):
        v, q = self.variant, self.q
        if v in ('power', 'linearized', 'huber') and q < 1 and np.any(t == 0):
            raise TVPhiDomainError(f'Derivative of t^{q:g} is singular at t = 0')
        with np.errstate(divide='ignore'):
            if v == 'power':
                return q * t ** (q - 1)
            if v == 'linearized':
                M = self.M
                return np.where(t <= M, q * np.minimum(t, M) ** (q - 1), q * M ** (q - 1))
            if v == 'huber':
                return t ** (q - 1)
        if v == 'linear':
            return np.full_like(t, self.slope)
        if v == 'rational':
            return self.a / (1 + self.a * t) ** 2
        return self.a / (1 + self.a * t)

    # public evaluation

    def eval(self, t):
        """φ(t), vectorized over arrays.

        Raises:
            TVPhiDomainError: Any t < 0
        """
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0):
            raise TVPhiDomainError('φ is only defined for t >= 0')
        if self.gamma <= 0:
            return self._base(t)
        g = self.gamma
        slope = self._base_prime(np.float64(g))
        inner = slope * t ** 2 / (2 * g)
        outer = self._base(np.maximum(t, g)) - self._offset
        return np.where(t <= g, inner, outer)

    def prime(self, t):
        """φ'(t), vectorized over arrays.

        Raises:
            TVPhiDomainError: t < 0, or t = 0 for an unsmoothed t^q with q < 1
        """
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0):
            raise TVPhiDomainError('φ is only defined for t >= 0')
        if self.gamma <= 0:
            return self._base_prime(t)
        g = self.gamma
        slope = self._base_prime(np.float64(g))
        return np.where(t <= g, slope * t / g, self._base_prime(np.maximum(t, g)))

    def __call__(self, t):
        return self.eval(t)

    def phi_infty(self):
        """Recession constant φ^∞ = lim φ(t)/t as t → ∞."""
        v, q = self.variant, self.q
        if v in ('power', 'huber'):
            return 0.0 if q < 1 else (1.0 if q == 1 else math.inf)
        if v == 'linearized':
            return q * self.M ** (q - 1)
        if v == 'linear':
            return self.slope
        return 0.0

    def phi_zero(self):
        """Slope at the origin φ_0 = lim φ(t)/t as t ↘ 0."""
        if self.gamma > 0:
            return 0.0
        v, q = self.variant, self.q
        if v in ('power', 'linearized'):
            return math.inf if q < 1 else (1.0 if q == 1 else 0.0)
        if v == 'linear':
            return self.slope
        return self.a


class EnergyParams(param.Parameterized):
    """Regularization weight α together with its asymptotic counterpart α^∞ = α φ^∞."""

    alpha = param.Number(label='α', doc='Regularization weight', default=1.0, bounds=(0, None))

    phi = param.ClassSelector(class_=PhiSpec, label='φ', doc='Integrand the weight applies to')

    @param.output(param.Number(label='α^∞', doc='Asymptotic weight α φ^∞'))
    @param.depends('alpha', 'phi')
    def alpha_infty(self):
        return self.alpha * self.phi.phi_infty()

    @classmethod
    def from_alpha_infty(cls, alpha_infty, phi):
        """Weight α holding α^∞ fixed. When φ^∞ = 0 the asymptotic weight is taken as α itself."""
        pinf = phi.phi_infty()
        alpha = alpha_infty / pinf if 0 < pinf < math.inf else alpha_infty
        return cls(alpha=alpha, phi=phi)


def phi_eval(spec, t):
    return spec.eval(t)


def phi_prime(spec, t):
    return spec.prime(t)


def phi_infty(spec):
    return spec.phi_infty()


def phi_zero(spec):
    return spec.phi_zero()


def validate_class_Was(spec, samples, min_slope=1e-3):
    """Sampling check of the linear-growth sandwich c t − b <= φ(t) <= C (1 + t).

    The lower slope c is the secant slope of φ over the two largest samples, b the smallest offset making the lower
    bound hold on all samples, and C the smallest constant making the upper bound hold. Membership is reported when
    c >= `min_slope`; sublinear integrands have c → 0 as the sample range grows.

    Args:
        spec (PhiSpec): Integrand to check
        samples (array-like): At least two non-negative sample points
        min_slope (float, optional): Smallest lower slope accepted as linear growth. Defaults to 1e-3.

    Returns:
        tuple: (member, witness) with witness a dict of c, b, C.
    """
    t = np.unique(np.asarray(samples, dtype=np.float64))
    if t.size < 2 or np.any(t < 0):
        raise TVPhiConfigError('Need at least two distinct non-negative samples')
    f = spec.eval(t)
    c = float((f[-1] - f[-2]) / (t[-1] - t[-2]))
    b = float(max(0.0, np.max(c * t - f)))
    C = float(np.max(f / (1 + t)))
    member = bool(c >= min_slope and math.isfinite(C))
    return member, {'c': c, 'b': b, 'C': C}


def _cell_area(h):
    return h ** DIM


def tv_phi_d(u, spec):
    """Discrete model Σ_k Σ_i h^(m−1) φ(|u(k+e_i) − u(k)|), forward differences, Neumann boundary."""
    u = as_image(u)
    dx, dy = forward_differences(u.data)
    return float(u.h ** (DIM - 1) * (np.sum(spec.eval(np.abs(dx))) + np.sum(spec.eval(np.abs(dy)))))


def tv_phi_c(u, spec):
    """Continuous model Σ_k h^m φ(|∇_h u(k)|) with the Euclidean norm of the gradient."""
    u = as_image(u)
    gx, gy = gradient_arrays(u.data, u.h)
    return float(_cell_area(u.h) * np.sum(spec.eval(np.hypot(gx, gy))))


def tv_phi_sc(u, spec, jump_threshold=math.inf):
    """Surrogate of ∫φ(|∇u|) + φ^∞|D^s u|: cells with |∇_h u| above `jump_threshold` are charged φ^∞ |∇_h u|."""
    u = as_image(u)
    gx, gy = gradient_arrays(u.data, u.h)
    t = np.hypot(gx, gy)
    jump = t > jump_threshold
    pinf = spec.phi_infty()
    cost = np.where(jump, pinf * t if math.isfinite(pinf) else np.where(t > 0, math.inf, 0.0), spec.eval(t))
    return float(_cell_area(u.h) * np.sum(cost))


def tv_phi_c_eps(u, spec, family, eps):
    """Mollified-gradient energy Σ h^m φ(|ρ_ε ∗ ∇_h u|), summed over the zero-extended domain."""
    if eps <= 0:
        raise TVPhiConfigError(f'Mollifier scale must be positive, got {eps}')
    u = as_image(u)
    gx, gy = gradient_arrays(u.data, u.h)
    profile = family.profile(eps)
    r = len(profile) // 2
    mx = convolve_separable(np.pad(gx, r), profile)
    my = convolve_separable(np.pad(gy, r), profile)
    return float(_cell_area(u.h) * np.sum(spec.eval(np.hypot(mx, my))))


def area_functional(u):
    """Discrete area Σ h^m √(1 + |∇_h u|²)."""
    u = as_image(u)
    gx, gy = gradient_arrays(u.data, u.h)
    return float(_cell_area(u.h) * np.sum(np.sqrt(1 + gx ** 2 + gy ** 2)))


def anisotropic_tv(u):
    """Σ h^(m−1) (|Δ_x u| + |Δ_y u|)."""
    return tv_phi_d(u, PhiSpec.linear(1.0))


def isotropic_tv(u):
    """Σ h^m |∇_h u|."""
    return tv_phi_c(u, PhiSpec.linear(1.0))


def tvphid_bounds(u, spec, samples=1000):
    """Two-sided estimate c · TV_d(u) <= TV^φ_d(u) <= φ_0 · TV_d(u) of the discrete model.

    The upper constant φ_0 applies to subadditive φ with finite φ_0. The lower constant is c = min φ(t)/t over
    (0, L], with L the largest jump of u, sampled on a uniform grid of `samples` points.

    Returns:
        dict: lower, value, upper, and flags upper_ok / lower_ok.
    """
    u = as_image(u)
    dx, dy = forward_differences(u.data)
    tv = anisotropic_tv(u)
    value = tv_phi_d(u, spec)
    L = float(max(np.max(np.abs(dx)), np.max(np.abs(dy))))
    if L > 0:
        t = np.linspace(L / samples, L, samples)
        c = float(np.min(spec.eval(t) / t))
    else:
        c = 0.0
    phi0 = spec.phi_zero()
    upper = phi0 * tv if tv > 0 else 0.0
    lower = c * tv
    slack = 1e-12 * max(1.0, value)
    return {
        'lower': lower,
        'value': value,
        'upper': upper,
        'lower_ok': lower <= value + slack,
        'upper_ok': value <= upper + slack,
    }
