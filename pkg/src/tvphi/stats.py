"""
Gradient statistics: histograms of |∇_h u|, edge/smooth splitting and least-squares fits of the models

    P(t) = C exp(−α φ(t)),   φ = t^q  or  the linearized t^q with cut-off M,

on the logarithm of the histogram. C is kept free during the fit and recomputed afterwards so the fitted
density integrates to one.
"""

import logging
import math

import numpy as np
import pandas as pd
import param
from scipy import integrate, optimize, special

from .energy import PhiSpec
from .image import as_image, gradient_arrays
from .util import TVPhiConfigError, TVPhiDegenerateError, format_cutoff

log = logging.getLogger(__name__)

MIN_BINS = 8

# exponent grid of the fit, refined by golden-section search afterwards
Q_STEP = 0.01
Q_GRID = np.round(np.arange(1, 200) * Q_STEP, 2)


class Histogram(param.Parameterized):
    """Histogram of gradient magnitudes on uniform bins starting at 0."""

    edges = param.Array(label='Bin edges', doc='Strictly increasing bin edges in gray levels per h', default=np.array([0.0, 1.0]))

    counts = param.Array(
        label='Counts',
        doc='Non-negative count per bin. Expected (non-integer) counts are allowed for analytic histograms.',
        default=np.array([0.0])
    )

    @param.depends('edges', 'counts', watch=True, on_init=True)
    def _validate(self):
        if self.edges.ndim != 1 or len(self.edges) != len(self.counts) + 1:
            raise TVPhiConfigError('Histogram needs exactly one more edge than counts')
        if not np.all(np.diff(self.edges) > 0):
            raise TVPhiConfigError('Histogram edges must be strictly increasing')
        if np.any(self.counts < 0):
            raise TVPhiConfigError('Histogram counts must be non-negative')

    @classmethod
    def from_samples(cls, t, bins=64, t_max=None):
        """Histogram of magnitude samples on `bins` uniform bins over [0, t_max].

        `t_max` defaults to the largest sample; samples above it are left out. A zero range becomes [0, 1].
        """
        if bins < MIN_BINS:
            raise TVPhiConfigError(f'At least {MIN_BINS} bins are required, got {bins}')
        t = np.asarray(t, dtype=np.float64).ravel()
        if t.size == 0:
            raise TVPhiDegenerateError('No samples to histogram')
        upper = float(np.max(t)) if t_max is None else float(t_max)
        if upper <= 0:
            upper = 1.0
        edges = np.linspace(0.0, upper, bins + 1)
        counts, _ = np.histogram(t, bins=edges)
        return cls(edges=edges, counts=counts)

    @classmethod
    def from_density(cls, density, t_max, bins=64, total=1e6):
        """Noise-free histogram holding the expected counts `total · density(center) · width` of a density."""
        edges = np.linspace(0.0, float(t_max), bins + 1)
        centers = (edges[:-1] + edges[1:]) / 2
        counts = total * np.asarray(density(centers), dtype=np.float64) * np.diff(edges)
        return cls(edges=edges, counts=counts)

    @property
    def total(self):
        return float(np.sum(self.counts))

    def centers(self):
        return (self.edges[:-1] + self.edges[1:]) / 2

    def widths(self):
        return np.diff(self.edges)

    def nonempty(self):
        return self.counts > 0

    def log_density(self):
        """Log of the normalized frequency per unit t; NaN for empty bins."""
        out = np.full(len(self.counts), np.nan)
        nz = self.nonempty()
        out[nz] = np.log(self.counts[nz] / (self.total * self.widths()[nz]))
        return out

    def to_frame(self):
        return pd.DataFrame({'t_center': self.centers(), 'count': self.counts, 'log_density': self.log_density()})


def gradient_magnitude(u):
    u = as_image(u)
    gx, gy = gradient_arrays(u.data, u.h)
    return np.hypot(gx, gy)


def gradient_histogram(u, bins=64, mask=None, t_max=None):
    """Histogram of |∇_h u(k)| over the pixels selected by `mask` (all pixels by default).

    Raises:
        TVPhiConfigError: Fewer than 8 bins
        TVPhiDegenerateError: Empty mask
    """
    t = gradient_magnitude(u)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != t.shape:
            raise TVPhiConfigError(f'Mask shape {mask.shape} does not match image shape {t.shape}')
        t = t[mask]
    if t.size == 0:
        raise TVPhiDegenerateError('Pixel mask is empty')
    return Histogram.from_samples(t, bins=bins, t_max=t_max)


def split_edges(u, threshold=30.0):
    """Partition the pixels into edge (|∇_h u| >= threshold) and smooth pixels.

    Returns:
        tuple: Boolean masks (edge, smooth).
    """
    if not threshold >= 0:
        raise TVPhiConfigError(f'Edge threshold must be non-negative, got {threshold}')
    edge = gradient_magnitude(u) >= threshold
    return edge, ~edge


class FitResult(param.Parameterized):
    """Fitted gradient distribution C exp(−α φ_{M,q}(t))."""

    C = param.Number(label='C', doc='Normalization constant, recomputed after the fit', default=1.0, bounds=(0, None))

    alpha = param.Number(label='α', default=1.0, bounds=(0, None), inclusive_bounds=(False, True))

    q = param.Number(label='Exponent q', default=0.5, bounds=(0, 2), inclusive_bounds=(False, False))

    M = param.Number(label='Cut-off M', doc='Cut-off of the linearized model, `inf` for plain t^q', default=math.inf, bounds=(0, None))

    residual = param.Number(label='Residual', doc='Sum of squared log errors over nonempty bins', default=0.0, bounds=(0, None))

    @param.output(param.Number(label='α^∞', doc='Asymptotic weight α q M^(q−1), 0 for plain t^q'))
    @param.depends('alpha', 'q', 'M')
    def alpha_infty(self):
        if math.isinf(self.M):
            return 0.0
        return self.alpha * self.q * self.M ** (self.q - 1)

    def phi(self):
        return PhiSpec.from_cutoff(self.q, self.M)

    def density(self, t):
        """Fitted density C exp(−α φ(t))."""
        return self.C * np.exp(-self.alpha * self.phi().eval(t))

    def to_frame(self):
        return pd.DataFrame([{
            'C': self.C,
            'alpha': self.alpha,
            'q': self.q,
            'M': format_cutoff(self.M),
            'alpha_infty': self.alpha_infty(),
            'residual': self.residual,
        }])


def _shape(t, q, M):
    """Values of t^q or of its linearization beyond M; same closed form as `PhiSpec`, vectorized for the grid search."""
    if math.isinf(M):
        return t ** q
    return np.where(t <= M, np.minimum(t, M) ** q, (1 - q) * M ** q + q * M ** (q - 1) * t)


def _least_squares(x, y, q, M):
    """Closed-form fit of (log C, α) at fixed (q, M). Fits with α <= 0 are rejected."""
    A = np.column_stack([np.ones_like(x), -_shape(x, q, M)])
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    if not sol[1] > 0:
        return math.inf, sol
    r = y - A @ sol
    return float(r @ r), sol


def _fit_q(x, y, M):
    """Grid search over q, then golden-section refinement around the best grid point."""
    residuals = np.array([_least_squares(x, y, q, M)[0] for q in Q_GRID])
    i = int(np.argmin(residuals))  # first minimum, i.e. smallest q on ties
    q0, r0 = float(Q_GRID[i]), float(residuals[i])
    if math.isinf(r0):
        return math.inf, q0, None

    def f(q):
        return _least_squares(x, y, q, M)[0]

    lo, hi = q0 - Q_STEP, q0 + Q_STEP
    if 0 < lo and hi < 2 and r0 < residuals[i - 1] and r0 < residuals[i + 1]:
        res = optimize.minimize_scalar(f, bracket=(lo, q0, hi), method='golden')
    else:
        res = optimize.minimize_scalar(f, bounds=(max(lo, Q_STEP / 2), min(hi, 2 - Q_STEP / 2)), method='bounded')
    q, r = (float(res.x), float(res.fun)) if res.fun < r0 else (q0, r0)
    return r, q, _least_squares(x, y, q, M)[1]


def _normalization(alpha, q, M):
    """C such that C exp(−α φ_{M,q}) integrates to one over [0, ∞)."""
    if math.isinf(M):
        # ∫ exp(−α t^q) = Γ(1 + 1/q) / α^(1/q)
        return math.exp(math.log(alpha) / q - special.gammaln(1 + 1 / q))
    head, _ = integrate.quad(lambda t: math.exp(-alpha * t ** q), 0, M)
    tail = math.exp(-alpha * M ** q) / (alpha * q * M ** (q - 1))
    return 1.0 / (head + tail)


def _data(hist):
    nz = hist.nonempty()
    if np.count_nonzero(nz) < 3:
        raise TVPhiDegenerateError('Histogram has fewer than 3 nonempty bins')
    return hist.centers()[nz], hist.log_density()[nz]


def _result(residual, q, sol, M):
    if sol is None:
        raise TVPhiDegenerateError('No decreasing model fits the histogram')
    alpha = float(sol[1])
    return FitResult(C=_normalization(alpha, q, M), alpha=alpha, q=q, M=M, residual=residual)


def fit_power(hist):
    """Fit C exp(−α t^q) with q in (0, 2) by least squares on the log density.

    Raises:
        TVPhiDegenerateError: Fewer than 3 nonempty bins, or no decreasing fit exists
    """
    x, y = _data(hist)
    residual, q, sol = _fit_q(x, y, math.inf)
    fit = _result(residual, q, sol, math.inf)
    log.debug('power fit: q=%.6g α=%.6g residual=%.6g', fit.q, fit.alpha, fit.residual)
    return fit


def fit_linearized(hist, M=None):
    """Fit C exp(−α φ_{M,q}(t)) with the linearized t^q.

    Args:
        hist (Histogram): Gradient histogram
        M (float, optional): Fixed cut-off. When omitted, M is searched over all bin centers and infinity jointly
            with q; ties go to the smallest q, then the smallest M.

    Raises:
        TVPhiDegenerateError: Fewer than 3 nonempty bins, or no decreasing fit exists
    """
    if M is not None:
        if math.isinf(M):
            return fit_power(hist)
        if not M > 0:
            raise TVPhiConfigError(f'Cut-off must be positive, got {M}')
        x, y = _data(hist)
        fit = _result(*_fit_q(x, y, float(M)), float(M))
        log.debug('linearized fit (M=%g): q=%.6g α=%.6g residual=%.6g', M, fit.q, fit.alpha, fit.residual)
        return fit

    x, y = _data(hist)
    candidates = []
    for m in [*hist.centers(), math.inf]:
        residual, q, sol = _fit_q(x, y, float(m))
        if sol is not None:
            candidates.append((residual, q, float(m), sol))
    if not candidates:
        raise TVPhiDegenerateError('No decreasing model fits the histogram')
    residual, q, m, sol = min(candidates, key=lambda c: c[:3])
    fit = _result(residual, q, sol, m)
    log.debug('linearized fit (free M): M=%s q=%.6g α=%.6g residual=%.6g',
              format_cutoff(m), fit.q, fit.alpha, fit.residual)
    return fit
