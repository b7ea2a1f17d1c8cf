"""
Nonconvex ROF-type denoising with TV^φ regularization and the multiscale functional η.

The solver minimizes

    G(u) = ½ Σ h² (u − z)² + σ² (α TV^φ_c(u) + η(DU))

by majorize–minimize (lagged diffusivity). At the current iterate the integrand is replaced by its quadratic
majorizer with weights w = φ'_γ(t)/t, t = |∇_h u|, η is linearized, and the resulting symmetric positive definite
system is solved by preconditioned conjugate gradients. The Huber knee γ is halved every outer iteration down to
`gamma_min`. Steps are accepted only if they decrease G with the integrand smoothed at `gamma_min`, halving the
step toward the previous iterate otherwise, so the recorded objective trace never increases.

`SolverConfig` holds the experiment protocol: α^∞ and q stay fixed while the cut-off M varies, and α = α^∞ / φ^∞.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd
import param
from scipy.sparse.linalg import LinearOperator, cg

from .energy import PhiSpec, tv_phi_c
from .image import as_image, divergence_arrays, gradient_arrays
from .metrics import measure
from .multiscale import MollifierFamily, eta, eta_gradient
from .util import TVPhiConfigError, TVPhiConvergenceError, TVPhiException, format_cutoff

log = logging.getLogger(__name__)

MAX_HALVINGS = 30


class SolverConfig(param.Parameterized):
    """Parameters of one denoising run."""

    q = param.Number(
        label='Exponent q',
        doc='Exponent of the t^q integrand.',
        default=0.5,
        bounds=(0, 2),
        inclusive_bounds=(False, False)
    )

    M = param.Number(
        label='Cut-off M',
        doc='Cut-off of the linearized integrand in gray levels per h. `inf` selects plain t^q, 0 selects plain TV.',
        default=10.0,
        bounds=(0, None)
    )

    alpha_infty = param.Number(
        label='α^∞',
        doc='Asymptotic regularization weight α φ^∞, held fixed while M varies.',
        default=0.0253,
        bounds=(0, None)
    )

    sigma = param.Number(
        label='Noise level σ',
        doc='Noise standard deviation in gray levels. The regularizers are weighted by σ², so weights tuned per unit noise carry over.',
        default=1.0,
        bounds=(0, None),
        inclusive_bounds=(False, True)
    )

    eta0 = param.Number(
        label='η_0',
        doc='Weight of the multiscale functional η. Zero disables η.',
        default=0.0,
        bounds=(0, None)
    )

    eps1 = param.Number(
        label='ε_1',
        doc='Largest mollifier scale of η in pixels.',
        default=1.0,
        bounds=(0, None),
        inclusive_bounds=(False, True)
    )

    K = param.Integer(
        label='η levels K',
        doc='Number of dyadic η levels. Zero disables η.',
        default=3,
        bounds=(0, 32)
    )

    spec = param.ClassSelector(
        class_=PhiSpec,
        label='Integrand override',
        doc='Explicit integrand. When unset the integrand is derived from q and M.',
        allow_None=True,
        default=None
    )

    gamma_init = param.Number(
        label='Initial knee γ_0',
        doc='Huber knee of the first outer iteration in gray levels per h.',
        default=1.0,
        bounds=(0, None),
        inclusive_bounds=(False, True)
    )

    gamma_min = param.Number(
        label='Final knee γ_min',
        doc='Smallest Huber knee. The tracked objective uses this smoothing.',
        default=1e-3,
        bounds=(0, None),
        inclusive_bounds=(False, True)
    )

    max_outer = param.Integer(label='Max outer iterations', default=60, bounds=(1, None))

    inner_tol = param.Number(
        label='Inner tolerance',
        doc='Relative residual at which the conjugate-gradient solve stops.',
        default=1e-6,
        bounds=(0, 1),
        inclusive_bounds=(False, False)
    )

    inner_maxiter = param.Integer(
        label='Inner iteration cap',
        doc='Conjugate-gradient iteration cap. Defaults to ten times the number of pixels.',
        default=None,
        allow_None=True,
        bounds=(1, None)
    )

    obj_tol = param.Number(
        label='Objective tolerance',
        doc='Relative objective decrease below which the outer loop stops once γ has reached γ_min.',
        default=1e-7,
        bounds=(0, None)
    )

    seed = param.Integer(label='Seed', doc='Seed for synthetic noise', default=0, bounds=(0, None))

    @param.depends('gamma_init', 'gamma_min', watch=True, on_init=True)
    def _check_continuation(self):
        if self.gamma_init < self.gamma_min:
            raise TVPhiConfigError(f'gamma_init ({self.gamma_init:g}) must not be smaller than gamma_min ({self.gamma_min:g})')

    @param.output(param.ClassSelector(class_=PhiSpec, label='φ', doc='Integrand of the run'))
    @param.depends('q', 'M', 'spec')
    def phi(self):
        if self.spec is not None:
            return self.spec
        return PhiSpec.from_cutoff(self.q, self.M)

    @param.output(param.Number(label='α', doc='Regularization weight α = α^∞ / φ^∞, or α^∞ when φ^∞ is 0 or infinite'))
    @param.depends('phi', 'alpha_infty')
    def alpha(self):
        pinf = self.phi().phi_infty()
        if 0 < pinf < math.inf:
            return self.alpha_infty / pinf
        return self.alpha_infty

    @param.output(param.ClassSelector(class_=MollifierFamily, label='Mollifier family'))
    @param.depends('eps1', 'K', 'eta0')
    def family(self):
        return MollifierFamily(eps1=self.eps1, levels=max(self.K, 1), eta0=self.eta0)

    @property
    def uses_eta(self):
        return self.K > 0 and self.eta0 > 0

    def copy_with(self, **params):
        """Independent copy with some parameters replaced."""
        values = {k: v for k, v in self.param.values().items() if k != 'name'}
        return SolverConfig(**(values | params))

    @staticmethod
    def get_preset_list():
        """Names of all experiment presets in the database."""
        from .db import get_preset_list
        return get_preset_list()

    @classmethod
    def from_db(cls, preset, **params):
        """Create a configuration from a named experiment preset.

        Args:
            preset (str): Preset identifier, see `get_preset_list`
            **params: Custom param values overriding the preset
        """
        from .db import PROTOCOL_KEYS, get_preset
        db_params = cls.param.deserialize_parameters(get_preset(preset))
        extra = set(db_params) - PROTOCOL_KEYS
        if extra:
            raise TVPhiConfigError(f'Preset {preset} sets non-protocol parameters {sorted(extra)}')
        obj = cls(**db_params | params)
        for p in db_params.keys():
            if p not in params and p != 'name':
                obj.param[p].constant = True
        return obj


class SolverReport(param.Parameterized):
    """Diagnostics of one solve."""

    iterations = param.Integer(label='Outer iterations', default=0, bounds=(0, None))

    objective_trace = param.List(label='Objective trace', doc='Objective at the start and after every outer iteration', default=[])

    final_objective = param.Number(label='Final objective', default=0.0)

    breakdown = param.Dict(label='Breakdown', doc='Final fidelity, regularization and η terms', default={})

    records = param.List(label='Records', doc='One dict per outer iteration', default=[])

    rejected = param.Integer(label='Rejected steps', default=0, bounds=(0, None))

    converged = param.Boolean(
        label='Converged',
        doc='True when the objective tolerance stopped the run, False when it ended on the iteration cap.',
        default=False
    )

    wall_time = param.Number(label='Wall time (s)', default=0.0, bounds=(0, None))

    def is_monotone(self, rtol=1e-10):
        """True iff the objective trace never increases by more than `rtol` times its initial value."""
        trace = self.objective_trace
        if not trace:
            return True
        slack = rtol * abs(trace[0])
        return all(b <= a + slack for a, b in zip(trace[:-1], trace[1:]))

    def to_frame(self):
        """Per-iteration table. Wall time is left out so that identical runs give identical files."""
        columns = ['iteration', 'gamma', 'step', 'cg_iters', 'objective', 'fidelity', 'regularizer', 'eta']
        return pd.DataFrame(self.records, columns=columns)


def _check_pair(u, z):
    if u.shape != z.shape:
        raise TVPhiConfigError(f'Image dimensions differ: {u.shape} vs {z.shape}')


def objective(u, z, cfg, gamma=None):
    """Objective G(u) and its terms.

    Args:
        u (Image | array-like): Candidate
        z (Image | array-like): Data; its grid spacing applies to both
        cfg (SolverConfig): Run parameters
        gamma (float, optional): Huber knee applied to the integrand. Defaults to no smoothing.

    Raises:
        TVPhiConfigError: Dimension mismatch

    Returns:
        tuple: (total, breakdown) with breakdown keys fidelity, regularizer, eta summing to total.
    """
    z = as_image(z)
    u = as_image(u, h=z.h)
    _check_pair(u, z)
    spec = cfg.phi() if not gamma else cfg.phi().smoothed(gamma)
    s2 = cfg.sigma ** 2
    fidelity = 0.5 * z.h ** 2 * float(np.sum((u.data - z.data) ** 2))
    alpha = cfg.alpha()
    regularizer = s2 * alpha * tv_phi_c(u, spec) if alpha > 0 else 0.0
    eta_term = s2 * eta(u, cfg.family(), cfg.K) if cfg.uses_eta else 0.0
    breakdown = {'fidelity': fidelity, 'regularizer': regularizer, 'eta': eta_term}
    return fidelity + regularizer + eta_term, breakdown


def _weights(u_arr, h, spec, gamma):
    gx, gy = gradient_arrays(u_arr, h)
    t = np.maximum(np.hypot(gx, gy), gamma)
    # φ'_γ(t)/t with the floor at the knee
    return spec.smoothed(gamma).prime(t) / t


def _system(w, c, h, shape):
    """Operator I − c div(w ∇) and its Jacobi preconditioner."""

    def matvec(v):
        v = v.reshape(shape)
        gx, gy = gradient_arrays(v, h)
        return (v - c * divergence_arrays(w * gx, w * gy, h)).ravel()

    d = np.zeros(shape)
    d[:, :-1] += w[:, :-1]
    d[:, 1:] += w[:, :-1]
    d[:-1, :] += w[:-1, :]
    d[1:, :] += w[:-1, :]
    diag = (1 + c * d / h ** 2).ravel()

    n = int(np.prod(shape))
    A = LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    P = LinearOperator((n, n), matvec=lambda v: v / diag, dtype=np.float64)
    return A, P


def denoise(z, cfg):
    """Denoise `z` by majorize–minimize with Huber continuation.

    Args:
        z (Image | array-like): Noisy image
        cfg (SolverConfig): Run parameters

    Raises:
        TVPhiConvergenceError: An inner conjugate-gradient solve hit its iteration cap. The partial report is
            attached to the exception.

    Returns:
        tuple: (Image, SolverReport)
    """
    start = time.perf_counter()
    z = as_image(z)
    h, shape = z.h, z.shape
    spec = cfg.phi()
    alpha = cfg.alpha()
    c = cfg.sigma ** 2 * alpha
    family = cfg.family()
    maxiter = cfg.inner_maxiter or 10 * z.data.size

    def tracked(arr):
        return objective(arr, z, cfg, gamma=cfg.gamma_min)

    u = np.array(z.data)
    F, terms = tracked(u)
    report = SolverReport(objective_trace=[F])
    log.debug('initial objective %.10g (α = %.6g, σ = %g, %r)', F, alpha, cfg.sigma, spec)

    gamma = cfg.gamma_init
    records = []
    rejected = 0
    converged = False
    for k in range(1, cfg.max_outer + 1):
        w = _weights(u, h, spec, gamma)
        A, P = _system(w, c, h, shape)
        rhs = z.data
        if cfg.uses_eta:
            g = eta_gradient(z.like(u), family, cfg.K).data
            rhs = rhs - cfg.sigma ** 2 * g / h ** 2

        n_cg = 0

        def count(_):
            nonlocal n_cg
            n_cg += 1

        x, info = cg(A, rhs.ravel(), x0=u.ravel(), rtol=cfg.inner_tol, atol=0.0, maxiter=maxiter, M=P, callback=count)
        if info != 0:
            report.param.update(iterations=k - 1, records=records, rejected=rejected, final_objective=F,
                                breakdown=terms, wall_time=time.perf_counter() - start)
            raise TVPhiConvergenceError(
                f'Inner solve did not converge at outer iteration {k} (info={info}, {maxiter} iterations)', report
            )
        candidate = x.reshape(shape)

        # backtrack toward the current iterate until the tracked objective does not increase
        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = u + step * (candidate - u) if step < 1 else candidate
            F_new, terms_new = tracked(trial)
            if F_new <= F:
                break
            step *= 0.5
        else:
            step = 0.0

        if step > 0:
            decrease = (F - F_new) / max(abs(F), np.finfo(float).tiny)
            u, F, terms = trial, F_new, terms_new
        else:
            decrease = 0.0
            rejected += 1
            log.info('outer iteration %d: step rejected at γ = %g', k, gamma)

        report.objective_trace.append(F)
        records.append({'iteration': k, 'gamma': gamma, 'step': step, 'cg_iters': n_cg, 'objective': F} | terms)
        log.debug('outer %d: γ=%g step=%g cg=%d objective=%.10g', k, gamma, step, n_cg, F)

        at_min = gamma <= cfg.gamma_min
        if at_min and decrease < cfg.obj_tol:
            converged = True
            break
        new_gamma = max(gamma / 2, cfg.gamma_min)
        if new_gamma != gamma:
            log.debug('γ continuation %g -> %g', gamma, new_gamma)
        gamma = new_gamma

    report.param.update(
        iterations=len(records),
        records=records,
        rejected=rejected,
        converged=converged,
        final_objective=F,
        breakdown=terms,
        wall_time=time.perf_counter() - start,
    )
    if not converged:
        log.info('denoise stopped at the iteration cap (%d) before the objective tolerance was met', cfg.max_outer)
    log.info('denoise finished after %d outer iterations in %.3f s, objective %.10g',
             report.iterations, report.wall_time, F)
    return z.like(u), report


def _sweep_row(z, cfg, ref):
    out, report = denoise(z, cfg)
    metrics = measure(out, ref)
    return metrics, report


def _run_all(z, configs, ref, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda cfg: _sweep_row(z, cfg, ref), configs))
    return [_sweep_row(z, cfg, ref) for cfg in configs]


def sweep_M(z, base, Ms, ref, jobs=1):
    """Denoise `z` once per cut-off in `Ms`, holding α^∞ and q of `base` fixed.

    Args:
        z (Image | array-like): Noisy image
        base (SolverConfig): Protocol; its M and integrand override are replaced per row
        Ms (list): Cut-offs, `math.inf` allowed
        ref (Image | array-like): Ground truth for the metrics
        jobs (int, optional): Number of solves run concurrently. Rows keep the order of `Ms`. Defaults to 1.

    Returns:
        pandas.DataFrame: Columns M, PSNR, SSIM, objective, iters; M formatted with `Inf` for infinity.
    """
    if ref is None:
        raise TVPhiException('A ground truth image is required for a sweep')
    Ms = list(Ms)
    configs = [base.copy_with(M=float(M), spec=None) for M in Ms]
    results = _run_all(z, configs, ref, jobs)
    rows = [
        {
            'M': format_cutoff(float(M)),
            'PSNR': metrics.psnr,
            'SSIM': metrics.ssim,
            'objective': report.final_objective,
            'iters': report.iterations,
        }
        for M, (metrics, report) in zip(Ms, results)
    ]
    return pd.DataFrame(rows, columns=['M', 'PSNR', 'SSIM', 'objective', 'iters'])


def sweep_eta(z, base, ref, eta0_factors=(0.1, 1.0, 10.0), eps1_list=(0.5, 1.0, 2.0), K=1, jobs=1):
    """Grid of η weights η_0 = factor · α and scales ε_1 on a fixed protocol.

    Returns:
        pandas.DataFrame: Columns eta0_factor, eps1, eta0, PSNR, SSIM, objective, iters.
    """
    alpha = base.alpha()
    grid = [(f, e) for f in eta0_factors for e in eps1_list]
    configs = [base.copy_with(eta0=f * alpha, eps1=e, K=K) for f, e in grid]
    results = _run_all(z, configs, ref, jobs)
    rows = [
        {
            'eta0_factor': f,
            'eps1': e,
            'eta0': cfg.eta0,
            'PSNR': metrics.psnr,
            'SSIM': metrics.ssim,
            'objective': report.final_objective,
            'iters': report.iterations,
        }
        for (f, e), cfg, (metrics, report) in zip(grid, configs, results)
    ]
    return pd.DataFrame(rows, columns=['eta0_factor', 'eps1', 'eta0', 'PSNR', 'SSIM', 'objective', 'iters'])
