"""
Nonconvex total-variation-type energies TV^φ for image denoising.

The package evaluates discrete TV^φ energies with t^q-type integrands and their linearizations, the multiscale
analysis functional η on lifted gradients, and minimizes the resulting nonconvex ROF-type denoising problem.
Gradient statistics, quality metrics and numerical demos of the limit laws complete the toolkit. Every structured
value (images, integrands, solver configurations, fit results) is a `param.Parameterized` object with documented,
bounds-checked parameters.
"""

from importlib.metadata import version

from .util import (
    TVPhiException, TVPhiConfigError, TVPhiDomainError, TVPhiDegenerateError, TVPhiConvergenceError,
    parse_cutoff, format_cutoff,
)
from .image import (
    Image, GradientField, as_image, gradient, divergence, convolve, add_gaussian_noise, read_pgm, write_pgm,
    two_region_phantom, gaussian_blob,
)
from .energy import (
    PhiSpec, EnergyParams, phi_eval, phi_prime, phi_infty, phi_zero, validate_class_Was, tv_phi_d, tv_phi_c,
    tv_phi_sc, tv_phi_c_eps, area_functional, anisotropic_tv, isotropic_tv, tvphid_bounds,
)
from .multiscale import (
    MollifierFamily, LiftedGradient, lift, eta_level, eta, eta_levels, eta_level_decreasing_check, eta_bar_level,
    eta_bar, eta_gradient,
)
from .metrics import MetricPair, psnr, ssim, measure
from .solver import SolverConfig, SolverReport, objective, denoise, sweep_M, sweep_eta
from .stats import Histogram, FitResult, gradient_histogram, split_edges, fit_power, fit_linearized
from .demos import (
    DemoTrace, demo_ramp_blowup, demo_step_vanishing, demo_linearized_limit, demo_annihilation,
    demo_compact_convergence, run_demo,
)

__version__ = version(__package__ or __name__)
