"""
Numerical witnesses of the limiting behaviour of TV^φ energies and of η.

Each demo evaluates the production energy code on a family of synthetic inputs, compares the measured value to
its analytic law and returns a `DemoTrace` with a PASS/FAIL verdict. One-dimensional signals are stored as
single-row images, and their energies are reported per unit strip width (divided by h).
"""

import logging
import math
import pathlib

import numpy as np
import pandas as pd
import param

from .energy import PhiSpec, isotropic_tv, tv_phi_c, tv_phi_c_eps, tv_phi_d
from .image import Image, gaussian_blob
from .multiscale import MollifierFamily, eta, eta_level
from .util import TVPhiConfigError, write_table

log = logging.getLogger(__name__)


class DemoTrace(param.Parameterized):
    """Table of measured against analytic values over one swept parameter."""

    parameter = param.String(label='Parameter', doc='Name of the swept parameter column', default='k')

    values = param.List(label='Values', doc='Swept parameter values', default=[])

    measured = param.List(label='Measured', default=[])

    analytic = param.List(label='Analytic', default=[])

    extra = param.Dict(label='Extra columns', doc='Additional per-row columns in insertion order', default={})

    passed = param.Boolean(label='Passed', default=False)

    @param.depends('values', 'measured', 'analytic', watch=True, on_init=True)
    def _check_lengths(self):
        if not len(self.values) == len(self.measured) == len(self.analytic):
            raise TVPhiConfigError('Trace columns differ in length')

    def rel_error(self):
        """|measured − analytic| / |analytic|, or the absolute error where the analytic value is 0."""
        m = np.asarray(self.measured, dtype=np.float64)
        a = np.asarray(self.analytic, dtype=np.float64)
        err = np.abs(m - a)
        nz = a != 0
        err[nz] /= np.abs(a[nz])
        return err

    @property
    def verdict(self):
        return 'PASS' if self.passed else 'FAIL'

    def to_frame(self):
        columns = {
            self.parameter: self.values,
            'measured': self.measured,
            'analytic': self.analytic,
            'rel_error': self.rel_error(),
        }
        return pd.DataFrame(columns | self.extra)

    def to_csv(self, path):
        write_table(self.to_frame(), path)


def _check_exponent(q):
    if not 0 < q < 1:
        raise TVPhiConfigError(f'Exponent must lie in (0, 1), got {q}')


def _strip(values, h):
    return Image(np.asarray(values, dtype=np.float64)[None, :], h=h)


def demo_ramp_blowup(q=0.5, ks=tuple(2 ** i for i in range(11))):
    """Discrete energy of the staircase j/k, j = 0..k, on (0, 1) against k^(1−q).

    Each of the k jumps has height 1/k, so the energy of t^q grows without bound as the staircase refines.
    """
    _check_exponent(q)
    spec = PhiSpec.power(q)
    measured = []
    for k in ks:
        u = _strip(np.arange(k + 1) / k, 1 / k)
        measured.append(tv_phi_d(u, spec) / u.h)
    analytic = [float(k) ** (1 - q) for k in ks]
    trace = DemoTrace(parameter='k', values=list(ks), measured=measured, analytic=analytic)
    trace.passed = bool(np.all(trace.rel_error() <= 1e-9))
    return trace


def demo_step_vanishing(q=0.5, ks=(2, 8, 32, 128), h=1 / 512):
    """Continuous energy of a unit step smeared linearly over width 2/k on (−1, 1) against (2/k)^(1−q).

    The energy tends to 0 as the ramp steepens, so t^q cannot see jumps in the continuous model.
    """
    _check_exponent(q)
    if h > 1 / (4 * max(ks)):
        raise TVPhiConfigError(f'Grid spacing {h:g} is too coarse for k = {max(ks)}; need h <= 1/(4k)')
    spec = PhiSpec.power(q)
    n = int(round(2 / h))
    x = -1 + h * np.arange(n + 1)
    measured = []
    for k in ks:
        u = _strip(np.clip((x + 1 / k) * k / 2, 0, 1), h)
        measured.append(tv_phi_c(u, spec) / h)
    analytic = [(2 / k) ** (1 - q) for k in ks]
    trace = DemoTrace(parameter='k', values=list(ks), measured=measured, analytic=analytic)
    decreasing = all(b < a for a, b in zip(measured[:-1], measured[1:]))
    trace.passed = bool(np.all(trace.rel_error() <= 0.01) and decreasing)
    return trace


def demo_linearized_limit(q=0.5, M=4.0, widths=(1.0, 0.5, 0.25, 0.1, 0.05, 0.01, 0.001)):
    """Unit step smeared over width w with the linearized t^q: energy w φ(1/w) against the jump cost φ^∞.

    For 1/w >= M the excess over φ^∞ is exactly w (1−q) M^q, which vanishes as w → 0.
    """
    _check_exponent(q)
    if not M > 0:
        raise TVPhiConfigError(f'Cut-off must be positive, got {M}')
    spec = PhiSpec.linearized(q, M)
    pinf = spec.phi_infty()
    measured, residual, exact = [], [], []
    for w in widths:
        u = _strip([0.0, 1.0], w)
        energy = tv_phi_c(u, spec) / w
        measured.append(energy)
        residual.append(energy - pinf)
        exact.append(w * (1 - q) * M ** q if w <= 1 / M else math.nan)
    trace = DemoTrace(
        parameter='w',
        values=list(widths),
        measured=measured,
        analytic=[pinf] * len(widths),
        extra={'residual': residual, 'residual_exact': exact},
    )
    scale = max(1.0, pinf)
    trace.passed = all(
        abs(r - e) <= 1e-12 * scale
        for r, e in zip(residual, exact) if not math.isnan(e)
    )
    return trace


def _spike_signals(d, n):
    """Interval indicator of length d (derivative +1, −1 spike pair) and a unit step (single spike)."""
    start = (n - d) // 2
    pair = np.zeros(n)
    pair[start + 1:start + 1 + d] = 1.0
    single = np.zeros(n)
    single[n // 2 + 1:] = 1.0
    return _strip(pair, 1.0), _strip(single, 1.0)


def demo_annihilation(separations=(1, 2, 4, 8, 16, 32, 64, 128), family=None):
    """η of an approaching +1/−1 derivative spike pair against a single spike.

    The total variation of the pair stays 2 while its mollification cancels, so η of the pair at the largest scale
    stays at least twice that of a single spike whenever d <= ε_1. Well separated spikes do not interact and the
    ratio approaches 2.
    """
    family = family or MollifierFamily(eps1=8.0, levels=3)
    if min(separations) < 1:
        raise TVPhiConfigError('Separations must be at least one pixel')
    n = max(separations) + 8
    profile = family.level_profile(1)
    r = len(profile) // 2
    ratios, tv_mass, mollified, eta_pair, eta_single, eta1_pair, eta1_single = [], [], [], [], [], [], []
    for d in separations:
        pair, single = _spike_signals(d, n)
        e1p, e1s = eta_level(pair, family, 1), eta_level(single, family, 1)
        ratios.append(e1p / e1s)
        eta1_pair.append(e1p)
        eta1_single.append(e1s)
        eta_pair.append(eta(pair, family))
        eta_single.append(eta(single, family))
        tv_mass.append(isotropic_tv(pair))
        g = np.pad(np.diff(pair.data[0], append=pair.data[0, -1]), r)
        mollified.append(float(np.sum(np.abs(np.convolve(g, profile, mode='same')))))
    trace = DemoTrace(
        parameter='d',
        values=list(separations),
        measured=ratios,
        analytic=[2.0] * len(separations),
        extra={
            'tv_mass': tv_mass,
            'mollified_mass': mollified,
            'eta_pair': eta_pair,
            'eta_single': eta_single,
            'eta1_pair': eta1_pair,
            'eta1_single': eta1_single,
        },
    )
    eps1 = float(family.scales()[0])
    trace.passed = all(ratio >= 2.0 for d, ratio in zip(separations, ratios) if d <= eps1)
    return trace


def demo_compact_convergence(u=None, eps_list=(2.0, 1.0, 0.5, 0.25), spec=None, family=None):
    """Mollified-gradient energy Σ φ(|ρ_ε ∗ ∇u|) against TV^φ_c(u) as ε decreases on a smooth image."""
    u = gaussian_blob(n=96, sigma=10.0, amplitude=128.0) if u is None else u
    spec = spec or PhiSpec.linearized(0.5, 10.0)
    family = family or MollifierFamily()
    reference = tv_phi_c(u, spec)
    measured = [tv_phi_c_eps(u, spec, family, e) for e in eps_list]
    trace = DemoTrace(parameter='eps', values=list(eps_list), measured=measured, analytic=[reference] * len(eps_list))
    trace.passed = bool(trace.rel_error()[-1] <= 0.02)
    return trace


DEMOS = {
    'ramp': demo_ramp_blowup,
    'step': demo_step_vanishing,
    'linlimit': demo_linearized_limit,
    'annihilation': demo_annihilation,
    'compact': demo_compact_convergence,
}


def run_demo(name, outdir='.'):
    """Run a demo with its default parameters and write `<outdir>/<name>.csv`.

    Raises:
        TVPhiConfigError: Unknown demo name
    """
    if name not in DEMOS:
        raise TVPhiConfigError(f'Unknown demo {name}. Please select from one of {list(DEMOS)}')
    trace = DEMOS[name]()
    trace.to_csv(pathlib.Path(outdir) / f'{name}.csv')
    log.info('demo %s: %s', name, trace.verdict)
    return trace
