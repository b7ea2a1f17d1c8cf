import math

import numpy as np
from pytest import raises, approx


def test_psnr():
    from tvphi import psnr, TVPhiConfigError

    rng = np.random.default_rng(0)
    ref = rng.uniform(0, 200, size=(16, 16))
    assert psnr(ref + 25.5, ref) == approx(20.0, abs=1e-9)
    assert psnr(ref, ref) == math.inf

    u = ref + rng.normal(0, 10, size=ref.shape)
    assert psnr(u, ref) == psnr(ref, u)
    with raises(TVPhiConfigError):
        psnr(ref, ref[:8])


def test_ssim():
    from tvphi import ssim, TVPhiConfigError

    rng = np.random.default_rng(1)
    u = rng.uniform(0, 255, size=(32, 32))
    v = u + rng.normal(0, 20, size=u.shape)
    assert ssim(u, u) == approx(1.0, abs=1e-12)
    assert ssim(u, v) == approx(ssim(v, u), abs=1e-12)
    assert ssim(u, 255 - u) < 0.1
    with raises(TVPhiConfigError):
        ssim(u[:10, :10], u[:10, :10])
    with raises(TVPhiConfigError):
        ssim(u, u[:, :16])


def test_metrics_degrade_with_noise():
    from tvphi import two_region_phantom, add_gaussian_noise, measure

    ref = two_region_phantom(64)
    results = [measure(add_gaussian_noise(ref, sigma, seed=3), ref) for sigma in (5, 15, 30, 60)]
    assert all(a.psnr > b.psnr for a, b in zip(results[:-1], results[1:]))
    assert all(a.ssim > b.ssim for a, b in zip(results[:-1], results[1:]))


def test_metric_pair():
    from tvphi import MetricPair, measure

    u = np.full((16, 16), 10.0)
    pair = measure(u, u)
    assert str(pair) == 'PSNR=inf SSIM=1.0000'
    assert str(MetricPair(psnr=20.123456, ssim=0.5)) == 'PSNR=20.1235 SSIM=0.5000'
