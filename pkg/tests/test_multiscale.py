import numpy as np
from pytest import raises, approx


def test_discrete_gaussian():
    from tvphi.multiscale import discrete_gaussian

    for eps in (0.25, 1.0, 3.0):
        k = discrete_gaussian(eps)
        assert k.shape[0] == k.shape[1] and k.shape[0] % 2 == 1
        assert k.sum() == approx(1.0, abs=1e-12)
        assert np.allclose(k, k.T) and np.allclose(k, k[::-1, ::-1])
        assert not k.flags.writeable
    # radius ceil(4ε) + 2
    assert discrete_gaussian(1.0).shape == (13, 13)


def test_family():
    from tvphi import MollifierFamily, TVPhiConfigError

    family = MollifierFamily(eps1=8.0, levels=3)
    assert np.allclose(family.scales(), [8, 4, 2])
    assert family.K_max == 3
    assert family.level_kernel(1).shape == family.kernel(8.0).shape
    with raises(TVPhiConfigError):
        family.level_kernel(4)

    with raises(TVPhiConfigError):
        MollifierFamily(custom_scales=[1.0, 2.0])
    assert MollifierFamily(custom_scales=[1.0, 2.0], enforce_nested=False).K_max == 2

    # truncation is the only semigroup defect
    assert all(d < 1e-3 for d in MollifierFamily(eps1=2.0, levels=4).semigroup_defect())


def test_lift():
    from tvphi import lift

    rng = np.random.default_rng(1)
    U = lift(rng.normal(size=(6, 7)))
    assert U.components.shape == (3, 6, 7)
    assert np.all(U.components[0] == 1)
    assert np.all(U.magnitude() >= 1)


def test_eta_basic():
    from tvphi import MollifierFamily, eta, eta_level, TVPhiConfigError

    family = MollifierFamily(eps1=2.0, levels=3)
    const = np.full((16, 16), 42.0)
    assert eta(const, family) == 0
    assert eta_level(const, family, 1) == 0

    rng = np.random.default_rng(2)
    u = rng.uniform(0, 255, size=(16, 16))
    assert eta(u, family) > 0
    assert eta(u, family, K=0) == 0
    assert eta(u, MollifierFamily(eps1=2.0, levels=3, eta0=3.0)) == approx(3 * eta(u, family))
    with raises(TVPhiConfigError):
        eta(u, family, K=4)


def test_eta_levels_decreasing():
    from tvphi import MollifierFamily, eta_levels, eta_level_decreasing_check

    family = MollifierFamily(eps1=2.0, levels=3)
    rng = np.random.default_rng(4)
    for _ in range(100):
        u = rng.uniform(0, 255, size=(32, 32))
        values = eta_levels(u, family)
        assert all(v >= 0 for v in values)
        assert eta_level_decreasing_check(u, family)


def test_eta_gradient_finite_differences():
    from tvphi import Image, MollifierFamily, eta, eta_gradient

    family = MollifierFamily(eps1=1.0, levels=2)
    rng = np.random.default_rng(6)
    u = rng.uniform(0, 50, size=(16, 16))
    g = eta_gradient(Image(u), family, K=2).data

    delta = 1e-4
    fd = np.zeros_like(u)
    for idx in np.ndindex(u.shape):
        up, dn = u.copy(), u.copy()
        up[idx] += delta
        dn[idx] -= delta
        fd[idx] = (eta(up, family, K=2) - eta(dn, family, K=2)) / (2 * delta)
    assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)


def test_eta_bar():
    from tvphi import GradientField, MollifierFamily, eta_bar, eta_bar_level, TVPhiConfigError

    family = MollifierFamily(eps1=2.0, levels=2)
    rng = np.random.default_rng(8)
    g = GradientField(gx=rng.normal(size=(12, 12)), gy=rng.normal(size=(12, 12)))
    # mollification never increases an L^p norm
    for p in (1.5, 2.0, 4.0):
        assert eta_bar_level(g, family, 1, p) >= 0
        assert eta_bar_level(g, family, 2, p) >= 0
    assert eta_bar(g, family) == approx(eta_bar_level(g, family, 1) + eta_bar_level(g, family, 2))
    with raises(TVPhiConfigError):
        eta_bar_level(g, family, 1, p=1.0)


def test_non_nested_family_breaks_level_order():
    from tvphi import MollifierFamily, eta_levels, eta_level_decreasing_check

    family = MollifierFamily(custom_scales=[1.0, 4.0], enforce_nested=False)
    u = np.random.default_rng(9).uniform(0, 255, size=(32, 32))
    first, second = eta_levels(u, family)
    assert first < second
    assert not eta_level_decreasing_check(u, family)


def test_eta_bar_impulse():
    from tvphi import GradientField, MollifierFamily, eta_bar_level

    family = MollifierFamily(eps1=2.0, levels=2)
    gx = np.zeros((12, 12))
    gx[5, 5] = 3.0
    g = GradientField(gx=gx, gy=np.zeros((12, 12)))
    for level in (1, 2):
        expected = 3.0 * (1 - np.linalg.norm(family.level_kernel(level)))
        assert eta_bar_level(g, family, level) == approx(expected, rel=1e-9)


def test_level_profile():
    from tvphi import MollifierFamily

    family = MollifierFamily(eps1=4.0, levels=3)
    for level in (1, 2, 3):
        profile = family.level_profile(level)
        assert profile.sum() == approx(1.0, abs=1e-12)
        assert np.allclose(np.outer(profile, profile), family.level_kernel(level), rtol=0, atol=1e-15)
