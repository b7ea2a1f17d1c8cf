import numpy as np
from pytest import raises, approx


def test_gradient_ramp():
    from tvphi import Image, gradient

    # horizontal ramp with spacing h: constant slope 1/h except the Neumann edge
    u = Image(np.tile(np.arange(5.0), (3, 1)), h=0.5)
    g = gradient(u)
    assert np.array_equal(g.gx[:, :-1], np.full((3, 4), 2.0))
    assert np.array_equal(g.gx[:, -1], np.zeros(3))
    assert np.array_equal(g.gy, np.zeros((3, 5)))
    assert g.h == 0.5


def test_gradient_divergence_adjoint():
    from tvphi import Image, GradientField, gradient, divergence

    rng = np.random.default_rng(0)
    for _ in range(50):
        shape = tuple(rng.integers(1, 20, size=2))
        h = float(rng.uniform(0.1, 2.0))
        u = Image(rng.normal(size=shape), h=h)
        g = GradientField(gx=rng.normal(size=shape), gy=rng.normal(size=shape), h=h)
        lhs = np.sum(gradient(u).gx * g.gx + gradient(u).gy * g.gy)
        rhs = -np.sum(u.data * divergence(g).data)
        assert lhs == approx(rhs, rel=1e-10, abs=1e-12)


def test_image_validation():
    from tvphi import Image, TVPhiException

    with raises(TVPhiException):
        Image(np.array([[1.0, np.nan]]))
    with raises(TVPhiException):
        Image(np.zeros((2, 2, 2)))
    with raises(ValueError):
        Image(np.zeros((2, 2)), h=0)

    u = Image(np.zeros((2, 3)))
    assert (u.height, u.width) == (2, 3)
    with raises(ValueError):
        u.data[0, 0] = 1  # stored read-only


def test_as_image():
    from tvphi import as_image

    u = as_image([1, 2, 3])
    assert u.shape == (1, 3)
    assert u.h == 1.0
    assert as_image(u, h=0.25).h == 0.25
    assert as_image(u) is u


def test_convolve():
    from tvphi import Image, convolve, TVPhiConfigError

    u = Image(np.arange(16.0).reshape(4, 4))
    identity = np.zeros((3, 3))
    identity[1, 1] = 1
    assert np.array_equal(convolve(u, identity).data, u.data)

    with raises(TVPhiConfigError):
        convolve(u, np.full((2, 2), 0.25))
    with raises(TVPhiConfigError):
        convolve(u, np.ones((3, 3)))

    # mass leaving the grid is dropped
    box = np.full((3, 3), 1 / 9)
    out = convolve(Image(np.ones((4, 4))), box)
    assert out.data[1, 1] == approx(1.0)
    assert out.data[0, 0] == approx(4 / 9)
    assert out.shape == (4, 4)

    # a 3x3 box spreads an impulse evenly over its neighborhood
    impulse = np.zeros((5, 5))
    impulse[2, 2] = 1.0
    spread = convolve(Image(impulse), box).data
    assert np.allclose(spread[1:4, 1:4], 1 / 9)
    assert spread.sum() == approx(1.0)
    assert spread[0].sum() == 0 and spread[:, 4].sum() == 0


def test_convolve_separable():
    from tvphi.image import convolve_array, convolve_separable
    from tvphi.multiscale import discrete_gaussian, discrete_gaussian_profile

    rng = np.random.default_rng(4)
    arr = rng.normal(size=(23, 31))
    for eps in (0.5, 2.0, 6.0):
        profile = discrete_gaussian_profile(eps)
        full = convolve_array(arr, discrete_gaussian(eps))
        assert np.allclose(convolve_separable(arr, profile), full, rtol=0, atol=1e-12)

    # an interior impulse keeps its mass
    impulse = np.zeros((21, 21))
    impulse[10, 10] = 1.0
    assert convolve_separable(impulse, discrete_gaussian_profile(1.0)).sum() == approx(1.0, abs=1e-12)


def test_noise_determinism():
    from tvphi import Image, add_gaussian_noise
    from tvphi.image import standard_normal

    a = standard_normal((101, 99), seed=7)
    b = standard_normal((101, 99), seed=7)
    c = standard_normal((101, 99), seed=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert abs(np.mean(a)) < 0.02
    assert np.std(a) == approx(1.0, abs=0.02)

    u = Image(np.full((8, 8), 100.0))
    assert add_gaussian_noise(u, 0, seed=1) is u
    noisy = add_gaussian_noise(u, 30, seed=1)
    assert np.array_equal(noisy.data, 100 + 30 * standard_normal((8, 8), seed=1))


def test_pgm_roundtrip(tmp_path):
    from tvphi import Image, read_pgm, write_pgm

    data = np.arange(48.0).reshape(6, 8) * 5
    write_pgm(Image(data), tmp_path / 'u.pgm')
    assert (tmp_path / 'u.pgm').read_bytes().startswith(b'P5')
    assert np.array_equal(read_pgm(tmp_path / 'u.pgm').data, data)

    # values are clamped and rounded only at write time
    write_pgm(Image(np.array([[-5.0, 300.4, 12.6]])), tmp_path / 'clamp.pgm')
    assert np.array_equal(read_pgm(tmp_path / 'clamp.pgm').data, [[0, 255, 13]])

    # no temporary files left behind
    assert sorted(p.name for p in tmp_path.iterdir()) == ['clamp.pgm', 'u.pgm']


def test_read_ascii_pgm(tmp_path):
    from tvphi import read_pgm

    path = tmp_path / 'ascii.pgm'
    path.write_text('P2\n3 2\n255\n0 1 2\n3 4 255\n')
    assert np.array_equal(read_pgm(path).data, [[0, 1, 2], [3, 4, 255]])


def test_read_pgm_errors(tmp_path):
    from tvphi import read_pgm, TVPhiConfigError

    with raises(TVPhiConfigError):
        read_pgm(tmp_path / 'missing.pgm')
    (tmp_path / 'junk.pgm').write_bytes(b'not an image')
    with raises(TVPhiConfigError):
        read_pgm(tmp_path / 'junk.pgm')

    # 4-bit gray levels would be misread as 8-bit values
    (tmp_path / 'maxval15.pgm').write_text('P2\n3 1\n15\n0 7 15\n')
    with raises(TVPhiConfigError, match='maxval 15'):
        read_pgm(tmp_path / 'maxval15.pgm')
    (tmp_path / 'image.png').write_bytes(b'\x89PNG\r\n\x1a\n')
    with raises(TVPhiConfigError):
        read_pgm(tmp_path / 'image.png')


def test_read_pgm_header_comments(tmp_path):
    from tvphi import read_pgm

    path = tmp_path / 'comment.pgm'
    path.write_text('P2\n# written by hand\n2 1 # size\n255\n10 20\n')
    assert np.array_equal(read_pgm(path).data, [[10, 20]])


def test_synthetic_images():
    from tvphi import two_region_phantom, gaussian_blob

    u = two_region_phantom(64)
    assert u.shape == (64, 64)
    assert set(np.unique(u.data)) == {64.0, 192.0}
    assert u.data[0, 0] == 64 and u.data[0, -1] == 192 and u.data[32, 48] == 64

    b = gaussian_blob(32, sigma=5, amplitude=100)
    assert b.data.max() <= 100
    assert np.allclose(b.data, b.data[::-1, ::-1])
