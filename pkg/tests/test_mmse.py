import math
import warnings

import numpy as np
import pytest

from epi_lab import distributions as D
from epi_lab import mmse as M
from epi_lab.channel import ChannelError, ChannelModel

MD = D.MixedDistribution
N01 = D.Gaussian.scalar()
HALF_LN_2PIE = 0.5 * math.log(2 * math.pi * math.e)


def ch(x, noise=N01):
    return ChannelModel(x if isinstance(x, MD) else MD.from_density(x), noise)


LAWS = {
    "gauss": D.Gaussian.scalar(0.5, 2.0),
    "uniform": D.UniformBox(0.0, 1.0),
    "pyramid": D.Pyramid(1.0),
    "bernoulli": MD.from_atoms([[0.0], [1.0]], [0.5, 0.5]),
    "mixed": MD.mixed([[0.0]], [0.5], D.UniformBox(2.0, 3.0)),
}


class TestLogGrid:
    def test_contains_one_and_ends(self):
        g = M.log_grid()
        assert g[0] == pytest.approx(1e-4) and g[-1] == pytest.approx(1e4)
        assert 1.0 in g and len(g) == 321
        assert np.all(np.diff(g) > 0)


class TestConditionalMean:
    def test_gaussian(self):
        np.testing.assert_allclose(M.conditional_mean(ch(N01), 1.0, 2.0), 1.0, atol=1e-10)

    def test_gaussian_vector(self):
        y = np.linspace(-3, 3, 7)
        np.testing.assert_allclose(M.conditional_mean(ch(N01), 4.0, y), 2.0 * y / 5.0, atol=1e-10)

    def test_atom(self):
        assert M.conditional_mean(ch(MD.from_atoms([[3.0]], [1.0])), 2.5, -1.7) == 3.0

    @pytest.mark.parametrize("x", [D.Pyramid(1.0), D.UniformBox(-1, 1),
                                   MD.from_atoms([[-1.0], [1.0]], [0.5, 0.5])])
    def test_symmetric(self, x):
        assert abs(M.conditional_mean(ch(x), 3.0, 0.0)) < 1e-12

    def test_underflow(self):
        with pytest.raises(Exception, match="outside the effective support"):
            M.conditional_mean(ch(D.UniformBox(0, 1)), 1.0, 1e6)

    def test_non_gaussian_noise(self):
        with pytest.raises(ChannelError):
            M.conditional_mean(ch(N01, D.UniformBox(0, 1)), 1.0, 0.0)


class TestMmse:
    @pytest.mark.parametrize("var,g", [(1.0, 1.0), (2.0, 0.1), (0.25, 100.0)])
    def test_gaussian(self, var, g):
        np.testing.assert_allclose(M.mmse(ch(D.Gaussian.scalar(0, var)), g), var / (1 + g * var),
                                   atol=1e-9)

    def test_atom(self):
        assert M.mmse(ch(MD.from_atoms([[0.7]], [1.0])), 3.0) == 0.0

    def test_uniform_low_snr(self):
        np.testing.assert_allclose(M.mmse(ch(D.UniformBox(0, 1)), 1e-6), 1 / 12, atol=1e-6)
        assert M.mmse_at_zero(ch(D.UniformBox(0, 1))) == pytest.approx(1 / 12)

    def test_noise_weighting(self):
        # Sigma = 4: M = E|X - E(X|Y)|^2 / 4 with Y = sqrt(g) X + N(0,4)
        x = D.Gaussian.scalar()
        got = M.mmse(ch(x, D.Gaussian.scalar(0, 4.0)), 1.0)
        np.testing.assert_allclose(got, (1 / (1 + 1 / 4)) / 4, atol=1e-9)

    def test_two_dim_product(self):
        n2 = D.Gaussian(np.zeros(2), np.eye(2))
        got = M.mmse(ch(D.Gaussian(np.zeros(2), np.diag([1.0, 2.0])), n2), 1.0)
        np.testing.assert_allclose(got, 0.5 + 2 / 3, atol=1e-9)

    @pytest.mark.parametrize("name", list(LAWS))
    def test_bounds_and_monotone(self, name):
        c = ch(LAWS[name])
        grid = 10.0 ** np.arange(-2.0, 4.5, 0.5)
        vals = np.array([M.mmse(c, g, return_error=True) for g in grid])
        m, e = vals[:, 0], vals[:, 1]
        assert np.all(m >= -e)
        assert np.all(m <= M.mmse_at_zero(c) + e)
        assert np.all(grid * m <= 1.0 + 1e-6)
        assert np.all(np.diff(m) < e[1:] + e[:-1])


class TestDebruijn:
    def test_gaussian(self):
        assert M.debruijn_residual(ch(N01), 1.0, 1e-3) < 1e-4

    def test_uniform(self):
        assert M.debruijn_residual(ch(D.UniformBox(0, 1)), 1.0, 1e-3) < 1e-3

    def test_mixture_density(self):
        x = D.FiniteMixture([0.5, 0.5], [D.Gaussian.scalar(0, 1e-2), N01])
        assert M.debruijn_residual(ch(x), 1.0, 1e-3) < 1e-2

    @pytest.mark.parametrize("name", ["gauss", "uniform", "pyramid", "bernoulli", "mixed"])
    @pytest.mark.parametrize("g", [0.1, 0.5, 1.0, 5.0, 10.0])
    def test_battery(self, name, g):
        r = M.debruijn_check(ch(LAWS[name]), g, 1e-3)
        assert r.residual < max(10 * 1e-3 ** 2, 10 * r.errorEstimate)

    def test_step_validation(self):
        with pytest.raises(ChannelError):
            M.debruijn_check(ch(N01), 1e-4, 1e-3)


@pytest.fixture(scope="module")
def uniform_curve():
    return M.mmse_curve(ch(D.UniformBox(0, 1)), M.log_grid(per_decade=20))


class TestEntropyRepresentation:
    @pytest.mark.parametrize("var", [1.0, 4.0])
    def test_gaussian(self, var):
        c = ch(D.Gaussian.scalar(0, var))
        want = 0.5 * math.log(2 * math.pi * math.e * var)
        assert abs(M.entropy_via_mmse(c, per_decade=10) - want) < 1e-3
        assert abs(M.entropy_via_mmse_centered(c, per_decade=10) - want) < 1e-3

    def test_uniform(self, uniform_curve):
        c = ch(D.UniformBox(0, 1))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", M.MmseTailWarning)
            h1 = M.entropy_via_mmse(c, curve=uniform_curve)
            h2 = M.entropy_via_mmse_centered(c, curve=uniform_curve)
        assert abs(h1) < 1e-2 and abs(h2) < 1e-2 and abs(h1 - h2) < 2e-2

    def test_gaussian_centred_integrand_vanishes(self):
        c = ch(N01)
        g = np.array([0.01, 1.0, 100.0])
        np.testing.assert_allclose(1 / (1 + g) - [M.mmse(c, v) for v in g], 0.0, atol=1e-9)

    def test_atoms_rejected(self):
        with pytest.raises(ChannelError):
            M.entropy_via_mmse(ch(LAWS["bernoulli"]))

    def test_centred_rejects_d2(self):
        g2 = D.Gaussian(np.zeros(2), np.eye(2))
        with pytest.raises(ChannelError):
            M.entropy_via_mmse_centered(ch(g2, g2))

    def test_tail_warning(self):
        # gamma * M = gamma s2 / (1 + gamma s2) is far from 1 when the grid stops at 1e-2
        c = ch(D.Gaussian.scalar(0, 1e-3))
        curve = M.mmse_curve(c, M.log_grid(1e-4, 1e-2, 10))
        with pytest.warns(M.MmseTailWarning):
            M.entropy_via_mmse(c, curve=curve)

    def test_curve_rejects_unsorted(self):
        with pytest.raises(ValueError):
            M.MmseCurve([1.0, 0.5], [0.1, 0.2], np.eye(1))
