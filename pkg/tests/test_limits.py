import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epi_lab import distributions as D
from epi_lab import limits as L
from epi_lab.channel import ChannelError, ChannelModel

MD = D.MixedDistribution
N01 = D.Gaussian.scalar()


def ch(x, noise=N01):
    return ChannelModel(x if isinstance(x, MD) else MD.from_density(x), noise)


class TestVerdict:
    def test_residual(self):
        v = L.LimitVerdict(1.0, [(1.0, 0.5, 0.0), (10.0, 0.9, 0.0)])
        assert v.finalResidual == pytest.approx(0.1)

    def test_non_monotone_grid(self):
        with pytest.raises(ValueError):
            L.LimitVerdict(0.0, [(1.0, 0.0, 0.0), (3.0, 0.0, 0.0), (2.0, 0.0, 0.0)])


class TestHighSnr:
    def test_gaussian_closed_form(self):
        v = L.verify_highsnr_continuous(ch(N01))
        want = [0.5 * math.log(2 * math.pi * math.e * (1 + g) / g) for g in v.gammas]
        np.testing.assert_allclose([s[1] for s in v.sweep], want, atol=1e-7)
        assert v.finalResidual < 1e-4

    def test_uniform_monotone(self):
        v = L.verify_highsnr_continuous(ch(D.UniformBox(0, 1)))
        assert np.all(np.diff(v.residuals) < 0)
        # O(gamma^-1/2) edge term: 0.018 at 1e4 (see the acceptance suite)
        assert 0.015 < v.finalResidual < 0.02

    def test_continuous_rejects_atoms(self):
        with pytest.raises(ChannelError):
            L.verify_highsnr_continuous(ch(MD.from_atoms([[0.0], [1.0]], [0.5, 0.5])))

    def test_bernoulli(self):
        v = L.verify_highsnr_discrete(ch(MD.from_atoms([[0.0], [1.0]], [0.5, 0.5])))
        assert v.target == pytest.approx(math.log(2)) and v.finalResidual < 1e-3

    def test_trinary(self):
        x = MD.from_atoms([[0.0], [1.0], [2.0]], [1 / 3, 1 / 3, 1 / 3])
        v = L.verify_highsnr_discrete(ch(x))
        assert v.target == pytest.approx(math.log(3)) and v.finalResidual < 1e-3

    def test_single_atom(self):
        v = L.verify_highsnr_discrete(ch(MD.from_atoms([[0.0]], [1.0])))
        assert v.target == 0.0
        np.testing.assert_allclose([s[1] for s in v.sweep], 0.0, atol=1e-12)

    def test_mixed(self):
        v = L.verify_highsnr_mixed(ch(MD.mixed([[0.0]], [0.5], D.UniformBox(2, 3))))
        assert v.target == pytest.approx(math.log(2))
        assert np.all(np.diff(v.residuals) < 0)

    def test_mixed_reduces(self):
        c = ch(MD.from_atoms([[0.0], [1.0]], [0.5, 0.5]))
        grid = (10.0, 100.0)
        a = L.verify_highsnr_mixed(c, grid)
        b = L.verify_highsnr_discrete(c, grid)
        assert a.sweep == b.sweep and a.kind == b.kind


class TestLowSnr:
    @pytest.mark.parametrize("x", [D.UniformBox(0, 1), MD.from_atoms([[0.0], [1.0]], [0.5, 0.5]),
                                   MD.mixed([[0.0]], [0.5], D.UniformBox(2, 3))])
    def test_vanishes(self, x):
        v = L.verify_lowsnr(ch(x))
        assert v.sweep[-1][1] < 1e-3 and v.monotone()

    def test_gaussian_bound(self):
        v = L.verify_lowsnr(ch(N01))
        for g, val, _ in v.sweep:
            np.testing.assert_allclose(val, 0.5 * math.log1p(g), atol=1e-9)
            assert val <= g / 2


class TestRateFit:
    def test_synthetic(self):
        g = np.array(L.HIGH_GRID)
        v = L.LimitVerdict(0.0, [(x, 3.0 / math.sqrt(x), 1e-12) for x in g])
        e, c = L.fit_rate(v)
        assert e == pytest.approx(-0.5) and c == pytest.approx(3.0)
        assert v.fittedExponent == e and v.exponentStderr < 1e-6

    @settings(max_examples=20, deadline=None)
    @given(p=st.floats(0.2, 2.0), c=st.floats(0.01, 10.0))
    def test_power_law_recovered(self, p, c):
        v = L.LimitVerdict(0.0, [(x, c * x ** -p, 0.0) for x in L.HIGH_GRID])
        e, k = L.fit_rate(v)
        assert e == pytest.approx(-p, abs=1e-9) and k == pytest.approx(c, rel=1e-9)

    def test_noise_floor(self):
        v = L.LimitVerdict(0.0, [(x, 1e-9, 1e-9) for x in L.HIGH_GRID])
        with pytest.raises(L.RateFitError, match="tighten"):
            L.fit_rate(v)

    def test_two_level_piecewise_constant(self):
        x = D.PiecewiseConstant([0.0, 0.5, 1.0], [1.5, 0.5])
        v = L.verify_highsnr_continuous(ch(x, D.UniformBox(0, 1)))
        e, _ = L.fit_rate(v)
        assert abs(e + 0.5) <= 0.1


class TestDomination:
    def test_origin(self):
        psi = L.domination_bound_gaussian(0.0, 0.0, 1.0, 1.0, N01)
        np.testing.assert_allclose(psi, math.log(math.sqrt(5)) + 0.5 * math.log(2 * math.pi),
                                   atol=1e-10)
        np.testing.assert_allclose(psi, 1.7236574894, atol=1e-9)

    @pytest.mark.parametrize("x", [0.5, -1.0, 2.0])
    def test_quadratic_growth(self, x):
        d = L.domination_bound_gaussian(x, 0.0, 1.0, 1.0, N01) - \
            L.domination_bound_gaussian(0.0, 0.0, 1.0, 1.0, N01)
        assert d == pytest.approx(x * x)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            L.domination_bound_gaussian(0.0, 0.0, 1.5, 1.0, N01)

    @pytest.mark.parametrize("g", [1.0, 10.0, 100.0])
    def test_point_one_one(self, g):
        c = L.domination_check(N01, N01, 1.0, 1.0, [1.0], [1.0], g)
        assert c.holds

    def test_gamma_below_one(self):
        with pytest.raises(ValueError):
            L.domination_check(N01, N01, 1.0, 1.0, [0.0], [0.0], 0.5)

    def test_gaussian_J(self):
        # J for Gaussian X and U: N(x + y/s; 0, 1 + 1/s^2) evaluated at the point
        J, _ = L.convolution_J(N01, N01, 0.3, -0.4, 4.0)
        want = math.exp(-0.5 * (0.3 - 0.2) ** 2 / 1.25) / math.sqrt(2 * math.pi * 1.25)
        np.testing.assert_allclose(J, want, atol=1e-10)


class TestPyramid:
    def test_plus_point(self):
        assert L.pyramid_J_closed_form(0.5, 0.0, 100.0, 0.5) == pytest.approx(0.5)
        np.testing.assert_allclose(L.pyramid_J_quadrature(0.5, 0.0, 100.0, 0.5), 0.5, atol=1e-8)

    def test_minus_point(self):
        assert L.pyramid_J_closed_form(-0.5, 0.0, 100.0, 0.5) == pytest.approx(0.5)

    def test_off_centre(self):
        # y - b = 0.2 shifts the line: 1 - 0.5 - 0.2/10
        assert L.pyramid_J_closed_form(0.5, 0.7, 100.0, 0.5, 0.5) == pytest.approx(0.48)
        np.testing.assert_allclose(L.pyramid_J_quadrature(0.5, 0.7, 100.0, 0.5, 0.5), 0.48,
                                   atol=1e-8)

    def test_outside(self):
        assert L.pyramid_J_closed_form(0.0, 0.2, 4.0, 1.0 / 1.5) is None
        arr = L.pyramid_J_closed_form(np.array([0.0, 0.5]), np.array([0.2, 0.0]), 100.0, 0.5)
        assert np.isnan(arr[0]) and arr[1] == pytest.approx(0.5)

    def test_needs_large_gamma(self):
        with pytest.raises(ValueError):
            L.pyramid_J_closed_form(0.5, 0.0, 0.25, 1.0)

    def test_tensor_product(self):
        got = L.pyramid_J_closed_form([0.5, -0.5], [0.0, 0.0], 100.0, [0.5, 0.5])
        assert got == pytest.approx(0.25)
        assert L.pyramid_J_closed_form([0.0, 0.5], [0.2, 0.0], 100.0, [0.5, 0.5]) is None

    @pytest.mark.parametrize("g,a", [(100.0, 0.5), (400.0, 1.0), (25.0, 2.0)])
    def test_random_agreement(self, g, a):
        pts = L.sample_parallelograms(np.random.default_rng(1), 100, g, a)
        assert pts.shape == (100, 2)
        jc = L.pyramid_J_closed_form(pts[:, 0], pts[:, 1], g, a)
        assert np.all(np.isfinite(jc))
        np.testing.assert_allclose(L.pyramid_J_quadrature(pts[:, 0], pts[:, 1], g, a), jc,
                                   atol=1e-8)

    def test_pointwise_limit(self):
        for g in (1e2, 1e4, 1e6):
            assert abs(L.pyramid_J_quadrature(0.3, 0.4, g) - 0.7) < 2 / math.sqrt(g)

    # exact rationals from symbolic integration of the cubic branch on {s(1-x) < y < a}
    @pytest.mark.parametrize("x,y,g,a,want", [
        (0.95, 0.8, 100.0, 1.0, 343 / 60000),
        (0.99, 0.3, 400.0, 0.5, 4 / 1875),
    ])
    def test_cubic_branch(self, x, y, g, a, want):
        np.testing.assert_allclose(L.pyramid_J_quadrature(x, y, g, a), want, atol=1e-12)

    def test_H_vanishes(self):
        xs, ys = np.meshgrid(np.linspace(-0.8, 0.8, 17), np.linspace(-0.9, 0.9, 19))
        sup = [np.max(np.abs(L.pyramid_H(xs, ys, g))) for g in (1e2, 1e3, 1e4, 1e5)]
        assert np.all(np.diff(sup) < 0) and sup[-1] < 0.02

    def test_pyramid_pair_residuals_frozen(self):
        # independent scipy.quad evaluation of I + h(U/sqrt(g)) - h(X)
        v = L.verify_highsnr_continuous(ch(D.Pyramid(1.0), D.Pyramid(1.0)))
        want = [0.0602272, 0.0223160, 0.0080567, 0.0028581, 0.001001, 0.0003471, 0.00011939]
        np.testing.assert_allclose(v.residuals, want, rtol=2e-3)
