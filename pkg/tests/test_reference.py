import math

import numpy as np
import pytest

from uniwarp.reference import (BUILTIN_KINDS, Density1D, SeparableDensity,
                               TestDistributionSpec, cdf_transform_1d,
                               evaluator, generate, marginal_1d,
                               separable_cdf_transform)

from oracles import ks_statistic


class TestDensity1D:
    def test_unit_mass_after_construction(self):
        d = Density1D(np.random.default_rng(0).uniform(0.1, 2.0, 257))
        dx = 1.0 / 256
        assert np.trapezoid(d.samples, dx=dx) == pytest.approx(1.0, abs=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            Density1D(np.array([1.0, -0.1, 1.0]))

    def test_cumulative_endpoints(self):
        d = Density1D(np.linspace(0.1, 1.0, 100))
        c = d.cumulative()
        assert c[0] == 0.0 and c[-1] == 1.0
        assert np.all(np.diff(c) >= 0.0)


class TestCdfTransform1D:
    def test_uniform_is_identity(self):
        d = Density1D(np.ones(512))
        x = np.linspace(0.0, 1.0, 91)
        np.testing.assert_allclose(cdf_transform_1d(d, x), x, atol=1e-12)

    def test_linear_density_gives_square(self):
        # d(x) = 2x on [0,1] has cumulative x^2
        n = 10_001
        t = np.linspace(0.0, 1.0, n)
        d = Density1D(2.0 * t)
        x = np.linspace(0.0, 1.0, 57)
        np.testing.assert_allclose(cdf_transform_1d(d, x), x ** 2, atol=1e-6)

    def test_truncated_exponential_matches_quadrature(self):
        rate = 3.0
        n = 4001
        t = np.linspace(0.0, 1.0, n)
        d = Density1D(np.exp(-rate * t))
        # quadrature oracle on a finer grid
        tf = np.linspace(0.0, 1.0, 40_001)
        pdf = np.exp(-rate * tf)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(tf))])
        cum /= cum[-1]
        x = np.linspace(0.0, 1.0, 37)
        expected = np.interp(x, tf, cum)
        np.testing.assert_allclose(cdf_transform_1d(d, x), expected, atol=1e-5)

    def test_point_outside_support_rejected(self):
        d = Density1D(np.ones(16), support=(0.0, 2.0))
        with pytest.raises(ValueError, match="outside"):
            cdf_transform_1d(d, np.array([2.5]))

    def test_discrete_slope_tracks_density(self):
        # (xhat(x+h) - xhat(x)) / h ~ a * p(x): the 1-D transport identity
        n = 20_001
        t = np.linspace(0.0, 1.0, n)
        p = np.exp(-0.5 * ((t - 0.4) / 0.2) ** 2)
        d = Density1D(p)
        x = np.linspace(0.05, 0.95, 10)
        h = 1e-4
        slope = (cdf_transform_1d(d, x + h) - cdf_transform_1d(d, x - h)) / (2 * h)
        expected = np.interp(x, t, d.samples)  # a = support width = 1
        np.testing.assert_allclose(slope, expected, rtol=1e-4)


class TestSeparableTransform:
    def test_uniform_product_is_identity(self):
        d = SeparableDensity((Density1D(np.ones(256)), Density1D(np.ones(256))))
        pts = np.random.default_rng(1).uniform(0.0, 1.0, (200, 2))
        np.testing.assert_allclose(separable_cdf_transform(d, pts), pts, atol=1e-12)

    def test_axes_transform_independently(self):
        t = np.linspace(0.0, 1.0, 2001)
        gx = Density1D(np.exp(-0.5 * ((t - 0.5) / 0.12) ** 2))
        gy = Density1D(np.exp(-0.5 * ((t - 0.5) / 0.18) ** 2))
        d = SeparableDensity((gx, gy))
        rng = np.random.default_rng(2)
        pts = rng.uniform(0.2, 0.8, (50, 2))
        out = separable_cdf_transform(d, pts)
        # changing the y coordinate must not change the x output
        pts2 = pts.copy()
        pts2[:, 1] = rng.uniform(0.2, 0.8, 50)
        out2 = separable_cdf_transform(d, pts2)
        np.testing.assert_array_equal(out[:, 0], out2[:, 0])

    def test_pushforward_to_uniform_ks(self):
        # transformed samples of the product density must be uniform per axis
        rng = np.random.default_rng(3)
        n = 100_000
        t = np.linspace(0.0, 1.0, 4001)
        fx = np.exp(-0.5 * ((t - 0.45) / 0.15) ** 2)
        fy = np.exp(-0.5 * ((t - 0.55) / 0.2) ** 2)
        d = SeparableDensity((Density1D(fx), Density1D(fy)))
        # rejection sampler oracle for each axis
        def draw(profile, count):
            out = np.empty(0)
            peak = profile.max()
            while len(out) < count:
                cand = rng.uniform(0.0, 1.0, count)
                keep = rng.uniform(0.0, peak, count) < np.interp(cand, t, profile)
                out = np.concatenate([out, cand[keep]])
            return out[:count]

        pts = np.column_stack([draw(fx, n), draw(fy, n)])
        out = separable_cdf_transform(d, pts)
        for axis in (0, 1):
            ks = ks_statistic(out[:, axis], lambda v: v)
            assert ks < 0.01


class TestGenerate:
    def test_kinds_exposed(self):
        assert set(BUILTIN_KINDS) == {"uniform", "gaussian", "bimodal", "concave", "ring"}

    @pytest.mark.parametrize("kind", BUILTIN_KINDS)
    def test_unit_mass_and_nonnegative(self, kind):
        grid = generate(TestDistributionSpec(kind), (96, 96))
        cell = (1.0 / 95) ** 2
        assert abs(grid.data.sum() * cell - 1.0) < 1e-9
        assert np.all(grid.data >= 0.0)

    def test_gaussian_mode_location(self):
        grid = generate(TestDistributionSpec("gaussian"), (128, 128))
        iy, ix = np.unravel_index(np.argmax(grid.data), grid.shape)
        assert abs(iy - 63.5) <= 1.0 and abs(ix - 63.5) <= 1.0

    def test_bimodal_two_peaks_at_modes(self):
        grid = generate(TestDistributionSpec("bimodal"), (128, 128))
        d = grid.data
        # grid argmax oracle: local maxima above half the peak (a mode on
        # a cell boundary shows up on both adjacent samples, so cluster
        # by rounded position)
        hits = set()
        for i in range(1, 127):
            for j in range(1, 127):
                v = d[i, j]
                if v > 0.5 * d.max() and v >= d[i - 1:i + 2, j - 1:j + 2].max():
                    hits.add((round(i / 4), round(j / 4)))
        assert len(hits) == 2
        xs = sorted(j * 4 / 127.0 for _, j in hits)
        ys = [i * 4 / 127.0 for i, _ in hits]
        assert abs(xs[0] - 0.35) < 0.03 and abs(xs[1] - 0.65) < 0.03
        assert all(abs(y - 0.5) < 0.03 for y in ys)

    def test_ring_center_far_below_crest(self):
        grid = generate(TestDistributionSpec("ring"), (128, 128))
        center = grid.data[63:65, 63:65].mean()
        assert center < 0.05 * grid.data.max()

    def test_concave_has_angular_asymmetry(self):
        grid = generate(TestDistributionSpec("concave"), (128, 128))
        d = grid.data
        # crest on the opening side vs the far side differ strongly
        right = d[64, 96]   # toward opening_angle = 0 (positive x)
        left = d[64, 31]
        assert right > 2.0 * left

    def test_mass_escape_rejected(self):
        spec = TestDistributionSpec("gaussian", {"sigma": (0.4, 0.4)})
        with pytest.raises(ValueError, match="mass-escape"):
            generate(spec, (64, 64))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            TestDistributionSpec("blob")

    def test_uniform_floor_present(self):
        grid = generate(TestDistributionSpec("gaussian"), (96, 96))
        # mixture floor keeps the empty corners at a nonzero level
        u = 1.0 / (95 * 95)
        assert grid.data.min() > 0.01 * grid.data.mean()

    def test_marginal_matches_feature_axis(self):
        spec = TestDistributionSpec("gaussian", {"uniform_fraction": 0.0})
        m = marginal_1d(spec, 0, 501)
        t = np.linspace(0.0, 1.0, 501)
        expected = np.exp(-0.5 * ((t - 0.5) / 0.12) ** 2)
        expected /= np.trapezoid(expected, dx=1 / 500)
        np.testing.assert_allclose(m.samples, expected, rtol=1e-10)
