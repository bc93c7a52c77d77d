"""Heat-kernel evaluation and convolution, both application paths."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from duhamel import (
    FreeSpaceTruncated,
    Grid,
    KernelApplication,
    Method,
    ScalarField,
    convolve,
    convolve_grad,
    kernel_eval,
)


def periodic_1d(n=256):
    return Grid((n,), (2 * np.pi / n,), (0.0,))


class TestKernelEval:
    def test_origin_value_any_dim(self):
        for n in (1, 2, 3):
            t = 0.37
            assert np.isclose(kernel_eval(np.zeros(n), t, n), (4 * math.pi * t) ** (-n / 2), rtol=1e-15)

    def test_normalizing_time(self):
        # (4 pi t)^{-1/2} = 1 exactly when t = 1/(4 pi)
        assert np.isclose(kernel_eval(0.0, 1 / (4 * math.pi), 1), 1.0, rtol=1e-15)

    def test_closed_form_point(self):
        # oracle: high-precision evaluation of (4 pi)^{-1/2} e^{-1}
        import mpmath

        mpmath.mp.dps = 30
        want = float(1 / mpmath.sqrt(4 * mpmath.pi) * mpmath.e**-1)
        assert np.isclose(kernel_eval(2.0, 1.0, 1), want, rtol=1e-14)
        assert np.isclose(want, 0.1037769, atol=5e-8)

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ValueError):
            kernel_eval(1.0, 0.0, 1)
        with pytest.raises(ValueError):
            kernel_eval(1.0, -0.5, 1)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kernel_eval(np.zeros(2), 1.0, 3)


class TestConvolve:
    def test_constant_preserved(self):
        g = periodic_1d(64)
        for t in (0.0, 0.01, 1.0, 10.0):
            out = convolve(ScalarField.constant(g, 3.25), t)
            assert np.max(np.abs(out.values - 3.25)) < 1e-12

    def test_identity_at_zero_time(self):
        g = periodic_1d(64)
        f = ScalarField(g, np.sin(g.coords(0)))
        assert convolve(f, 0.0) is f

    def test_gaussian_gaussian_identity_against_quadrature(self):
        # K(.,t) * e^{-x^2/4a} = sqrt(a/(a+t)) e^{-x^2/(4(a+t))}
        n, extent = 256, 32.0
        h = extent / n
        g = Grid((n,), (h,), (-extent / 2,), FreeSpaceTruncated(2.0))
        x = g.coords(0)
        a, t = 0.7, 0.4
        f = ScalarField(g, np.exp(-(x**2) / (4 * a)))
        out = convolve(f, t)
        closed = np.sqrt(a / (a + t)) * np.exp(-(x**2) / (4 * (a + t)))
        assert np.max(np.abs(out.values - closed)) < 1e-10

        # independent adaptive-quadrature oracle at a few node coordinates
        for xi in (-3.1, 0.0, 1.7):
            idx = int(np.argmin(np.abs(x - xi)))
            xn = x[idx]
            oracle, err = quad(
                lambda y: kernel_eval(xn - y, t, 1) * math.exp(-(y**2) / (4 * a)),
                -extent / 2,
                extent / 2,
            )
            assert abs(out.values[idx] - oracle) < 1e-8 + 10 * err

    def test_spectral_mass_preserving(self):
        g = periodic_1d(128)
        rng = np.random.default_rng(0)
        f = ScalarField(g, rng.normal(size=128))
        out = convolve(f, 0.63)
        assert abs(np.mean(out.values) - np.mean(f.values)) < 1e-14


class TestConvolveGrad:
    def test_constant_gives_zero(self):
        g = periodic_1d(64)
        out = convolve_grad(ScalarField.constant(g, 5.0), 0.1)
        assert np.max(np.abs(out.components[0])) < 1e-13

    def test_heat_mode(self):
        g = periodic_1d(256)
        x = g.coords(0)
        out = convolve_grad(ScalarField(g, np.sin(x)), 0.35)
        assert np.max(np.abs(out.components[0] - math.exp(-0.35) * np.cos(x))) < 1e-12

    def test_dual_path_agreement(self):
        # spectral differentiation after convolution vs (grad K) * field
        g = periodic_1d(256)
        x = g.coords(0)
        rng = np.random.default_rng(42)
        vals = 1.0 + sum(
            rng.normal(0, 0.3) * np.cos(k * x + rng.uniform(0, 2 * np.pi)) for k in range(1, 5)
        )
        f = ScalarField(g, vals)
        spectral = convolve_grad(f, 0.05, method=Method.SPECTRAL_PERIODIC)
        direct = convolve_grad(f, 0.05, method=Method.DIRECT_QUADRATURE)
        gap = np.max(np.abs(spectral.components[0] - direct.components[0]))
        assert gap < 1e-8

    def test_rejects_zero_time(self):
        g = periodic_1d(64)
        with pytest.raises(ValueError):
            convolve_grad(ScalarField.constant(g, 1.0), 0.0)


class TestInvariants:
    def test_normalization_periodic(self):
        g = periodic_1d(128)
        one = ScalarField.constant(g, 1.0)
        for t in (1e-6, 0.1, 2.0):
            assert np.max(np.abs(convolve(one, t).values - 1.0)) < 1e-12

    def test_normalization_free_space(self):
        g = Grid((128,), (0.125,), (-8.0,), FreeSpaceTruncated(2.0))
        one = ScalarField.constant(g, 1.0)
        # edge replication keeps constants exact up to quadrature tolerance
        assert np.max(np.abs(convolve(one, 0.5).values - 1.0)) < 1e-9

    def test_semigroup(self):
        g = periodic_1d(128)
        rng = np.random.default_rng(7)
        f = ScalarField(g, rng.normal(size=128))
        once = convolve(convolve(f, 0.2), 0.3)
        direct = convolve(f, 0.5)
        assert np.max(np.abs(once.values - direct.values)) < 1e-8

    def test_positivity(self):
        g = periodic_1d(128)
        x = g.coords(0)
        f = ScalarField(g, np.maximum(np.sin(x), 0.0))  # kinked, nonnegative
        out = convolve(f, 0.05)
        assert out.values.min() > -1e-12 * f.max_abs

    def test_sup_norm_non_increasing(self):
        g = periodic_1d(128)
        rng = np.random.default_rng(9)
        f = ScalarField(g, rng.normal(size=128))
        for t in (0.01, 0.1, 1.0):
            assert convolve(f, t).max_abs <= f.max_abs + 1e-12 * f.max_abs


class TestUnderResolved:
    def test_sub_cell_kernel_is_identity(self):
        g = Grid((64,), (0.5,), (-16.0,), FreeSpaceTruncated(2.0))
        # 8 sqrt(2t) < 0.5  <=>  t < 0.5^2 / 128
        t = 0.5**2 / 128 * 0.5
        app = KernelApplication(g, t, Method.DIRECT_QUADRATURE)
        assert app.under_resolved
        f = ScalarField(g, np.sin(g.coords(0)))
        assert app.apply(f) is f

    def test_resolved_kernel_not_flagged(self):
        g = Grid((64,), (0.5,), (-16.0,), FreeSpaceTruncated(2.0))
        app = KernelApplication(g, 0.05, Method.DIRECT_QUADRATURE)
        assert not app.under_resolved

    def test_spectral_requires_periodic(self):
        g = Grid((64,), (0.5,), (-16.0,), FreeSpaceTruncated(2.0))
        with pytest.raises(ValueError):
            KernelApplication(g, 0.1, Method.SPECTRAL_PERIODIC)


class TestViscosityKnob:
    def test_rescaled_kernel(self):
        nu = 0.25
        t = 0.8
        # K_nu(x, t) = (4 pi nu t)^{-1/2} e^{-x^2/(4 nu t)}
        assert np.isclose(
            kernel_eval(1.0, t, 1, nu=nu),
            (4 * math.pi * nu * t) ** -0.5 * math.exp(-1 / (4 * nu * t)),
            rtol=1e-15,
        )

    def test_semigroup_speed(self):
        g = periodic_1d(128)
        x = g.coords(0)
        f = ScalarField(g, np.sin(x))
        out = convolve(f, 1.0, nu=0.3)
        assert np.max(np.abs(out.values - math.exp(-0.3) * np.sin(x))) < 1e-12
