"""Pointwise envelope checks: ceiling, termwise factorial, floor/upper."""

import json

import numpy as np

from duhamel import (
    Forcing,
    Grid,
    ScalarField,
    SeriesOptions,
    ceiling_check,
    floor_check,
    solve_controlled_heat,
    termwise_factorial_check,
)
from duhamel.verify import band_limited_field, random_bounded_forcing


def periodic_1d(n=128):
    return Grid((n,), (2 * np.pi / n,), (0.0,))


def solve(G0, F, horizon=0.5, **kw):
    opts = SeriesOptions(depth_max=30, rel_tolerance=1e-12, time_steps=48,
                         output_times=(horizon / 2, horizon), **kw)
    return solve_controlled_heat(G0, F, horizon, opts)


class TestCeiling:
    def test_zero_forcing_equality(self):
        g = periodic_1d()
        x = g.coords(0)
        G0 = ScalarField(g, 1.0 + 0.5 * np.cos(x))  # nonnegative
        sol = solve(G0, Forcing.zero())
        report = ceiling_check(sol, G0, 0.0)
        assert report.passed
        # |G| = K*|G0| exactly when F = 0 and G0 >= 0: slack is rounding-level
        assert abs(report.worst) < 1e-12

    def test_saturated_constant_bound(self):
        g = periodic_1d(64)
        M = 0.9
        sol = solve(ScalarField.constant(g, 1.0), Forcing.constant(M))
        report = ceiling_check(sol, ScalarField.constant(g, 1.0), M)
        assert report.passed
        # e^{Mt} vs the truncated series: saturation up to the truncation tail
        assert abs(report.worst) <= sol.estimated_truncation_error + 1e-12

    def test_random_trials(self):
        g = periodic_1d()
        rng = np.random.default_rng(101)
        for _ in range(25):
            F = random_bounded_forcing(g, rng, 0.5, bound=rng.uniform(0.3, 2.0))
            G0 = band_limited_field(g, rng, amplitude=0.6, offset=1.0)
            sol = solve(G0, F)
            assert ceiling_check(sol, G0, F.abs_bound).passed

    def test_underestimated_bound_is_detected(self):
        g = periodic_1d(64)
        sol = solve(ScalarField.constant(g, 1.0), Forcing.constant(1.0), horizon=1.0)
        report = ceiling_check(sol, ScalarField.constant(g, 1.0), 0.25)
        assert not report.passed
        assert report.worst > 0


class TestTermwise:
    def test_order_zero_triangle_inequality(self):
        g = periodic_1d()
        x = g.coords(0)
        G0 = ScalarField(g, np.sin(x))  # signed initial data
        sol = solve(G0, Forcing.zero())
        assert termwise_factorial_check(sol, G0, 0.0).passed

    def test_constant_case_zero_slack(self):
        g = periodic_1d(64)
        M = 1.2
        sol = solve(ScalarField.constant(g, 1.0), Forcing.constant(M))
        report = termwise_factorial_check(sol, ScalarField.constant(g, 1.0), M)
        assert report.passed
        assert abs(report.worst) < 1e-13  # terms saturate the envelope exactly

    def test_random_trials(self):
        g = periodic_1d()
        rng = np.random.default_rng(202)
        for _ in range(25):
            F = random_bounded_forcing(g, rng, 0.5, bound=rng.uniform(0.3, 2.0))
            G0 = band_limited_field(g, rng, amplitude=0.6, offset=1.0)
            sol = solve(G0, F)
            assert termwise_factorial_check(sol, G0, F.abs_bound).passed


class TestFloorAndUpper:
    def test_zero_forcing_equality(self):
        g = periodic_1d()
        phi = band_limited_field(g, np.random.default_rng(3), amplitude=0.8)
        G0 = ScalarField(g, np.exp(-0.5 * phi.values))
        sol = solve(G0, Forcing.zero())
        report = floor_check(sol, phi, Forcing.zero())
        assert report.passed
        assert abs(report.worst) < 1e-12  # floor = ceiling = K * e^{-phi/2}

    def test_constant_forcing_flat_potential(self):
        # sup F must be nonnegative for the doubled-sup upper envelope to
        # hold at all (the bound is vacuous for negative-leaning forcing)
        g = periodic_1d(64)
        c = 0.6
        phi = ScalarField.constant(g, 0.4)
        G0 = ScalarField(g, np.exp(-0.5 * phi.values))
        sol = solve(G0, Forcing.constant(c))
        report = floor_check(sol, phi, Forcing.constant(c))
        assert report.passed
        # floor e^{ct} K*G0 equals G exactly in the flat constant case
        floor_records = [r for r in report.records if r.label == "floor"]
        assert max(abs(r.max_violation) for r in floor_records) < 1e-12

    def test_random_trials(self):
        g = periodic_1d()
        rng = np.random.default_rng(303)
        for _ in range(25):
            F = random_bounded_forcing(g, rng, 0.5, bound=rng.uniform(0.3, 1.5))
            phi = band_limited_field(g, rng, amplitude=rng.uniform(0.3, 1.2))
            G0 = ScalarField(g, np.exp(-0.5 * phi.values))
            sol = solve(G0, F)
            assert floor_check(sol, phi, F).passed


class TestReportFormat:
    def test_jsonl_records(self):
        g = periodic_1d(64)
        G0 = ScalarField.constant(g, 1.0)
        sol = solve(G0, Forcing.constant(0.5))
        report = ceiling_check(sol, G0, 0.5)
        lines = report.to_jsonl().strip().split("\n")
        assert len(lines) == len(sol.trajectory.times)
        for line, t in zip(lines, sol.trajectory.times):
            row = json.loads(line)
            assert set(row) >= {"time", "max_violation", "location"}
            assert row["time"] == t
            assert isinstance(row["location"], int)

    def test_termwise_labels(self):
        g = periodic_1d(64)
        G0 = ScalarField.constant(g, 1.0)
        sol = solve(G0, Forcing.constant(0.5))
        report = termwise_factorial_check(sol, G0, 0.5)
        labels = {r.label for r in report.records}
        assert f"k={sol.truncation_depth}" in labels
