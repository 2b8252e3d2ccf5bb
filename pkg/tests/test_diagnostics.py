"""Energy, mass, and kernel-structure observables.

The frozen free-energy value is cross-checked against a 30-digit quadrature
of the continuum functional: the discrete double well omits the boundary
half-weights, and adding 0.25 h (the omitted (0^2-1)^2 contributions) back
reproduces the continuum energy of the bump to 1e-12.
"""

import io
import warnings

import numpy as np
import pytest

from tfch.caputo_l2 import kernel_row_J
from tfch.compact_spatial import GridFunction, sample
from tfch.diagnostics import (
    G_functional,
    convergence_order,
    dgs_identity_check,
    energy_series,
    free_energy,
    kernel_property_check,
    mass,
    modified_energy,
    write_convergence_csv,
    write_energy_csv,
    write_mass_csv,
)
from tfch.temporal_mesh import build_custom, build_graded_cubic
from tfch.tfch_solver import SolverConfig, quartic_bump, solve

# continuum E[u] = (eps^2/2) int u_x^2 + (1/4) int (u^2-1)^2 for the quartic
# bump at eps = 0.1, quadrature at 30 digits
_CONTINUUM_BUMP_ENERGY = 0.24999815871664462


def _small_run(alpha=0.4, N=12, M=12):
    cfg = SolverConfig(alpha=alpha, kappa=0.01, epsilon=0.1,
                       mesh=build_graded_cubic(N, 1.0), M=M,
                       initial=quartic_bump)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve(cfg)


class TestMassAndEnergy:
    def test_mass_includes_boundary_halves(self):
        g = sample(lambda x: np.ones_like(x), 60)
        assert mass(g) == pytest.approx(1.0, rel=1e-14)

    def test_mass_of_parabola_matches_closed_form(self):
        # trapezoid rule on x(1-x) has the exact value 1/6 - h^2/6
        g = sample(lambda x: x * (1.0 - x), 60)
        h = 1.0 / 60.0
        assert mass(g) == pytest.approx(1.0 / 6.0 - h * h / 6.0, rel=1e-13)
        assert abs(mass(g) - 1.0 / 6.0) < 5e-5

    def test_bump_free_energy_frozen_value(self):
        g = sample(quartic_bump, 60)
        E0 = free_energy(g, 0.1)
        assert E0 == pytest.approx(0.24583149204930882, rel=1e-12)

    def test_bump_free_energy_consistent_with_continuum(self):
        g = sample(quartic_bump, 60)
        E0 = free_energy(g, 0.1)
        assert E0 + 0.25 * g.h == pytest.approx(_CONTINUUM_BUMP_ENERGY,
                                                abs=1e-9)

    def test_free_energy_of_zero_state(self):
        M = 10
        g = sample(lambda x: np.zeros_like(x), M)
        assert free_energy(g, 0.3) == pytest.approx(0.25 * g.h * (M - 1),
                                                    rel=1e-14)


class TestHistoryFunctional:
    def test_scalar_and_vector_histories_agree(self, graded_24):
        rng = np.random.default_rng(5)
        w = rng.standard_normal(9)
        mesh = build_custom(np.diff(graded_24.nodes[:10]) /
                            graded_24.nodes[9])
        scalar = G_functional(list(w), mesh, 0.5)
        vector = G_functional([np.array([v, 2.0 * v]) for v in w], mesh, 0.5)
        assert np.isscalar(scalar)
        assert vector.shape == (2,)
        assert vector[0] == pytest.approx(scalar, rel=1e-13)
        assert vector[1] == pytest.approx(4.0 * scalar, rel=1e-13)

    def test_nonnegative_on_admissible_meshes(self, graded_24):
        rng = np.random.default_rng(6)
        for trial in range(10):
            n = int(rng.integers(2, 25))
            w = rng.standard_normal(n + 1) * 3.0
            sub = build_custom(np.diff(graded_24.nodes[: n + 1]))
            assert G_functional(list(w), sub, 0.5) >= 0.0

    def test_requires_two_levels(self, graded_24):
        with pytest.raises(ValueError):
            G_functional([1.0], graded_24, 0.5)


class TestModifiedEnergy:
    def test_level_zero_is_nan_and_rest_finite(self):
        hist = _small_run()
        em = modified_energy(hist)
        assert np.isnan(em[0])
        assert np.isfinite(em[1:]).all()

    def test_dominates_free_energy(self):
        hist = _small_run()
        series = energy_series(hist)
        free = series.free_energy
        em = series.modified_energy
        assert (em[1:] >= free[1:] - 1e-12 * np.maximum(1.0,
                                                        np.abs(free[1:]))).all()

    def test_zero_run_collapses_to_free_energy(self):
        cfg = SolverConfig(alpha=0.5, kappa=0.01, epsilon=0.1,
                           mesh=build_graded_cubic(8, 1.0), M=8,
                           initial=lambda x: np.zeros_like(x))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            hist = solve(cfg)
        series = energy_series(hist)
        assert np.array_equal(series.modified_energy[1:],
                              series.free_energy[1:])

    def test_series_fields_are_aligned(self):
        hist = _small_run(N=10, M=10)
        series = energy_series(hist)
        N = hist.mesh.N
        assert np.array_equal(series.levels, np.arange(N + 1))
        assert np.array_equal(series.times, hist.mesh.nodes)
        assert series.free_energy.shape == (N + 1,)
        assert series.mass.shape == (N + 1,)
        for n in (0, N // 2, N):
            assert series.mass[n] == pytest.approx(mass(hist.states[n]),
                                                   rel=1e-14)


class TestSummationByParts:
    def test_transformed_rows_satisfy_identity_quietly(self, graded_24):
        rng = np.random.default_rng(7)
        phis = rng.standard_normal(10)
        rows = [kernel_row_J(m, graded_24, 0.6) for m in range(1, 11)]
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            residual = dgs_identity_check(rows, 1.0, phis)
        scale = max(float(np.max(np.abs(r))) for r in rows) \
            * float(np.max(phis ** 2))
        assert residual <= 1e-13 * scale

    def test_identity_holds_for_any_sigma(self, graded_24):
        rng = np.random.default_rng(8)
        phis = rng.standard_normal(6)
        rows = [kernel_row_J(m, graded_24, 0.3) for m in range(1, 7)]
        residual = dgs_identity_check(rows, 0.7, phis)
        assert residual <= 1e-12

    def test_negative_sigma_warns(self, graded_24):
        rows = [kernel_row_J(m, graded_24, 0.5) for m in range(1, 4)]
        with pytest.warns(RuntimeWarning, match="sigma"):
            dgs_identity_check(rows, -0.5, np.ones(3))

    def test_decreasing_rows_warn_about_Y_weights(self):
        rows = [np.array([1.0]), np.array([2.0, 1.0])]
        with pytest.warns(RuntimeWarning, match="Y"):
            residual = dgs_identity_check(rows, 1.0, np.array([0.3, -0.4]))
        assert residual <= 1e-14

    def test_row_shape_validation(self, graded_24):
        rows = [np.array([1.0]), np.array([1.0, 2.0, 3.0])]
        with pytest.raises(ValueError):
            dgs_identity_check(rows, 1.0, np.ones(2))
        with pytest.raises(ValueError):
            dgs_identity_check(rows[:1], 1.0, np.ones(2))


class TestKernelPropertyCheck:
    def test_graded_mesh_is_clean(self, graded_64):
        rep = kernel_property_check(graded_64, 0.5)
        assert rep.clean
        assert rep.n_max == 64
        assert rep.monotonicity_margin == 0.0
        assert rep.convexity_margin == 0.0
        assert rep.dominance_margin == 0.0

    def test_counts_and_margins_are_consistent(self):
        # far outside the admissible ratio range the structure may or may
        # not survive; either way counts and margins must agree
        mesh = build_custom(np.array([0.001, 0.02, 0.4, 0.4, 0.4]))
        rep = kernel_property_check(mesh, 0.8)
        for count, margin in (
                (rep.monotonicity_violations, rep.monotonicity_margin),
                (rep.convexity_violations, rep.convexity_margin),
                (rep.dominance_violations, rep.dominance_margin)):
            assert (count > 0) == (margin < 0.0)

    def test_level_range_validation(self, graded_24):
        with pytest.raises(ValueError):
            kernel_property_check(graded_24, 0.5, n_max=0)
        with pytest.raises(ValueError):
            kernel_property_check(graded_24, 0.5, n_max=25)


class TestConvergenceOrder:
    def test_doubling_defaults(self):
        orders = convergence_order([1.0, 0.125, 0.125 / 8.0])
        assert orders == pytest.approx([3.0, 3.0], rel=1e-13)

    def test_explicit_resolutions(self):
        orders = convergence_order([1e-2, 1e-3], Ns=[10, 20])
        assert orders == pytest.approx([np.log(10.0) / np.log(2.0)],
                                       rel=1e-13)

    def test_validation(self):
        with pytest.raises(ValueError):
            convergence_order([1.0, 0.0])
        with pytest.raises(ValueError):
            convergence_order([1.0, 0.5, 0.25], Ns=[10, 20])
        assert convergence_order([1.0]).size == 0


class TestCsvWriters:
    def test_energy_csv_blank_modified_at_level_zero(self):
        hist = _small_run(N=6, M=8)
        buf = io.StringIO()
        write_energy_csv(energy_series(hist), buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "n,t_n,E,E_modified"
        assert len(lines) == 8
        first = lines[1].split(",")
        assert first[0] == "0" and first[3] == ""
        second = lines[2].split(",")
        assert float(second[3]) > 0.0

    def test_mass_csv_round_trips(self):
        hist = _small_run(N=6, M=8)
        series = energy_series(hist)
        buf = io.StringIO()
        write_mass_csv(series, buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "n,t_n,mass"
        got = np.array([float(l.split(",")[2]) for l in lines[1:]])
        assert got == pytest.approx(series.mass, rel=1e-15)

    def test_convergence_csv_blank_first_order(self):
        buf = io.StringIO()
        write_convergence_csv([8, 16], [1e-2, 2.5e-3], [2.0], buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == "N,error,order"
        assert lines[1].split(",")[2] == ""
        assert float(lines[2].split(",")[2]) == pytest.approx(2.0)
