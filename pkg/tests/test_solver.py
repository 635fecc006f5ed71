"""Grid, kernel table, right-hand side, and time stepping.

The deduplicated gather/scatter is validated against an undeduplicated
triple-loop oracle written directly from the four-point stencil; the table
weights are validated entry by entry against the scalar kernel function.
"""

import math

import numpy as np
import pytest

from conftest import random_state
from wavekin.collision_kernel import DEFAULT_C_Q, KernelWeights, cutoff_kernel
from wavekin.dispersion import DispersionRelation, eval_omega
from wavekin.solver import (
    ConservationError,
    MemoryBudgetError,
    OmegaGrid,
    SpectrumState,
    StiffnessError,
    build_kernel_table,
    evolve,
    gaussian_bump,
    load_table,
    rhs,
    rhs_with_scale,
    ring_in_r,
    save_table,
    state_from_file,
    step,
    transform_f_to_g,
    transform_g_to_f,
)


class TestOmegaGrid:
    def test_uniform_nodes(self, d_quad):
        grid = OmegaGrid(d_quad, 5, 8.0)
        assert grid.h == 2.0
        assert np.array_equal(grid.omega, [0.0, 2.0, 4.0, 6.0, 8.0])
        assert grid.omega_max == 8.0

    def test_radii_strictly_increasing(self, grid8_mid):
        assert grid8_mid.r[0] == 0.0
        assert np.all(np.diff(grid8_mid.r) > 0.0)

    def test_origin_mho_is_zero_even_for_iota_zero(self, d_quad):
        # mho(0) is undefined at iota = 0 but the origin node carries no
        # interactions, so the grid must not evaluate it there
        grid = OmegaGrid(d_quad, 4, 3.0)
        assert grid.mho[0] == 0.0
        assert np.all(grid.mho[1:] == 0.5)

    def test_from_spacing(self, d_mid):
        grid = OmegaGrid.from_spacing(d_mid, 6, 0.25)
        assert grid.h == 0.25
        assert grid.omega[-1] == pytest.approx(1.25)

    def test_validation(self, d_quad):
        with pytest.raises(ValueError):
            OmegaGrid(d_quad, 1, 4.0)
        with pytest.raises(ValueError):
            OmegaGrid(d_quad, 8, 0.0)
        with pytest.raises(ValueError):
            OmegaGrid.from_spacing(d_quad, 8, -0.1)

    def test_describe_key_tracks_identity(self, d_quad, d_mid):
        g1 = OmegaGrid(d_quad, 8, 7.0)
        g2 = OmegaGrid(d_quad, 8, 7.0)
        assert g1.describe_key() == g2.describe_key()
        assert g1.describe_key() != OmegaGrid(d_quad, 9, 7.0).describe_key()
        assert g1.describe_key() != OmegaGrid(d_mid, 8, 7.0).describe_key()
        kw = KernelWeights()
        assert g1.describe_key(kw) != g1.describe_key(KernelWeights(c_q=1.0))


class TestSpectrumState:
    def test_accepts_lists(self, grid8_quad):
        s = SpectrumState(g=[0.0] * 8, time=0, grid=grid8_quad)
        assert s.g.dtype == float
        assert s.time == 0.0

    def test_shape_mismatch(self, grid8_quad):
        with pytest.raises(ValueError, match="8-node"):
            SpectrumState(g=np.zeros(5), time=0.0, grid=grid8_quad)

    def test_negative_rejected(self, grid8_quad):
        g = np.zeros(8)
        g[3] = -1e-9
        with pytest.raises(ValueError, match="nonnegative"):
            SpectrumState(g=g, time=0.0, grid=grid8_quad)

    def test_nonfinite_rejected(self, grid8_quad):
        g = np.zeros(8)
        g[2] = np.nan
        with pytest.raises(ValueError, match="finite"):
            SpectrumState(g=g, time=0.0, grid=grid8_quad)


class TestKernelTable:
    def test_weights_match_scalar_kernel(self, table8_mid, d_mid):
        # every table weight must equal c_q times the scalar kernel at the
        # integration frequencies (omega_i, omega_j, omega_l)
        kw = table8_mid.kw
        om = table8_mid.grid.omega
        for k in range(table8_mid.n_entries):
            i, j, l = int(table8_mid.i[k]), int(table8_mid.j[k]), int(table8_mid.l[k])
            expected = kw.c_q * cutoff_kernel(kw, d_mid, om[i], om[j], om[l])
            assert table8_mid.w[k] == pytest.approx(expected, rel=1e-12), (i, j, l)

    def test_entry_index_invariants(self, table8_quad):
        t = table8_quad
        n = t.grid.n_nodes
        assert np.all(t.i <= t.j)
        assert np.all((t.i >= 1) & (t.j <= n - 1))
        assert np.all((t.l >= 1) & (t.l <= n - 1))
        assert np.all(t.m == t.i + t.j - t.l)
        assert np.all((t.m >= 1) & (t.m <= n - 1))
        assert np.all(np.where(t.i == t.j, t.mult == 1, t.mult == 2))
        assert np.all(t.w > 0.0)
        assert np.allclose(t.coef, t.w * t.mult * t.grid.h ** 2, rtol=1e-15)

    def test_whole_classes_retained(self, table8_quad):
        # for each stored triple, the largest partner index of its unordered
        # class must itself be a grid node; partial classes are never stored
        t = table8_quad
        n = t.grid.n_nodes
        for k in range(t.n_entries):
            x, y, z = sorted((int(t.i[k]), int(t.j[k]), int(t.l[k])), reverse=True)
            assert x + y - z <= n - 1

    def test_two_node_grid_single_entry(self, d_quad):
        grid = OmegaGrid(d_quad, 2, 1.0)
        t = build_kernel_table(KernelWeights(), d_quad, grid)
        assert t.n_entries == 1
        assert (int(t.i[0]), int(t.j[0]), int(t.l[0]), int(t.m[0])) == (1, 1, 1, 1)
        # all radii equal 1: w = c_q * mho(1) * 1 / 1 = c_q / 2
        assert t.w[0] == pytest.approx(DEFAULT_C_Q * 0.5, rel=1e-12)

    def test_band_can_empty_the_table(self, d_quad):
        # radii {sqrt(2), 2} all fall outside [1/1.2, 1.2)
        grid = OmegaGrid(d_quad, 3, 4.0)
        t = build_kernel_table(KernelWeights(cutoff_n=1.2), d_quad, grid)
        assert t.n_entries == 0
        s = SpectrumState(g=np.array([0.0, 1.0, 1.0]), time=0.0, grid=grid)
        assert np.array_equal(rhs(t, s), np.zeros(3))

    def test_rebuild_is_deterministic(self, d_mid, grid8_mid):
        a = build_kernel_table(KernelWeights(), d_mid, grid8_mid)
        b = build_kernel_table(KernelWeights(), d_mid, grid8_mid)
        for name in ("i", "j", "l", "m", "w", "mult", "coef"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_memory_budget(self, d_quad, grid32_quad):
        with pytest.raises(MemoryBudgetError, match="budget"):
            build_kernel_table(KernelWeights(), d_quad, grid32_quad, max_bytes=64)

    def test_cache_round_trip(self, tmp_path, d_mid, grid8_mid, table8_mid):
        path = str(tmp_path / "table.npz")
        save_table(path, table8_mid)
        loaded = load_table(path, grid8_mid, table8_mid.kw)
        assert loaded is not None
        for name in ("i", "j", "l", "m", "w", "mult", "coef"):
            assert np.array_equal(getattr(loaded, name), getattr(table8_mid, name))

    def test_cache_key_mismatch_returns_none(self, tmp_path, d_mid, grid8_mid, table8_mid):
        path = str(tmp_path / "table.npz")
        save_table(path, table8_mid)
        assert load_table(path, grid8_mid, KernelWeights(c_q=1.0)) is None

    def test_cache_missing_file(self, tmp_path, grid8_mid, table8_mid):
        path = str(tmp_path / "absent.npz")
        with pytest.raises(FileNotFoundError):
            load_table(path, grid8_mid, table8_mid.kw)
        assert load_table(path, grid8_mid, table8_mid.kw, missing_ok=True) is None

    def test_build_uses_cache(self, tmp_path, d_mid, grid8_mid):
        path = str(tmp_path / "table.npz")
        first = build_kernel_table(KernelWeights(), d_mid, grid8_mid, cache_path=path)
        again = build_kernel_table(KernelWeights(), d_mid, grid8_mid, cache_path=path)
        assert np.array_equal(first.w, again.w)


def _rhs_brute_force(grid, kw, g):
    """Undeduplicated oracle: loop over every ordered integration triple."""
    n = grid.n_nodes
    r, mho, h = grid.r, grid.mho, grid.h
    out = np.zeros(n)
    for i in range(1, n):
        for j in range(1, n):
            for l in range(1, n):
                m = i + j - l
                if m < 1:
                    continue
                x, y, z = sorted((i, j, l), reverse=True)
                if x + y - z > n - 1:
                    continue
                w = kw.c_q * mho[m] * min(r[i], r[j], r[l], r[m]) / (r[i] * r[j] * r[l])
                rho = w * g[i] * g[j] * g[l] * h * h
                out[i] -= rho
                out[j] -= rho
                out[l] += rho
                out[m] += rho
    return out


class TestRhs:
    def test_matches_brute_force(self, table8_mid, grid8_mid):
        rng = np.random.default_rng(17)
        for _ in range(3):
            s = random_state(grid8_mid, rng)
            expected = _rhs_brute_force(grid8_mid, table8_mid.kw, s.g)
            got = rhs(table8_mid, s)
            assert np.allclose(got, expected, rtol=0.0, atol=1e-12 * np.abs(expected).max())

    @pytest.mark.parametrize("which", ["quad", "mid"])
    def test_conserves_mass_and_energy(self, which, request):
        table = request.getfixturevalue(f"table8_{which}")
        grid = table.grid
        rng = np.random.default_rng(29)
        for _ in range(10):
            s = random_state(grid, rng)
            out, scale = rhs_with_scale(table, s)
            h = grid.h
            mass_rate = abs(float(np.sum(out)) * h)
            energy_rate = abs(float(np.sum(out * grid.omega)) * h)
            mass_scale = float(np.sum(scale)) * h
            energy_scale = float(np.sum(scale * grid.omega)) * h
            assert mass_rate <= 1e-12 * mass_scale
            assert energy_rate <= 1e-12 * energy_scale

    def test_zero_state_is_stationary(self, table8_quad, grid8_quad):
        s = SpectrumState(g=np.zeros(8), time=0.0, grid=grid8_quad)
        assert np.array_equal(rhs(table8_quad, s), np.zeros(8))

    def test_grid_mismatch_rejected(self, table8_quad, d_quad):
        other = OmegaGrid(d_quad, 12, 7.0)
        s = SpectrumState(g=np.zeros(12), time=0.0, grid=other)
        with pytest.raises(ValueError, match="different grids"):
            rhs(table8_quad, s)

    def test_equal_valued_grid_accepted(self, table8_quad, d_quad):
        # a distinct grid object with identical nodes is fine
        clone = OmegaGrid(d_quad, 8, 7.0)
        s = SpectrumState(g=np.ones(8), time=0.0, grid=clone)
        rhs(table8_quad, s)  # must not raise


class TestTransforms:
    def test_point_value(self, d_quad):
        # f = 3 at r = 2: g = mho * f * r = 0.5 * 3 * 2 = 3
        grid = OmegaGrid(d_quad, 3, 8.0)  # omega = 0, 4, 8 -> r = 0, 2, sqrt(8)
        s = transform_f_to_g(d_quad, grid, [0.0, 3.0, 0.0])
        assert s.g[1] == pytest.approx(3.0, rel=1e-14)

    def test_round_trip(self, d_mid, grid8_mid):
        f = np.array([0.0, 0.3, 1.1, 0.0, 2.0, 0.5, 0.25, 0.1])
        s = transform_f_to_g(d_mid, grid8_mid, f)
        back = transform_g_to_f(s)
        assert np.allclose(back, f, rtol=1e-12, atol=0.0)
        assert s.g[0] == 0.0

    def test_mass_equals_radial_integral(self, d_mid):
        # sum(g) * h discretizes integral of f r^2 dr (no angular factor)
        from scipy.integrate import quad

        grid = OmegaGrid(d_mid, 2001, 25.0)
        f_of_r = lambda r: np.exp(-0.5 * ((r - 2.0) / 0.3) ** 2)
        s = transform_f_to_g(d_mid, grid, f_of_r(grid.r))
        mass = float(np.sum(s.g)) * grid.h
        expected, _ = quad(lambda r: f_of_r(r) * r * r, 0.0, grid.r[-1])
        assert mass == pytest.approx(expected, rel=1e-4)

    def test_validation(self, d_mid, grid8_mid):
        with pytest.raises(ValueError):
            transform_f_to_g(d_mid, grid8_mid, [1.0, 2.0])
        with pytest.raises(ValueError):
            transform_f_to_g(d_mid, grid8_mid, -np.ones(8))


class TestInitialStates:
    def test_gaussian_bump_shape(self, grid32_quad):
        s = gaussian_bump(grid32_quad, center=2.0, width=0.5, amplitude=3.0)
        peak = int(np.argmax(s.g))
        assert abs(grid32_quad.omega[peak] - 2.0) <= grid32_quad.h
        assert s.g.max() <= 3.0 + 1e-12
        assert s.g[0] == 0.0

    def test_ring_in_r(self, d_mid, grid32_quad, grid8_mid):
        s = ring_in_r(d_mid, grid8_mid, r_center=2.0, width=0.4, amplitude=1.0)
        assert np.all(s.g >= 0.0)
        assert s.g[0] == 0.0

    def test_parameter_validation(self, grid8_quad):
        with pytest.raises(ValueError):
            gaussian_bump(grid8_quad, 1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            gaussian_bump(grid8_quad, 1.0, 0.5, -1.0)

    def test_state_from_file(self, tmp_path, grid8_quad):
        one_col = tmp_path / "g.txt"
        np.savetxt(one_col, np.linspace(0.0, 1.0, 8))
        s = state_from_file(grid8_quad, str(one_col))
        assert s.g[-1] == 1.0

        two_col = tmp_path / "wg.txt"
        np.savetxt(two_col, np.column_stack([grid8_quad.omega, np.ones(8)]))
        s2 = state_from_file(grid8_quad, str(two_col))
        assert np.array_equal(s2.g, np.ones(8))

        bad = tmp_path / "bad.txt"
        np.savetxt(bad, np.column_stack([grid8_quad.omega + 0.5, np.ones(8)]))
        with pytest.raises(ValueError, match="frequency column"):
            state_from_file(grid8_quad, str(bad))

        short = tmp_path / "short.txt"
        np.savetxt(short, np.ones(5))
        with pytest.raises(ValueError, match="expected 8"):
            state_from_file(grid8_quad, str(short))


class TestStep:
    def test_step_advances_and_stays_nonnegative(self, table8_mid, grid8_mid):
        rng = np.random.default_rng(101)
        s = random_state(grid8_mid, rng)
        s2 = step(table8_mid, s, 1e-4)
        assert s2.time == pytest.approx(1e-4)
        assert np.all(s2.g >= 0.0)
        assert s2 is not s

    def test_step_conserves(self, table8_quad, grid8_quad):
        rng = np.random.default_rng(7)
        s = random_state(grid8_quad, rng)
        s2 = step(table8_quad, s, 1e-5)
        h = grid8_quad.h
        assert float(np.sum(s2.g)) * h == pytest.approx(float(np.sum(s.g)) * h, rel=1e-13)
        e1 = float(np.sum(s.g * grid8_quad.omega)) * h
        e2 = float(np.sum(s2.g * grid8_quad.omega)) * h
        assert e2 == pytest.approx(e1, rel=1e-12)

    def test_halving_keeps_nonnegativity(self, table8_mid, grid8_mid):
        rng = np.random.default_rng(23)
        s = random_state(grid8_mid, rng)
        r = rhs(table8_mid, s)
        sinks = r < 0.0
        assert sinks.any()
        dt_star = float(np.min(s.g[sinks] / -r[sinks]))
        # an euler step at 3x the first-crossing time must halve at least once
        s2 = step(table8_mid, s, 3.0 * dt_star, method="euler")
        assert np.all(s2.g >= 0.0)
        assert s2.time - s.time < 3.0 * dt_star
        assert s2.time - s.time >= 3.0 * dt_star / 2.0 ** 31

    def test_stiffness_error_carries_state(self, table8_mid, grid8_mid):
        rng = np.random.default_rng(23)
        s = random_state(grid8_mid, rng)
        with pytest.raises(StiffnessError) as exc:
            step(table8_mid, s, 1e30, method="euler")
        assert exc.value.state is s

    def test_validation(self, table8_mid, grid8_mid):
        rng = np.random.default_rng(1)
        s = random_state(grid8_mid, rng)
        with pytest.raises(ValueError):
            step(table8_mid, s, 0.0)
        with pytest.raises(ValueError, match="method"):
            step(table8_mid, s, 1e-4, method="heun")


class TestEvolve:
    def test_zero_horizon_returns_initial_record(self, table8_quad, grid8_quad):
        rng = np.random.default_rng(2)
        s = random_state(grid8_quad, rng)
        out = evolve(table8_quad, s, t_end=0.0)
        assert len(out) == 1
        assert out[0][0] is s
        assert out[0][1].time == 0.0

    def test_short_run_records_and_conserves(self, table32_quad, grid32_quad):
        s = gaussian_bump(grid32_quad, center=2.0, width=0.4, amplitude=1.0)
        out = evolve(table32_quad, s, t_end=0.01)
        times = [rec.time for _, rec in out]
        assert times[0] == 0.0
        assert times[-1] == pytest.approx(0.01, rel=1e-9)
        assert all(b > a for a, b in zip(times, times[1:]))
        m0, mN = out[0][1].mass, out[-1][1].mass
        assert abs(mN - m0) <= 1e-10 * m0
        assert all(np.all(st.g >= 0.0) for st, _ in out)

    def test_output_every_thins_records(self, table32_quad, grid32_quad):
        s = gaussian_bump(grid32_quad, center=2.0, width=0.4, amplitude=1.0)
        dense = evolve(table32_quad, s, t_end=0.01, output_every=0.0)
        sparse = evolve(table32_quad, s, t_end=0.01, output_every=1.0)
        assert len(sparse) == 2  # initial + final
        assert len(dense) > len(sparse)

    def test_max_steps_caps_the_run(self, table32_quad, grid32_quad):
        s = gaussian_bump(grid32_quad, center=2.0, width=0.4, amplitude=1.0)
        out = evolve(table32_quad, s, t_end=1e9, max_steps=3)
        assert out[-1][0].time < 1e9
        assert len(out) <= 5

    def test_max_dt_bounds_every_step(self, table32_quad, grid32_quad):
        s = gaussian_bump(grid32_quad, center=2.0, width=0.4, amplitude=1.0)
        out = evolve(table32_quad, s, t_end=5e-4, max_dt=1e-4)
        times = np.array([st.time for st, _ in out])
        assert np.all(np.diff(times) <= 1e-4 * (1.0 + 1e-9))

    def test_validation(self, table8_quad, grid8_quad):
        s = SpectrumState(g=np.ones(8), time=0.0, grid=grid8_quad)
        with pytest.raises(ValueError):
            evolve(table8_quad, s, t_end=-1.0)
        with pytest.raises(ValueError):
            evolve(table8_quad, s, t_end=1.0, max_dt=0.0)
        with pytest.raises(ValueError):
            evolve(table8_quad, s, t_end=1.0, max_steps=0)
