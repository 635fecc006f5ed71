"""Conserved functionals, band/low-frequency observables, convex production,
and the cascade trend report.

convex_production is cross-checked against the chain-rule identity
d/dt sum(phi * g * h) = sum(phi * rhs * h): the two are the same bilinear
form written in different orders, so they must agree to rounding.
"""

import numpy as np
import pytest

from conftest import random_state
from wavekin.diagnostics import (
    DiagnosticsConfig,
    band_energy,
    cascade_report,
    convex_production,
    DiagnosticsRecord,
    energy,
    kinked_band_cap,
    kinked_low_pass,
    low_mass,
    make_record,
    mass,
    production_scale,
    quadratic_test,
    shifted_ramp,
    smoothed_low_pass,
)
from wavekin.diagnostics import test_function_registry as registry
from wavekin.solver import OmegaGrid, SpectrumState, rhs


class TestScalars:
    def test_single_node_mass_and_energy(self, d_quad):
        # h = 0.5, node 5 carries g = 2 at omega = 2.5
        grid = OmegaGrid(d_quad, 11, 5.0)
        g = np.zeros(11)
        g[5] = 2.0
        s = SpectrumState(g=g, time=0.0, grid=grid)
        assert mass(s) == pytest.approx(1.0, rel=1e-15)
        assert energy(s) == pytest.approx(2.5, rel=1e-15)

    def test_band_energy_orders_with_radius(self, d_quad, grid32_quad):
        s = SpectrumState(
            g=np.exp(-0.5 * ((grid32_quad.r - 1.5) / 0.3) ** 2),
            time=0.0,
            grid=grid32_quad,
        )
        e_small = band_energy(s, d_quad, 1.0)
        e_big = band_energy(s, d_quad, 1.9)
        assert 0.0 <= e_small < e_big
        assert band_energy(s, d_quad, 1e6) == pytest.approx(energy(s), rel=1e-15)

    def test_band_energy_validates_radius(self, d_quad, grid8_quad):
        s = SpectrumState(g=np.ones(8), time=0.0, grid=grid8_quad)
        with pytest.raises(ValueError):
            band_energy(s, d_quad, 0.0)

    def test_low_mass_threshold_is_delta_squared(self, d_quad):
        grid = OmegaGrid(d_quad, 5, 4.0)  # omega = 0, 1, 2, 3, 4
        s = SpectrumState(g=np.ones(5), time=0.0, grid=grid)
        # delta = 1.4 -> threshold 1.96: nodes 0 and 1 -> 2 * h
        assert low_mass(s, 1.4) == pytest.approx(2.0, rel=1e-15)
        assert low_mass(s, 2.0) == pytest.approx(5.0, rel=1e-15)
        assert low_mass(s, 0.0) == pytest.approx(1.0, rel=1e-15)
        with pytest.raises(ValueError):
            low_mass(s, -0.1)


class TestConvexProduction:
    def test_affine_is_exactly_zero(self, table8_mid, grid8_mid):
        rng = np.random.default_rng(31)
        s = random_state(grid8_mid, rng)
        for phi in (lambda w: np.full_like(np.asarray(w, float), 3.0),
                    lambda w: 2.0 * np.asarray(w, float) - 1.0):
            # the bracket vanishes node by node on resonant quadruples
            assert convex_production(table8_mid, s, phi, check_convexity=False) == 0.0

    @pytest.mark.parametrize("which", ["quad", "mid"])
    def test_nonnegative_for_convex_functions(self, which, request):
        table = request.getfixturevalue(f"table8_{which}")
        rng = np.random.default_rng(43)
        phis = [
            kinked_low_pass(2.5),
            smoothed_low_pass(3.0),
            kinked_band_cap(0.4),
            quadratic_test(),
            shifted_ramp(1.5),
        ]
        for _ in range(5):
            s = random_state(table.grid, rng)
            for phi in phis:
                prod = convex_production(table, s, phi)
                scale = production_scale(table, s, phi)
                assert prod >= -1e-10 * max(scale, 1e-300)

    def test_matches_chain_rule_identity(self, table8_mid, grid8_mid):
        rng = np.random.default_rng(5)
        s = random_state(grid8_mid, rng)
        phi = quadratic_test()
        expected = float(np.sum(phi(grid8_mid.omega) * rhs(table8_mid, s)) * grid8_mid.h)
        got = convex_production(table8_mid, s, phi)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_rejects_nonconvex_function(self, table8_quad, grid8_quad):
        s = SpectrumState(g=np.ones(8), time=0.0, grid=grid8_quad)
        with pytest.raises(ValueError, match="not convex"):
            convex_production(table8_quad, s, lambda w: np.sin(np.asarray(w, float)))

    def test_check_can_be_disabled(self, table8_quad, grid8_quad):
        s = SpectrumState(g=np.ones(8), time=0.0, grid=grid8_quad)
        val = convex_production(
            table8_quad, s, lambda w: np.sin(np.asarray(w, float)),
            check_convexity=False,
        )
        assert np.isfinite(val)

    def test_phi_must_return_grid_shaped_values(self, table8_quad, grid8_quad):
        s = SpectrumState(g=np.ones(8), time=0.0, grid=grid8_quad)
        with pytest.raises(ValueError, match="one value per node"):
            convex_production(table8_quad, s, lambda w: 1.0)


class TestTestFunctions:
    def test_kinked_low_pass_values(self):
        phi = kinked_low_pass(2.0)
        assert np.array_equal(phi(np.array([0.0, 1.0, 2.0, 5.0])), [2.0, 1.0, 0.0, 0.0])

    def test_smoothed_low_pass_approximates_kink(self):
        w = np.linspace(0.0, 4.0, 200)
        hard = kinked_low_pass(2.0)(w)
        soft = smoothed_low_pass(2.0, eps=0.01)(w)
        assert np.max(np.abs(hard - soft)) < 0.01
        assert np.all(np.diff(soft, 2) >= -1e-12)  # still convex

    def test_band_cap_values(self):
        phi = kinked_band_cap(0.5)
        assert np.array_equal(phi(np.array([0.0, 1.0, 2.0, 4.0])), [1.0, 0.5, 0.0, 0.0])

    def test_ramp_and_quadratic(self):
        assert np.array_equal(shifted_ramp(1.0)(np.array([0.5, 2.5])), [0.0, 1.5])
        assert np.array_equal(quadratic_test()(np.array([3.0])), [9.0])

    def test_registry_parses_ids(self):
        reg = registry(
            ["low_pass:2.0", "smooth_low_pass:1.5:0.1", "band_cap:0.7",
             "ramp:1.2", "quadratic"]
        )
        assert set(reg) == {"low_pass:2.0", "smooth_low_pass:1.5:0.1",
                            "band_cap:0.7", "ramp:1.2", "quadratic"}
        assert reg["low_pass:2.0"](np.array([0.5]))[0] == 1.5

    @pytest.mark.parametrize("bad", ["low_pass", "gauss:1.0", "quadratic:2:3:4x",
                                     "band_cap:zero"])
    def test_registry_rejects_bad_ids(self, bad):
        with pytest.raises(ValueError, match="test-function id"):
            registry([bad])


class TestRecords:
    def test_make_record_fields(self, table8_mid, grid8_mid):
        rng = np.random.default_rng(9)
        s = random_state(grid8_mid, rng)
        cfg = DiagnosticsConfig(
            band_radii=(1.0, 2.0),
            deltas=(0.5,),
            test_functions=registry(["quadratic"]),
        )
        rec = make_record(s, cfg, table=table8_mid)
        assert rec.time == 0.0
        assert set(rec.band_energy) == {1.0, 2.0}
        assert set(rec.low_mass) == {0.5}
        assert set(rec.convex_production) == {"quadratic"}
        assert rec.convex_production["quadratic"] >= 0.0

    def test_production_skipped_without_table(self, grid8_mid):
        rng = np.random.default_rng(9)
        s = random_state(grid8_mid, rng)
        cfg = DiagnosticsConfig(test_functions=registry(["quadratic"]))
        rec = make_record(s, cfg, table=None)
        assert rec.convex_production == {}


def _records(times, masses, energies, band, low):
    out = []
    for k, t in enumerate(times):
        out.append(DiagnosticsRecord(
            time=float(t),
            mass=float(masses[k]),
            energy=float(energies[k]),
            band_energy={1.0: float(band[k])},
            low_mass={0.5: float(low[k])},
            convex_production={"quadratic": 0.01 * k},
        ))
    return out


class TestCascadeReport:
    def test_monotone_series(self):
        t = np.linspace(0.0, 1.0, 21)
        recs = _records(t, np.ones(21), np.ones(21),
                        band=1.0 - 0.5 * t, low=0.1 + 0.2 * t)
        rep = cascade_report(recs)
        assert rep["n_records"] == 21
        assert rep["n_used"] == 17  # 20% transient discarded
        assert rep["mass_drift_rel"] == 0.0
        be = rep["band_energy"]["1"]
        assert be["kendall_tau"] == pytest.approx(-1.0)
        assert be["decreasing"] is True
        lm = rep["low_mass"]["0.5"]
        assert lm["kendall_tau"] == pytest.approx(1.0)
        assert lm["nondecreasing"] is True
        assert lm["mass_fraction_last"] > lm["mass_fraction_first"]
        assert rep["convex_production_min"]["quadratic"] >= 0.0

    def test_flat_series_has_zero_tau(self):
        t = np.linspace(0.0, 1.0, 10)
        recs = _records(t, np.ones(10), np.ones(10),
                        band=np.ones(10), low=np.ones(10))
        rep = cascade_report(recs)
        assert rep["band_energy"]["1"]["kendall_tau"] == 0.0
        assert rep["band_energy"]["1"]["decreasing"] is False

    def test_single_record(self):
        recs = _records([0.0], [1.0], [2.0], [0.5], [0.1])
        rep = cascade_report(recs)
        assert rep["n_used"] == 1
        assert rep["band_energy"]["1"]["kendall_tau"] == 0.0

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            cascade_report([])

    def test_discard_fraction_validated(self):
        recs = _records([0.0], [1.0], [2.0], [0.5], [0.1])
        with pytest.raises(ValueError):
            cascade_report(recs, discard_fraction=1.0)

    def test_drift_measured_over_all_records(self):
        # a mass glitch inside the discarded transient must still be reported
        t = np.linspace(0.0, 1.0, 20)
        masses = np.ones(20)
        masses[1] = 1.5
        recs = _records(t, masses, np.ones(20), band=np.ones(20), low=np.ones(20))
        rep = cascade_report(recs)
        assert rep["mass_drift_rel"] == pytest.approx(0.5)
