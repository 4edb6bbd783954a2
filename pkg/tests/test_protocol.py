from __future__ import annotations

import numpy as np
import pytest

from cavityshift import (InputError, InstrumentConfig, SweepPlan,
                         acquire_curve, calibrate_defaults, cavity_delta,
                         film_delta, plan_sweep, read_run,
                         run_paired_experiment, write_run)
from cavityshift.protocol import (TransitionCurve, read_curve_csv,
                                  temperature_grid, write_curve_csv)


@pytest.fixture(scope="module")
def params():
    return calibrate_defaults()


@pytest.fixture
def quiet():
    return InstrumentConfig(resistance_noise=0.0, temperature_jitter=0.0)


@pytest.fixture
def noisy():
    return InstrumentConfig(seed=77)


def half_crossing(curve, r_n):
    """Linear interpolation of the R = r_n/2 crossing temperature."""
    r = curve.resistances
    above = np.nonzero(r >= 0.5 * r_n)[0][0]
    t0, t1 = curve.temperatures[above - 1], curve.temperatures[above]
    r0, r1 = r[above - 1], r[above]
    return t0 + (0.5 * r_n - r0) * (t1 - t0) / (r1 - r0)


class TestPlan:
    def test_span_is_eight_widths(self, params, quiet):
        plan = plan_sweep(params, quiet, [150.0])
        assert plan.t_span == pytest.approx(0.4, rel=1e-12)
        assert plan.t_center_guess == pytest.approx(
            params.t_c - 0.5 * film_delta(params, 150.0) * 1e-3, rel=1e-12)
        assert plan.n_points == 200

    def test_zero_field_centers_on_t_c(self, params, quiet):
        plan = plan_sweep(params, quiet, [0.0])
        assert plan.t_center_guess == pytest.approx(params.t_c, rel=1e-12)

    def test_empty_fields_rejected(self, params, quiet):
        with pytest.raises(InputError):
            plan_sweep(params, quiet, [])

    def test_plan_invariants(self):
        with pytest.raises(InputError):
            SweepPlan(fields=(10.0, 5.0), t_center_guess=1.5, t_span=0.4)
        with pytest.raises(InputError):
            SweepPlan(fields=(-1.0,), t_center_guess=1.5, t_span=0.4)
        with pytest.raises(InputError):
            SweepPlan(fields=(10.0,), t_center_guess=1.5, t_span=0.4, n_points=10)
        with pytest.raises(InputError):
            SweepPlan(fields=(10.0,), t_center_guess=1.5, t_span=-0.1)

    def test_plan_covers_all_transitions(self, params, quiet):
        plan = plan_sweep(params, quiet, [50.0, 100.0, 150.0])
        grid = temperature_grid(plan)
        margin = 0.1 * plan.t_span
        for field in plan.fields:
            t_star = params.t_c - film_delta(params, field) * 1e-3
            assert grid[0] + margin <= t_star <= grid[-1] - margin


class TestAcquire:
    def test_noiseless_zero_field_crossing_at_t_c(self, params, quiet):
        plan = plan_sweep(params, quiet, [0.0])
        curve = acquire_curve(params, quiet, plan, 0.0, "film")
        crossing = half_crossing(curve, quiet.normal_resistance)
        assert crossing == pytest.approx(params.t_c, abs=2e-6)

    def test_noiseless_cavity_crossing_at_depressed_midpoint(self, params, quiet):
        plan = plan_sweep(params, quiet, [150.0])
        curve = acquire_curve(params, quiet, plan, 150.0, "cavity")
        expected = params.t_c - cavity_delta(params, 150.0) * 1e-3
        assert half_crossing(curve, quiet.normal_resistance) == pytest.approx(
            expected, abs=2e-6)
        assert curve.oracle_t_star == pytest.approx(expected, rel=1e-15)

    def test_determinism(self, params, noisy):
        plan = plan_sweep(params, noisy, [150.0])
        a = acquire_curve(params, noisy, plan, 150.0, "film")
        b = acquire_curve(params, noisy, plan, 150.0, "film")
        assert np.array_equal(a.resistances, b.resistances)
        assert np.array_equal(a.temperatures, b.temperatures)

    def test_field_not_in_plan_rejected(self, params, quiet):
        plan = plan_sweep(params, quiet, [100.0])
        with pytest.raises(InputError):
            acquire_curve(params, quiet, plan, 99.0, "film")

    def test_base_temperature_floor(self, params, noisy):
        plan = SweepPlan(fields=(50.0,), t_center_guess=0.35, t_span=0.4)
        curve = acquire_curve(params, noisy, plan, 50.0, "film")
        assert np.all(curve.temperatures >= noisy.base_temperature)
        assert any(f.startswith("clamped") for f in curve.flags)

    def test_coverage_flag(self, params, quiet):
        plan = SweepPlan(fields=(150.0,), t_center_guess=1.80, t_span=0.4)
        curve = acquire_curve(params, quiet, plan, 150.0, "film")
        assert "midpoint-outside-central-80pct" in curve.flags


class TestPairedExperiment:
    def test_two_curves_per_field(self, params, noisy):
        fields = np.linspace(50, 250, 10)
        plan = plan_sweep(params, noisy, fields)
        curves = run_paired_experiment(params, noisy, plan)
        assert len(curves) == 20

    def test_repetition_counting_and_distinct_substreams(self, params, noisy):
        plan = plan_sweep(params, noisy, np.linspace(50, 250, 5))
        plan = SweepPlan(fields=plan.fields, t_center_guess=plan.t_center_guess,
                         t_span=plan.t_span, repetitions=3)
        curves = run_paired_experiment(params, noisy, plan)
        assert len(curves) == 30
        assert len({c.seed_path for c in curves}) == 30

    def test_pairing_shares_bit_identical_fields(self, params, noisy):
        plan = plan_sweep(params, noisy, np.linspace(50, 250, 10))
        curves = run_paired_experiment(params, noisy, plan)
        by_field = {}
        for curve in curves:
            by_field.setdefault(curve.field, set()).add(curve.kind)
        assert all(kinds == {"film", "cavity"} for kinds in by_field.values())

    def test_dataset_is_pure_function_of_inputs(self, params, noisy):
        plan = plan_sweep(params, noisy, [50.0, 150.0])
        first = run_paired_experiment(params, noisy, plan)
        second = run_paired_experiment(params, noisy, plan)
        for a, b in zip(first, second):
            assert np.array_equal(a.resistances, b.resistances)

    def test_substream_prefix_changes_noise(self, params, noisy):
        plan = plan_sweep(params, noisy, [150.0])
        a = run_paired_experiment(params, noisy, plan, substream_prefix=(0,))
        b = run_paired_experiment(params, noisy, plan, substream_prefix=(1,))
        assert not np.array_equal(a[0].resistances, b[0].resistances)


class TestRunFiles:
    def test_curve_csv_round_trip_bit_exact(self, params, noisy, tmp_path):
        plan = plan_sweep(params, noisy, [150.0])
        curve = acquire_curve(params, noisy, plan, 150.0, "cavity")
        path = tmp_path / "curve.csv"
        write_curve_csv(path, curve)
        loaded = read_curve_csv(path)
        assert loaded.field == curve.field
        assert loaded.kind == curve.kind
        assert loaded.seed_path == curve.seed_path
        assert loaded.flags == curve.flags
        assert loaded.oracle_t_star == curve.oracle_t_star
        assert np.array_equal(loaded.temperatures, curve.temperatures)
        assert np.array_equal(loaded.resistances, curve.resistances)

    def test_run_round_trip(self, params, noisy, tmp_path):
        plan = plan_sweep(params, noisy, [50.0, 150.0])
        curves = run_paired_experiment(params, noisy, plan)
        config = {"seed": noisy.seed, "note": "round-trip"}
        manifest = write_run(tmp_path / "run", curves, config)
        loaded, loaded_config = read_run(manifest)
        assert loaded_config == config
        assert len(loaded) == len(curves)
        for a, b in zip(loaded, curves):
            assert a.field == b.field and a.kind == b.kind
            assert np.array_equal(a.resistances, b.resistances)

    def test_written_files_count(self, params, noisy, tmp_path):
        plan = plan_sweep(params, noisy, np.linspace(50, 250, 10))
        curves = run_paired_experiment(params, noisy, plan)
        write_run(tmp_path / "run", curves, {})
        assert len(list((tmp_path / "run").glob("curve_*.csv"))) == 20


class TestCurveValidation:
    def test_nonincreasing_temperatures_rejected(self):
        with pytest.raises(InputError):
            TransitionCurve(field=10.0, kind="film",
                            temperatures=np.array([1.0, 0.9, 1.1]),
                            resistances=np.zeros(3))

    def test_duplicate_temperatures_allowed_when_clamped(self):
        TransitionCurve(field=10.0, kind="film",
                        temperatures=np.array([0.3, 0.3, 0.31]),
                        resistances=np.zeros(3), flags=("clamped:0",))

    def test_length_mismatch_rejected(self):
        with pytest.raises(InputError):
            TransitionCurve(field=10.0, kind="film",
                            temperatures=np.linspace(1, 2, 5),
                            resistances=np.zeros(4))
