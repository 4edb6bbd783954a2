from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from cavityshift import (CalibrationError, InputError, InstrumentConfig,
                         ModelParams, calibrate_defaults, calibrate_noise,
                         derivative_contrast_study, plan_sweep,
                         run_sensitivity)
from cavityshift.sensitivity import Z_CAP

REFERENCE_SIGMA_R = 0.0751


@pytest.fixture(scope="module")
def params():
    return calibrate_defaults()


@pytest.fixture(scope="module")
def reference():
    return InstrumentConfig(resistance_noise=REFERENCE_SIGMA_R, seed=1)


@pytest.fixture(scope="module")
def quiet():
    return InstrumentConfig(resistance_noise=0.0, temperature_jitter=0.0, seed=1)


@pytest.fixture(scope="module")
def plan(params, reference):
    return plan_sweep(params, reference, np.linspace(50, 250, 10))


class TestRunSensitivity:
    def test_trials_floor(self, params, reference, plan):
        with pytest.raises(InputError):
            run_sensitivity(params, reference, plan, 50)

    def test_noiseless_report(self, params, quiet, plan):
        report = run_sensitivity(params, quiet, plan, 100)
        assert report.delta_n <= 1e-3
        assert report.z_capped
        assert report.detection_z == Z_CAP
        assert report.failed_trials == 0
        assert report.valid

    def test_reference_delta_n_near_target(self, params, reference, plan):
        report = run_sensitivity(params, reference, plan, 200)
        assert 0.09 <= report.delta_n <= 0.11
        assert report.calibrated_sigma_r == REFERENCE_SIGMA_R

    def test_determinism(self, params, reference, plan):
        a = run_sensitivity(params, reference, plan, 100)
        b = run_sensitivity(params, reference, plan, 100)
        assert a.delta_n == b.delta_n
        assert a.detection_z == b.detection_z
        assert a.derivative_contrast == b.derivative_contrast

    def test_null_model_not_detected(self, params, reference, plan):
        null = ModelParams(t_c=params.t_c, alpha=params.alpha, delta_inf=0.0,
                           h_v=params.h_v)
        report = run_sensitivity(null, reference, plan, 200)
        assert report.detection_z <= 2.0
        assert report.z_fraction_ge_3 <= 0.01

    def test_contrast_field_is_nearest_to_crossover(self, params, reference, plan):
        report = run_sensitivity(params, reference, plan, 100)
        assert report.contrast_field == 50.0


class TestCalibration:
    def test_roundtrip_to_target_band(self, params, reference, plan):
        sigma = calibrate_noise(0.1, reference, plan, 0.1, params=params, trials=200)
        assert sigma > 0
        check = run_sensitivity(params, replace(reference, resistance_noise=sigma),
                                plan, 200)
        assert 0.09 <= check.delta_n <= 0.11

    def test_empty_bracket_rejected(self, params, reference, plan):
        with pytest.raises(CalibrationError):
            calibrate_noise(0.1, reference, plan, 0.1, params=params,
                            trials=200, bracket=(0.0, 0.0))

    def test_nonpositive_target_rejected(self, params, reference, plan):
        with pytest.raises(InputError):
            calibrate_noise(0.0, reference, plan, 0.1, params=params)

    def test_delta_n_linear_response(self, params, reference, plan):
        low = run_sensitivity(params, reference, plan, 150).delta_n
        high = run_sensitivity(
            params, replace(reference, resistance_noise=2 * REFERENCE_SIGMA_R),
            plan, 150).delta_n
        assert high / low == pytest.approx(2.0, rel=0.15)

    def test_repetition_scaling_smoke(self, params, reference, plan):
        single = run_sensitivity(params, reference, plan, 100).delta_n
        plan4 = replace(plan, repetitions=4)
        averaged = run_sensitivity(params, reference, plan4, 100).delta_n
        assert averaged * 2.0 == pytest.approx(single, rel=0.2)


class TestContrastStudy:
    def test_requires_fields_below_crossover(self, params, quiet, plan):
        with pytest.raises(InputError):
            derivative_contrast_study(params, quiet, plan, 1)

    def test_noiseless_model_contrast_values(self, params, quiet):
        study_plan = plan_sweep(params, quiet, np.linspace(10, 250, 13))
        study = derivative_contrast_study(params, quiet, study_plan, 1)
        assert study.model_contrast_at_h_v >= 0.20
        idx_high = int(np.argmin(np.abs(study.fields - 5 * params.h_v)))
        assert study.model_contrast[idx_high] <= 0.05

    def test_degenerate_cavity_has_zero_contrast(self, params, quiet):
        flat = ModelParams(t_c=params.t_c, alpha=params.alpha, delta_inf=0.0,
                           h_v=params.h_v)
        study_plan = plan_sweep(params, quiet, np.linspace(10, 250, 13))
        study = derivative_contrast_study(flat, quiet, study_plan, 1)
        assert np.all(study.model_contrast == 0.0)
        assert np.all(study.contrast_mean == 0.0)

    def test_noisy_contrast_reported_with_sigma(self, params, reference):
        study_plan = plan_sweep(params, reference, np.linspace(10, 250, 13))
        study = derivative_contrast_study(params, reference, study_plan, 50)
        assert study.trials == 50
        assert np.all(study.contrast_sigma >= 0.0)
        idx = int(np.argmin(np.abs(study.fields - params.h_v)))
        model_value = study.model_contrast[idx]
        assert study.contrast_mean[idx] == pytest.approx(
            model_value, abs=4 * study.contrast_sigma[idx] / np.sqrt(50) + 0.05)
