"""In-process checks of scenario configuration and the scenario runners."""

import numpy as np
import pytest

from statefusion.scenarios import (
    ConfigError,
    ScenarioConfig,
    ScenarioFailure,
    available_scenarios,
    load_config,
    run_scenario,
    validate_config,
)

# The documented parameter surface of each scenario.
PARAM_KEYS = {
    "observability": {"m1", "m2", "L1", "L2", "g", "v", "L", "tau_beta"},
    "sip-control": {
        "t_end", "g", "L", "init_theta", "init_x", "init_noise_std",
        "meas_noise_std", "controller_poles", "observer_poles",
    },
    "imm-track": {"var_p", "var_v", "var_a", "var_z", "v0", "self_transition",
                  "innovation_form"},
    "pf-vs-kf": {"n_particles", "accel_psd", "var_z", "resample_threshold",
                 "resample_method"},
    "cif-network": {"replications", "truth", "common_cov", "node_cov_a",
                    "node_cov_b", "weights"},
    "circular-reasoning": set(),
    "phd-track": {"p_detect", "p_survive", "clutter_rate", "var_z"},
    "ukf-ckf-landmark": {"v", "beta", "L", "var_r"},
}

STOCHASTIC = {
    "sip-control", "imm-track", "pf-vs-kf", "cif-network", "phd-track",
    "ukf-ckf-landmark",
}


def _write(tmp_path, text):
    path = tmp_path / "config.toml"
    path.write_text(text)
    return str(path)


# ---------------------------------------------------------------------------
# Configuration


def test_available_scenarios_is_sorted_and_complete():
    names = available_scenarios()
    assert names == sorted(PARAM_KEYS)


@pytest.mark.parametrize("scenario", sorted(PARAM_KEYS))
def test_validate_accepts_every_documented_parameter(tmp_path, scenario):
    lines = ["schema_version = 1", f'scenario = "{scenario}"']
    if scenario in STOCHASTIC:
        lines.append("seed = 0")
    keys = sorted(PARAM_KEYS[scenario])
    if keys:
        lines.append("[params]")
        lines += [f"{key} = 1.0" for key in keys]
    assert validate_config(_write(tmp_path, "\n".join(lines) + "\n")) == []


def test_validate_rejects_undocumented_parameter(tmp_path):
    path = _write(tmp_path, (
        "schema_version = 1\n"
        'scenario = "ukf-ckf-landmark"\n'
        "seed = 0\n"
        "[params]\n"
        "wheel_count = 4\n"
    ))
    assert validate_config(path) == [
        "unknown parameter 'wheel_count' for scenario 'ukf-ckf-landmark'"
    ]


def test_validate_seed_rules(tmp_path):
    # Zero is a legal seed; booleans and negatives are not.
    ok = _write(tmp_path, 'schema_version = 1\nscenario = "imm-track"\nseed = 0\n')
    assert validate_config(ok) == []
    bad = _write(tmp_path, 'schema_version = 1\nscenario = "imm-track"\nseed = -1\n')
    assert "seed must be a non-negative integer" in validate_config(bad)
    boolean = _write(tmp_path, 'schema_version = 1\nscenario = "imm-track"\nseed = true\n')
    assert "seed must be a non-negative integer" in validate_config(boolean)


def test_load_config_round_trip(tmp_path):
    path = _write(tmp_path, (
        "schema_version = 1\n"
        'scenario = "phd-track"\n'
        "seed = 7\n"
        "steps = 25\n"
        "dt = 0.5\n"
        'out = "traces"\n'
        'format = "jsonl"\n'
        "[params]\n"
        "p_detect = 0.9\n"
        "clutter_rate = 1.5\n"
    ))
    cfg = load_config(path)
    assert cfg.scenario == "phd-track"
    assert cfg.seed == 7
    assert cfg.steps == 25
    assert cfg.dt == 0.5
    assert cfg.out == "traces"
    assert cfg.out_format == "jsonl"
    assert cfg.params == {"p_detect": 0.9, "clutter_rate": 1.5}


def test_load_config_collects_problems_into_one_error(tmp_path):
    path = _write(tmp_path, 'scenario = "imm-track"\nsteps = 0\n')
    with pytest.raises(ConfigError) as exc_info:
        load_config(path)
    message = str(exc_info.value)
    assert "schema_version must be present and equal to 1" in message
    assert "steps must be a positive integer" in message
    assert "seed is required" in message


def test_run_scenario_unknown_name_raises():
    with pytest.raises(ConfigError, match="unknown scenario 'warp-drive'"):
        run_scenario(ScenarioConfig("warp-drive"))


# ---------------------------------------------------------------------------
# Every scenario runs end to end and emits well-formed records.

SMOKE_CONFIGS = [
    ScenarioConfig("observability"),
    ScenarioConfig("sip-control", seed=0, params={"t_end": 0.5}),
    ScenarioConfig("imm-track", seed=0, steps=10),
    ScenarioConfig("pf-vs-kf", seed=2, steps=5, params={"n_particles": 300}),
    ScenarioConfig("cif-network", seed=5, params={"replications": 30}),
    ScenarioConfig("circular-reasoning"),
    ScenarioConfig("phd-track", seed=0, steps=10, params={"p_detect": 0.95}),
    ScenarioConfig("ukf-ckf-landmark", seed=1, steps=8),
]


@pytest.mark.parametrize("config", SMOKE_CONFIGS, ids=lambda c: c.scenario)
def test_scenario_emits_well_formed_records(config):
    records, summary = run_scenario(config)
    assert len(records) > 0
    assert isinstance(summary, dict) and summary
    times = [rec.t for rec in records]
    assert times == sorted(times)
    for rec in records:
        assert rec.estimate.ndim == 1
        assert rec.cov_diag.ndim == 1
        assert np.all(np.isfinite(rec.estimate))
        assert np.all(np.isfinite(rec.cov_diag))
        for key, value in rec.extras.items():
            assert isinstance(key, str)
            assert isinstance(value, float) and np.isfinite(value)
        if rec.truth is not None:
            assert np.all(np.isfinite(rec.truth))


# ---------------------------------------------------------------------------
# Scenario-specific behavior


def test_observability_scenario_reports_ranks():
    records, summary = run_scenario(ScenarioConfig("observability"))
    systems = summary["systems"]
    assert systems["dip_angle_and_cart"] == {"n": 6, "rank": 6, "observable": True}
    assert systems["sip_cart_only"] == {"n": 4, "rank": 2, "observable": False}
    lateral = systems["lateral_offset"]
    assert lateral["n"] == 3 and lateral["rank"] == 3 and lateral["observable"]
    # Defaults v=2, L=1 give a diagonal stack of 1, v, v^2/L.
    assert lateral["observability_matrix"] == [
        [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 4.0],
    ]
    assert [rec.estimate[0] for rec in records] == [6.0, 3.0, 2.0]


def test_sip_control_scenario_converges_with_exact_gains():
    records, summary = run_scenario(ScenarioConfig("sip-control", seed=0))
    assert summary["converged"] is True
    assert summary["loop_stable"] is True
    assert summary["final_abs_theta"] < 0.01
    assert summary["final_abs_x"] < 0.01
    assert summary["controller_gain"] == [-131.6, -41.6, -25.6, -25.6]
    assert summary["observer_gain"] == [
        [8.0, 0.0], [26.0, 0.0], [0.0, 8.0], [0.0, 16.0],
    ]
    eigs = summary["closed_loop_eig_real_parts"]
    assert len(eigs) == 8
    assert all(abs(e + 4.0) < 1e-4 for e in eigs)
    assert len(records) == 4000


def test_sip_control_scenario_failure_condition():
    with pytest.raises(ScenarioFailure, match="Control failure!"):
        run_scenario(ScenarioConfig("sip-control", seed=0, params={"init_theta": 1.5}))


def test_imm_track_scenario_identifies_constant_velocity():
    _, summary = run_scenario(ScenarioConfig("imm-track", seed=0))
    weights = summary["final_weights"]
    assert set(weights) == {"cp", "cv", "ca"}
    assert sum(weights.values()) == pytest.approx(1.0, abs=1e-12)
    assert summary["preferred_model"] == "cv"
    assert weights["cv"] == max(weights.values())


def test_pf_vs_kf_scenario_reports_bound_fraction():
    _, summary = run_scenario(ScenarioConfig(
        "pf-vs-kf", seed=2, steps=8, params={"n_particles": 1000},
    ))
    assert 0.0 <= summary["fraction_within_bound"] <= 1.0
    assert summary["n_particles"] == 1000
    assert 0.0 < summary["min_neff"] <= 1000.0


def test_cif_network_scenario_audit_verdicts():
    _, summary = run_scenario(ScenarioConfig("cif-network", seed=1))
    assert set(summary) == {
        "naive", "federated", "split_total", "split_dependent", "split_independent",
    }
    for report in summary.values():
        assert set(report) == {"consistent", "min_eigenvalue_of_difference", "tolerance"}
    # Reusing the shared error twice makes the naive combination overconfident;
    # the decompositions that account for it stay honest.
    assert summary["naive"]["consistent"] is False
    assert summary["federated"]["consistent"] is True
    assert summary["split_total"]["consistent"] is True
    assert summary["split_dependent"]["consistent"] is True
    assert summary["split_independent"]["consistent"] is True


def test_circular_reasoning_scenario_divisors():
    records, summary = run_scenario(ScenarioConfig("circular-reasoning"))
    assert len(records) == 6
    assert summary["naive_divisors_a"] == pytest.approx([1, 1, 3, 3, 8, 8], abs=1e-12)
    assert summary["naive_divisors_b"] == pytest.approx([1, 2, 2, 5, 5, 13], abs=1e-12)
    assert summary["ci_variance_constant"] is True
    assert records[-1].extras["ci_a"] == 1.0
    assert records[-1].extras["ci_b"] == 1.0


def test_circular_reasoning_scenario_honours_steps():
    records, summary = run_scenario(ScenarioConfig("circular-reasoning", steps=8))
    assert len(records) == 9
    assert len(summary["naive_divisors_a"]) == 9


def test_phd_track_scenario_reports_cardinality():
    records, summary = run_scenario(ScenarioConfig(
        "phd-track", seed=0, steps=15, params={"p_detect": 0.98, "clutter_rate": 2.0},
    ))
    assert 0.0 <= summary["cardinality_accuracy"] <= 1.0
    for track in summary["final_extracted"]:
        assert len(track) == 4
    for rec in records:
        assert rec.estimate[0] >= 0.0  # total intensity mass
        assert rec.extras["n_extracted"] >= 0.0
        assert rec.extras["cardinality_ok"] in (0.0, 1.0)


def test_ukf_ckf_landmark_scenario_reduces_uncertainty():
    _, summary = run_scenario(ScenarioConfig("ukf-ckf-landmark", seed=1, steps=15))
    fractions = summary["trace_reduction_fraction"]
    assert set(fractions) == {"ekf", "ukf", "ckf"}
    for value in fractions.values():
        assert 0.0 <= value <= 1.0
    assert fractions["ekf"] == 1.0
    assert fractions["ukf"] == 1.0
    for err in summary["final_errors"].values():
        assert 0.0 <= err < 1.0
