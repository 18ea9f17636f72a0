"""Config loading, presets, and sweep plumbing."""

import json

import pytest

from ionlink import config, sweeps, timing
from ionlink.exceptions import ConfigError


class TestConfig:
    def test_preset_matches_baseline_parameters(self):
        sc = config.default_scenario()
        assert sc.efficiencies.eta_m == 0.8
        assert sc.efficiencies.eta == 0.9
        assert sc.efficiencies.eta0_prime == 0.9
        assert sc.efficiencies.eta_fc == 0.9
        assert sc.n_bb_modes == 1000
        assert sc.attenuation_db_per_km == 0.2
        assert sc.dark_rate_hz == 1e-3
        assert sc.ion_pulse_duration_s == 1e-5
        assert sc.time_bin_duration_s == 1e-6
        assert sc.n_bins == 10
        assert sc.correlation_time_s == 1e-7
        assert sc.detector_resolution_s == 1e-9
        assert sc.c_fiber_km_per_s == 2e5
        assert sc.fidelity_target == 0.99
        assert sc.topology.has_repeater

    def test_overrides_apply(self):
        sc = config.default_scenario(total_distance_km=250.0, with_repeater=False,
                                     efficiencies={"eta_m": 0.5})
        assert sc.total_distance_km == 250.0
        assert not sc.topology.has_repeater
        assert sc.efficiencies.eta_m == 0.5
        assert sc.efficiencies.eta == 0.9  # untouched fields keep preset values

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError) as err:
            config.scenario_from_dict({"flux_capacitor": 1.21})
        assert "flux_capacitor" in str(err.value)

    def test_bad_type_rejected(self):
        with pytest.raises(ConfigError) as err:
            config.scenario_from_dict({"n_bb_modes": "many"})
        assert "n_bb_modes" in str(err.value)

    def test_bad_efficiency_rejected(self):
        with pytest.raises(ConfigError):
            config.scenario_from_dict({"efficiencies": {"eta_m": 1.7}})
        with pytest.raises(ConfigError):
            config.scenario_from_dict({"efficiencies": {"eta_q": 0.5}})

    def test_load_config_diagnostics(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{\n  \"a\": \n}")
        with pytest.raises(ConfigError) as err:
            config.load_config(str(path))
        assert "line" in str(err.value)


class TestSweepSpec:
    def test_rejects_empty_distances(self):
        sc = config.default_scenario()
        with pytest.raises(ConfigError):
            sweeps.SweepSpec(protocol="direct", distances_km=[], scenario=sc)

    def test_rejects_unsorted_distances(self):
        sc = config.default_scenario()
        with pytest.raises(ConfigError):
            sweeps.SweepSpec(protocol="direct", distances_km=[100.0, 50.0], scenario=sc)
        with pytest.raises(ConfigError):
            sweeps.SweepSpec(protocol="direct", distances_km=[-10.0, 50.0], scenario=sc)

    def test_rejects_unknown_protocol(self):
        sc = config.default_scenario()
        with pytest.raises(ConfigError):
            sweeps.SweepSpec(protocol="smoke-signals", distances_km=[10.0], scenario=sc)

    def test_protocol_sets_topology(self):
        sc = config.default_scenario()
        spec = sweeps.SweepSpec(protocol="hybrid", distances_km=[100.0], scenario=sc)
        assert not sweeps._scenario_at(spec, 100.0).topology.has_repeater
        spec = sweeps.SweepSpec(protocol="hybrid-repeater", distances_km=[100.0], scenario=sc)
        assert sweeps._scenario_at(spec, 100.0).topology.has_repeater


@pytest.fixture(scope="module")
def rows():
    sc = config.default_scenario(fidelity_target=0.99)
    spec = sweeps.SweepSpec(protocol="direct", distances_km=[60.0, 130.0, 420.0],
                            scenario=sc)
    return sweeps.run_sweep(spec)


class TestSweepOutputs:
    def test_rows_ordered_and_flagged(self, rows):
        assert [r.distance_km for r in rows] == [60.0, 130.0, 420.0]
        assert rows[0].feasible and rows[1].feasible
        assert not rows[2].feasible
        assert rows[2].duration_s is None

    def test_duration_monotone_in_distance(self, rows):
        assert rows[0].duration_s < rows[1].duration_s

    def test_csv_render(self, rows):
        text = sweeps.rows_to_csv(rows)
        lines = text.splitlines()
        assert lines[0] == ",".join(sweeps.CSV_COLUMNS)
        assert lines[1].endswith("true")
        assert lines[3].split(",")[1] == ""

    def test_json_render(self, rows):
        payload = json.loads(sweeps.rows_to_json(rows, meta={"protocol": "direct"}))
        assert payload["meta"]["protocol"] == "direct"
        assert len(payload["rows"]) == 3

    def test_parallel_matches_serial(self):
        sc = config.default_scenario(fidelity_target=0.99)
        spec_ser = sweeps.SweepSpec(protocol="direct", distances_km=[70.0, 140.0],
                                    scenario=sc, threads=1)
        spec_par = sweeps.SweepSpec(protocol="direct", distances_km=[70.0, 140.0],
                                    scenario=sc, threads=2)
        ser = sweeps.run_sweep(spec_ser)
        par = sweeps.run_sweep(spec_par)
        assert [r.as_dict() for r in ser] == [r.as_dict() for r in par]
