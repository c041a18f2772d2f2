import textwrap

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from cpdm_fso.config import ConfigError, default_config, default_config_text, dump_config, frame_samples, load_config, parse_config

MINIMAL = """\
scenarios:
  - label: clear
    alpha_db_per_km: 0.5
"""


def issue_for(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.issues


class TestDefaults:
    def test_reference_values(self):
        cfg = default_config()
        sys = cfg.system
        assert sys.laser.power_dbm == 20.0
        assert sys.laser.frequency_thz == 193.1
        assert sys.laser.linewidth_hz == 10e6
        assert sys.bit_rate_bps == 200e9
        assert sys.amplifier_gain_db == 15.0
        assert sys.receiver.responsivity_a_per_w == 0.95
        assert sys.receiver.dark_current_a == 10e-9
        assert sys.receiver.thermal_psd == 1e-22
        assert (sys.ofdm.n_fft, sys.ofdm.n_used, sys.ofdm.cp_len) == (128, 80, 20)
        for sc in cfg.scenarios:
            g = sc.geometry
            assert (g.tx_aperture_m, g.rx_aperture_m, g.divergence_mrad) == (0.075, 0.20, 2.0)
            assert sc.turbulence.cn2 == 1.7e-14
            assert sc.turbulence.wavelength_m == 1.55e-6
            assert sc.fading_block == frame_samples(sys)

    def test_weather_set(self):
        cfg = default_config()
        got = [(s.label, s.attenuation.alpha_db_per_km) for s in cfg.scenarios]
        assert got == [("light_rain", 2.97), ("moderate_rain", 6.55), ("light_fog", 12.47), ("heavy_rain", 23.12)]
        assert cfg.distances_km == (1.0, 2.0, 3.0, 4.0, 5.0)

    def test_minimal_fills_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.system == default_config().system
        assert cfg.trials == 4 and cfg.master_seed == 2024

    def test_load_from_file(self, tmp_path):
        p = tmp_path / "run.yaml"
        p.write_text(default_config_text())
        assert load_config(p) == default_config()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.yaml")


class TestDiagnostics:
    def test_empty_scenarios_names_field(self):
        issues = issue_for("scenarios: []\n")
        assert issues[0][1] == "scenarios"
        assert issues[0][0] == 1

    def test_missing_scenarios(self):
        assert issue_for("sweep:\n  trials: 2\n")[0][1] == "scenarios"

    def test_unknown_key_reports_line(self):
        text = MINIMAL + "sweep:\n  trials: 2\n  trails: 3\n"
        line, where, msg = issue_for(text)[0]
        assert (line, where) == (6, "sweep.trails")
        assert "line 6: sweep.trails" in str(ConfigError([(line, where, msg)]))

    def test_nested_out_of_range(self):
        text = textwrap.dedent(
            """\
            system:
              receiver:
                responsivity_a_per_w: -1
            """
        ) + MINIMAL
        line, where, _ = issue_for(text)[0]
        assert (line, where) == (3, "system.receiver.responsivity_a_per_w")

    def test_scenario_item_line(self):
        text = MINIMAL + "  - label: fog\n    alpha_db_per_km: -2\n"
        line, where, _ = issue_for(text)[0]
        assert (line, where) == (5, "scenarios.1.alpha_db_per_km")

    @pytest.mark.parametrize(
        "extra",
        ["sweep:\n  trials: 0\n", "sweep:\n  distances_km: [1, -2]\n", "output:\n  format: xml\n", "system:\n  ase: true\n"],
    )
    def test_rejected_values(self, extra):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL + extra)

    def test_semantic_error(self):
        text = MINIMAL + "system:\n  lo:\n    frequency_thz: 193.2\n"
        assert issue_for(text)[0][1] == "<semantic>"

    def test_malformed_yaml(self):
        line, where, _ = issue_for("scenarios: [\n  - a: 1\n")[0]
        assert where == "<document>" and line is not None

    def test_top_level_must_be_mapping(self):
        assert issue_for("- 1\n- 2\n")[0][2] == "top level must be a mapping"


class TestRoundTrip:
    def test_default(self):
        cfg = default_config()
        assert parse_config(dump_config(cfg)) == cfg

    @settings(max_examples=40, deadline=None)
    @given(
        alphas=st.lists(st.floats(0, 60, allow_nan=False), min_size=1, max_size=4),
        distances=st.lists(st.floats(0.1, 20, allow_nan=False), min_size=1, max_size=5),
        trials=st.integers(1, 9),
        seed=st.integers(0, 2**63),
        power=st.floats(-10, 30, allow_nan=False),
        block=st.one_of(st.just("frame"), st.integers(1, 10**6)),
        turbulent=st.booleans(),
        fmt=st.sampled_from(["csv", "json"]),
        pilot_mode=st.sampled_from(["subcarrier", "symbol"]),
    )
    def test_generated(self, alphas, distances, trials, seed, power, block, turbulent, fmt, pilot_mode):
        doc = {
            "system": {"laser": {"power_dbm": power}, "ofdm": {"pilot_mode": pilot_mode}},
            "link": {"fading_block": block, "turbulence": turbulent},
            "scenarios": [{"label": f"s{i}", "alpha_db_per_km": a} for i, a in enumerate(alphas)],
            "sweep": {"distances_km": distances, "trials": trials, "master_seed": seed},
            "output": {"format": fmt},
        }
        cfg = parse_config(yaml.safe_dump(doc))
        assert parse_config(dump_config(cfg)) == cfg
