import math

import numpy as np
import pytest

from cpdm_fso import ofdm
from cpdm_fso.ofdm import (
    ChannelEstimate,
    FrameLayout,
    FramingError,
    OfdmConfig,
    demodulate_frames,
    estimate_channel,
    export_subcarrier_map,
    ofdm_demodulate,
    ofdm_modulate,
    prbs_generate,
    qpsk_demap,
    qpsk_map,
    subcarrier_map,
)

CFG = OfdmConfig()
SYMBOL_CFG = OfdmConfig(pilot_mode="symbol")


def random_symbols(n_ofdm, seed=0, cfg=CFG):
    bits = prbs_generate(2 * cfg.n_used * n_ofdm, seed).bits
    return bits, qpsk_map(bits)


def loopback(samples, cfg=CFG):
    syms, _ = demodulate_frames(samples, cfg)
    return syms


class TestPrbs:
    def test_deterministic(self):
        assert np.array_equal(prbs_generate(8, 1).bits, prbs_generate(8, 1).bits)

    def test_balance_and_whiteness(self):
        b = prbs_generate(1_000_000, 42).bits.astype(float)
        assert 0.49 <= b.mean() <= 0.51
        x = b - b.mean()
        rho = np.dot(x[:-1], x[1:]) / np.dot(x, x)
        assert abs(rho) < 0.01

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            prbs_generate(0, 1)


class TestQpsk:
    def test_gray_map(self):
        s = qpsk_map([0, 0, 0, 1, 1, 1, 1, 0])
        r = 1 / math.sqrt(2)
        np.testing.assert_allclose(s, [r + 1j * r, -r + 1j * r, -r - 1j * r, r - 1j * r])
        np.testing.assert_allclose(np.abs(s), 1.0)

    def test_odd_length(self):
        with pytest.raises(ValueError):
            qpsk_map([1, 0, 1])

    def test_demap_decisions(self):
        assert qpsk_demap([0.7071 + 0.7071j]).tolist() == [0, 0]
        assert qpsk_demap([-3 + 0.1j]).tolist() == [0, 1]
        # ties go to the positive half-plane
        assert qpsk_demap([0j]).tolist() == [0, 0]

    def test_round_trip(self):
        b = prbs_generate(10_000, 3).bits
        assert np.array_equal(qpsk_demap(qpsk_map(b)), b)

    def test_high_snr_recovery(self):
        b = prbs_generate(20_000, 4).bits
        noisy = qpsk_map(b) + 1e-6 * np.random.default_rng(0).normal(size=b.size // 2)
        assert np.array_equal(qpsk_demap(noisy), b)


class TestSubcarrierMap:
    def test_default_layout(self):
        m = subcarrier_map(CFG)
        assert m.active.size == 86
        assert 0 not in m.active
        assert m.data.size == 80
        assert sorted(m.pilots.tolist()) == [-36, -22, -8, 8, 22, 36]
        np.testing.assert_array_equal(m.active, -m.active[::-1])

    def test_symbol_mode_uses_all_active_for_data(self):
        m = subcarrier_map(SYMBOL_CFG)
        assert m.data.size == 80 and m.pilots.size == 0

    def test_export(self, tmp_path):
        lines = export_subcarrier_map(CFG, tmp_path / "map.txt").read_text().splitlines()
        assert lines[0].startswith("#")
        roles = [line.split()[2] for line in lines[1:]]
        assert len(roles) == 128
        assert roles.count("data") == 80 and roles.count("pilot") == 6

    @pytest.mark.parametrize(
        "kwargs", [dict(n_used=130), dict(cp_len=128), dict(n_fft=0), dict(pilot_mode="comb")]
    )
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            OfdmConfig(**kwargs)


class TestModulate:
    def test_sample_count(self):
        for n in (1, 39, 40, 41, 100):
            _, s = random_symbols(n)
            frames = -(-n // CFG.symbols_per_frame)
            assert ofdm_modulate(s, CFG).size == (n + frames * CFG.n_training) * 148

    def test_single_symbol_frame(self):
        _, s = random_symbols(1)
        assert ofdm_modulate(s, CFG).size == 11 * 148

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            ofdm_modulate(np.ones(79), CFG)

    def test_delta_gives_complex_exponential(self):
        grid = np.zeros((1, 128), dtype=complex)
        grid[0, 5] = 1.0
        body = ofdm.modulate_grid(grid, CFG)[20:]
        n = np.arange(128)
        np.testing.assert_allclose(body, np.exp(2j * math.pi * 5 * n / 128) / math.sqrt(128), atol=1e-15)

    def test_parseval(self):
        rng = np.random.default_rng(1)
        grid = rng.normal(size=(7, 128)) + 1j * rng.normal(size=(7, 128))
        body = ofdm.modulate_grid(grid, CFG).reshape(7, 148)[:, 20:]
        assert np.sum(np.abs(body) ** 2) == pytest.approx(np.sum(np.abs(grid) ** 2), rel=1e-10)

    def test_cyclic_prefix_copies_tail(self):
        _, s = random_symbols(3)
        rows = ofdm_modulate(s, CFG).reshape(-1, 148)
        np.testing.assert_array_equal(rows[:, :20], rows[:, -20:])

    def test_power_independent_of_data(self):
        powers = [np.mean(np.abs(ofdm_modulate(random_symbols(40, seed)[1], CFG)) ** 2) for seed in range(6)]
        assert np.ptp(powers) / np.mean(powers) < 0.02
        assert np.mean(powers) == pytest.approx(86 / 128, rel=0.02)


@pytest.mark.parametrize("cfg", [CFG, SYMBOL_CFG], ids=["pilot-subcarriers", "pilot-symbols"])
class TestLoopback:
    def test_bit_exact(self, cfg):
        bits, s = random_symbols(400, 5, cfg)
        rx = loopback(ofdm_modulate(s, cfg), cfg)
        np.testing.assert_allclose(rx, s, atol=1e-9)
        assert np.array_equal(qpsk_demap(rx), bits)

    def test_flat_gain_equalized(self, cfg):
        _, s = random_symbols(50, 6, cfg)
        g = 0.5 * np.exp(1j * math.pi / 4)
        rx = loopback(g * ofdm_modulate(s, cfg), cfg)
        np.testing.assert_allclose(rx, s, atol=1e-9)

    def test_cyclic_prefix_absorbs_short_channels(self, cfg):
        rng = np.random.default_rng(7)
        bits, s = random_symbols(120, 7, cfg)
        x = ofdm_modulate(s, cfg)
        for taps in (1, 5, 20):
            h = rng.normal(size=taps) + 1j * rng.normal(size=taps)
            y = np.convolve(x, h)[: x.size]
            assert np.array_equal(qpsk_demap(loopback(y, cfg)), bits)


class TestEstimation:
    def test_identity_channel(self):
        known = ofdm.training_symbols(CFG)
        est = estimate_channel(known, known, CFG)
        np.testing.assert_allclose(est.gains, 1.0)

    def test_flat_gain_exact(self):
        known = ofdm.training_symbols(CFG)
        g = 0.5 * np.exp(1j * math.pi / 4)
        est = estimate_channel(g * known, known, CFG)
        np.testing.assert_allclose(est.gains, g, atol=1e-9)

    def test_zero_training_rejected(self):
        known = ofdm.training_symbols(CFG).copy()
        known[0, 0] = 0
        with pytest.raises(ValueError):
            estimate_channel(known, known, CFG)

    def test_known_estimate_demodulates(self):
        _, s = random_symbols(40, 8)
        g = np.exp(1j * np.linspace(0, 3, CFG.n_active)) * np.linspace(0.5, 1.5, CFG.n_active)
        smap = subcarrier_map(CFG)
        x = ofdm_modulate(s, CFG)
        grid = ofdm.demodulate_grid(x, CFG)
        grid[:, smap.bins(smap.active)] *= g
        y = ofdm.modulate_grid(grid, CFG)
        rx = ofdm_demodulate(y, CFG, ChannelEstimate(g))
        np.testing.assert_allclose(rx, s, atol=1e-9)

    def test_identity_estimate_loopback(self):
        _, s = random_symbols(100, 9)
        rx = ofdm_demodulate(ofdm_modulate(s, CFG), CFG, ChannelEstimate.identity(CFG))
        np.testing.assert_allclose(rx, s, atol=1e-9)

    def test_phase_tracking_reduces_evm_under_phase_noise(self):
        rng = np.random.default_rng(10)
        _, s = random_symbols(400, 10)
        x = ofdm_modulate(s, CFG)
        # a 10 MHz linewidth sampled at 3.7 GS/s: a fast phase walk
        step = 2 * math.pi * 10e6 / 3.7e9
        y = x * np.exp(1j * np.cumsum(rng.normal(0, math.sqrt(step), x.size)))
        with_cpe, _ = demodulate_frames(y, CFG, track_phase=True)
        without, _ = demodulate_frames(y, CFG, track_phase=False)
        evm = lambda r: np.sqrt(np.mean(np.abs(r - s) ** 2))
        assert evm(with_cpe) < evm(without)


class TestFraming:
    def test_layout_round_trip(self):
        for n in (1, 40, 41, 95):
            layout = FrameLayout.for_data_symbols(n, CFG)
            assert FrameLayout.from_sample_count(layout.n_samples(CFG), CFG) == layout

    @pytest.mark.parametrize("n", [147, 148 * 10, 0])
    def test_malformed_length(self, n):
        with pytest.raises(FramingError):
            FrameLayout.from_sample_count(n, CFG)

    def test_demodulate_rejects_partial_symbol(self):
        _, s = random_symbols(2)
        with pytest.raises(FramingError):
            loopback(ofdm_modulate(s, CFG)[:-1])
