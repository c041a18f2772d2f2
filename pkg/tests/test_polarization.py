import csv
import math

import numpy as np
import pytest

from cpdm_fso.polarization import (
    H,
    LCP,
    P_L,
    P_R,
    QWP_45,
    RCP,
    TRIBUTARIES,
    V,
    JonesVector,
    PolarizedField,
    StokesVector,
    combine_tributaries,
    cpbc_combine,
    cpbs_matrices,
    cpbs_split,
    export_stokes_trace,
    field_stokes,
    half_waveplate,
    pbc_combine,
    pbs_split,
    quarter_waveplate,
    split_tributaries,
    stokes_params,
)

FS = 10e9


def const(v, n=8):
    return PolarizedField.constant(JonesVector.from_array(v), n, FS)


def random_field(rng, n=256):
    ex = rng.normal(size=n) + 1j * rng.normal(size=n)
    ey = rng.normal(size=n) + 1j * rng.normal(size=n)
    return PolarizedField.from_components(ex, ey, FS)


def normalized_stokes(v):
    return np.array(stokes_params(JonesVector.from_array(v)).normalized().as_tuple())


class TestWaveplates:
    @pytest.mark.parametrize("angle", np.linspace(-math.pi, math.pi, 9))
    def test_quarter_waveplate_unitary(self, angle):
        q = quarter_waveplate(angle)
        np.testing.assert_allclose(q @ q.conj().T, np.eye(2), atol=1e-14)

    def test_qwp_45_makes_horizontal_circular(self):
        s = normalized_stokes(QWP_45 @ H)
        assert abs(s[3]) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("angle", [0.0, 0.3, math.pi / 4, 1.2])
    def test_two_quarter_plates_make_a_half_plate(self, angle):
        q = quarter_waveplate(angle)
        np.testing.assert_allclose(q @ q, half_waveplate(angle), atol=1e-14)

    def test_horizontal_is_eigenstate_at_zero(self):
        s = normalized_stokes(quarter_waveplate(0.0) @ H)
        assert s[1] == pytest.approx(1.0, abs=1e-14)

    def test_qwp_45_maps_linear_basis_to_circular(self):
        for lin, circ in ((H, RCP), (V, LCP)):
            out = QWP_45 @ lin
            assert abs(np.vdot(circ, out)) == pytest.approx(1.0, abs=1e-14)


class TestLinearSplitter:
    def test_horizontal_goes_to_h_arm(self):
        h, v = pbs_split(const(H))
        assert h.mean_power() == pytest.approx(1.0)
        assert np.all(v.power() == 0)

    def test_diagonal_splits_evenly(self):
        h, v = pbs_split(const(JonesVector.linear(math.pi / 4).as_array()))
        assert h.mean_power() == pytest.approx(0.5, rel=1e-14)
        assert v.mean_power() == pytest.approx(0.5, rel=1e-14)

    def test_power_conserved_and_round_trip_exact(self):
        f = random_field(np.random.default_rng(1))
        h, v = pbs_split(f)
        np.testing.assert_allclose(h.power() + v.power(), f.power(), rtol=1e-12)
        assert np.array_equal(pbc_combine(h, v).jones, f.jones)

    def test_combine_with_dark_v_arm(self):
        f = random_field(np.random.default_rng(2))
        h, _ = pbs_split(f)
        dark = f.scaled(0.0)
        np.testing.assert_array_equal(pbc_combine(h, dark).jones, h.jones)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pbc_combine(const(H, 8), const(V, 9))

    def test_sample_rate_mismatch(self):
        a = const(H)
        b = PolarizedField(const(V).jones, 2 * FS)
        with pytest.raises(ValueError):
            pbc_combine(a, b)


class TestCircularSplitter:
    def test_waveplate_composition_equals_projection(self):
        m_r, m_l = cpbs_matrices()
        np.testing.assert_allclose(m_r, P_R, atol=1e-12)
        np.testing.assert_allclose(m_l, P_L, atol=1e-12)
        for p in (P_R, P_L):
            np.testing.assert_allclose(p @ p, p, atol=1e-14)

    def test_rcp_goes_to_rcp_arm(self):
        r, l = cpbs_split(const(RCP))
        assert r.mean_power() == pytest.approx(1.0, rel=1e-14)
        assert l.mean_power() == pytest.approx(0.0, abs=1e-28)

    def test_horizontal_splits_evenly(self):
        r, l = cpbs_split(const(H))
        assert r.mean_power() == pytest.approx(0.5, rel=1e-14)
        assert l.mean_power() == pytest.approx(0.5, rel=1e-14)

    def test_laser_at_45_degrees(self):
        r, l = cpbs_split(const(JonesVector.linear(math.radians(45)).as_array()))
        assert r.mean_power() == pytest.approx(l.mean_power(), rel=1e-14)
        for arm, sign in ((r, 1), (l, -1)):
            s = field_stokes(arm)[:, 0]
            assert s[3] / s[0] == pytest.approx(sign, abs=1e-12)

    def test_power_conserved(self):
        f = random_field(np.random.default_rng(3))
        r, l = cpbs_split(f)
        np.testing.assert_allclose(r.power() + l.power(), f.power(), rtol=1e-12)

    def test_round_trip(self):
        f = random_field(np.random.default_rng(4))
        r, l = cpbs_split(f)
        back = cpbc_combine(r, l)
        np.testing.assert_allclose(back.ex, f.ex, atol=1e-14)
        np.testing.assert_allclose(back.ey, f.ey, atol=1e-14)
        r2, l2 = cpbs_split(back)
        np.testing.assert_array_equal(r2.jones, r.jones)
        np.testing.assert_array_equal(l2.jones, l.jones)

    def test_single_arm_pass_through(self):
        f = const(RCP)
        back = cpbc_combine(f, f.scaled(0.0))
        np.testing.assert_allclose(back.ex, f.ex, atol=1e-15)
        np.testing.assert_allclose(back.ey, f.ey, atol=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cpbc_combine(const(RCP, 4), const(LCP, 5))


class TestFourTributaries:
    def _carriers(self):
        laser = const(JonesVector.linear(math.pi / 4).as_array(), 4096)
        return split_tributaries(laser)

    def test_tributary_order(self):
        assert TRIBUTARIES == ("RCP-H", "RCP-V", "LCP-H", "LCP-V")

    @pytest.mark.parametrize("active", range(4))
    def test_crosstalk_below_minus_300_db(self, active):
        rng = np.random.default_rng(active)
        arms = []
        for t, carrier in enumerate(self._carriers()):
            drive = rng.normal(size=len(carrier)) + 1j * rng.normal(size=len(carrier))
            arms.append(carrier.scaled(drive if t == active else 0.0))
        out = split_tributaries(combine_tributaries(arms))
        signal = out[active].mean_power()
        assert signal > 0
        np.testing.assert_allclose(out[active].jones, arms[active].jones, rtol=1e-12)
        for t in range(4):
            if t != active:
                leak = out[t].mean_power()
                assert leak == 0.0 or 10 * math.log10(leak / signal) <= -300

    def test_all_four_recovered_independently(self):
        rng = np.random.default_rng(9)
        arms = [c.scaled(rng.normal(size=len(c)) + 1j * rng.normal(size=len(c))) for c in self._carriers()]
        out = split_tributaries(combine_tributaries(arms))
        for a, b in zip(arms, out):
            np.testing.assert_allclose(b.jones, a.jones, rtol=1e-12)


class TestStokes:
    @pytest.mark.parametrize(
        "v, expected",
        [(H, (1, 1, 0, 0)), (RCP, (1, 0, 0, 1)), (LCP, (1, 0, 0, -1)), (JonesVector.linear(math.pi / 4).as_array(), (1, 0, 1, 0))],
    )
    def test_basis_states(self, v, expected):
        np.testing.assert_allclose(normalized_stokes(v), expected, atol=1e-14)

    def test_fully_polarized(self):
        f = random_field(np.random.default_rng(5), 1000)
        s = field_stokes(f)
        np.testing.assert_allclose(s[1] ** 2 + s[2] ** 2 + s[3] ** 2, s[0] ** 2, rtol=1e-12)

    def test_degree_of_polarization(self):
        assert stokes_params(JonesVector(0.3 + 0.1j, -0.7j)).degree_of_polarization == pytest.approx(1.0)
        assert StokesVector(2.0, 0.0, 0.0, 1.0).degree_of_polarization == pytest.approx(0.5)

    def test_export(self, tmp_path):
        f = const(RCP, 3)
        path = export_stokes_trace(f, tmp_path / "stokes.csv")
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["sample_index", "s0", "s1", "s2", "s3"]
        assert len(rows) == 4
        assert float(rows[1][4]) == pytest.approx(1.0)

    def test_export_error_names_path(self, tmp_path):
        with pytest.raises(OSError, match="missing"):
            export_stokes_trace(const(H), tmp_path / "missing" / "x.csv")


def test_invalid_fields():
    with pytest.raises(ValueError):
        JonesVector(math.nan, 0)
    with pytest.raises(ValueError):
        PolarizedField(np.zeros((3, 4)), FS)
    with pytest.raises(ValueError):
        PolarizedField(np.zeros((2, 4)), 0.0)
