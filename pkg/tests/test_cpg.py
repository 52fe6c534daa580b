import math

import numpy as np
import pytest

from orisurface.cpg import (CpgParams, Direction, PARAM_BOUNDS, cpg_height,
                            cpg_inclination, command_extremes_feasible,
                            effective_sigma, module_command, trace)

PI = math.pi


def make_params(**kw):
    base = dict(h_amp=0.02, psi_amp=0.5, freq=0.5, h0=0.03, psi0=0.05,
                sigma=1.2, phi=PI, epsilon=0.2)
    base.update(kw)
    return CpgParams(**base)


class TestSignals:
    def test_height_at_zero(self):
        p = make_params()
        assert cpg_height(0.0, p, 0.0) == pytest.approx(p.h0, abs=1e-15)

    def test_height_quarter_period(self):
        p = make_params()
        assert cpg_height(1.0 / (4.0 * p.freq), p, 0.0) == pytest.approx(
            p.h0 + p.h_amp, abs=1e-12)

    def test_antiphase_group(self):
        p = make_params()
        # group at phase pi starts at h0 with opposite slope
        assert cpg_height(0.0, p, PI) == pytest.approx(p.h0, abs=1e-12)
        dt = 1e-6
        slope1 = (cpg_height(dt, p, 0.0) - cpg_height(0.0, p, 0.0)) / dt
        slope2 = (cpg_height(dt, p, PI) - cpg_height(0.0, p, PI)) / dt
        assert slope1 == pytest.approx(-slope2, rel=1e-6)

    def test_inclination_phase_lead(self):
        p = make_params(sigma=PI / 2.0, psi0=0.0)
        assert cpg_inclination(0.0, p, 0.0) == pytest.approx(p.psi_amp, abs=1e-12)

    def test_sigma_zero_in_phase(self):
        p = make_params(sigma=0.0, psi0=0.0)
        t = np.linspace(0.0, 1.0 / p.freq, 2001)
        h = cpg_height(t, p, 0.0)
        psi = cpg_inclination(t, p, 0.0)
        assert np.argmax(h) == np.argmax(psi)

    def test_sigma_pi_antiphase(self):
        p = make_params(sigma=PI, psi0=0.0)
        t = np.linspace(0.0, 2.0, 500)
        h_centered = cpg_height(t, p, 0.0) - p.h0
        psi = cpg_inclination(t, p, 0.0)
        assert np.allclose(psi * p.h_amp, -h_centered * p.psi_amp, atol=1e-12)

    def test_periodicity(self):
        p = make_params(freq=0.73)
        t = np.linspace(0.0, 1.0 / p.freq, 97)
        for phase in (0.0, p.phi):
            assert np.allclose(cpg_height(t, p, phase),
                               cpg_height(t + 1.0 / p.freq, p, phase), atol=1e-12)
            assert np.allclose(cpg_inclination(t, p, phase),
                               cpg_inclination(t + 1.0 / p.freq, p, phase), atol=1e-12)

    def test_bounds_exact(self):
        p = make_params()
        t = np.linspace(0.0, 10.0, 20001)
        h = cpg_height(t, p, 0.3)
        psi = cpg_inclination(t, p, 0.3)
        assert h.min() >= p.h0 - p.h_amp - 1e-15
        assert h.max() <= p.h0 + p.h_amp + 1e-15
        assert psi.min() >= p.psi0 - p.psi_amp - 1e-15
        assert psi.max() <= p.psi0 + p.psi_amp + 1e-15

    def test_phase_coupling_lag(self):
        # cross-correlation peak lag between psi and H equals sigma/(2 pi f)
        p = make_params(sigma=0.9, psi0=0.0, freq=0.4)
        rate = 200.0
        n = int(10.0 / p.freq * rate)
        t = np.arange(n) / rate
        h = cpg_height(t, p, 0.0) - p.h0
        psi = cpg_inclination(t, p, 0.0)
        period = int(round(rate / p.freq))
        lags = np.arange(period)
        score = [float(np.dot(psi, np.roll(h, -lag))) for lag in lags]
        best = lags[int(np.argmax(score))]
        expected = p.sigma / (2.0 * PI * p.freq) * rate
        assert min(abs(best - expected), abs(best - expected + period),
                   abs(best - expected - period)) <= 1.0

    def test_direction_flip_mirrors_inclination(self):
        p = make_params(sigma=1.1)
        t = np.linspace(0.0, 4.0, 1001)
        fwd = cpg_inclination(t, p, 0.0)
        rev = cpg_inclination(t, p, 0.0, sigma=p.sigma - PI)
        assert np.allclose(rev - p.psi0, -(fwd - p.psi0), atol=1e-12)


class TestModuleCommand:
    def test_composition(self):
        p = make_params()
        pose = module_command(0.3, p, 0.0, Direction(delta_cmd=0.0, sign=1))
        assert pose.delta == 0.0
        assert pose.height == pytest.approx(float(cpg_height(0.3, p, 0.0)), abs=1e-15)
        assert pose.psi == pytest.approx(float(cpg_inclination(0.3, p, 0.0)), abs=1e-15)

    def test_x_axis_command(self):
        p = make_params()
        pose = module_command(0.0, p, 0.0, Direction(delta_cmd=PI / 2.0, sign=1))
        assert pose.delta == pytest.approx(PI / 2.0)

    def test_negative_sign_shifts_sigma(self):
        p = make_params(sigma=0.7)
        assert effective_sigma(p, Direction(0.0, 1)) == pytest.approx(0.7)
        assert effective_sigma(p, Direction(0.0, -1)) == pytest.approx(0.7 + PI)

    def test_groups_antiphase_commands(self):
        p = make_params(phi=PI, psi0=0.0)
        d = Direction(0.0, 1)
        for t in np.linspace(0.0, 3.0, 17):
            a = module_command(t, p, 0.0, d)
            b = module_command(t, p, p.phi, d)
            assert b.height - p.h0 == pytest.approx(-(a.height - p.h0), abs=1e-12)
            assert b.psi == pytest.approx(-a.psi, abs=1e-12)


class TestValidation:
    def test_box_bounds_enforced(self):
        for name, (lo, hi) in PARAM_BOUNDS.items():
            with pytest.raises(ValueError):
                make_params(**{name: hi + 0.01 * max(1.0, hi)})

    def test_direction_sign(self):
        with pytest.raises(ValueError):
            Direction(0.0, 0)


class TestFeasibilityScreen:
    def test_moderate_params_pass(self, geom):
        p = make_params(h_amp=0.012, psi_amp=0.45, psi0=0.0, sigma=1.8326)
        assert command_extremes_feasible(p, geom, delta_cmds=(0.0, PI / 2.0),
                                         signs=(1, -1))

    def test_over_reach_fails(self, geom):
        # h0 + h_amp = 0.08 exceeds the 0.06 m reach
        p = make_params(h0=0.04, h_amp=0.04)
        assert not command_extremes_feasible(p, geom)

    def test_extreme_tilt_at_low_height_fails(self, geom):
        p = make_params(h0=0.02, h_amp=0.018, psi_amp=0.79, psi0=0.26, sigma=PI / 2.0)
        assert not command_extremes_feasible(p, geom)


def test_trace_shapes():
    p = make_params(freq=0.5)
    t, h1, p1, h2, p2 = trace(p, rate=20.0)
    assert len(t) == len(h1) == len(p1) == len(h2) == len(p2) == 81
    assert t[1] - t[0] == pytest.approx(0.05)
    assert h1[0] == pytest.approx(p.h0)
