import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfgp.models import (
    BENCHMARKS,
    HH_NAME,
    HHParameters,
    HHState,
    IntegrationError,
    benchmark,
    benchmark_names,
    hh_benchmark,
    hh_fidelity_pair,
    hh_rates,
    hh_simulate,
)

GRID = np.linspace(0, 1, 1000)


def reference(name, t):
    """Scalar re-implementation of the benchmark formulas."""
    s8 = math.sin(8 * math.pi * t)
    if name == "simple":
        return s8**2, s8
    if name == "embed_demo":
        return t * t + s8**2, s8
    if name == "phase_shift":
        return t * t + math.sin(8 * math.pi * t + math.pi / 10) ** 2, s8
    if name == "periodicity":
        return math.sin(8 * math.pi * t + math.pi / 10), math.sin(6 * math.sqrt(2) * math.pi * t)
    if name == "discontinuity":
        low = 0.5 * (6 * t - 2) ** 2 * math.sin(12 * t - 4) + 10 * (t - 0.5)
        if t < 0.5:
            low -= 5
        return 2 * low - 20 * t + 20, low
    raise KeyError(name)


class TestBenchmarks:
    def test_names(self):
        assert benchmark_names() == ["simple", "embed_demo", "phase_shift", "periodicity",
                                     "discontinuity", HH_NAME]

    def test_unknown(self):
        with pytest.raises(ValueError):
            benchmark("forrester")

    @pytest.mark.parametrize("name", list(BENCHMARKS))
    def test_match_reference(self, name):
        b = benchmark(name)
        a, c = b.domain
        t = a + (c - a) * GRID
        ref = np.array([reference(name, float(x)) for x in t])
        np.testing.assert_allclose(b.f_h(t), ref[:, 0], rtol=0, atol=1e-12)
        np.testing.assert_allclose(b.f_l(t), ref[:, 1], rtol=0, atol=1e-12)

    def test_domains(self):
        assert benchmark("embed_demo").domain == (0.0, 0.25)
        for name in ("simple", "phase_shift", "periodicity", "discontinuity"):
            assert benchmark(name).domain == (0.0, 1.0)

    def test_simple_peak(self):
        b = benchmark("simple")
        assert b.f_h(1 / 16) == pytest.approx(1.0, abs=1e-15)
        assert b.f_l(1 / 16) == pytest.approx(1.0, abs=1e-15)

    def test_phase_shift_origin(self):
        assert benchmark("phase_shift").f_h(0.0) == pytest.approx(0.09549150281, abs=1e-10)

    def test_discontinuity_jump(self):
        b = benchmark("discontinuity")
        left = b.f_l(np.nextafter(0.5, 0))
        right = b.f_l(0.5)
        assert left - right == pytest.approx(-5.0, abs=1e-12)
        assert np.isfinite(left) and np.isfinite(right)

    def test_discontinuity_right_branch_at_jump(self):
        b = benchmark("discontinuity")
        base = 0.5 * (3 - 2) ** 2 * math.sin(6 - 4)
        assert b.f_l(0.5) == pytest.approx(base, abs=1e-15)

    def test_discontinuity_linear_relation(self):
        b = benchmark("discontinuity")
        np.testing.assert_allclose(b.f_h(GRID) - (2 * b.f_l(GRID) - 20 * GRID + 20), 0, atol=1e-12)

    def test_periodicity_addition_formula(self):
        b = benchmark("periodicity")
        rewrite = np.sin(8 * np.pi * GRID) * np.cos(np.pi / 10) + np.cos(8 * np.pi * GRID) * np.sin(np.pi / 10)
        np.testing.assert_allclose(b.f_h(GRID) - rewrite, 0, atol=1e-12)

    @pytest.mark.parametrize("name", list(BENCHMARKS))
    def test_finite(self, name):
        b = benchmark(name)
        t = np.linspace(*b.domain, 2001)
        assert np.all(np.isfinite(b.f_h(t))) and np.all(np.isfinite(b.f_l(t)))


VGRID = np.linspace(-100, 60, 3201)


class TestRates:
    def test_nonnegative(self):
        for r in hh_rates(VGRID):
            assert np.all(r >= 0) and np.all(np.isfinite(r))

    def test_removable_singularities(self):
        an, _, am, *_ = hh_rates(np.array([-55.0, -40.0]))
        assert an[0] == pytest.approx(0.1, rel=1e-14)
        assert am[1] == pytest.approx(1.0, rel=1e-14)

    def test_continuous_through_singularity(self):
        v = np.array([-55.0 - 1e-7, -55.0, -55.0 + 1e-7])
        an = hh_rates(v)[0]
        assert np.ptp(an) < 1e-8

    def test_matches_textbook_away_from_singularity(self):
        v = -30.0
        an, bn, am, bm, ah, bh = hh_rates(v)
        assert an == pytest.approx(0.01 * (v + 55) / (1 - math.exp(-(v + 55) / 10)), rel=1e-13)
        assert am == pytest.approx(0.1 * (v + 40) / (1 - math.exp(-(v + 40) / 10)), rel=1e-13)
        assert bn == pytest.approx(0.125 * math.exp(-(v + 65) / 80), rel=1e-13)
        assert bm == pytest.approx(4 * math.exp(-(v + 65) / 18), rel=1e-13)
        assert ah == pytest.approx(0.07 * math.exp(-(v + 65) / 20), rel=1e-13)
        assert bh == pytest.approx(1 / (1 + math.exp(-(v + 35) / 10)), rel=1e-13)

    def test_steady_states_in_unit_interval(self):
        an, bn, am, bm, ah, bh = hh_rates(VGRID)
        for a, b in ((an, bn), (am, bm), (ah, bh)):
            x = a / (a + b)
            assert np.all((x >= 0) & (x <= 1))


def spike_count(v, threshold=0.0):
    return int(np.sum((v[:-1] < threshold) & (v[1:] >= threshold)))


@pytest.fixture(scope="module")
def default_run():
    return hh_simulate(HHParameters(i_ext=1.0), HHState.resting(), 100.0, 0.01)


class TestSimulator:
    def test_parameters_validated(self):
        with pytest.raises(ValueError):
            HHParameters(g_na=0.0)
        with pytest.raises(ValueError):
            HHParameters(c_m=-1.0)

    def test_fires_repeatedly(self, default_run):
        assert spike_count(default_run.v) >= 3

    def test_voltage_bounded(self, default_run):
        assert default_run.v.min() >= -120 and default_run.v.max() <= 80

    def test_gates_boxed(self, default_run):
        assert default_run.max_gate_excursion <= 1e-9
        for g in (default_run.n, default_run.m, default_run.h):
            assert g.min() >= 0 and g.max() <= 1

    @settings(max_examples=10, deadline=None)
    @given(st.floats(-80, 20), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_gates_boxed_from_any_start(self, v, n, m, h):
        traj = hh_simulate(HHParameters(), HHState(v, n, m, h), 5.0, 0.01)
        assert traj.max_gate_excursion <= 1e-9

    def test_voltage_clamp_matches_exponential_relaxation(self):
        v = -30.0
        an, bn, am, bm, ah, bh = hh_rates(v)
        start = HHState(v, 0.0, 0.0, 1.0)
        # slowest gate time constant sets the horizon
        tau = max(1 / (an + bn), 1 / (am + bm), 1 / (ah + bh))
        t_end = math.ceil(100 * tau) / 10
        traj = hh_simulate(HHParameters(), start, t_end, 0.01, clamp_v=True)
        assert np.all(traj.v == v)
        for x, x0, a, b in ((traj.n, 0.0, an, bn), (traj.m, 0.0, am, bm), (traj.h, 1.0, ah, bh)):
            inf = a / (a + b)
            exact = inf + (x0 - inf) * np.exp(-(a + b) * traj.t)
            np.testing.assert_allclose(x, exact, rtol=0, atol=1e-9)
            assert abs(x[-1] - inf) <= np.exp(-10) * abs(x0 - inf) * (1 + 1e-6)

    def test_rk4_order(self):
        # Richardson self-convergence on a smooth sub-threshold segment
        start = HHState.resting()
        ends = [hh_simulate(HHParameters(), start, 4.0, dt).final.as_array() for dt in (0.04, 0.02, 0.01)]
        ratio = np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])
        assert np.log2(ratio) >= 3.5

    def test_rejects_bad_steps(self):
        with pytest.raises(ValueError):
            hh_simulate(HHParameters(), HHState.resting(), 1.0, 0.0)
        with pytest.raises(ValueError):
            hh_simulate(HHParameters(), HHState.resting(), 1.005, 0.01)

    def test_rejects_gates_outside_box(self):
        with pytest.raises(ValueError):
            hh_simulate(HHParameters(), HHState(-60, 1.2, 0.1, 0.5), 1.0)

    def test_blowup_reports_step(self):
        with pytest.raises(IntegrationError) as err:
            hh_simulate(HHParameters(c_m=1e-9), HHState(0.0, 0.5, 0.5, 0.5), 1.0, 0.1)
        assert err.value.step >= 1

    def test_trajectory_csv(self, tmp_path):
        traj = hh_simulate(HHParameters(), HHState.resting(), 0.05, 0.01)
        path = traj.to_csv(tmp_path / "traj.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "t,V,n,m,h"
        assert len(lines) == 7
        assert float(lines[-1].split(",")[1]) == traj.v[-1]


class TestHHBenchmark:
    def test_traces_differ(self):
        b = hh_benchmark()
        t = np.linspace(0, 1, 6001)
        assert np.max(np.abs(b.f_h(t) - b.f_l(t))) > 1.0

    def test_phase_offset_grows(self):
        high = hh_simulate(HHParameters(i_ext=1.0), HHState.resting(), 65.0)
        low = hh_simulate(HHParameters(i_ext=1.05), HHState.resting(), 65.0)

        def crossings(traj):
            v = traj.v
            idx = np.nonzero((v[:-1] < 0) & (v[1:] >= 0))[0]
            return traj.t[idx]

        a, b = crossings(high), crossings(low)
        n = min(len(a), len(b))
        lag = a[:n] - b[:n]
        assert n >= 3
        assert lag[-1] > lag[0] + 0.1

    def test_pair_samples_the_traces(self):
        t_h = np.array([0.1, 0.45, 0.8])
        t_l = np.linspace(0, 1, 7)
        pair = hh_fidelity_pair(t_h, t_l)
        high = hh_simulate(HHParameters(i_ext=1.0), HHState.resting(), 65.0)
        np.testing.assert_allclose(pair.y_h, np.interp(5 + 60 * t_h, high.t, high.v), atol=1e-2)
        spline = high.voltage_interpolant()
        np.testing.assert_allclose(pair.y_h, spline(5 + 60 * t_h), atol=1e-6)

    def test_empty_pair(self):
        pair = hh_fidelity_pair([], [])
        assert pair.t_h.size == 0 and pair.t_l.size == 0

    def test_delays_stay_inside_simulation(self):
        b = hh_benchmark()
        assert b.f_l_domain[0] < -0.05
        assert np.all(np.isfinite(b.f_l(np.array([-0.05, 0.0]))))
