import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degenwell import _kernels
from degenwell.lyapunov import find_certificate, lyapunov_W
from degenwell.model import Params, State
from degenwell.simulate import (
    OccupationHistogram,
    Region,
    SimConfig,
    SimulationDiverged,
    Trajectory,
    _rng_for_path,
    band_region,
    outside_ball_region,
    run_ensemble,
    simulate_controlled,
    simulate_flow,
    simulate_sde,
    step_sde,
)

ALL_PLANE = Region("all", lambda xs, ys: np.ones(xs.shape, dtype=bool))


def closed_form_x(x0, t, lam1=1.0):
    e = math.exp(lam1 * t)
    return x0 * e / math.sqrt(1.0 - x0 * x0 + x0 * x0 * e * e)


class TestConfigAndTrajectory:
    def test_simconfig_rejects_bad_steps(self):
        with pytest.raises(ValueError):
            SimConfig(dt=-0.1, t_final=1.0, seed=0, initial=State(0, 0))
        with pytest.raises(ValueError):
            SimConfig(dt=2.0, t_final=1.0, seed=0, initial=State(0, 0))

    def test_n_steps_matches_ceiling(self):
        c = SimConfig(dt=0.4, t_final=1.0, seed=0, initial=State(0, 0))
        assert c.n_steps == 3
        c = SimConfig(dt=0.25, t_final=1.0, seed=0, initial=State(0, 0))
        assert c.n_steps == 4  # exact division must not gain a step

    def test_trajectory_invariants(self):
        with pytest.raises(ValueError):
            Trajectory(times=np.array([0.5, 1.0]), states=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            Trajectory(times=np.array([0.0, 0.0]), states=np.zeros((2, 2)))

    def test_step_guard(self):
        c = SimConfig(dt=0.2, t_final=1.0, seed=0, initial=State(0, 0))
        with pytest.raises(ValueError, match="too coarse"):
            simulate_sde(Params(), c)


class TestFlow:
    def test_flow_matches_closed_form(self, p_default):
        c = SimConfig(dt=1e-3, t_final=1.0, seed=0, initial=State(0.5, 0.0))
        traj = simulate_flow(p_default, c)
        assert traj.final_state().x == pytest.approx(0.8433472560147414, abs=1e-12)

    def test_y_axis_is_invariant(self, p_default):
        c = SimConfig(dt=1e-3, t_final=2.0, seed=0, initial=State(0.0, 0.7))
        traj = simulate_flow(p_default, c)
        assert np.all(traj.x == 0.0)
        assert traj.y[-1] == pytest.approx(0.7 * math.exp(-2.0), rel=1e-10)

    def test_saddle_and_wells_are_fixed(self, p_default):
        for x0 in (-1.0, 0.0, 1.0):
            c = SimConfig(dt=1e-2, t_final=1.0, seed=0, initial=State(x0, 0.0))
            traj = simulate_flow(p_default, c)
            assert np.all(traj.states == traj.states[0])

    def test_basins(self, p_default):
        right = SimConfig(dt=1e-2, t_final=20.0, seed=0, initial=State(0.5, 0.0))
        assert abs(simulate_flow(p_default, right).final_state().x - 1.0) < 1e-3
        left = SimConfig(dt=1e-2, t_final=20.0, seed=0, initial=State(-0.5, 0.7))
        final = simulate_flow(p_default, left).final_state()
        assert abs(final.x + 1.0) < 1e-3 and abs(final.y) < 1e-3

    def test_controlled_with_no_control_is_the_flow(self, p_default):
        c = SimConfig(dt=1e-2, t_final=3.0, seed=0, initial=State(0.4, -0.2))
        a = simulate_controlled(p_default, c, None)
        b = simulate_flow(p_default, c)
        assert np.array_equal(a.states, b.states)
        zero = simulate_controlled(p_default, c, lambda t: 0.0)
        assert np.allclose(zero.states, b.states, atol=1e-14)


class TestStep:
    def test_equilibrium_ignores_noise_when_eps_zero(self):
        p = Params(epsilon=0.0)
        s = step_sde(p, State(-1.0, 0.0), 1e-2, 1.7)
        assert (s.x, s.y) == (-1.0, 0.0)

    def test_zero_increment_is_euler(self, p_default):
        s0 = State(0.3, -0.4)
        s = step_sde(p_default, s0, 1e-2, 0.0)
        cubic = 0.3 * (1 - 0.09)
        assert s.x == pytest.approx(0.3 + cubic * 1e-2, rel=1e-15)
        assert s.y == pytest.approx(-0.4 + (0.4 + cubic) * 1e-2, rel=1e-15)

    def test_theta_zero_keeps_noise_out_of_y(self):
        p = Params(theta=0.0)
        s0 = State(0.3, -0.4)
        assert step_sde(p, s0, 1e-2, 2.0).y == step_sde(p, s0, 1e-2, 0.0).y

    @given(
        x=st.floats(-1.5, 1.5), y=st.floats(-1.5, 1.5),
        theta=st.floats(-3.0, 3.0), dw=st.floats(-3.0, 3.0),
        sigma1=st.floats(-0.9, 0.9),
    )
    def test_shared_noise_degeneracy(self, x, y, theta, dw, sigma1):
        # one Brownian motion drives both components: the noise increments
        # are proportional with ratio tan(theta)
        p = Params(theta=theta, sigma1=sigma1)
        s0 = State(x, y)
        with_noise = step_sde(p, s0, 1e-3, dw)
        drift_only = step_sde(p, s0, 1e-3, 0.0)
        dx_noise = with_noise.x - drift_only.x
        dy_noise = with_noise.y - drift_only.y
        assert dy_noise * math.cos(theta) == pytest.approx(
            dx_noise * math.sin(theta), rel=1e-12, abs=1e-15
        )


class TestSDE:
    def test_bitwise_determinism(self, p_default):
        c = SimConfig(dt=1e-3, t_final=2.0, seed=42, initial=State(0.5, 0.0))
        a = simulate_sde(p_default, c)
        b = simulate_sde(p_default, c)
        assert np.array_equal(a.states, b.states)

    def test_seed_changes_the_path(self, p_default):
        c0 = SimConfig(dt=1e-3, t_final=1.0, seed=0, initial=State(0.5, 0.0))
        c1 = SimConfig(dt=1e-3, t_final=1.0, seed=1, initial=State(0.5, 0.0))
        assert not np.array_equal(simulate_sde(p_default, c0).states,
                                  simulate_sde(p_default, c1).states)

    def test_chunk_kernel_mirrors_step_sde(self, p_default):
        # the compiled chunk loop must reproduce the scalar reference
        # step-for-step, bitwise
        n = 257
        c = SimConfig(dt=1e-3, t_final=n * 1e-3, seed=7, initial=State(0.4, -0.1))
        traj = simulate_sde(p_default, c)

        rng = _rng_for_path(7, 0)
        dw = rng.standard_normal(n)
        dw *= math.sqrt(c.dt)
        s = State(0.4, -0.1)
        for k in range(n):
            s = step_sde(p_default, s, c.dt, dw[k])
            assert s.x == traj.states[k + 1, 0]
            assert s.y == traj.states[k + 1, 1]

    def test_kernel_direct_call_matches_reference(self, p_default):
        dw = np.array([0.3, -1.2, 0.05, 2.0]) * math.sqrt(1e-3)
        out = np.empty((4, 2))
        x, y = _kernels.euler_maruyama_chunk(
            0.2, 0.1, 1.0, 1.0, 1.0, 0.1,
            math.cos(p_default.theta), math.sin(p_default.theta),
            1.0, 0.0, 1e-3, dw, out,
        )
        s = State(0.2, 0.1)
        for k in range(4):
            s = step_sde(p_default, s, 1e-3, dw[k])
        assert (x, y) == (s.x, s.y)

    def test_divergence_reports_time_and_state(self, p_default):
        c = SimConfig(dt=1e-3, t_final=1.0, seed=0, initial=State(1e8, 0.0))
        with pytest.raises(SimulationDiverged) as err:
            simulate_sde(p_default, c)
        assert err.value.t > 0.0

    def test_eps_zero_reduction_is_first_order(self, p_default):
        p0 = Params(epsilon=0.0)
        errs = []
        for dt in (4e-3, 2e-3):
            c = SimConfig(dt=dt, t_final=1.0, seed=0, initial=State(0.5, 0.0))
            traj = simulate_sde(p0, c)
            errs.append(abs(traj.final_state().x - closed_form_x(0.5, 1.0)))
        ratio = errs[0] / errs[1]
        assert 1.5 < ratio < 2.5  # halving dt halves the Euler error

    def test_weak_convergence_toward_the_flow(self, p_default):
        # same increments at every epsilon (same seeds), so deviations from
        # the flow shrink monotonically path by path
        c0 = SimConfig(dt=1e-3, t_final=2.0, seed=3, initial=State(0.5, 0.0))
        flow = simulate_flow(p_default, c0)
        medians = []
        for eps in (0.2, 0.1, 0.05):
            p = Params(epsilon=eps)
            devs = []
            for path in range(8):
                c = SimConfig(dt=1e-3, t_final=2.0, seed=3 + 1000 * path,
                              initial=State(0.5, 0.0))
                traj = simulate_sde(p, c)
                devs.append(float(np.max(np.hypot(traj.x - flow.x, traj.y - flow.y))))
            medians.append(float(np.median(devs)))
        assert medians[0] > medians[1] > medians[2]

    def test_time_average_of_w_respects_certificate(self):
        p = Params(epsilon=0.3)
        cert = find_certificate(p)
        c = SimConfig(dt=2e-3, t_final=500.0, seed=11, initial=State(0.5, 0.0))
        traj = simulate_sde(p, c)
        skip = traj.x.shape[0] // 10
        w_avg = float(np.mean(
            [lyapunov_W(cert.alpha, State(x, y))
             for x, y in traj.states[skip::100]]
        ))
        assert w_avg < cert.alpha1 / cert.alpha2 + 1.0


class TestEnsemble:
    def test_single_path_equals_direct_occupation(self, p_default):
        base = SimConfig(dt=1e-3, t_final=2.0, seed=5, initial=State(0.5, 0.0))
        regions = [band_region(3, 0.5)]
        hist = run_ensemble(p_default, base, 1, regions, burn_in_fraction=0.0)
        traj = simulate_sde(p_default, base)
        inside = int(np.count_nonzero(np.abs(traj.x[1:] - 1.0) <= 0.5))
        assert hist.region_counts == (inside,)
        assert hist.total_count == base.n_steps

    def test_whole_plane_fraction_is_one(self, p_default):
        base = SimConfig(dt=1e-3, t_final=1.0, seed=0, initial=State(0.0, 0.0))
        hist = run_ensemble(p_default, base, 3, [ALL_PLANE])
        assert hist.fraction("all") == 1.0

    def test_merge_equals_joint_run(self, p_default):
        base = SimConfig(dt=1e-3, t_final=1.0, seed=9, initial=State(0.5, 0.0))
        regions = [band_region(3, 0.3), outside_ball_region(3.0)]
        joint = run_ensemble(p_default, base, 2, regions)
        first = run_ensemble(p_default, base, 1, regions, path_offset=0)
        second = run_ensemble(p_default, base, 1, regions, path_offset=1)
        merged = first.merge(second)
        assert merged.region_counts == joint.region_counts
        assert merged.total_count == joint.total_count
        # merge is symmetric
        flipped = second.merge(first)
        assert flipped.region_counts == joint.region_counts

    def test_burn_in_removes_exactly_the_prefix(self, p_default):
        base = SimConfig(dt=1e-3, t_final=1.0, seed=0, initial=State(0.0, 0.0))
        hist = run_ensemble(p_default, base, 2, [ALL_PLANE], burn_in_fraction=0.5)
        n = base.n_steps
        assert hist.total_count == 2 * (n - round(0.5 * n))

    def test_flow_settles_into_left_band(self):
        p = Params(epsilon=0.0)
        base = SimConfig(dt=5e-3, t_final=30.0, seed=0, initial=State(-0.5, 0.3))
        hist = run_ensemble(p, base, 1, [band_region(1, 0.1)])
        assert hist.fraction("K1") > 0.9

    def test_divergence_carries_path_index(self, p_default):
        base = SimConfig(dt=1e-3, t_final=1.0, seed=0, initial=State(1e8, 0.0))
        with pytest.raises(SimulationDiverged) as err:
            run_ensemble(p_default, base, 2, [ALL_PLANE])
        assert err.value.path_index == 0

    def test_histogram_sanity_checks(self):
        with pytest.raises(ValueError):
            OccupationHistogram(("a",), (2,), 1, 0.1, 0.0, 1)
        with pytest.raises(ValueError):
            OccupationHistogram(("a",), (-1,), 1, 0.1, 0.0, 1)
        h = OccupationHistogram(("a",), (1,), 2, 0.1, 0.0, 1)
        with pytest.raises(ValueError):
            h.merge(OccupationHistogram(("b",), (1,), 2, 0.1, 0.0, 1))
