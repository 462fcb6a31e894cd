"""Integration, discrete iteration, bounds monitoring, decay fitting, CSV I/O."""

from __future__ import annotations

import numpy as np
import pytest

from opflow.dynamics import (
    IntegratorConfig,
    integrate,
    iterate_discrete,
    monitor_bounds,
    spread_decay_rate,
    suggest_dt,
    write_summary_csv,
    write_trajectory_csv,
)
from opflow.errors import InsufficientDecay, NonpositiveState, StepSizeUnderflow
from opflow.graph import Network, complete_graph, erdos_renyi, normalized_adjacency
from opflow.models import (
    AbelsonModel,
    ModifiedFjModel,
    NfjModel,
    NfjParams,
    TaylorModel,
    TaylorParams,
)

from helpers import random_weighted_network, refine_two_node_root, two_node_unit_edge


def nfj_model(u, sigma, p=1.0):
    return NfjModel(NfjParams(u=np.asarray(u, float), sigma=np.asarray(sigma, float), p=p))


class TestIntegratorConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            IntegratorConfig(dt=0.0)
        with pytest.raises(ValueError):
            IntegratorConfig(dt=1.0, t_end=0.5)
        with pytest.raises(ValueError):
            IntegratorConfig(method="euler")
        with pytest.raises(ValueError):
            IntegratorConfig(stop_tol=0.0)
        with pytest.raises(ValueError):
            IntegratorConfig(record_stride=0)


class TestIntegrate:
    def test_abelson_reaches_consensus(self):
        net = erdos_renyi(20, 0.3, seed=5)
        rng = np.random.default_rng(0)
        x0 = rng.uniform(0.5, 3.0, size=20)
        cfg = IntegratorConfig(dt=0.01, t_end=200.0, stop_tol=1e-10, record_stride=20)
        traj = integrate(net, AbelsonModel(), x0, cfg)
        assert traj.converged
        assert traj.spread[-1] < 1e-10 * net.n

    def test_nfj_stationary_at_consensus_fixed_point(self):
        net = random_weighted_network(8, seed=6)
        u = 2.0
        model = nfj_model(np.full(8, u), np.linspace(0.5, 1.5, 8), p=2.0)
        x0 = np.full(8, u**0.5)
        cfg = IntegratorConfig(dt=0.01, t_end=5.0, stop_tol=1e-12)
        traj = integrate(net, model, x0, cfg)
        assert np.max(np.abs(traj.states - x0[None, :])) < 1e-10

    def test_two_node_nfj_converges_to_oracle_root(self):
        net = two_node_unit_edge()
        model = nfj_model([1.0, 4.0], [1.0, 1.0])
        oracle = refine_two_node_root()
        cfg = IntegratorConfig(dt=0.01, t_end=100.0, stop_tol=1e-12, method="rk4_adaptive")
        traj = integrate(net, model, np.array([1.0, 1.0]), cfg)
        assert traj.converged
        assert np.max(np.abs(traj.states[-1] - oracle)) < 1e-6

    def test_initial_state_must_be_positive(self):
        net = two_node_unit_edge()
        with pytest.raises(NonpositiveState):
            integrate(net, AbelsonModel(), np.array([1.0, 0.0]), IntegratorConfig())

    def test_fixed_step_blowup_raises_nonpositive(self):
        net = two_node_unit_edge()
        model = nfj_model([1.0, 1.0], [5.0, 5.0])
        cfg = IntegratorConfig(dt=1.0, t_end=50.0, stop_tol=1e-14)
        with pytest.raises(NonpositiveState):
            integrate(net, model, np.array([3.0, 3.0]), cfg)

    def test_adaptive_preserves_box_under_stiff_dt(self):
        # The guard promises the invariant box, not accuracy: even with a dt
        # far beyond the stability limit the samples stay inside the box.
        net = two_node_unit_edge()
        params = NfjParams(u=np.array([1.0, 1.0]), sigma=np.array([5.0, 5.0]), p=1.0)
        cfg = IntegratorConfig(dt=1.0, t_end=20.0, stop_tol=1e-12, method="rk4_adaptive", box_tol=1e-10)
        traj = integrate(net, NfjModel(params), np.array([3.0, 3.0]), cfg)
        assert monitor_bounds(traj, params).worst <= 1e-10

    def test_adaptive_converges_at_suggested_dt(self):
        net = two_node_unit_edge()
        model = nfj_model([1.0, 1.0], [5.0, 5.0])
        x0 = np.array([3.0, 3.0])
        dt = suggest_dt(net, model, x0)
        cfg = IntegratorConfig(dt=dt, t_end=50.0, stop_tol=1e-12, method="rk4_adaptive", box_tol=1e-10)
        traj = integrate(net, model, x0, cfg)
        assert traj.converged
        assert np.max(np.abs(traj.states[-1] - 1.0)) < 1e-6

    def test_step_underflow_on_impossible_box(self):
        class DoomedModel:
            kind = "doomed"

            def raw_field(self, net):
                return lambda x: np.ones_like(x)

            def field(self, net, x):
                return np.ones_like(x)

            def energy(self, net, x):
                return None

            def initialize(self, x0):
                return x0

            def box_bounds(self, x0):
                return 0.0, 0.0  # every positive state transgresses

            def box_coords(self, x):
                return x

        net = two_node_unit_edge()
        cfg = IntegratorConfig(dt=0.1, t_end=10.0, method="rk4_adaptive", box_tol=1e-12)
        with pytest.raises(StepSizeUnderflow):
            integrate(net, DoomedModel(), np.array([1.0, 1.0]), cfg)

    def test_record_stride_and_final_sample(self):
        net = complete_graph(4)
        model = AbelsonModel()
        cfg = IntegratorConfig(dt=0.01, t_end=0.5, stop_tol=1e-14, record_stride=7)
        traj = integrate(net, model, np.array([1.0, 2.0, 3.0, 4.0]), cfg)
        assert traj.times[0] == 0.0
        assert traj.times[-1] == pytest.approx(0.5)
        assert np.all(np.diff(traj.times) > 0)

    def test_rk4_order_on_smooth_nfj(self):
        # Halving dt should cut the error against a dt/8 reference ~16x.
        net = two_node_unit_edge()
        model = nfj_model([1.0, 4.0], [1.0, 1.0])
        x0 = np.array([1.0, 1.0])

        def final_state(dt):
            cfg = IntegratorConfig(dt=dt, t_end=2.0, stop_tol=1e-300)
            return integrate(net, model, x0, cfg).states[-1]

        ref = final_state(0.025)
        err_h = np.linalg.norm(final_state(0.2) - ref)
        err_h2 = np.linalg.norm(final_state(0.1) - ref)
        assert 8.0 <= err_h / err_h2 <= 32.0


class TestIterateDiscrete:
    def test_degroot_approaches_consensus(self):
        net = complete_graph(5)  # aperiodic
        x0 = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        traj = iterate_discrete(net, AbelsonModel(), x0, steps=60)
        assert traj.spread[-1] < 1e-10
        assert traj.times.tolist() == list(map(float, range(61)))

    def test_fj_lambda_zero_constant_after_one_step(self):
        net = complete_graph(3)
        params = TaylorParams(lam=np.zeros(3), u=np.array([1.0, 2.0, 3.0]))
        traj = iterate_discrete(net, TaylorModel(params), np.ones(3), steps=5)
        for k in range(1, 6):
            assert np.allclose(traj.states[k], params.u)

    def test_fj_converges_to_closed_form(self):
        # Oracle: dense solve of x* = (I - Lambda A)^(-1) (I - Lambda) u.
        net = erdos_renyi(12, 0.4, seed=9)
        rng = np.random.default_rng(1)
        params = TaylorParams(lam=rng.uniform(0.2, 0.8, 12), u=rng.uniform(0.5, 3.0, 12))
        a = normalized_adjacency(net)
        oracle = np.linalg.solve(np.eye(12) - params.lam[:, None] * a, (1 - params.lam) * params.u)
        traj = iterate_discrete(net, TaylorModel(params), np.ones(12), steps=400)
        assert np.max(np.abs(traj.states[-1] - oracle)) < 1e-10

    def test_nonpositive_reports_step_index(self):
        net = two_node_unit_edge()
        model = nfj_model([1.0, 1.0], [5.0, 5.0])
        with pytest.raises(NonpositiveState) as err:
            iterate_discrete(net, model, np.array([3.0, 3.0]), steps=10)
        assert err.value.step == 1

    def test_model_without_protocol(self):
        net = two_node_unit_edge()
        model = ModifiedFjModel(u=np.ones(2), sigma=np.ones(2))
        with pytest.raises(ValueError, match="discrete"):
            iterate_discrete(net, model, np.ones(2), steps=3)


class TestMonitorBounds:
    @pytest.mark.parametrize("seed", range(5))
    def test_random_nfj_respects_box(self, seed):
        rng = np.random.default_rng(seed)
        n = 12
        net = erdos_renyi(n, 0.35, seed=100 + seed)
        params = NfjParams(u=rng.uniform(0.5, 20.0, n), sigma=rng.uniform(0.0, 2.0, n), p=1.0)
        model = NfjModel(params)
        x0 = rng.uniform(0.5, 5.0, n)
        dt = min(0.01, suggest_dt(net, model, x0))
        cfg = IntegratorConfig(dt=dt, t_end=10.0, method="rk4_adaptive", box_tol=1e-10, stop_tol=1e-12, record_stride=5)
        traj = integrate(net, model, x0, cfg)
        report = monitor_bounds(traj, params, x0)
        assert report.worst <= 1e-10

    def test_constant_trajectory_zero_transgression(self):
        net = random_weighted_network(6, seed=13)
        u = np.full(6, 3.0)
        params = NfjParams(u=u, sigma=np.ones(6), p=1.0)
        cfg = IntegratorConfig(dt=0.01, t_end=1.0, stop_tol=1e-10)
        traj = integrate(net, NfjModel(params), u.copy(), cfg)
        report = monitor_bounds(traj, params)
        assert report.worst == 0.0

    def test_box_from_convictions_when_x0_interior(self):
        params = NfjParams(u=np.array([1.0, 9.0]), sigma=np.ones(2), p=2.0)
        x0 = np.array([1.5, 2.0])  # x0^p inside (min u, max u)
        traj_states = np.array([x0])
        from opflow.dynamics import Trajectory

        traj = Trajectory(times=np.zeros(1), states=traj_states, energy=None,
                          spread=np.array([0.5]), converged=False, model="nfj")
        report = monitor_bounds(traj, params, x0)
        assert report.c_minus == 1.0
        assert report.c_plus == 9.0


class TestSpreadDecay:
    def test_complete_graph_rate_matches_fiedler(self):
        # Oracle: eigenvalues of I - (J - I)/(N-1) give kappa_2 = N/(N-1).
        n = 10
        net = complete_graph(n)
        a = normalized_adjacency(net)
        kappa2 = np.linalg.eigvalsh(np.eye(n) - (a + a.T) / 2)[1]
        rng = np.random.default_rng(2)
        x0 = rng.uniform(1.0, 2.0, size=n)
        cfg = IntegratorConfig(dt=0.01, t_end=40.0, stop_tol=1e-14, record_stride=10)
        traj = integrate(net, AbelsonModel(), x0, cfg)
        rate = spread_decay_rate(traj)
        assert abs(rate - kappa2) <= 0.05 * kappa2
        assert abs(rate - n / (n - 1)) <= 0.05 * (n / (n - 1))

    def test_path_graph_rate(self):
        # P3: D_A - A has eigenvalues {0, 1, 2}; the slowest mode sets the rate.
        w = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        net = Network(3, w)
        a = normalized_adjacency(net)
        eigs = np.sort(np.linalg.eigvals(np.eye(3) - a).real)
        kappa2 = eigs[1]
        x0 = np.array([1.0, 2.0, 4.0])
        cfg = IntegratorConfig(dt=0.005, t_end=60.0, stop_tol=1e-15, record_stride=10)
        traj = integrate(net, AbelsonModel(), x0, cfg)
        rate = spread_decay_rate(traj)
        assert abs(rate - kappa2) <= 0.05 * kappa2

    def test_already_consensus_insufficient(self):
        net = complete_graph(4)
        cfg = IntegratorConfig(dt=0.01, t_end=1.0, stop_tol=1e-12)
        traj = integrate(net, AbelsonModel(), np.full(4, 2.0), cfg)
        with pytest.raises(InsufficientDecay):
            spread_decay_rate(traj)


class TestRuntimeInvariants:
    def test_energy_monotone_along_nfj_flow(self):
        rng = np.random.default_rng(3)
        net = erdos_renyi(15, 0.3, seed=11)
        params = NfjParams(u=rng.uniform(0.5, 10.0, 15), sigma=rng.uniform(0.0, 2.0, 15), p=1.0)
        model = NfjModel(params)
        x0 = rng.uniform(0.5, 3.0, 15)
        dt = min(0.01, suggest_dt(net, model, x0))
        cfg = IntegratorConfig(dt=dt, t_end=20.0, stop_tol=1e-12, record_stride=5)
        traj = integrate(net, model, x0, cfg)
        e = traj.energy
        assert e is not None
        assert np.all(e[1:] <= e[:-1] + 1e-9 * (1.0 + np.abs(e[:-1])))

    def test_mean_conserved_for_symmetric_coupling(self):
        # Abelson with symmetric A (regular graph) and the sigma=0 nonlinear
        # flow (raw symmetric M) both conserve the average opinion.
        rng = np.random.default_rng(4)
        net = complete_graph(12)
        x0 = rng.uniform(0.5, 3.0, 12)
        cfg = IntegratorConfig(dt=0.01, t_end=20.0, stop_tol=1e-13, record_stride=10)
        traj = integrate(net, AbelsonModel(), x0, cfg)
        means = traj.states.mean(axis=1)
        assert np.max(np.abs(means - means[0])) < 1e-8

        net2 = random_weighted_network(12, seed=14)
        model = NfjModel(NfjParams(u=np.ones(12), sigma=np.zeros(12), p=1.0))
        traj2 = integrate(net2, model, x0, cfg)
        means2 = traj2.states.mean(axis=1)
        assert np.max(np.abs(means2 - means2[0])) < 1e-8

    def test_abelson_spread_monotone(self):
        rng = np.random.default_rng(5)
        net = erdos_renyi(15, 0.3, seed=12)
        x0 = rng.uniform(0.5, 3.0, 15)
        cfg = IntegratorConfig(dt=0.01, t_end=30.0, stop_tol=1e-13, record_stride=5)
        traj = integrate(net, AbelsonModel(), x0, cfg)
        highs = traj.states.max(axis=1)
        lows = traj.states.min(axis=1)
        assert np.all(np.diff(highs) <= 1e-10)
        assert np.all(np.diff(lows) >= -1e-10)


class TestCsvWriters:
    def test_trajectory_schema_and_determinism(self, tmp_path):
        net = two_node_unit_edge()
        model = nfj_model([1.0, 4.0], [1.0, 1.0])
        cfg = IntegratorConfig(dt=0.05, t_end=1.0, stop_tol=1e-14)
        traj = integrate(net, model, np.array([1.0, 1.0]), cfg)
        f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trajectory_csv(traj, f1)
        write_trajectory_csv(traj, f2)
        assert f1.read_bytes() == f2.read_bytes()
        lines = f1.read_text().splitlines()
        assert lines[0] == "t,node,value"
        assert len(lines) == 1 + 2 * traj.n_samples
        t, node, value = lines[1].split(",")
        assert float(t) == 0.0 and node == "0" and float(value) == 1.0

    def test_summary_schema(self, tmp_path):
        net = complete_graph(3)
        cfg = IntegratorConfig(dt=0.05, t_end=1.0, stop_tol=1e-14)
        traj = integrate(net, AbelsonModel(), np.array([1.0, 2.0, 3.0]), cfg)
        f = tmp_path / "s.csv"
        write_summary_csv(traj, f)
        lines = f.read_text().splitlines()
        assert lines[0] == "t,energy,spread,mean"
        first = lines[1].split(",")
        assert first[1] == "nan"  # Abelson has no energy
        assert float(first[2]) == pytest.approx(2.0)
        assert float(first[3]) == pytest.approx(2.0)
