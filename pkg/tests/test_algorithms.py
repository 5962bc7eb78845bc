import numpy as np
import pytest

from mfglearn import (
    Concept,
    Policy,
    PolicyEnsemble,
    SolverConfig,
    delta_equilibrium,
    delta_equilibrium_windowed,
    diagonal_policy,
    gfp,
    gfpi,
    rh_parallel,
    rh_sequential,
    tabular_model,
)

TRACE_OFF = 10**9


def test_solver_config_validation():
    with pytest.raises(ValueError, match="beta"):
        SolverConfig(concept=Concept.RE, beta=1.5)
    with pytest.raises(ValueError, match="alpha"):
        SolverConfig(concept=Concept.RE, alpha=0.0)
    with pytest.raises(ValueError, match="tolerance"):
        SolverConfig(concept=Concept.NE, tolerance=-1.0)
    with pytest.raises(ValueError, match="horizon_rh"):
        SolverConfig(concept=Concept.NE, horizon_rh=0)
    with pytest.raises(ValueError):
        SolverConfig(concept="quantal")
    assert SolverConfig(concept="re").concept is Concept.RE


class TestGfpi:
    def test_decoupled_game_converges_in_one_update(self, oracle_game):
        # mean-field independent game: the response map is constant, so the
        # first update lands exactly on the fixed point
        config = SolverConfig(concept=Concept.RE, alpha=0.8, max_iterations=50,
                              tolerance=0.0, trace_every=TRACE_OFF)
        result = gfpi(oracle_game.model, config)
        assert result.converged
        assert result.iterations_used == 1

    def test_sis_softmax_optimal_converges_fast(self, sis_model):
        config = SolverConfig(concept=Concept.QSTAR_RE, alpha=1.0, max_iterations=200,
                              tolerance=1e-6, trace_every=TRACE_OFF)
        result = gfpi(sis_model, config)
        assert result.converged
        assert result.iterations_used <= 200
        assert delta_equilibrium(sis_model, result.final_policy, 1.0,
                                 Concept.QSTAR_RE) <= 1e-6

    def test_rps_oscillates(self, rps_model):
        config = SolverConfig(concept=Concept.QSTAR_RE, alpha=1.0, max_iterations=300,
                              tolerance=1e-2, trace_every=1)
        result = gfpi(rps_model, config)
        assert not result.converged
        tail = result.trace.delta_qstarre[result.trace.iterations >= 150]
        assert tail.min() > 1e-2

    def test_iterates_stay_valid_policies(self, rps_model):
        rows = []
        config = SolverConfig(concept=Concept.RE, alpha=1.0, max_iterations=40,
                              tolerance=0.0, trace_every=TRACE_OFF)
        gfpi(rps_model, config, iteration_callback=lambda k, pi: rows.append(pi.probs))
        for probs in rows:
            assert np.all(probs >= 0.0)
            assert np.abs(probs.sum(-1) - 1.0).max() <= 1e-10


class TestGfp:
    def test_single_action_converges_immediately(self):
        rng = np.random.Generator(np.random.PCG64(3))
        raw = rng.random((3, 1, 3))
        model = tabular_model(3, 1, 5, np.full(3, 1 / 3),
                              raw / raw.sum(-1, keepdims=True), rng.random((3, 1)))
        config = SolverConfig(concept=Concept.RE, alpha=1.0, max_iterations=50,
                              tolerance=1e-9, trace_every=1)
        result = gfp(model, config)
        assert result.converged
        assert result.iterations_used == 0
        assert result.trace.delta_re[-1] <= 1e-9

    def test_sis_reaches_tolerance(self, sis_model):
        config = SolverConfig(concept=Concept.QPI_RE, alpha=1.0, beta=0.95,
                              max_iterations=2000, tolerance=1e-3, trace_every=TRACE_OFF)
        result = gfp(sis_model, config)
        assert result.converged

    def test_early_stop_reproducible(self, sis_model):
        for concept in (Concept.QSTAR_RE, Concept.NE):
            config = SolverConfig(concept=concept, alpha=1.0, beta=0.95,
                                  max_iterations=3000, tolerance=1e-3,
                                  trace_every=TRACE_OFF)
            result = gfp(sis_model, config)
            assert result.converged
            again = delta_equilibrium(sis_model, result.final_policy, 1.0, concept)
            assert again <= config.tolerance + 1e-12

    def test_trace_is_deterministic(self, rps_model):
        config = SolverConfig(concept=Concept.RE, alpha=1.0, beta=0.95,
                              max_iterations=150, tolerance=0.0, trace_every=5)
        a = gfp(rps_model, config)
        b = gfp(rps_model, config)
        assert np.array_equal(a.trace.iterations, b.trace.iterations)
        for name in a.trace.METRIC_COLUMNS:
            assert np.array_equal(getattr(a.trace, name), getattr(b.trace, name))
        assert np.array_equal(a.final_policy.probs, b.final_policy.probs)

    def test_averaged_policy_rows_are_convex(self, rps_model):
        rows = []
        config = SolverConfig(concept=Concept.QPI_RE, alpha=1.0, beta=0.9,
                              max_iterations=60, tolerance=0.0, trace_every=TRACE_OFF)
        gfp(rps_model, config, iteration_callback=lambda k, pi: rows.append(pi.probs))
        for probs in rows:
            assert np.all(probs >= 0.0)
            assert np.abs(probs.sum(-1) - 1.0).max() <= 1e-10

    def test_infinite_tolerance_stops_at_zero(self, sis_model):
        config = SolverConfig(concept=Concept.RE, alpha=1.0, max_iterations=100,
                              tolerance=float("inf"), trace_every=1)
        result = gfp(sis_model, config)
        assert result.converged
        assert result.iterations_used == 0


class TestRecedingHorizon:
    def test_full_window_matches_plain_gfp(self, sis_model_short):
        base = dict(concept=Concept.RE, alpha=1.0, beta=0.95, max_iterations=500,
                    tolerance=1e-4, trace_every=TRACE_OFF)
        plain = gfp(sis_model_short, SolverConfig(**base))
        for solver in (rh_sequential, rh_parallel):
            result = solver(sis_model_short, SolverConfig(horizon_rh=9, **base))
            assert len(result.ensemble.members) == 1
            assert np.array_equal(result.implemented_policy.probs, plain.final_policy.probs)
            assert result.converged == plain.converged

    def test_subgame_count_matches_reduction(self, rps_model):
        config = SolverConfig(concept=Concept.QPI_RE, alpha=1.0, beta=0.95,
                              max_iterations=30, tolerance=0.0, horizon_rh=5,
                              trace_every=TRACE_OFF)
        result = rh_sequential(rps_model, config)
        assert result.ensemble.start_times == tuple(range(6))  # T - H + 1 subgames

    def test_sequential_windowed_deltas_reach_tolerance(self, sis_model_short):
        config = SolverConfig(concept=Concept.RE, alpha=1.0, beta=0.95,
                              max_iterations=2000, tolerance=1e-3, horizon_rh=2,
                              trace_every=TRACE_OFF)
        result = rh_sequential(sis_model_short, config)
        assert result.converged
        mu = sis_model_short.initial_mf
        for start, member in zip(result.ensemble.start_times, result.ensemble.members):
            d = delta_equilibrium_windowed(sis_model_short, member, start, mu, 2,
                                           1.0, Concept.RE)
            assert d <= 1e-3 + 1e-12
            from mfglearn.operators import _forward_step
            mu = _forward_step(sis_model_short, start, mu, member.probs[0])

    def test_first_subgame_identical_across_variants(self, rps_model):
        config = SolverConfig(concept=Concept.QPI_RE, alpha=1.0, beta=0.95,
                              max_iterations=400, tolerance=1e-3, horizon_rh=5,
                              trace_every=TRACE_OFF)
        seq_rows, par_rows = [], []
        rh_sequential(rps_model, config, subgame_callback=(
            lambda i, k, pi: seq_rows.append(pi.probs) if i == 0 else None))
        rh_parallel(rps_model, config, subgame_callback=(
            lambda i, k, pi: par_rows.append(pi.probs) if i == 0 else None))
        shared = min(len(seq_rows), len(par_rows))
        assert shared > 10
        for a, b in zip(seq_rows[:shared], par_rows[:shared]):
            assert np.array_equal(a, b)

    def test_parallel_needs_fewer_total_iterations(self, rps_model):
        config = SolverConfig(concept=Concept.QPI_RE, alpha=1.0, beta=0.95,
                              max_iterations=5000, tolerance=1e-3, horizon_rh=5,
                              trace_every=TRACE_OFF)
        seq = rh_sequential(rps_model, config)
        par = rh_parallel(rps_model, config)
        assert seq.converged and par.converged
        assert par.iterations_used < sum(seq.subgame_iterations)

    def test_infinite_tolerance_stops_both_at_zero(self, rps_model):
        config = SolverConfig(concept=Concept.QPI_RE, alpha=1.0, beta=0.95,
                              max_iterations=100, tolerance=float("inf"),
                              horizon_rh=5, trace_every=1)
        seq = rh_sequential(rps_model, config)
        par = rh_parallel(rps_model, config)
        assert seq.iterations_used == 0 and par.iterations_used == 0
        assert seq.subgame_iterations == par.subgame_iterations

    def test_parallel_trace_deterministic(self, rps_model):
        config = SolverConfig(concept=Concept.RE, alpha=1.0, beta=0.95,
                              max_iterations=60, tolerance=0.0, horizon_rh=3,
                              trace_every=10)
        a = rh_parallel(rps_model, config)
        b = rh_parallel(rps_model, config)
        for name in a.trace.METRIC_COLUMNS:
            assert np.array_equal(getattr(a.trace, name), getattr(b.trace, name))

    def test_requires_horizon(self, rps_model):
        config = SolverConfig(concept=Concept.RE, alpha=1.0)
        with pytest.raises(ValueError, match="horizon_rh"):
            rh_sequential(rps_model, config)


class TestDiagonalPolicy:
    @staticmethod
    def tagged_member(start, length):
        # row at window offset o carries the identifiable weight of (start, o)
        probs = np.empty((length, 2, 2))
        for offset in range(length):
            p = 0.01 * (10 * start + offset)
            probs[offset] = [[p, 1 - p], [p, 1 - p]]
        return Policy(probs)

    def test_single_member_returned_unchanged(self):
        member = Policy.uniform(10, 2, 2)
        ens = PolicyEnsemble((0,), (member,), horizon=9, total_horizon=10)
        assert np.array_equal(diagonal_policy(ens).probs, member.probs)

    def test_two_member_rows(self):
        members = (self.tagged_member(0, 2), self.tagged_member(1, 1))
        ens = PolicyEnsemble((0, 1), members, horizon=1, total_horizon=2)
        diag = diagonal_policy(ens)
        assert np.array_equal(diag.probs[0], members[0].probs[0])
        assert np.array_equal(diag.probs[1], members[1].probs[0])

    def test_tail_rows_come_from_last_member(self):
        horizon_rh, total = 5, 10
        members = tuple(self.tagged_member(s, min(total - 1, s + horizon_rh) - s + 1)
                        for s in range(6))
        ens = PolicyEnsemble(tuple(range(6)), members, horizon=horizon_rh,
                             total_horizon=total)
        diag = diagonal_policy(ens)
        for t in range(6):
            assert np.array_equal(diag.probs[t], members[t].probs[0])
        for t in range(6, 10):
            assert np.array_equal(diag.probs[t], members[5].probs[t - 5])

    def test_uncovered_time_raises(self):
        members = (self.tagged_member(0, 2), self.tagged_member(2, 2))
        ens = PolicyEnsemble((0, 2), members, horizon=1, total_horizon=4)
        with pytest.raises(ValueError, match="time"):
            diagonal_policy(ens)


@pytest.mark.parametrize("alpha", [1e-3, 1e6])
def test_solvers_stay_finite_at_extreme_temperatures(rps_model, alpha):
    # max-shift stabilization keeps every quantity finite at both ends of
    # the temperature range
    for solver in (gfpi, gfp):
        config = SolverConfig(concept=Concept.RE, alpha=alpha, beta=0.95,
                              max_iterations=30, tolerance=0.0, trace_every=10)
        result = solver(rps_model, config)
        assert np.all(np.isfinite(result.final_policy.probs))
        for name in result.trace.METRIC_COLUMNS:
            assert np.all(np.isfinite(getattr(result.trace, name)))


def test_gfp_uniform_averaging_matches_running_mean(sis_model_short):
    # with the 1/k switch the unnormalized policy mass equals the plain
    # average of the occupancy-weighted best responses
    config = SolverConfig(concept=Concept.QSTAR_RE, alpha=1.0, max_iterations=30,
                          tolerance=0.0, trace_every=TRACE_OFF, uniform_averaging=True)
    result = gfp(sis_model_short, config)
    assert result.converged is False
    assert np.abs(result.final_policy.probs.sum(-1) - 1.0).max() <= 1e-10
