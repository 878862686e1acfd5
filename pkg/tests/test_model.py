import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epiabc.errors import NonPositiveSusceptible
from epiabc.model import (
    EpidemicState,
    HazardVector,
    ModelParams,
    apply_transitions,
    hazard,
    infection_rate,
    init_state,
    init_states,
    sample_transitions,
    simulate,
    simulate_batch,
    simulate_batch_states,
    simulate_distances,
    step,
    transition_counts,
)
from epiabc.prior import PriorSpec, sample_prior
from epiabc.rng import PRIOR_BLOCKS, CounterRNG, Substream

ITALY_P = 60_360_000.0
ZERO = ModelParams(0, 0, 0, 0, 0, 0, 0, 0)


def params(**kw):
    base = dict(alpha0=0.3, alpha=10.0, n=1.0, beta=0.05, gamma=0.4, delta=0.01, eta=0.5,
                kappa=0.5)
    base.update(kw)
    return ModelParams(**base)


class TestInitState:
    def test_kappa_zero(self):
        s = init_state((100, 0, 0), 0.0, 1000)
        assert s == EpidemicState(900, 0, 100, 0, 0, 0)

    def test_hand_evaluated(self):
        s = init_state((100, 10, 5), 0.5, 10_000)
        assert (s.I, s.S, s.Ru) == (50, 9835, 0)
        assert s.total == 10_000

    def test_floor_of_initial_infected(self):
        assert init_state((101, 0, 0), 0.5, 1000).I == 50

    def test_population_too_small(self):
        with pytest.raises(NonPositiveSusceptible):
            init_state((100, 0, 0), 2.0, 250)

    def test_vectorised_matches_scalar(self):
        kappas = np.array([0.0, 0.37, 1.2, 2.0])
        batch = init_states((155, 3, 2), kappas, 5e4)
        for k, row in zip(kappas, batch):
            np.testing.assert_array_equal(row, init_state((155, 3, 2), k, 5e4).as_array())

    def test_vectorised_raises(self):
        with pytest.raises(NonPositiveSusceptible):
            init_states((100, 0, 0), [0.1, 2.0], 250)


class TestInfectionRate:
    def test_no_cases(self):
        assert infection_rate(params(alpha0=0.3, alpha=10, n=1), 0, 0, 0) == pytest.approx(10.3)

    def test_alpha_zero(self):
        assert infection_rate(params(alpha0=0.3, alpha=0), 123, 45, 6) == 0.3

    def test_direct_evaluation(self):
        # 0.5 + 36 / (1 + sqrt(99)), evaluated independently
        g = infection_rate(params(alpha0=0.5, alpha=36, n=0.5), 90, 6, 3)
        assert g == pytest.approx(3.7877089526, abs=1e-9)

    def test_zero_to_the_zero_is_one(self):
        assert infection_rate(params(alpha0=0, alpha=4, n=0), 0, 0, 0) == 2.0
        assert infection_rate(params(alpha0=0, alpha=4, n=1.5), 0, 0, 0) == 4.0

    @given(st.floats(0, 100), st.floats(0.01, 2), st.floats(0, 1e7), st.floats(0, 1e7))
    def test_non_increasing_in_cases(self, alpha, n, x, dx):
        p = params(alpha=alpha, n=n)
        assert infection_rate(p, x + dx, 0, 0) <= infection_rate(p, x, 0, 0)


class TestHazard:
    def test_zero_infected(self):
        h = hazard(params(), EpidemicState(900, 0, 100, 0, 0, 0), 1000)
        assert h.s_to_i == h.i_to_a == h.i_to_ru == 0.0
        assert h.a_to_r > 0

    def test_zero_active(self):
        h = hazard(params(), EpidemicState(900, 50, 0, 50, 0, 0), 1000)
        assert h.a_to_r == h.a_to_d == 0.0

    def test_gamma_times_infected(self):
        h = hazard(params(gamma=0.4), EpidemicState(900, 50, 100, 10, 5, 0), 1065)
        assert h.i_to_a == pytest.approx(20.0)

    def test_order_and_values(self):
        p = params()
        s = EpidemicState(900, 50, 100, 10, 5, 0)
        g = infection_rate(p, 100, 10, 5)
        assert hazard(p, s, 1065) == HazardVector(g * 900 * 50 / 1065, p.gamma * 50,
                                                  p.beta * 100, p.delta * 100,
                                                  p.beta * p.eta * 50)


class TestTransitions:
    def test_zero_hazard_gives_zero(self):
        assert transition_counts([0.0] * 5, [3.0, -3.0, 0.5, 10.0, -10.0]) == (0.0,) * 5

    def test_floor_of_mean(self):
        assert transition_counts([20.7], [0.0]) == (20.0,)

    def test_negative_draw_clamped(self):
        # 4 - 3 * 4**0.25 = -0.2426...
        assert transition_counts([4.0], [-3.0]) == (0.0,)
        assert transition_counts([4.0], [-3.0], clamp=False) == (-1.0,)

    def test_variance_h_switch(self):
        # std = sqrt(9) = 3 rather than 9**0.25
        assert transition_counts([9.0], [1.0], spread="variance_h") == (12.0,)
        assert transition_counts([9.0], [1.0]) == (10.0,)

    def test_unknown_spread(self):
        with pytest.raises(ValueError):
            transition_counts([1.0], [0.0], spread="poisson")

    def test_sample_consumes_three_blocks(self):
        s = Substream(3, 1)
        sample_transitions([1.0] * 5, s)
        assert s.block == 3

    def test_distribution_small_scale(self):
        h = 400.0
        draws = []
        for i in range(4000):
            draws.extend(sample_transitions([h] * 5, Substream(8, i), clamp=False))
        draws = np.array(draws)
        assert abs(draws.mean() - (h - 0.5)) < 0.1
        assert abs(draws.var() / math.sqrt(h) - 1) < 0.1


class TestStep:
    def test_zero_counts_identity(self):
        s = EpidemicState(900, 50, 100, 10, 5, 3)
        assert apply_transitions(s, (0,) * 5) == s

    def test_cap_at_source(self):
        s = EpidemicState(10, 5, 0, 0, 0, 0)
        out = apply_transitions(s, (15, 0, 0, 0, 0))
        assert out.S == 0 and out.I == 15

    def test_hand_applied_flows(self):
        s = EpidemicState(900, 50, 100, 10, 5, 0)
        out = apply_transitions(s, (9, 20, 1, 0, 2))
        assert out == EpidemicState(891, 37, 119, 11, 5, 2)
        assert out.total == 1065

    def test_shared_source_capped_in_order(self):
        s = EpidemicState(0, 10, 4, 0, 0, 0)
        out = apply_transitions(s, (0, 8, 3, 5, 7))
        # I->A takes 8 of 10, I->Ru gets the 2 left; A->R takes 3 of 12, A->D takes 5
        assert out == EpidemicState(0, 0, 4, 3, 5, 2)

    def test_zero_rates_fixpoint(self):
        s = EpidemicState(900, 50, 100, 10, 5, 0)
        assert step(s, ZERO, 1065, Substream(1, 1)) == s


class TestSimulate:
    def test_zero_rates_constant(self):
        init = EpidemicState(900, 50, 100, 10, 5, 0)
        traj = simulate(ZERO, init, 20, 1065, Substream(0, 0))
        assert (traj.states == init.as_array()).all()

    def test_single_day(self):
        init = EpidemicState(900, 50, 100, 10, 5, 0)
        traj = simulate(params(), init, 1, 1065, Substream(0, 0))
        assert traj.days == 1
        assert traj.state(0) == init

    def test_rejects_zero_days(self):
        with pytest.raises(ValueError):
            simulate(params(), init_state((1, 0, 0), 0, 10), 0, 10, Substream(0, 0))

    def test_deterministic(self):
        p = params()
        init = init_state((155, 1, 3), p.kappa, ITALY_P)
        a = simulate(p, init, 49, ITALY_P, Substream(17, 5))
        b = simulate(p, init, 49, ITALY_P, Substream(17, 5))
        np.testing.assert_array_equal(a.states, b.states)
        assert a.observed_view.shape == (3, 49)
        np.testing.assert_array_equal(a.observed_view[0], a.states[:, 2])

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(0, 1), min_size=8, max_size=8),
        st.integers(0, 2000), st.integers(0, 500), st.integers(0, 100),
        st.floats(1e4, 1e7), st.integers(0, 2**40),
    )
    def test_invariants(self, u, a0, r0, d0, population, sid):
        upper = PriorSpec().upper
        p = ModelParams(*(ui * hi for ui, hi in zip(u, upper)))
        try:
            init = init_state((a0, r0, d0), p.kappa, population // 1)
        except NonPositiveSusceptible:
            return
        traj = simulate(p, init, 30, population // 1, Substream(1, sid))
        x = traj.states
        assert (x >= 0).all()
        assert (x.sum(axis=1) == population // 1).all()
        assert (np.diff(x[:, 3:6], axis=0) >= 0).all()
        assert (x == np.floor(x)).all()


class TestBatch:
    def _batch(self, count=300, seed=4):
        rng = CounterRNG(seed)
        ids = np.arange(count) + 12345
        theta = sample_prior(PriorSpec(), count, rng, ids)
        init = init_states((155, 1, 3), theta[:, 7], ITALY_P)
        return rng, ids, theta, init

    def test_batch_matches_scalar_bitwise(self):
        rng, ids, theta, init = self._batch()
        states = simulate_batch_states(theta, init, 49, ITALY_P, rng, ids, PRIOR_BLOCKS)
        for b in range(0, 300, 7):
            traj = simulate(ModelParams.from_array(theta[b]), EpidemicState.from_array(init[b]),
                            49, ITALY_P, rng.substream(ids[b], PRIOR_BLOCKS))
            np.testing.assert_array_equal(states[b], traj.states)

    def test_variance_h_batch_matches_scalar(self):
        rng, ids, theta, init = self._batch(40)
        states = simulate_batch_states(theta, init, 30, ITALY_P, rng, ids, spread="variance_h")
        for b in range(40):
            traj = simulate(ModelParams.from_array(theta[b]), EpidemicState.from_array(init[b]),
                            30, ITALY_P, rng.substream(ids[b]), spread="variance_h")
            np.testing.assert_array_equal(states[b], traj.states)

    def test_single_row_equals_observed_view(self):
        p = params()
        init = init_state((155, 1, 3), p.kappa, ITALY_P)
        rng = CounterRNG(9)
        out = simulate_batch(p.as_array()[None], init, 25, ITALY_P, rng, [77])
        traj = simulate(p, init, 25, ITALY_P, rng.substream(77))
        np.testing.assert_array_equal(out[0], traj.observed_view)

    def test_identical_rows_for_identical_streams(self):
        p = params().as_array()
        init = init_state((155, 1, 3), 0.5, ITALY_P)
        out = simulate_batch(np.stack([p, p]), init, 30, ITALY_P, CounterRNG(1), [5, 5])
        np.testing.assert_array_equal(out[0], out[1])

    def test_partition_invariance(self):
        rng, ids, theta, init = self._batch(1000)
        whole = simulate_batch(theta, init, 20, ITALY_P, rng, ids, PRIOR_BLOCKS)
        parts = [simulate_batch(theta[i:i + 100], init[i:i + 100], 20, ITALY_P, rng,
                                ids[i:i + 100], PRIOR_BLOCKS) for i in range(0, 1000, 100)]
        np.testing.assert_array_equal(whole, np.concatenate(parts))

    def test_distances_match_full_simulation(self):
        rng, ids, theta, init = self._batch(200)
        sims = simulate_batch(theta, init, 21, ITALY_P, rng, ids, PRIOR_BLOCKS)
        obs = sims[3]
        d = simulate_distances(theta, init, obs, ITALY_P, rng, ids, PRIOR_BLOCKS)
        ref = np.sqrt(((sims - obs) ** 2).sum(axis=(1, 2)))
        np.testing.assert_allclose(d, ref, rtol=1e-12)
        assert d[3] == 0.0

    def test_early_cutoff_preserves_acceptance(self):
        rng, ids, theta, init = self._batch(500)
        sims = simulate_batch(theta, init, 21, ITALY_P, rng, ids, PRIOR_BLOCKS)
        obs = sims[0]
        full = simulate_distances(theta, init, obs, ITALY_P, rng, ids, PRIOR_BLOCKS)
        cut = np.quantile(full, 0.3)
        early = simulate_distances(theta, init, obs, ITALY_P, rng, ids, PRIOR_BLOCKS,
                                   cutoff=cut)
        np.testing.assert_array_equal(full <= cut, early <= cut)
        np.testing.assert_array_equal(full[full <= cut], early[full <= cut])
        assert (early[full > cut] > cut).all()

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            simulate_batch(np.zeros((3, 7)), EpidemicState(1, 0, 0, 0, 0, 0), 5, 1,
                           CounterRNG(0))
        with pytest.raises(ValueError):
            simulate_batch(np.zeros((3, 8)), np.zeros((2, 6)), 5, 1, CounterRNG(0))
