import numpy as np
import pytest

from genomask.distributions import Alphabet, HmmModel, generate_panel
from genomask.enumeration import ERASED, assignments
from genomask.errors import CapacityError, InputError
from genomask.hmm import (
    HmmMaskingSession,
    backward_gamma,
    hmm_kernel,
    hmm_rate_mc,
    mask_hmm,
    transition_given_sensitive,
)
from genomask.mechanism import Ordering, exact_output_distribution, mask_sequence, walk_prefixes
from genomask.rng import stream

from .conftest import make_hmm, path_probability, random_hmm, random_sensitive, state_paths


class TestBackwardGamma:
    def test_no_sensitive_positions(self):
        """With K empty every gamma entry is one."""
        gamma = backward_gamma(make_hmm(3, 4), ())
        np.testing.assert_allclose(gamma.gamma, 1.0)

    def test_matches_path_sum(self):
        """gamma[0][u, s] = p(x_3 = u | s_1 = s) summed over the hidden path."""
        hmm = make_hmm(2, 3, epsilon=0.3, theta=0.1)
        gamma = backward_gamma(hmm, (2,))
        for u in range(2):
            for s in range(2):
                expected = sum(
                    hmm.transition[s, s1] * hmm.transition[s1, s2] * hmm.emission[2, u, s2]
                    for s1 in range(2)
                    for s2 in range(2)
                )
                assert gamma.gamma[0, u, s] == pytest.approx(expected)

    def test_sensitive_limit(self):
        """More sensitive positions than the limit raise a capacity error."""
        hmm = HmmModel(np.zeros((1, 13), dtype=np.int64), 0.1, 0.1, Alphabet(2))
        with pytest.raises(CapacityError):
            backward_gamma(hmm, range(13))


class TestTransitionGivenSensitive:
    def test_without_sensitive_positions(self):
        """With K empty the kernel is the plain transition matrix."""
        hmm = make_hmm(3, 4)
        gamma = backward_gamma(hmm, ())
        np.testing.assert_allclose(transition_given_sensitive(hmm, gamma, 1, 0), hmm.transition)

    def test_matches_bayes_over_paths(self):
        """p(s_2 | s_1, x_3 = u) agrees with brute-force path enumeration."""
        hmm = make_hmm(2, 3, epsilon=0.3, theta=0.1)
        gamma = backward_gamma(hmm, (2,))
        for u in range(2):
            kernel = transition_given_sensitive(hmm, gamma, 1, u)
            joint = np.zeros((2, 2))
            for path in state_paths(2, 3):
                joint[path[0], path[1]] += path_probability(hmm, path) * hmm.emission[2, u, path[2]]
            np.testing.assert_allclose(kernel, joint / joint.sum(axis=1, keepdims=True))

    def test_rejects_first_position(self):
        """There is no transition into the first position."""
        hmm = make_hmm(2, 3)
        with pytest.raises(InputError):
            transition_given_sensitive(hmm, backward_gamma(hmm, ()), 0, 0)


class TestSession:
    @pytest.mark.parametrize("sensitive", [(0,), (2,), (1, 3)])
    def test_predictive_tables_match_enumeration(self, sensitive):
        """Along every reachable prefix the session reproduces the enumerated conditionals."""
        hmm = make_hmm(3, 4, epsilon=0.25, theta=0.1, seed=4)
        gamma = backward_gamma(hmm, sensitive)
        for node in walk_prefixes(hmm.support, sensitive, Ordering.linear(4)):
            if node.is_leaf:
                continue
            session = HmmMaskingSession(hmm, sensitive, gamma=gamma)
            for _, symbol in node.prefix:
                session.advance(symbol)
            np.testing.assert_allclose(session.predictive_table(), node.conditionals, atol=1e-10)

    @pytest.mark.parametrize("sensitive", [(0,), (2,), (1, 3)])
    def test_every_prefix_is_reached_by_all_secrets_or_none(self, sensitive):
        """w(prefix | x_K = u) is positive for every u or for none, with no round-off stragglers."""
        hmm = make_hmm(3, 4, epsilon=0.25, theta=0.1, seed=4)
        support = hmm.support
        codes = support.sensitive_codes(sensitive)
        count = support.sensitive_count(sensitive)
        for node in walk_prefixes(support, sensitive, Ordering.linear(4)):
            mass = np.bincount(codes, weights=support.probs * node.kernel, minlength=count)
            assert (mass > 0).all() or (mass == 0).all(), node.prefix

    def test_prior_uses_the_conditioned_transition(self, rng):
        """The predictive table is psi[u] pushed through p(s_i | s_{i-1}, x_K = u), then emitted."""
        hmm = make_hmm(4, 6, epsilon=0.2, theta=0.05, seed=8)
        sensitive = (1, 4)
        x = hmm.sample(rng)
        gamma = backward_gamma(hmm, sensitive)
        session = HmmMaskingSession(hmm, sensitive, secret=[int(x[1]), int(x[4])], gamma=gamma)
        session.step(int(x[0]), rng)
        for i in range(1, hmm.n):
            if i not in sensitive:
                state = session.state
                table = session.predictive_table()
                for u in np.flatnonzero(state.reachable):
                    kernel = transition_given_sensitive(hmm, gamma, i, int(u), strict=False)
                    expected = (state.beliefs[u] @ kernel) @ hmm.emission[i].T
                    np.testing.assert_allclose(table[u], expected, atol=1e-12)
            session.step(int(x[i]), rng)

    def test_shortcut_is_exact(self, rng):
        """Skipping gamma past the last sensitive position changes nothing."""
        hmm = make_hmm(4, 8, epsilon=0.2, theta=0.05, seed=2)
        x = hmm.sample(rng)
        fast = HmmMaskingSession(hmm, (1,), secret=[int(x[1])])
        slow = HmmMaskingSession(hmm, (1,), secret=[int(x[1])], shortcut=False)
        for i in range(hmm.n):
            np.testing.assert_allclose(fast.predictive_table(), slow.predictive_table(), atol=1e-12)
            outcome, _ = fast.step(int(x[i]), rng)
            slow.advance(outcome)

    def test_beliefs_stay_normalized(self, rng):
        """psi rows sum to one after every step."""
        hmm = make_hmm(5, 10, seed=1)
        x = hmm.sample(rng)
        session = HmmMaskingSession(hmm, (0, 4), secret=[int(x[0]), int(x[4])])
        for i in range(hmm.n):
            session.step(int(x[i]), rng)
            np.testing.assert_allclose(session.state.beliefs.sum(axis=1), 1.0)

    def test_uninformative_emissions(self):
        """theta = 1/2 makes every symbol equally likely whatever the secret."""
        hmm = make_hmm(3, 4, theta=0.5)
        session = HmmMaskingSession(hmm, (0,))
        session.advance(ERASED)
        np.testing.assert_allclose(session.predictive_table(), 0.5)

    def test_predictive_prob_matches_conditional_query(self):
        """Each reachable secret gets the same predictive distribution as the generic query."""
        hmm = make_hmm(2, 3, epsilon=0.3, theta=0.15, seed=6)
        sensitive = (1,)
        gamma = backward_gamma(hmm, sensitive)
        values = assignments(hmm.arities, sensitive)
        for node in walk_prefixes(hmm.support, sensitive, Ordering.linear(3)):
            if node.is_leaf:
                continue
            session = HmmMaskingSession(hmm, sensitive, gamma=gamma)
            for _, symbol in node.prefix:
                session.advance(symbol)
            for u, secret in enumerate(values.tolist()):
                if np.isnan(node.conditionals[u, 0]):
                    continue
                expected = hmm.conditional_query(node.position, secret, sensitive, node.prefix)
                np.testing.assert_allclose(session.predictive_prob(secret), expected, atol=1e-10)

    def test_sensitive_outputs_must_be_erased(self):
        """A sensitive position cannot be advanced with a released symbol."""
        session = HmmMaskingSession(make_hmm(2, 3), (0,))
        with pytest.raises(InputError):
            session.advance(1)

    def test_step_needs_the_secret(self, rng):
        """Stepping requires the true sensitive values."""
        session = HmmMaskingSession(make_hmm(2, 3), (0,))
        with pytest.raises(InputError):
            session.step(0, rng)

    def test_copy_is_independent(self):
        """Advancing a copy leaves the original untouched."""
        session = HmmMaskingSession(make_hmm(3, 4), (0,))
        session.advance(ERASED)
        clone = session.copy()
        clone.advance(1)
        assert session.position == 1
        assert clone.position == 2


class TestMaskHmm:
    def test_matches_generic_mechanism(self):
        """Same seed, same outputs and release probabilities as the enumerating mechanism."""
        hmm = make_hmm(3, 6, epsilon=0.2, theta=0.05, seed=7)
        for seed in range(5):
            x = hmm.sample(np.random.default_rng(100 + seed))
            y_fast, fast = mask_hmm(hmm, x, (1,), np.random.default_rng(seed))
            y_slow, slow = mask_sequence(hmm, x, (1,), rng=np.random.default_rng(seed))
            assert y_fast == y_slow
            np.testing.assert_allclose(fast.release_probabilities(), slow.release_probabilities(), atol=1e-9)

    def test_empty_sensitive_set_releases_everything(self, rng):
        """K empty gives y = x."""
        hmm = make_hmm(4, 12)
        x = hmm.sample(rng)
        y, _ = mask_hmm(hmm, x, (), rng)
        assert y.erasures == 0
        assert y.is_faithful_to(x)

    def test_single_haplotype(self, rng):
        """With m = 1 positions are independent, so only K is erased."""
        hmm = HmmModel(np.array([[0, 1, 1, 0, 1]]), 0.1, 0.1, Alphabet(2))
        x = hmm.sample(rng)
        y, _ = mask_hmm(hmm, x, (2,), rng)
        assert y.erased_positions == (2,)

    def test_everything_sensitive(self, rng):
        """K = all positions erases all of them."""
        hmm = make_hmm(3, 4)
        y, _ = mask_hmm(hmm, hmm.sample(rng), range(4), rng)
        assert y.erasures == 4

    def test_sensitive_limit(self, rng):
        """Too many sensitive positions raise before any work is done."""
        hmm = HmmModel(np.zeros((1, 13), dtype=np.int64), 0.1, 0.1, Alphabet(2))
        with pytest.raises(CapacityError):
            mask_hmm(hmm, np.zeros(13, dtype=np.int64), range(13), rng)

    @pytest.mark.slow
    def test_faithful_over_many_maskings(self):
        """10^5 maskings never substitute a symbol and always erase K."""
        hmm = make_hmm(3, 6, epsilon=0.2, theta=0.05, seed=9)
        gamma = backward_gamma(hmm, (2,))
        rng = stream(0, 1)
        for _ in range(100_000):
            x = hmm.sample(rng)
            y, _ = mask_hmm(hmm, x, (2,), rng, gamma=gamma)
            assert y.is_faithful_to(x)
            assert y.symbols[2] == ERASED


class TestHmmKernel:
    @pytest.mark.parametrize(
        ("m", "epsilon", "theta", "sensitive"),
        [(2, 0.2, 0.1, (0,)), (3, 0.3, 0.05, (1,)), (3, 0.1, 0.2, (0, 2)), (2, 0.3, 0.0, (1,))],
    )
    def test_matches_exact_distribution(self, m, epsilon, theta, sensitive):
        """The session's channel composes to the enumerated output law."""
        hmm = make_hmm(m, 4, epsilon=epsilon, theta=theta, seed=11)
        fast = hmm_kernel(hmm, sensitive).compose(hmm, sensitive)
        slow = exact_output_distribution(hmm, sensitive)
        assert fast.total_variation(slow) <= 1e-9

    def test_kernel_is_private(self):
        """The channel's output is independent of the sensitive values."""
        hmm = make_hmm(3, 4, epsilon=0.2, theta=0.05, seed=5)
        distribution = hmm_kernel(hmm, (0,)).compose(hmm, (0,))
        assert distribution.max_deviation() <= 1e-10

    @pytest.mark.slow
    def test_random_hmms_are_private(self, rng):
        """The session channel is private on 20 random panels and rates."""
        for _ in range(20):
            hmm = random_hmm(int(rng.integers(2, 5)), 4, rng)
            sensitive = random_sensitive(4, rng)
            assert hmm_kernel(hmm, sensitive).compose(hmm, sensitive).max_deviation() <= 1e-10


class TestRate:
    def test_rate_is_a_fraction(self, rng):
        """The sampled rate lies in [0, 1 - |K|/n]."""
        hmm = make_hmm(5, 20, seed=3)
        rate, stderr = hmm_rate_mc(hmm, (0,), 50, rng)
        assert 0.0 <= rate <= 1 - 1 / 20
        assert stderr >= 0.0

    @pytest.mark.slow
    def test_default_setting_erases_about_an_eighth(self):
        """m = n = 100, epsilon = 0.1, theta = 0.01 erases roughly 12% of the positions."""
        hmm = HmmModel(generate_panel(100, 100, 2, stream(0)), 0.1, 0.01, Alphabet(2))
        rate, _ = hmm_rate_mc(hmm, (0,), 200, stream(0, 0))
        assert abs((1 - rate) - 0.12) <= 0.05
