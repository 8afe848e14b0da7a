"""Exact-value and property tests for the finite information-theory core."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mi_sco_lab.infotheory import (
    FinitePmf,
    JointPmf,
    PmfValidationError,
    apply_map_x,
    conditional_mutual_information,
    coupling_disagreement,
    entropy,
    kl_divergence,
    mutual_information,
    nats_to_bits,
    optimal_coupling,
    pinsker_slack,
    total_variation,
)

LN2 = math.log(2.0)

# hand-evaluated two-term sum for KL(Bernoulli(1/2) || Bernoulli(1/4))
KL_HALF_QUARTER = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)


def bern(q):
    return FinitePmf.bernoulli(q)


@st.composite
def pmf_pairs(draw, max_size=10):
    k = draw(st.integers(2, max_size))
    raw1 = draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k))
    raw2 = draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k))
    a = np.asarray(raw1) / np.sum(raw1)
    b = np.asarray(raw2) / np.sum(raw2)
    outcomes = tuple(range(k))
    return FinitePmf(outcomes, a / a.sum()), FinitePmf(outcomes, b / b.sum())


class TestFinitePmf:
    def test_rejects_negative(self):
        with pytest.raises(PmfValidationError):
            FinitePmf((0, 1), np.array([1.5, -0.5]))

    def test_rejects_bad_sum(self):
        with pytest.raises(PmfValidationError):
            FinitePmf((0, 1), np.array([0.6, 0.6]))

    def test_rejects_duplicate_outcomes(self):
        with pytest.raises(PmfValidationError):
            FinitePmf((0, 0), np.array([0.5, 0.5]))

    def test_debug_text_golden(self):
        p = FinitePmf(("a", "b"), np.array([0.25, 0.75]))
        assert p.to_debug_text() == "a\t0.25\nb\t0.75"


class TestEntropy:
    def test_point_mass_zero(self):
        assert entropy(FinitePmf.point_mass(0, (0, 1, 2))) == 0.0

    def test_uniform_two(self):
        assert entropy(FinitePmf.uniform((0, 1))) == pytest.approx(LN2, abs=1e-12)

    def test_uniform_four(self):
        assert entropy(FinitePmf.uniform(range(4))) == pytest.approx(2 * LN2, abs=1e-12)

    def test_bits_conversion(self):
        assert nats_to_bits(entropy(FinitePmf.uniform(range(4)))) == pytest.approx(2.0)

    @given(pmf_pairs())
    @settings(max_examples=50, deadline=None)
    def test_bounded_by_log_support(self, pair):
        p, _ = pair
        h = entropy(p)
        assert -1e-12 <= h <= math.log(len(p)) + 1e-12


class TestKlAndTv:
    def test_kl_self_zero(self):
        p = bern(0.3)
        assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-15)

    def test_kl_half_vs_quarter(self):
        assert kl_divergence(bern(0.5), bern(0.25)) == pytest.approx(
            KL_HALF_QUARTER, abs=1e-12)

    def test_kl_support_violation_is_inf(self):
        assert kl_divergence(bern(0.5), bern(0.0)) == math.inf

    def test_tv_half_vs_quarter(self):
        assert total_variation(bern(0.5), bern(0.25)) == pytest.approx(0.25, abs=1e-15)

    def test_tv_disjoint_point_masses(self):
        a = FinitePmf.point_mass(0, (0, 1))
        b = FinitePmf.point_mass(1, (0, 1))
        assert total_variation(a, b) == pytest.approx(1.0)

    def test_alphabet_mismatch_rejected(self):
        with pytest.raises(PmfValidationError):
            total_variation(FinitePmf((0, 1), [0.5, 0.5]), FinitePmf((0, 2), [0.5, 0.5]))

    @given(pmf_pairs())
    @settings(max_examples=50, deadline=None)
    def test_kl_nonnegative(self, pair):
        assert kl_divergence(*pair) >= -1e-12

    def test_tv_equals_sup_over_events(self):
        # the best event collects exactly the outcomes where p1 > p2
        rng = np.random.default_rng(5)
        for _ in range(50):
            k = int(rng.integers(2, 9))
            a = rng.dirichlet(np.ones(k))
            b = rng.dirichlet(np.ones(k))
            p1 = FinitePmf(tuple(range(k)), a)
            p2 = FinitePmf(tuple(range(k)), b)
            best_event = float(np.clip(a - b, 0, None).sum())
            assert total_variation(p1, p2) == pytest.approx(best_event, abs=1e-12)


class TestMutualInformation:
    def test_independent_is_zero(self):
        j = JointPmf.from_table(np.outer([0.3, 0.7], [0.6, 0.4]))
        assert mutual_information(j) == pytest.approx(0.0, abs=1e-12)

    def test_identity_bit(self):
        j = JointPmf.from_table(np.array([[0.5, 0.0], [0.0, 0.5]]))
        assert mutual_information(j) == pytest.approx(LN2, abs=1e-12)

    def test_symmetric_in_axes(self):
        rng = np.random.default_rng(0)
        t = rng.dirichlet(np.ones(12)).reshape(3, 4)
        j = JointPmf.from_table(t)
        assert mutual_information(j) == pytest.approx(mutual_information(j.swap()),
                                                      abs=1e-12)

    def test_matches_expectation_of_kl_form(self):
        # independent oracle: I = E_Y[ KL(P_{X|Y} || P_X) ]
        rng = np.random.default_rng(1)
        for _ in range(25):
            t = rng.dirichlet(np.ones(20)).reshape(4, 5)
            j = JointPmf.from_table(t)
            px = t.sum(axis=1)
            oracle = 0.0
            for y in range(5):
                py = t[:, y].sum()
                cond = FinitePmf(tuple(range(4)), t[:, y] / py)
                oracle += py * kl_divergence(cond, FinitePmf(tuple(range(4)), px))
            assert mutual_information(j) == pytest.approx(oracle, abs=1e-10)

    def test_bounded_by_marginal_entropies(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            t = rng.dirichlet(np.ones(12)).reshape(3, 4)
            j = JointPmf.from_table(t)
            mi = mutual_information(j)
            assert mi <= entropy(j.marginal(0)) + 1e-10
            assert mi <= entropy(j.marginal(1)) + 1e-10


class TestConditionalMutualInformation:
    def test_conditionally_independent_is_zero(self):
        # X and Y independent given each z
        t = np.zeros((2, 2, 2))
        for z, pz in enumerate((0.4, 0.6)):
            px = np.array([0.3, 0.7]) if z == 0 else np.array([0.8, 0.2])
            py = np.array([0.5, 0.5]) if z == 0 else np.array([0.1, 0.9])
            t[:, :, z] = pz * np.outer(px, py)
        assert conditional_mutual_information(JointPmf.from_table(t)) == pytest.approx(
            0.0, abs=1e-12)

    def test_constant_z_reduces_to_mi(self):
        rng = np.random.default_rng(3)
        pair = rng.dirichlet(np.ones(6)).reshape(2, 3)
        t = pair[:, :, None] * np.array([1.0])[None, None, :]
        cmi = conditional_mutual_information(JointPmf.from_table(t))
        assert cmi == pytest.approx(mutual_information(JointPmf.from_table(pair)),
                                    abs=1e-12)

    def test_fully_correlated_bit_is_zero(self):
        # X = Y = Z uniform: conditioning on Z pins both
        t = np.zeros((2, 2, 2))
        t[0, 0, 0] = 0.5
        t[1, 1, 1] = 0.5
        assert conditional_mutual_information(JointPmf.from_table(t)) == pytest.approx(
            0.0, abs=1e-12)

    def test_chain_rule_identity(self):
        # I((X,Z); Y) = I(Z; Y) + I(X; Y | Z) on random triples
        rng = np.random.default_rng(4)
        for _ in range(20):
            t = rng.dirichlet(np.ones(2 * 3 * 2)).reshape(2, 3, 2)
            j3 = JointPmf.from_table(t)
            # (X,Z) flattened against Y
            xz_y = np.transpose(t, (0, 2, 1)).reshape(4, 3)
            lhs = mutual_information(JointPmf.from_table(xz_y))
            z_y = t.sum(axis=0).T  # (z, y) -> rows z
            rhs = mutual_information(JointPmf.from_table(z_y)) + \
                conditional_mutual_information(j3)
            assert lhs == pytest.approx(rhs, abs=1e-10)


class TestCoupling:
    def test_identical_distributions_agree(self):
        p = bern(0.3)
        j = optimal_coupling(p, p)
        assert coupling_disagreement(j) == pytest.approx(0.0, abs=1e-15)

    def test_half_vs_quarter(self):
        j = optimal_coupling(bern(0.5), bern(0.25))
        assert coupling_disagreement(j) == pytest.approx(0.25, abs=1e-12)

    def test_disjoint_point_masses(self):
        a = FinitePmf.point_mass(0, (0, 1))
        b = FinitePmf.point_mass(1, (0, 1))
        assert coupling_disagreement(optimal_coupling(a, b)) == pytest.approx(1.0)

    @given(pmf_pairs())
    @settings(max_examples=50, deadline=None)
    def test_marginals_and_optimality(self, pair):
        p1, p2 = pair
        j = optimal_coupling(p1, p2)
        np.testing.assert_allclose(j.table.sum(axis=1), p1.probs, atol=1e-12)
        np.testing.assert_allclose(j.table.sum(axis=0), p2.probs, atol=1e-12)
        assert coupling_disagreement(j) == pytest.approx(
            total_variation(p1, p2), abs=1e-12)


class TestPinsker:
    def test_identical_is_zero(self):
        assert pinsker_slack(bern(0.4), bern(0.4)) == pytest.approx(0.0, abs=1e-12)

    def test_half_vs_quarter_value(self):
        expected = math.sqrt(KL_HALF_QUARTER / 2.0) - 0.25
        assert pinsker_slack(bern(0.5), bern(0.25)) == pytest.approx(expected, abs=1e-12)
        assert expected > 0

    def test_infinite_divergence_gives_inf(self):
        assert pinsker_slack(bern(0.5), bern(0.0)) == math.inf

    def test_thousand_random_pairs_nonnegative(self):
        rng = np.random.default_rng(12)
        for _ in range(1000):
            k = int(rng.integers(2, 17))
            p1 = FinitePmf(tuple(range(k)), rng.dirichlet(np.ones(k)))
            p2 = FinitePmf(tuple(range(k)), rng.dirichlet(np.ones(k)))
            assert pinsker_slack(p1, p2) >= -1e-12


class TestDataProcessing:
    def test_deterministic_map_cannot_gain_information(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            t = rng.dirichlet(np.ones(24)).reshape(6, 4)
            j = JointPmf.from_table(t)
            g = {x: x % 3 for x in range(6)}
            coarse = apply_map_x(j, g.__getitem__)
            assert mutual_information(coarse) <= mutual_information(j) + 1e-12
