import itertools

import numpy as np
import pytest

from persuade.equilibria import (
    EPSILON_LOCAL,
    EXACT,
    REFUTED,
    PreconditionError,
    best_response_exact,
    best_response_fixed_interpretation,
    full_revelation_profile,
    incentive_rows,
    joint_conditional,
    local_ne_sample_count,
    local_ne_verify,
    verify_nash,
)
from persuade.game import (
    FixedMap,
    GameInstance,
    Lexicographic,
    SenderFavoring,
    ex_ante_utilities,
    ex_ante_utilities_fixed_interpretation,
    induced_action_map,
)
from persuade.reference import didactic_game, two_block_equilibrium_policies, two_block_game
from persuade.reductions import BimatrixGame, bimatrix_to_persuasion
from persuade.rng import substream

from conftest import grid_best_response, random_game, random_profile, unique_optimum_game

SF = SenderFavoring()
LEX = Lexicographic()


class TestBestResponseExact:
    def test_reference_game_no_profitable_deviation(self):
        g = two_block_game()
        pol = two_block_equilibrium_policies()
        br = best_response_exact(g, 0, [pol[1]], SF, incumbent=pol[0])
        assert br.utility == pytest.approx(0.3, abs=1e-9)
        br = best_response_exact(g, 1, [pol[0]], SF, incumbent=pol[1])
        assert br.utility == pytest.approx(0.3, abs=1e-9)

    def test_didactic_vs_uniform_matches_grid(self):
        g = didactic_game()
        others = [np.full((2, 2), 0.5)]
        br = best_response_exact(g, 0, others, LEX)
        oracle = grid_best_response(g, 0, others, LEX)
        assert br.utility >= oracle - 1e-9
        assert br.utility == pytest.approx(oracle, abs=0.02)

    def test_constant_utility_sender(self, rng):
        g = GameInstance(
            2, 2, 2, 2, [0.5, 0.5], rng.normal(size=(2, 2)),
            (np.full((2, 2), 0.4), rng.normal(size=(2, 2))),
        )
        br = best_response_exact(g, 0, [random_profile(g, rng)[1]], LEX)
        assert br.utility == pytest.approx(0.4, abs=1e-9)

    def test_utility_matches_fixed_interpretation_of_returned_pair(self, rng):
        for _ in range(10):
            g = random_game(2, 2, 2, 3, rng)
            others = [random_profile(g, rng)[1]]
            br = best_response_exact(g, 0, others, LEX)
            prof = np.stack([br.policy, others[0]])
            pair_value = ex_ante_utilities_fixed_interpretation(g, prof, FixedMap(tuple(br.action_map)))[0]
            assert br.utility == pytest.approx(pair_value, abs=1e-9)

    def test_dominates_random_policies_and_incumbent(self, rng):
        g = random_game(2, 3, 2, 3, rng)
        incumbent = random_profile(g, rng)
        others = [incumbent[1]]
        base = ex_ante_utilities(g, incumbent, LEX)[0][0]
        br = best_response_exact(g, 0, others, LEX, incumbent=incumbent[0])
        assert br.utility >= base - 1e-9
        for _ in range(100):
            pol = random_profile(g, rng)
            pol[1] = others[0]
            assert br.utility >= ex_ante_utilities(g, pol, LEX)[0][0] - 1e-9

    def test_fixed_map_tie_rule_rejected(self):
        g = didactic_game()
        with pytest.raises(ValueError):
            best_response_exact(g, 0, [np.full((2, 2), 0.5)], FixedMap(table=(0,) * 4))


class TestBestResponseFixedInterpretation:
    def test_indifferent_receiver_always_feasible(self, rng):
        bg = BimatrixGame(u1=rng.integers(0, 2, (2, 2)), u2=rng.integers(0, 2, (2, 2)))
        g, amap = bimatrix_to_persuasion(bg)
        br = best_response_fixed_interpretation(g, 0, [random_profile(g, rng)[1]], amap)
        assert br.feasible

    def test_revealing_interpretation_reproduces_revealing_utility(self):
        g = two_block_game()
        prof, cert = full_revelation_profile(g)
        table = induced_action_map(g, prof, LEX)
        base = ex_ante_utilities(g, prof, LEX)[0]
        for j in range(2):
            others = [prof[1 - j]]
            br = best_response_fixed_interpretation(g, j, others, FixedMap(tuple(table)))
            assert br.feasible
            assert br.utility == pytest.approx(base[j], abs=1e-9)

    def test_infeasible_when_interp_demands_dominated_action(self):
        # two states, identity receiver utility: demanding action 1 everywhere
        # is never credible once signal (0,.) reveals state 0
        g = GameInstance(
            1, 2, 2, 2, [0.5, 0.5], np.eye(2), (np.ones((2, 2)),),
        )
        br = best_response_fixed_interpretation(g, 0, [], FixedMap(table=(1, 1)))
        # the sender CAN pool everything on posteriors favoring action 1? prior is
        # uniform, so expected utilities tie and action 1 is weakly optimal; make
        # state 0 strictly more likely to break the tie against the interpretation
        g2 = GameInstance(1, 2, 2, 2, [0.7, 0.3], np.eye(2), (np.ones((2, 2)),))
        br2 = best_response_fixed_interpretation(g2, 0, [], FixedMap(table=(1, 1)))
        assert not br2.feasible
        assert br.feasible  # uniform prior keeps the tie, so 'always 1' stays credible


class TestVerifyNash:
    def test_reference_profile_exact(self):
        g = two_block_game()
        rep = verify_nash(g, two_block_equilibrium_policies(), SF)
        assert rep.verdict == EXACT
        assert np.allclose(rep.utilities, [0.3, 0.3], atol=1e-12)

    def test_revealing_profile_exact(self):
        g = two_block_game()
        prof, _ = full_revelation_profile(g)
        rep = verify_nash(g, prof, SF)
        assert rep.verdict == EXACT
        assert np.allclose(rep.utilities, [0.15, 0.15], atol=1e-12)

    def test_perturbed_profile_refuted_with_real_witness(self):
        g = two_block_game()
        pol = two_block_equilibrium_policies()
        pol[0, 0] = [0.8, 0.2, 0.0, 0.0]
        rep = verify_nash(g, pol, SF)
        assert rep.verdict == REFUTED
        assert rep.max_improvement > 1e-7
        prof = pol.copy()
        prof[rep.witness_sender] = rep.witness_policy
        gained = ex_ante_utilities(g, prof, SF)[0][rep.witness_sender]
        assert gained - rep.utilities[rep.witness_sender] == pytest.approx(rep.max_improvement, abs=1e-9)

    def test_fixed_map_route(self, rng):
        bg = BimatrixGame(u1=np.eye(2), u2=np.eye(2))
        g, amap = bimatrix_to_persuasion(bg)
        # coordination equilibrium: both senders point at action pair (0, 0) in state 1
        pol = np.zeros((2, 2, 2))
        pol[:, :, 0] = 1.0
        rep = verify_nash(g, pol, amap)
        assert rep.verdict == EXACT


class TestFullRevelation:
    def test_parity_codewords_two_senders(self):
        g = random_game(2, 2, 2, 2, np.random.default_rng(3))
        try:
            _, cert = full_revelation_profile(g)
        except PreconditionError:
            pytest.skip("drawn game had tied optima")
        assert set(cert.zeta) == {(0, 0), (1, 1)}

    def test_checksum_code_three_senders_three_signals(self):
        g = unique_optimum_game(seed=11, n_choices=(3,), dim_cap=3)
        g = GameInstance(3, g.states, 3, g.actions, g.prior, g.receiver_utility, g.sender_utilities)
        _, cert = full_revelation_profile(g)
        assert len(cert.zeta) == 9
        for a, b in itertools.combinations(cert.zeta, 2):
            assert sum(x != y for x, y in zip(a, b)) >= 2

    def test_any_n_minus_1_coordinates_determine_codeword(self):
        g = unique_optimum_game(seed=4)
        _, cert = full_revelation_profile(g)
        n = g.n_senders
        for drop in range(n):
            kept = {tuple(c[j] for j in range(n) if j != drop) for c in cert.zeta}
            assert len(kept) == len(cert.zeta)

    def test_exact_equilibrium_on_random_unique_optimum_games(self):
        for k in range(12):
            g = unique_optimum_game(seed=500 + k)
            prof, cert = full_revelation_profile(g)
            rep = verify_nash(g, prof, LEX)
            assert rep.verdict == EXACT, f"game seed {500 + k} refuted"

    def test_tied_state_named_in_error(self):
        V = np.array([[1.0, 1.0], [0.0, 1.0]])
        g = GameInstance(2, 2, 2, 2, [0.5, 0.5], V, (V, V))
        with pytest.raises(PreconditionError, match="state 0"):
            full_revelation_profile(g)

    def test_capacity_shortfall_rejected(self):
        # 4 distinct optimal actions but only 2 codewords at |S|=2, n=2
        V = np.eye(4)
        g = GameInstance(2, 4, 2, 4, [0.25] * 4, V, (V, V))
        with pytest.raises(PreconditionError, match="capacity"):
            full_revelation_profile(g)


class TestLocalVerify:
    def test_sample_count_formula(self):
        g = random_game(2, 2, 2, 2, np.random.default_rng(0))
        assert local_ne_sample_count(g) == 1000
        g = random_game(2, 4, 4, 4, np.random.default_rng(0))
        assert local_ne_sample_count(g) == 10000

    def test_exact_ne_is_locally_stable(self):
        g = two_block_game()
        prof, _ = full_revelation_profile(g)
        for eps in (0.005, 0.01):
            rep = local_ne_verify(g, prof, SF, eps=eps, seed=11)
            assert rep.verdict == EPSILON_LOCAL

    def test_never_refutes_exact_equilibrium(self):
        g = two_block_game()
        rep = local_ne_verify(g, two_block_equilibrium_policies(), SF, eps=0.005, seed=5)
        assert rep.verdict == EPSILON_LOCAL

    def test_refutes_profile_with_improvement_in_small_radius(self):
        # sender 0 babbles right on an action boundary: a positive fraction of
        # the eps-ball improves, so every seeded sampling pass finds a witness
        g = didactic_game()
        pol = np.array([[[0.5, 0.5], [0.5, 0.5]], [[0.9, 0.1], [0.1, 0.9]]])
        base = ex_ante_utilities(g, pol, LEX)[0]
        br = best_response_exact(g, 0, [pol[1]], LEX, incumbent=pol[0])
        assert br.utility > base[0] + 0.01  # the profile is not an equilibrium
        for seed in range(5):
            rep = local_ne_verify(g, pol, LEX, eps=0.005, seed=seed)
            assert rep.verdict == REFUTED
            prof = pol.copy()
            prof[rep.witness_sender] = rep.witness_policy
            gained = ex_ante_utilities(g, prof, LEX)[0][rep.witness_sender]
            assert gained - base[rep.witness_sender] >= rep.max_improvement - 1e-12

    def test_never_refutes_exact_equilibria_from_revealing_profiles(self):
        for k in range(3):
            g = unique_optimum_game(seed=950 + k)
            prof, _ = full_revelation_profile(g)
            assert verify_nash(g, prof, LEX).verdict == EXACT
            rep = local_ne_verify(g, prof, LEX, eps=0.01, seed=k, samples=400)
            assert rep.verdict == EPSILON_LOCAL

    def test_eps_must_be_positive(self):
        g = didactic_game()
        with pytest.raises(ValueError):
            local_ne_verify(g, np.full((2, 2, 2), 0.5), LEX, eps=0.0, seed=0)

    def test_deterministic_given_seed(self):
        g = didactic_game()
        pol = np.full((2, 2, 2), 0.5)
        a = local_ne_verify(g, pol, LEX, eps=0.01, seed=42, samples=50)
        b = local_ne_verify(g, pol, LEX, eps=0.01, seed=42, samples=50)
        assert a.verdict == b.verdict and a.max_improvement == b.max_improvement


class TestIncentiveSetConvexity:
    def test_convex_combinations_stay_incentive_compatible(self):
        # two revealing profiles routed through different codewords are both
        # incentive compatible; their joint-conditional blends must stay so
        for k in range(100):
            rng = substream(k, "ic-convexity")
            g = random_game(2, 2, 2, 3, rng)
            f = g.receiver_utility.argmax(axis=1)
            table = (int(f[0]), int(f[0]), int(f[1]), int(f[1]))   # (0,0),(0,1),(1,0),(1,1)
            amap = FixedMap(table)
            det1 = np.zeros((2, 2, 2))
            det1[:, 0, 0] = 1.0
            det1[:, 1, 1] = 1.0
            det2 = det1.copy()
            det2[1, 0] = [0.0, 1.0]
            det2[1, 1] = [1.0, 0.0]
            conds = [joint_conditional(g, det1), joint_conditional(g, det2)]
            # mix in random profiles that happen to be incentive compatible
            for cand in (random_profile(g, rng) for _ in range(10)):
                rows = incentive_rows(g, joint_conditional(g, cand), amap)
                if np.all(rows >= -1e-12):
                    conds.append(joint_conditional(g, cand))
            for cond in conds:
                assert np.all(incentive_rows(g, cond, amap) >= -1e-12)
            for a, b in itertools.combinations(range(len(conds)), 2):
                for lam in (0.25, 0.5, 0.75):
                    blend = lam * conds[a] + (1 - lam) * conds[b]
                    assert np.all(incentive_rows(g, blend, amap) >= -1e-12)
