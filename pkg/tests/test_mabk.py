import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghzcert.ghz import SourceModel, ghz_state, make_source
from ghzcert.mabk import (
    CoefficientTable,
    MabkGame,
    ObservablePair,
    Outcome,
    beta_from_omega,
    game_stats,
    mabk_operator,
    mabk_pair,
    mabk_value,
    omega_from_beta,
    optimal_observables,
    outcome_distribution,
    p_bounds,
    random_equatorial_parties,
    unroll_coefficients,
    verify_bipartition_factorization,
    win_predicate,
    winning_probability_exact,
)
from ghzcert.qmath import PAULI_X, PAULI_Y, PAULI_Z, DensityMatrix, random_density_matrix

SQ2 = np.sqrt(2)
XY = ObservablePair(PAULI_X, PAULI_Y)
YX = ObservablePair(PAULI_Y, PAULI_X)


def brute_expansion(M):
    """Independent oracle: expand the recursion on formal symbols (x_i in {0,1} per party)."""
    # a term is a dict from input string to coefficient
    K = {"0": Fraction(1)}
    Kb = {"1": Fraction(1)}

    def F(B0, B1):
        out = {}
        for x, c in B0.items():
            for b, s in (("0", 1), ("1", 1)):
                out[x + b] = out.get(x + b, 0) + c * s
        for x, c in B1.items():
            for b, s in (("0", 1), ("1", -1)):
                out[x + b] = out.get(x + b, 0) + c * s
        return {k: v / 2 for k, v in out.items()}

    for _ in range(1, M):
        # Kbar uses the swapped settings of the new party
        swapped = {k[:-1] + ("1" if k[-1] == "0" else "0"): v for k, v in F(Kb, K).items()}
        K, Kb = F(K, Kb), swapped
    return {k: v for k, v in K.items() if v != 0}


def test_chsh_operator():
    K = mabk_operator([XY, XY])
    expected = 0.5 * (np.kron(PAULI_X, PAULI_X + PAULI_Y) + np.kron(PAULI_Y, PAULI_X - PAULI_Y))
    assert np.allclose(K, expected)


def test_m3_spectral_radius():
    K = mabk_operator([XY] * 3)
    assert np.allclose(K, K.conj().T)
    assert np.max(np.abs(np.linalg.eigvalsh(K))) == pytest.approx(2.0)


@pytest.mark.parametrize("M", [2, 3, 4, 5, 6])
def test_unrolled_matches_symbolic_oracle(M):
    table = unroll_coefficients(M)
    oracle = brute_expansion(M)
    assert set(oracle) == set(table.support)
    for x, c in oracle.items():
        assert c == table.sign(x) * table.scale
    assert len(table.support) == (2**M if M % 2 == 0 else 2 ** (M - 1))
    assert table.scale == Fraction(1, 2 ** (M // 2))


@pytest.mark.parametrize("M", [2, 3, 4, 5, 6])
def test_reassembly_random(M):
    rng = np.random.default_rng(M)
    table = unroll_coefficients(M)
    for _ in range(5):
        parties = random_equatorial_parties(M, rng)
        assert np.linalg.norm(table.assemble(parties) - mabk_operator(parties)) < 1e-10


def test_kbar_is_swapped_recursion():
    rng = np.random.default_rng(0)
    parties = random_equatorial_parties(4, rng)
    _, Kbar = mabk_pair(parties)
    K_swapped, _ = mabk_pair([p.swapped() for p in parties])
    assert np.allclose(Kbar, K_swapped)


def test_table_json_and_flip():
    t = unroll_coefficients(3)
    again = CoefficientTable.from_json(t.to_json())
    assert again.f == t.f and again.scale == t.scale
    x = t.support[0]
    flipped = t.with_flipped(x)
    assert flipped.sign(x) == -t.sign(x)
    with pytest.raises(ValueError):
        MabkGame(3, [YX] * 3, coeffs=flipped)


def test_win_predicate():
    table = unroll_coefficients(3)
    x0 = next(x for x, f in table.f.items() if f == 0)
    x1 = next(x for x, f in table.f.items() if f == 1)
    xp = next(x for x, f in table.f.items() if f is None)
    game = MabkGame(3, [YX] * 3)
    assert win_predicate(x0, "000", game) is Outcome.WON
    assert win_predicate(x1, "000", game) is Outcome.LOST
    assert win_predicate(xp, "000", game) is Outcome.NOT_PLAYED
    with pytest.raises(ValueError):
        win_predicate("00", "000", game)


def test_mabk_value_examples():
    bell = ghz_state(2)
    assert mabk_value(bell, MabkGame.optimal(2)) == pytest.approx(2 * SQ2, abs=1e-9)
    assert mabk_value(ghz_state(3), MabkGame(3, [YX] * 3)) == pytest.approx(2 * SQ2, abs=1e-9)
    # the plain x/y assignment is orthogonal to the standard GHZ state
    assert mabk_value(ghz_state(3), MabkGame(3, [XY] * 3)) == pytest.approx(0.0, abs=1e-12)
    prod = DensityMatrix(np.diag([1, 0, 0, 0, 0, 0, 0, 0]), (2, 2, 2))
    rng = np.random.default_rng(2)
    for _ in range(20):
        assert mabk_value(prod, MabkGame(3, random_equatorial_parties(3, rng))) <= 2 + 1e-9


def test_p_bounds():
    for M in (2, 4, 6, 8):
        lo, hi = p_bounds(M)
        assert lo == pytest.approx(0.75, abs=1e-14) and hi == pytest.approx((2 + SQ2) / 4, abs=1e-14)
    for M in (3, 5, 7):
        lo, hi = p_bounds(M)
        assert lo == pytest.approx((2 + SQ2) / 8, abs=1e-14) and hi == pytest.approx(0.5, abs=1e-14)


def test_beta_omega_maps():
    assert beta_from_omega(0.75, 4) == pytest.approx(2)
    assert beta_from_omega((2 + SQ2) / 4, 4) == pytest.approx(2 * SQ2)
    assert beta_from_omega(0.5, 3) == pytest.approx(2 * SQ2)
    for M in (4, 5):
        for w in np.linspace(*p_bounds(M), 7):
            assert omega_from_beta(beta_from_omega(w, M), M) == pytest.approx(w, abs=1e-12)
    with pytest.raises(ValueError):
        beta_from_omega(0.9, 4)
    with pytest.raises(ValueError):
        omega_from_beta(3.0, 4)


@pytest.mark.parametrize("M", [2, 3, 4, 5, 6])
def test_optimal_settings(M):
    game = MabkGame.optimal(M)
    rho = ghz_state(M)
    assert mabk_value(rho, game) >= 2 * SQ2 - 1e-6
    assert winning_probability_exact(rho, game) == pytest.approx(p_bounds(M)[1], abs=1e-9)


def test_werner_winning_probability():
    rho = make_source(SourceModel("honest-werner", 4, 0.9))
    w = winning_probability_exact(rho, MabkGame.optimal(4))
    assert w == pytest.approx((2 * SQ2 * 0.9 + 4) / 8, abs=1e-9)


def test_winning_probability_against_sampling_free_oracle():
    """Born-rule outcome tables summed by hand agree with the correlator formula."""
    rng = np.random.default_rng(9)
    M = 3
    game = MabkGame(M, random_equatorial_parties(M, rng))
    rho = random_density_matrix((2,) * M, rng)
    total = 0.0
    for x in ("".join(b) for b in itertools.product("01", repeat=M)):
        P = outcome_distribution(rho, game.parties, x)
        for a in range(2**M):
            if win_predicate(x, format(a, f"0{M}b"), game) is Outcome.WON:
                total += P[a]
    assert total / 2**M == pytest.approx(winning_probability_exact(rho, game), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_beta_omega_consistency_and_cap(M, seed):
    rng = np.random.default_rng(seed)
    game = MabkGame(M, random_equatorial_parties(M, rng), check=False)
    rho = random_density_matrix((2,) * M, rng)
    stats = game_stats(rho, game)
    assert stats.beta <= 2 * SQ2 + 1e-8
    # signed relation between omega and Tr K rho, valid for every state
    t = np.real(np.trace(game.operator() @ rho.data))
    signed = 2 ** ((4 - M) / 2) * t
    if M % 2 == 0:
        assert 8 * stats.omega - 4 == pytest.approx(signed, abs=1e-9)
    else:
        assert 8 * SQ2 * stats.omega - 2 * SQ2 == pytest.approx(signed, abs=1e-9)
    assert abs(signed) == pytest.approx(stats.beta, abs=1e-12)


@pytest.mark.parametrize("M", [3, 4, 5, 6])
def test_factorization(M):
    rng = np.random.default_rng(100 + M)
    for _ in range(3):
        parties = random_equatorial_parties(M, rng)
        for m in range(1, M):
            assert verify_bipartition_factorization(M, m, parties) < 1e-10


def test_factorization_general_qubit_observables():
    rng = np.random.default_rng(4)

    def rand_obs():
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        return v[0] * PAULI_X + v[1] * PAULI_Y + v[2] * PAULI_Z

    parties = [ObservablePair(rand_obs(), rand_obs()) for _ in range(5)]
    for m in range(1, 5):
        assert verify_bipartition_factorization(5, m, parties) < 1e-10
    with pytest.raises(ValueError):
        verify_bipartition_factorization(5, 5, parties)


def test_observable_pair_validation():
    with pytest.raises(ValueError):
        ObservablePair(np.diag([1, 2]), PAULI_X)
    with pytest.raises(ValueError):
        ObservablePair(PAULI_X, np.eye(4))
    with pytest.raises(ValueError):
        mabk_operator([XY])
    with pytest.raises(ValueError):
        mabk_value(ghz_state(2), MabkGame.optimal(3))


def test_outcome_distribution_normalized():
    rng = np.random.default_rng(7)
    rho = random_density_matrix((2, 2, 2), rng)
    P = outcome_distribution(rho, optimal_observables(3), "010")
    assert P.sum() == pytest.approx(1.0) and np.all(P >= -1e-12)
