import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathbridge import bridge, random_models as rm
from pathbridge.bridge import Existence, SolverConfig
from pathbridge.chain import ChainModel, is_reverse_harmonic, propagate_forward, reverse_kernels
from pathbridge.errors import ConvergenceError, DomainError, InfeasibleError
from pathbridge.paths import enumerate_path_distribution, path_relative_entropy

from conftest import sym_chain

D0, D1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])


def ipf_coupling(G, p0, p1, sweeps=20000):
    """Plain Sinkhorn scaling of G to the marginals, written independently of the solver."""
    M = G.copy()
    for _ in range(sweeps):
        r = M.sum(axis=1)
        M = M * np.divide(p0, r, out=np.zeros_like(r), where=r > 0)[:, None]
        c = M.sum(axis=0)
        M = M * np.divide(p1, c, out=np.zeros_like(c), where=c > 0)[None, :]
    return M


def test_hand_fixed_point_delta_bridge():
    prior = sym_chain(2)
    pair = bridge.solve_schrodinger_system(prior, D0, D1)
    # hand values up to the scaling c = 3/8 fixed by max phi(T) = 1
    c = 3 / 8
    assert np.allclose(pair.phi[2], c * np.array([0, 8 / 3]), atol=1e-14)
    assert np.allclose(pair.phi[1], c * np.array([2 / 3, 2]), atol=1e-14)
    assert np.allclose(pair.phi[0], c * np.array([1, 5 / 3]), atol=1e-14)
    assert np.allclose(pair.phihat[0], np.array([1, 0]) / c, atol=1e-14)


def test_delta_bridge_transitions():
    sol = bridge.mep3_bridge(sym_chain(2), D0, D1)
    assert np.allclose(sol.chain.transitions[0][0], [0.5, 0.5], atol=1e-12)
    assert np.allclose(sol.chain.transitions[1], [[0, 1], [0, 1]], atol=1e-12)
    assert np.allclose(sol.marginals, [[1, 0], [0.5, 0.5], [0, 1]], atol=1e-12)


def test_prior_marginals_give_prior():
    rng = np.random.default_rng(3)
    prior = rm.chain(3, 3, rng)
    pi = propagate_forward(prior)
    pair = bridge.solve_schrodinger_system(prior, pi[0], pi[-1])
    assert np.allclose(pair.phi, 1, atol=1e-12)
    assert np.allclose(pair.phihat, pi, atol=1e-12)
    sol = bridge.mep3_bridge(prior, pi[0], pi[-1])
    assert all(np.allclose(a, b, atol=1e-12) for a, b in zip(sol.chain.transitions, prior.transitions))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(1, 5))
def test_residuals_and_coupling(seed, n, T):
    rng = np.random.default_rng(seed)
    prior = rm.chain(n, T, rng)
    p0, p1 = rm.prob_vector(n, rng), rm.prob_vector(n, rng)
    sol = bridge.mep3_bridge(prior, p0, p1)
    assert max(sol.diagnostics["residuals"].values()) < 1e-10
    rows = [P.sum(axis=1) for P in sol.chain.transitions]
    assert np.allclose(rows, 1, atol=1e-12)
    G = prior.kernel()
    M = sol.pair.phihat[0][:, None] * G * sol.pair.phi[-1][None, :]
    assert np.allclose(M.sum(axis=1), p0, atol=1e-10)
    assert np.allclose(M.sum(axis=0), p1, atol=1e-10)


@pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
def test_scaling_freedom(c):
    rng = np.random.default_rng(8)
    prior = rm.chain(4, 3, rng)
    p0, p1 = rm.prob_vector(4, rng), rm.prob_vector(4, rng)
    sol = bridge.mep3_bridge(prior, p0, p1)
    scaled = sol.pair.scaled(c)
    for t, P in enumerate(prior.transitions):
        a = P * sol.pair.phi[t + 1][None, :] / sol.pair.phi[t][:, None]
        b = P * scaled.phi[t + 1][None, :] / scaled.phi[t][:, None]
        assert np.max(np.abs(a - b)) <= 1e-12
    assert np.max(np.abs(sol.pair.phi * sol.pair.phihat - scaled.phi * scaled.phihat)) <= 1e-12


def test_endpoint_swap_is_time_reversal():
    prior = sym_chain(3)
    p0, p1 = np.array([0.8, 0.2]), np.array([0.3, 0.7])
    fwd = bridge.mep3_bridge(prior, p0, p1).chain
    bwd = bridge.mep3_bridge(prior, p1, p0).chain
    rks = reverse_kernels(fwd)
    for t in range(3):
        assert np.allclose(rks[t].matrix, bwd.transitions[2 - t], atol=1e-10)


def test_mep1_example():
    prior = sym_chain(1)
    sol = bridge.mep1_solution(prior, D0)
    assert np.allclose(sol.marginals[0], [0.75, 0.25], atol=1e-15)
    assert np.allclose(sol.chain.transitions[0], [[1, 0], [1, 0]], atol=1e-15)
    assert np.allclose(sol.pair.phi, [[1.5, 0.5], [2, 0]], atol=1e-15)
    value = path_relative_entropy(enumerate_path_distribution(sol.chain), enumerate_path_distribution(prior))
    assert value == pytest.approx(np.log(2), abs=1e-12)
    assert bridge.ld_exponent("mep1", prior, p1=D0) == pytest.approx(np.log(2), abs=1e-15)


def test_mep1_mep2_trivial():
    prior = sym_chain(2)
    pi = propagate_forward(prior)
    for sol in (bridge.mep1_solution(prior, pi[-1]), bridge.mep2_solution(prior, pi[0])):
        assert all(np.allclose(a, b) for a, b in zip(sol.chain.transitions, prior.transitions))
    assert bridge.ld_exponent("mep1", prior, p1=pi[-1]) == 0


def test_mep2_example():
    prior = sym_chain(1)
    sol = bridge.mep2_solution(prior, D0)
    assert np.allclose(sol.marginals[1], [0.75, 0.25])
    theta = sol.marginals / propagate_forward(prior)
    assert np.allclose(theta, [[2, 0], [1.5, 0.5]])
    assert is_reverse_harmonic(theta, prior).ok
    assert bridge.ld_exponent("mep2", prior, p0=D0) == pytest.approx(np.log(2))


def test_support_violations():
    prior = ChainModel(np.array([1.0, 0.0]), (np.eye(2),))
    with pytest.raises(InfeasibleError):
        bridge.mep2_solution(prior, np.array([0.5, 0.5]))
    with pytest.raises(InfeasibleError):
        bridge.mep1_solution(prior, np.array([0.5, 0.5]))
    with pytest.raises(InfeasibleError):
        bridge.mep3_bridge(ChainModel.homogeneous(np.array([0.5, 0.5]), np.eye(2), 2), D0, D1)


def test_convergence_budget():
    rng = np.random.default_rng(1)
    prior = rm.chain(4, 2, rng)
    with pytest.raises(ConvergenceError) as info:
        bridge.solve_schrodinger_system(prior, rm.prob_vector(4, rng), rm.prob_vector(4, rng),
                                        SolverConfig(tol=1e-15, max_iter=2))
    assert info.value.iterations == 2


def test_existence_classification():
    P2 = sym_chain(2)
    assert bridge.existence_check(P2, None, np.array([0.4, 0.6])).status is Existence.UNIQUE
    ident = ChainModel.homogeneous(np.array([0.5, 0.5]), np.eye(2), 2)
    assert bridge.existence_check(ident, D0, D1).status is Existence.POSSIBLY_INFEASIBLE
    assert bridge.existence_check(P2, None, D1).status is Existence.SOLVABLE


def test_ld_exponent_matches_enumeration():
    prior = sym_chain(2)
    sol = bridge.mep3_bridge(prior, D0, D1)
    direct = path_relative_entropy(enumerate_path_distribution(sol.chain), enumerate_path_distribution(prior))
    assert bridge.ld_exponent("mep3", prior, D0, D1) == pytest.approx(direct, abs=1e-10)


def test_factorizations():
    prior = sym_chain(1)
    f1 = bridge.harmonic_factorization(bridge.mep1_solution(prior, D0), prior)
    assert np.allclose(f1.xi, 1) and f1.ok and f1.identity_residual < 1e-14
    f2 = bridge.harmonic_factorization(bridge.mep2_solution(prior, D0), prior)
    assert np.allclose(f2.phi, 1) and f2.ok
    p3 = sym_chain(2)
    f3 = bridge.harmonic_factorization(bridge.mep3_bridge(p3, D0, D1), p3)
    assert f3.identity_residual < 1e-10 and f3.ok
    with pytest.raises(DomainError):
        z = ChainModel(np.array([1.0, 0.0]), (np.eye(2),))
        bridge.harmonic_factorization(bridge.mep2_solution(z, D0), z)


def test_coupling_matches_generic_ipf():
    rng = np.random.default_rng(21)
    prior = rm.chain(3, 2, rng)
    p0, p1 = rm.prob_vector(3, rng), rm.prob_vector(3, rng)
    pair = bridge.solve_schrodinger_system(prior, p0, p1)
    G = prior.kernel()
    M = pair.phihat[0][:, None] * G * pair.phi[-1][None, :]
    assert np.max(np.abs(M - ipf_coupling(G, p0, p1, 2000))) < 1e-8
