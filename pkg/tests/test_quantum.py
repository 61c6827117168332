import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathbridge import random_models as rm
from pathbridge.errors import ConditioningError, DomainError, ModelError
from pathbridge.quantum import (
    KrausMap,
    apply_heisenberg,
    apply_schrodinger,
    bit_flip,
    conditioned_state,
    event_probability,
    ket_plus,
    measurement_map,
    nonselective_measure,
    pauli,
    pinv_sqrt,
    psd_sqrt,
    quantum_harmonic_check,
    quantum_relative_entropy,
    spectral_decompose,
)

S = pauli()


def test_spectral_examples():
    z = spectral_decompose(S["Z"])
    assert list(z.eigenvalues) == [-1, 1]
    assert np.allclose(z.projectors[0], np.diag([0, 1])) and np.allclose(z.projectors[1], np.diag([1, 0]))
    ident = spectral_decompose(np.eye(3))
    assert len(ident) == 1 and np.allclose(ident.projectors[0], np.eye(3))
    x = spectral_decompose(S["X"])
    assert np.allclose(sum(x.projectors), np.eye(2))
    assert all(abs(np.trace(P) - 1) < 1e-12 for P in x.projectors)
    with pytest.raises(DomainError):
        spectral_decompose(np.array([[0, 1], [0, 0]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_spectral_reconstruction(seed, d):
    H = rm.hermitian(d, np.random.default_rng(seed))
    obs = spectral_decompose(H)
    assert np.allclose(sum(x * P for x, P in zip(obs.eigenvalues, obs.projectors)), H, atol=1e-10)
    for i, P in enumerate(obs.projectors):
        for j, Q in enumerate(obs.projectors):
            assert np.allclose(P @ Q, P if i == j else 0, atol=1e-10)


def test_schrodinger_examples():
    rho = np.diag([1.0, 0.0]).astype(complex)
    assert np.allclose(apply_schrodinger(KrausMap([np.eye(2)]), rho), rho)
    assert np.allclose(apply_schrodinger(bit_flip(0.25), rho), np.diag([0.75, 0.25]))
    assert np.allclose(apply_schrodinger(measurement_map(spectral_decompose(S["Z"])), ket_plus()), np.eye(2) / 2)
    with pytest.raises(ModelError):
        apply_schrodinger(bit_flip(0.25), np.eye(3))


def test_heisenberg_examples():
    assert np.allclose(apply_heisenberg(bit_flip(0.25), S["Z"]), 0.5 * S["Z"])
    E = rm.kraus_channel(3, 2, np.random.default_rng(0))
    assert np.allclose(apply_heisenberg(E, np.eye(3)), np.eye(3), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(1, 4))
def test_duality(seed, d, k):
    rng = np.random.default_rng(seed)
    E = rm.kraus_channel(d, k, rng)
    rho, X = rm.density(d, rng), rm.hermitian(d, rng)
    lhs = np.trace(X @ apply_schrodinger(E, rho))
    rhs = np.trace(apply_heisenberg(E, X) @ rho)
    assert abs(lhs - rhs) < 1e-12
    out = apply_schrodinger(E, rho)
    assert abs(np.trace(out) - 1) < 1e-12 and np.linalg.eigvalsh(out).min() > -1e-12


def test_event_probability():
    assert event_probability(np.diag([0.75, 0.25]), np.eye(2)) == pytest.approx(1)
    assert event_probability(np.diag([0.75, 0.25]), np.diag([1.0, 0.0])) == pytest.approx(0.75)
    assert event_probability(ket_plus(), np.diag([1.0, 0.0])) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        event_probability(ket_plus(), np.diag([0.5, 0.0]))


def test_conditioning():
    z = spectral_decompose(S["Z"])
    rho = np.diag([0.3, 0.7]).astype(complex)
    assert np.allclose(nonselective_measure(rho, z), rho)
    assert np.allclose(nonselective_measure(ket_plus(), z), np.eye(2) / 2)
    assert np.allclose(conditioned_state(np.eye(2) / 2, np.diag([1.0, 0.0])), np.diag([1, 0]))
    with pytest.raises(ConditioningError):
        conditioned_state(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))


def test_relative_entropy_examples():
    r = rm.density(3, np.random.default_rng(2))
    assert quantum_relative_entropy(r, r) == pytest.approx(0, abs=1e-12)
    assert quantum_relative_entropy(np.diag([1.0, 0.0]), np.eye(2) / 2) == pytest.approx(np.log(2))
    assert quantum_relative_entropy(ket_plus(), np.diag([1.0, 0.0])) == np.inf


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_klein_and_diagonal_case(seed, d):
    rng = np.random.default_rng(seed)
    rho, sigma = rm.density(d, rng), rm.density(d, rng)
    assert quantum_relative_entropy(rho, sigma) > 0
    p, q = rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))
    assert quantum_relative_entropy(np.diag(p), np.diag(q)) == pytest.approx(np.sum(p * np.log(p / q)), abs=1e-12)


def test_square_roots():
    assert np.allclose(psd_sqrt(np.eye(2)), np.eye(2)) and np.allclose(pinv_sqrt(np.eye(2)), np.eye(2))
    m = np.diag([0.25, 0.0])
    assert np.allclose(psd_sqrt(m), np.diag([0.5, 0])) and np.allclose(pinv_sqrt(m), np.diag([2, 0]))
    A = rm.density(3, np.random.default_rng(4))
    r = psd_sqrt(A)
    assert np.allclose(r @ r, A, atol=1e-10)
    with pytest.raises(DomainError):
        psd_sqrt(np.diag([1.0, -0.1]))


def test_harmonic_check():
    E = bit_flip(0.25)
    Y = [np.eye(2), np.eye(2)]
    assert quantum_harmonic_check(Y, [E]).ok
    rep = quantum_harmonic_check([S["Z"], S["Z"]], [E])
    assert not rep.ok and rep.residuals[0] == pytest.approx(0.5)
    assert quantum_harmonic_check([0.5 * S["Z"], S["Z"]], [E]).ok


def test_kraus_metadata():
    E = KrausMap([np.sqrt(0.5) * np.eye(2)])
    assert E.is_quantum_operation() and not E.is_trace_preserving()
    assert np.allclose(E.tp_defect, 0.5 * np.eye(2))
    assert bit_flip(0.3).tp_defect_norm() < 1e-15
