import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathbridge import random_models as rm
from pathbridge.chain import (
    ChainModel,
    backward_harmonic,
    constant_function,
    is_reverse_harmonic,
    is_space_time_harmonic,
    martingale_verify,
    propagate_forward,
    relative_entropy,
    reverse_kernel,
    reverse_kernels,
)
from pathbridge.errors import ModelError, SizeGuardError

from conftest import SYM, sym_chain


def test_propagate_symmetric_from_dirac():
    p = propagate_forward(sym_chain(1, (1, 0)))
    assert np.allclose(p[1], [0.75, 0.25], atol=1e-15)


def test_identity_and_stationary():
    c = ChainModel.homogeneous(np.array([0.2, 0.8]), np.eye(2), 3)
    assert np.all(propagate_forward(c) == [0.2, 0.8])
    assert np.allclose(propagate_forward(sym_chain(4)), 0.5)


def test_model_validation():
    with pytest.raises(ModelError, match="row-sum violated at row 1"):
        ChainModel(np.array([0.5, 0.5]), (np.array([[0.5, 0.5], [0.5, 0.49]]),))
    with pytest.raises(ModelError):
        ChainModel(np.array([0.5, 0.6]), (SYM,))
    with pytest.raises(ModelError):
        ChainModel(np.array([1 / 3] * 3), (SYM,))


def test_reverse_kernel_examples():
    rk = reverse_kernel(sym_chain(1), 0)
    assert np.allclose(rk.matrix, SYM, atol=1e-15) and not rk.arbitrary.any()
    c = ChainModel(np.array([0.5, 0.5]), (np.array([[1.0, 0.0], [1.0, 0.0]]),))
    rk = reverse_kernel(c, 0)
    assert list(rk.arbitrary) == [False, True]
    assert np.allclose(rk.matrix, 0.5)


def test_relative_entropy_values():
    assert relative_entropy([0.3, 0.7], [0.3, 0.7]) == 0
    assert relative_entropy([0.5, 0.5], [0.75, 0.25]) == pytest.approx(0.5 * np.log(4 / 3), abs=1e-15)
    assert relative_entropy([0.5, 0.5], [1, 0]) == np.inf


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(1, 4))
def test_detailed_balance_identity(seed, n, T):
    rng = np.random.default_rng(seed)
    c = rm.sparse_chain(n, T, rng)
    p = propagate_forward(c)
    assert np.allclose(p.sum(axis=1), 1, atol=1e-12) and np.all(p >= 0)
    for t, rk in enumerate(reverse_kernels(c)):
        lhs = p[t][:, None] * c.transitions[t]
        rhs = (p[t + 1][:, None] * rk.matrix).T
        live = p[t + 1] > 0
        assert np.max(np.abs(lhs - rhs)[:, live]) <= 1e-12
        assert np.allclose(rk.matrix.sum(axis=1), 1, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_klein_inequality(seed, n):
    rng = np.random.default_rng(seed)
    p, q = rm.prob_vector(n, rng), rm.prob_vector(n, rng)
    assert relative_entropy(p, q) > 0
    assert relative_entropy(p, p) == 0


def test_space_time_harmonic_examples():
    c = sym_chain(1)
    assert is_space_time_harmonic(constant_function(c), c).ok
    h = backward_harmonic(c, [2, 0])
    assert np.allclose(h[0], [1.5, 0.5])
    assert is_space_time_harmonic(h, c).ok
    bad = np.tile(np.arange(2.0), (2, 1))
    chk = is_space_time_harmonic(bad, c)
    assert not chk.ok and chk.residual == pytest.approx(0.25)


def test_reverse_harmonic_examples():
    c = sym_chain(1)
    assert is_reverse_harmonic(constant_function(c), c).ok
    theta = np.array([[2.0, 0.0], [1.5, 0.5]])
    assert is_reverse_harmonic(theta, c).ok
    assert not is_reverse_harmonic(np.tile(np.arange(2.0), (2, 1)), c).ok


def test_martingale_examples():
    c = sym_chain(1)
    assert martingale_verify(backward_harmonic(c, [2, 0]), c).ok
    assert martingale_verify(constant_function(c, 3.0), c).ok
    c2 = sym_chain(2, (0.9, 0.1))
    assert not martingale_verify(np.tile(np.arange(2.0), (3, 1)), c2).ok


def test_martingale_guard():
    c = ChainModel.homogeneous(np.full(11, 1 / 11), np.full((11, 11), 1 / 11), 6)
    with pytest.raises(SizeGuardError):
        martingale_verify(constant_function(c), c)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_harmonic_iff_martingale(seed, harmonic):
    rng = np.random.default_rng(seed)
    c = rm.chain(3, 3, rng)
    h = backward_harmonic(c, rng.normal(size=3))
    if not harmonic:
        h = h + 1e-3 * rng.normal(size=h.shape)
    assert is_space_time_harmonic(h, c, 1e-10).ok == martingale_verify(h, c, 1e-10).ok == harmonic
