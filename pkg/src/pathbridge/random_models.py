"""Random instance generators for tests, oracles and experiment scripts."""
from __future__ import annotations

import numpy as np

from .chain import ChainModel
from .quantum import KrausMap, Observable, dag


def prob_vector(n: int, rng: np.random.Generator, alpha: float = 1.0) -> np.ndarray:
    return rng.dirichlet(np.full(n, alpha))


def stochastic_matrix(n: int, rng: np.random.Generator, alpha: float = 1.0) -> np.ndarray:
    return rng.dirichlet(np.full(n, alpha), size=n)


def chain(n: int, T: int, rng: np.random.Generator, alpha: float = 1.0) -> ChainModel:
    """Random time-inhomogeneous chain with strictly positive (Dirichlet) rows."""
    return ChainModel(prob_vector(n, rng, alpha), tuple(stochastic_matrix(n, rng, alpha) for _ in range(T)))


def sparse_chain(n: int, T: int, rng: np.random.Generator, zero_frac: float = 0.3) -> ChainModel:
    """Random chain with structural zeros (each row keeps at least one entry)."""
    mats = []
    for _ in range(T):
        P = rng.dirichlet(np.ones(n), size=n)
        mask = rng.random((n, n)) < zero_frac
        mask[np.arange(n), rng.integers(0, n, size=n)] = False
        P = np.where(mask, 0.0, P)
        mats.append(P / P.sum(axis=1, keepdims=True))
    p0 = rng.dirichlet(np.ones(n))
    return ChainModel(p0, tuple(mats))


def unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def kraus_channel(d: int, k: int, rng: np.random.Generator) -> KrausMap:
    """Random TPCP map with ``k`` Kraus operators (blocks of a random isometry)."""
    V = isometry(k * d, d, rng)
    return KrausMap([V[j * d:(j + 1) * d] for j in range(k)])


def density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ dag(g)
    rho = (rho + dag(rho)) / 2
    return rho / np.trace(rho).real


def hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + dag(g)) / 2


def observable(d: int, rng: np.random.Generator) -> Observable:
    """Random non-degenerate observable (rank-one spectral projectors)."""
    return Observable.from_basis(unitary(d, rng), np.arange(d, dtype=float))
