"""Finite Markov chain kinematics.

States are the integers ``0..n-1``. A chain over the horizon ``[0, T]`` is an
initial distribution plus ``T`` row-stochastic matrices, ``transitions[t][i, j]``
being the probability of moving from ``i`` at time ``t`` to ``j`` at ``t + 1``.
All logarithms are natural.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ModelError, SizeGuardError

EPS_STOCH = 1e-12
MARTINGALE_GUARD = 10**6


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def check_prob_vector(p, tol: float = EPS_STOCH, name: str = "distribution") -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ModelError(f"{name}: expected a vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ModelError(f"{name}: non-finite entries")
    if np.any(p < 0):
        raise ModelError(f"{name}: negative entries")
    if abs(p.sum() - 1.0) > tol:
        raise ModelError(f"{name}: entries sum to {p.sum():.15g}, not 1")
    return p


def check_stochastic(P, tol: float = EPS_STOCH, name: str = "transition") -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ModelError(f"{name}: expected a square matrix, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ModelError(f"{name}: non-finite entries")
    if np.any(P < 0):
        raise ModelError(f"{name}: negative entries")
    bad = np.flatnonzero(np.abs(P.sum(axis=1) - 1.0) > tol)
    if bad.size:
        raise ModelError(f"{name}: row-sum violated at row {bad[0]} (sums to {P[bad[0]].sum():.15g}, not 1)")
    return P


@dataclass(frozen=True)
class ChainModel:
    """Initial law and time-indexed transition matrices of a finite chain."""

    initial: np.ndarray
    transitions: tuple
    tol: float = field(default=EPS_STOCH, compare=False)

    def __post_init__(self):
        p0 = check_prob_vector(self.initial, self.tol, "initial")
        mats = tuple(self.transitions)
        if len(mats) < 1:
            raise ModelError("horizon T must be at least 1")
        n = p0.size
        frozen = []
        for t, P in enumerate(mats):
            P = check_stochastic(P, self.tol, f"transitions[{t}]")
            if P.shape != (n, n):
                raise ModelError(f"transitions[{t}] has shape {P.shape}, expected {(n, n)}")
            frozen.append(_frozen(P))
        object.__setattr__(self, "initial", _frozen(p0))
        object.__setattr__(self, "transitions", tuple(frozen))

    @property
    def T(self) -> int:
        return len(self.transitions)

    @property
    def n(self) -> int:
        return self.initial.size

    @classmethod
    def homogeneous(cls, initial, P, T: int) -> "ChainModel":
        return cls(initial, (P,) * T)

    def with_initial(self, initial) -> "ChainModel":
        return ChainModel(initial, self.transitions, self.tol)

    def kernel(self, s: int = 0, t: int | None = None) -> np.ndarray:
        """Multi-step kernel ``P(s) ... P(t-1)``; defaults to the full horizon."""
        t = self.T if t is None else t
        G = np.eye(self.n)
        for P in self.transitions[s:t]:
            G = G @ P
        return G


class Check(NamedTuple):
    ok: bool
    residual: float


@dataclass(frozen=True)
class ReverseKernel:
    """``matrix[j, i] = P(X(t) = i | X(t+1) = j)``; ``arbitrary[j]`` marks rows
    whose conditioning state has zero probability (filled uniformly)."""

    matrix: np.ndarray
    arbitrary: np.ndarray


def propagate_forward(chain: ChainModel) -> np.ndarray:
    """Marginals ``p(0..T)`` as a ``(T+1, n)`` array."""
    out = np.empty((chain.T + 1, chain.n))
    out[0] = chain.initial
    for t, P in enumerate(chain.transitions):
        out[t + 1] = P.T @ out[t]
    return out


def reverse_kernel(chain: ChainModel, t: int, marginals: np.ndarray | None = None) -> ReverseKernel:
    if not 0 <= t < chain.T:
        raise IndexError(f"time index {t} outside [0, {chain.T})")
    p = propagate_forward(chain) if marginals is None else marginals
    joint = p[t][:, None] * chain.transitions[t]  # joint[i, j] = P(X_t=i, X_t+1=j)
    nxt = p[t + 1]
    arbitrary = nxt <= 0.0
    q = np.empty_like(joint.T)
    live = ~arbitrary
    q[live] = joint.T[live] / nxt[live, None]
    q[arbitrary] = 1.0 / chain.n
    q.setflags(write=False)
    arbitrary.setflags(write=False)
    return ReverseKernel(q, arbitrary)


def reverse_kernels(chain: ChainModel) -> list[ReverseKernel]:
    p = propagate_forward(chain)
    return [reverse_kernel(chain, t, p) for t in range(chain.T)]


def relative_entropy(p, q) -> float:
    """Kullback-Leibler divergence ``D(p||q)``; ``inf`` when supp(p) is not in supp(q)."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {q.shape}")
    pos = p > 0
    if np.any(q[pos] <= 0):
        return float("inf")
    val = float(np.sum(p[pos] * np.log(p[pos] / q[pos])))
    return max(val, 0.0)


def _as_table(h, chain: ChainModel) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape != (chain.T + 1, chain.n):
        raise ModelError(f"space-time function has shape {h.shape}, expected {(chain.T + 1, chain.n)}")
    return h


def harmonic_residuals(h, chain: ChainModel) -> np.ndarray:
    """``h(t, i) - sum_j p_ij(t) h(t+1, j)`` as a ``(T, n)`` array."""
    h = _as_table(h, chain)
    return np.stack([h[t] - P @ h[t + 1] for t, P in enumerate(chain.transitions)])


def is_space_time_harmonic(h, chain: ChainModel, tol: float = 1e-12) -> Check:
    r = float(np.max(np.abs(harmonic_residuals(h, chain))))
    return Check(r <= tol, r)


def is_reverse_harmonic(theta, chain: ChainModel, tol: float = 1e-12) -> Check:
    """Residual of ``theta(t+1, j) = sum_i q_ji(t) theta(t, i)`` over the
    reverse-kernel rows that are not flagged arbitrary."""
    theta = _as_table(theta, chain)
    worst = 0.0
    for t, rk in enumerate(reverse_kernels(chain)):
        r = np.abs(theta[t + 1] - rk.matrix @ theta[t])[~rk.arbitrary]
        if r.size:
            worst = max(worst, float(r.max()))
    return Check(worst <= tol, worst)


@dataclass(frozen=True)
class MartingaleReport:
    violations: list  # (t, history, conditional expectation, h(t, i_t))
    histories_checked: int

    @property
    def ok(self) -> bool:
        return not self.violations


def martingale_verify(h, chain: ChainModel, tol: float = 1e-12) -> MartingaleReport:
    """Check ``E[h(t+1, X(t+1)) | X(0..t)] = h(t, X(t))`` on every history of
    positive probability, by exhaustive enumeration of trajectory prefixes."""
    h = _as_table(h, chain)
    n, T = chain.n, chain.T
    if n**T > MARTINGALE_GUARD:
        raise SizeGuardError(f"|X|^T = {n**T} exceeds the enumeration guard {MARTINGALE_GUARD}")
    violations = []
    checked = 0
    # prefix[(i_0..i_t)] = P(X(0..t) = i_0..i_t)
    prefix = np.array(chain.initial)
    for t in range(T):
        extended = prefix[..., None] * chain.transitions[t].reshape((1,) * t + (n, n))
        cond_num = np.tensordot(extended, h[t + 1], axes=([t + 1], [0]))
        for hist in itertools.product(range(n), repeat=t + 1):
            mass = prefix[hist]
            if mass <= 0:
                continue
            checked += 1
            expected = cond_num[hist] / mass
            actual = h[t, hist[-1]]
            if abs(expected - actual) > tol:
                violations.append((t, hist, float(expected), float(actual)))
        prefix = extended
    return MartingaleReport(violations, checked)


def constant_function(chain: ChainModel, c: float = 1.0) -> np.ndarray:
    return np.full((chain.T + 1, chain.n), float(c))


def backward_harmonic(chain: ChainModel, terminal: Sequence[float]) -> np.ndarray:
    """The space-time harmonic function with prescribed values at time ``T``."""
    h = np.empty((chain.T + 1, chain.n))
    h[-1] = terminal
    for t in range(chain.T - 1, -1, -1):
        h[t] = chain.transitions[t] @ h[t + 1]
    return h
