"""Schroedinger bridges for finite Markov chains.

Given a prior chain with transitions ``pi_ij(t)`` and marginals ``pi(t)``:

* ``mep1_solution`` fixes the final marginal and keeps the prior's reverse-time
  kernels;
* ``mep2_solution`` fixes the initial marginal and keeps the prior's forward
  kernels;
* ``mep3_bridge`` fixes both and reweights the prior transitions by a
  space-time harmonic function ``phi`` obtained from the Schroedinger system.

The Schroedinger system only involves the endpoint kernel ``G = P(0)...P(T-1)``,
so it is solved as a diagonal scaling of ``G`` by alternating proportional
fitting of the two endpoint potentials.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .chain import (
    ChainModel,
    Check,
    check_prob_vector,
    is_reverse_harmonic,
    is_space_time_harmonic,
    propagate_forward,
    relative_entropy,
    reverse_kernels,
)
from .errors import ConvergenceError, DomainError, InfeasibleError, ModelError

NORMALIZATION = "max phi(T) = 1"


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-12
    max_iter: int = 100_000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class HarmonicPair:
    """``phi`` (harmonic) and ``phihat`` (co-harmonic) as ``(T+1, n)`` tables."""

    phi: np.ndarray
    phihat: np.ndarray
    normalization: str = NORMALIZATION
    iterations: int = 0
    change: float = 0.0

    def scaled(self, c: float) -> "HarmonicPair":
        return HarmonicPair(c * self.phi, self.phihat / c, f"scaled by {c!r}", self.iterations, self.change)


@dataclass
class BridgeSolution:
    kind: str
    chain: ChainModel
    marginals: np.ndarray
    pair: HarmonicPair | None
    unreachable: np.ndarray  # (T, n) rows filled uniformly because phi or p-hat vanished
    diagnostics: dict = field(default_factory=dict)


def _support_check(p, ref, what):
    if np.any((p > 0) & (ref <= 0)):
        raise InfeasibleError(f"{what} puts mass where the prior has none")


def schrodinger_residuals(prior: ChainModel, pair: HarmonicPair, p0, p1) -> dict:
    """Sup-norm residuals of the four defining relations of the system."""
    phi, phihat = pair.phi, pair.phihat
    T = prior.T
    return {
        "harmonic": max(float(np.max(np.abs(phi[t] - P @ phi[t + 1]))) for t, P in enumerate(prior.transitions)),
        "coharmonic": max(float(np.max(np.abs(phihat[t + 1] - P.T @ phihat[t]))) for t, P in enumerate(prior.transitions)),
        "initial": float(np.max(np.abs(phi[0] * phihat[0] - p0))),
        "final": float(np.max(np.abs(phi[T] * phihat[T] - p1))),
    }


def solve_schrodinger_system(prior: ChainModel, p0, p1, cfg: SolverConfig = SolverConfig()) -> HarmonicPair:
    p0 = check_prob_vector(p0, name="p0")
    p1 = check_prob_vector(p1, name="p1")
    if p0.size != prior.n or p1.size != prior.n:
        raise ModelError("endpoint marginals do not match the state space")
    _support_check(p0, prior.initial, "p0")
    G = prior.kernel()
    s0, s1 = p0 > 0, p1 > 0

    phi_T = s1.astype(float)
    change = np.inf
    it = 0
    while it < cfg.max_iter:
        it += 1
        phi_0 = G @ phi_T
        if np.any(phi_0[s0] <= 0):
            raise InfeasibleError("some initial state cannot reach the final support")
        phihat_0 = np.where(s0, p0 / np.where(s0, phi_0, 1.0), 0.0)
        phihat_T = G.T @ phihat_0
        if np.any(phihat_T[s1] <= 0):
            raise InfeasibleError("some final state is unreachable from the initial support")
        new = np.where(s1, p1 / np.where(s1, phihat_T, 1.0), 0.0)
        new /= new.max()
        change = float(np.max(np.abs(new - phi_T)))
        phi_T = new
        if change < cfg.tol:
            break
    else:
        raise ConvergenceError(f"no convergence in {cfg.max_iter} sweeps (last change {change:.3g})", it, change)

    T, n = prior.T, prior.n
    phi = np.empty((T + 1, n))
    phihat = np.empty((T + 1, n))
    phi[T] = phi_T
    for t in range(T - 1, -1, -1):
        phi[t] = prior.transitions[t] @ phi[t + 1]
    phihat[0] = np.where(s0, p0 / np.where(s0, phi[0], 1.0), 0.0)
    for t, P in enumerate(prior.transitions):
        phihat[t + 1] = P.T @ phihat[t]
    return HarmonicPair(phi, phihat, NORMALIZATION, it, change)


def _transform(prior: ChainModel, phi: np.ndarray) -> tuple[tuple, np.ndarray]:
    """Transitions ``pi_ij(t) phi(t+1, j) / phi(t, i)``; rows with ``phi(t, i) = 0``
    become uniform and are flagged."""
    T, n = prior.T, prior.n
    mats = []
    flags = np.zeros((T, n), dtype=bool)
    for t, P in enumerate(prior.transitions):
        live = phi[t] > 0
        Q = np.full((n, n), 1.0 / n)
        Q[live] = P[live] * phi[t + 1][None, :] / phi[t][live, None]
        flags[t] = ~live
        mats.append(Q)
    return tuple(mats), flags


def mep3_bridge(prior: ChainModel, p0, p1, cfg: SolverConfig = SolverConfig()) -> BridgeSolution:
    pair = solve_schrodinger_system(prior, p0, p1, cfg)
    mats, flags = _transform(prior, pair.phi)
    sol = ChainModel(p0, mats)
    marg = propagate_forward(sol)
    res = schrodinger_residuals(prior, pair, np.asarray(p0, float), np.asarray(p1, float))
    diag = {
        "iterations": pair.iterations,
        "final_change": pair.change,
        "residuals": res,
        "marginal_error": float(np.max(np.abs(marg[-1] - np.asarray(p1, float)))),
        "flagged_rows": int(flags.sum()),
    }
    return BridgeSolution("mep3", sol, marg, pair, flags, diag)


def _prior_pair(prior_marg: np.ndarray, phi: np.ndarray, phihat: np.ndarray) -> HarmonicPair | None:
    if np.any(prior_marg <= 0):
        return None
    return HarmonicPair(phi, phihat, "closed form")


def mep1_solution(prior: ChainModel, p1) -> BridgeSolution:
    """Final marginal ``p1``; reverse-time kernels equal to the prior's."""
    p1 = check_prob_vector(p1, name="p1")
    pi = propagate_forward(prior)
    _support_check(p1, pi[-1], "p1")
    rks = reverse_kernels(prior)
    T, n = prior.T, prior.n
    marg = np.empty((T + 1, n))
    marg[T] = p1
    for t in range(T - 1, -1, -1):
        marg[t] = rks[t].matrix.T @ marg[t + 1]
    mats = []
    flags = np.zeros((T, n), dtype=bool)
    for t in range(T):
        # joint[i, j] = p(t+1)_j q_ji(t)
        joint = (marg[t + 1][:, None] * rks[t].matrix).T
        live = marg[t] > 0
        Q = np.full((n, n), 1.0 / n)
        Q[live] = joint[live] / marg[t][live, None]
        flags[t] = ~live
        mats.append(Q)
    sol = ChainModel(marg[0], tuple(mats))
    with np.errstate(divide="ignore", invalid="ignore"):
        pair = _prior_pair(pi, marg / pi, pi.copy())
    diag = {"flagged_rows": int(flags.sum()), "marginal_error": float(np.max(np.abs(propagate_forward(sol)[-1] - p1)))}
    return BridgeSolution("mep1", sol, propagate_forward(sol), pair, flags, diag)


def mep2_solution(prior: ChainModel, p0) -> BridgeSolution:
    """Initial marginal ``p0``; forward kernels equal to the prior's."""
    p0 = check_prob_vector(p0, name="p0")
    _support_check(p0, prior.initial, "p0")
    sol = prior.with_initial(p0)
    marg = propagate_forward(sol)
    pi = propagate_forward(prior)
    with np.errstate(divide="ignore", invalid="ignore"):
        pair = _prior_pair(pi, np.ones_like(pi), marg.copy())
    flags = np.zeros((prior.T, prior.n), dtype=bool)
    return BridgeSolution("mep2", sol, marg, pair, flags, {"flagged_rows": 0})


class Existence(str, enum.Enum):
    UNIQUE = "uniqueness guaranteed"
    SOLVABLE = "solvable, uniqueness not guaranteed"
    POSSIBLY_INFEASIBLE = "possibly infeasible"


@dataclass(frozen=True)
class Diagnosis:
    status: Existence
    final_positive: bool
    kernel_positive: bool
    transport_feasible: bool
    message: str


def _coupling_feasible(G: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> bool:
    """Whether some coupling of ``p0`` and ``p1`` lives on the support of ``G``."""
    rows, cols = np.nonzero((G > 0) & (p0[:, None] > 0) & (p1[None, :] > 0))
    if rows.size == 0:
        return False
    n = G.shape[0]
    A = np.zeros((2 * n, rows.size))
    A[rows, np.arange(rows.size)] = 1.0
    A[n + cols, np.arange(rows.size)] = 1.0
    res = linprog(np.zeros(rows.size), A_eq=A, b_eq=np.concatenate([p0, p1]), bounds=(0, None), method="highs")
    return res.status == 0


def existence_check(prior: ChainModel, p0, p1) -> Diagnosis:
    p1 = np.asarray(p1, dtype=float)
    G = prior.kernel()
    final_pos = bool(np.all(p1 > 0))
    kernel_pos = bool(np.all(G > 0))
    if p0 is None:
        feasible = bool(np.all(propagate_forward(prior)[-1][p1 > 0] > 0))
    else:
        p0 = np.asarray(p0, dtype=float)
        feasible = bool(np.all(prior.initial[p0 > 0] > 0)) and _coupling_feasible(G, p0, p1)
    if not feasible:
        return Diagnosis(Existence.POSSIBLY_INFEASIBLE, final_pos, kernel_pos, False,
                         "the zero pattern of the endpoint kernel blocks transport between the marginals")
    if final_pos and kernel_pos:
        return Diagnosis(Existence.UNIQUE, True, True, True,
                         "final marginal and endpoint kernel are strictly positive")
    why = "final marginal has zeros" if not final_pos else "endpoint kernel has zeros"
    return Diagnosis(Existence.SOLVABLE, final_pos, kernel_pos, True, f"feasible, but {why}")


def _xlogy(x, y) -> float:
    pos = x > 0
    return float(np.sum(x[pos] * np.log(y[pos])))


def ld_exponent(kind: str, prior: ChainModel, p0=None, p1=None, cfg: SolverConfig = SolverConfig(),
                pair: HarmonicPair | None = None) -> float:
    """Decay rate of the probability that the empirical path law satisfies the
    marginal constraint(s), i.e. the minimal relative entropy of the problem."""
    pi = propagate_forward(prior)
    if kind == "mep1":
        _support_check(np.asarray(p1), pi[-1], "p1")
        return relative_entropy(p1, pi[-1])
    if kind == "mep2":
        _support_check(np.asarray(p0), pi[0], "p0")
        return relative_entropy(p0, pi[0])
    if kind != "mep3":
        raise ValueError(f"unknown problem kind {kind!r}")
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    pair = solve_schrodinger_system(prior, p0, p1, cfg) if pair is None else pair
    pos = p0 > 0
    first = float(np.sum(p0[pos] * np.log(p0[pos] / (pi[0][pos] * pair.phi[0][pos]))))
    return first + _xlogy(p1, pair.phi[-1])


@dataclass(frozen=True)
class Factorization:
    phi: np.ndarray
    xi: np.ndarray
    identity_residual: float
    forward: Check
    reverse: Check

    @property
    def ok(self) -> bool:
        return self.forward.ok and self.reverse.ok


def harmonic_factorization(bridge: BridgeSolution, prior: ChainModel, tol: float = 1e-10) -> Factorization:
    """Split the bridge marginals as ``phi * xi * pi`` with ``phi`` harmonic for
    the prior and ``xi`` harmonic for the prior's reverse-time kernels."""
    pi = propagate_forward(prior)
    if np.any(pi <= 0):
        raise DomainError("prior marginals must be strictly positive")
    if bridge.pair is None:
        raise DomainError("bridge carries no harmonic pair")
    phi = bridge.pair.phi
    xi = bridge.pair.phihat / pi
    resid = float(np.max(np.abs(bridge.marginals - phi * xi * pi)))
    return Factorization(phi, xi, resid, is_space_time_harmonic(phi, prior, tol), is_reverse_harmonic(xi, prior, tol))
