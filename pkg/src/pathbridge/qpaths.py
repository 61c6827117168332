"""Quantum path spaces and the two quantum maximum-entropy problems.

A quantum path is a tuple ``(i_0, ..., i_T)`` of spectral projectors of
per-time observables ``X_t``; its weight is the nested trace

    tr(P_T E_{T-1}( ... P_1 E_0(P_0 sigma_0 P_0) P_1 ... ) P_T).

Weight tables reuse :class:`pathbridge.paths.PathTable`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfeasibleError, ModelError, PreconditionError
from .paths import PathTable, _guard, path_relative_entropy
from .quantum import (
    KrausMap,
    Observable,
    channel_distance,
    dag,
    density,
    nonselective_measure,
    pinv_sqrt,
    psd_sqrt,
    quantum_harmonic_check,
    quantum_relative_entropy,
)
from .chain import relative_entropy
from .reversal import augment_to_tp, t_rho


@dataclass(frozen=True)
class QuantumPathModel:
    sigma0: np.ndarray
    maps: tuple
    observables: tuple

    def __post_init__(self):
        object.__setattr__(self, "sigma0", density(self.sigma0))
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "observables", tuple(self.observables))
        d = self.sigma0.shape[0]
        if not self.maps:
            raise ModelError("a quantum path model needs at least one map")
        if len(self.observables) != len(self.maps) + 1:
            raise ModelError(f"need T+1 = {len(self.maps) + 1} observables, got {len(self.observables)}")
        for t, E in enumerate(self.maps):
            if E.dim != d:
                raise ModelError(f"map {t} acts on dimension {E.dim}, state has {d}")
            if not E.is_quantum_operation():
                raise ModelError(f"map {t} is not a quantum operation")
        for t, X in enumerate(self.observables):
            if X.dim != d:
                raise ModelError(f"observable {t} has dimension {X.dim}, state has {d}")
            P = np.array(X.projectors)
            if np.max(np.abs(P.sum(axis=0) - np.eye(d))) > 1e-10:
                raise ModelError(f"projectors of observable {t} do not sum to the identity")

    @property
    def T(self) -> int:
        return len(self.maps)

    @property
    def dim(self) -> int:
        return self.sigma0.shape[0]

    @property
    def dims(self) -> tuple:
        return tuple(len(X) for X in self.observables)

    def projectors(self, t: int) -> np.ndarray:
        return np.array(self.observables[t].projectors)


def _kraus_array(E: KrausMap) -> np.ndarray:
    return np.array(E.operators)


def _sandwich_batch(ops: np.ndarray, S: np.ndarray) -> np.ndarray:
    """``sum_k M_k S M_k^dag`` over the trailing two axes of ``S``."""
    return np.einsum("kab,...bc,kdc->...ad", ops, S, ops.conj())


def _select_batch(projs: np.ndarray, S: np.ndarray) -> np.ndarray:
    """New trailing path axis: ``out[..., j, :, :] = P_j S P_j``."""
    return np.einsum("jab,...bc,jcd->...jad", projs, S, projs)


def _trace_table(S: np.ndarray) -> np.ndarray:
    return np.einsum("...aa->...", S).real


def path_weights(model: QuantumPathModel) -> PathTable:
    _guard(model.dims)
    S = _select_batch(model.projectors(0), model.sigma0)
    for t, E in enumerate(model.maps):
        S = _select_batch(model.projectors(t + 1), _sandwich_batch(_kraus_array(E), S))
    return PathTable(_trace_table(S))


@dataclass(frozen=True)
class ConditionedTrajectory:
    states: tuple
    hat_maps: tuple

    def marginals(self, model: QuantumPathModel) -> list:
        """``w_{i_t} = tr(P_i sigma_hat_t P_i)`` for each time."""
        return [np.array([np.trace(P @ s @ P).real for P in X.projectors])
                for s, X in zip(self.states, model.observables)]


def conditioned_maps(model: QuantumPathModel) -> list:
    """Maps with Kraus operators ``P_j(t+1) M_k(t)``."""
    return [KrausMap([P @ M for P in model.observables[t + 1].projectors for M in E.operators])
            for t, E in enumerate(model.maps)]


def dephased_maps(model: QuantumPathModel) -> list:
    """Maps with Kraus operators ``P_j(t+1) M_k(t) P_i(t)``: the conditioned map
    preceded by the non-selective measurement of ``X_t``."""
    return [KrausMap([P @ M @ Q for P in model.observables[t + 1].projectors for M in E.operators
                      for Q in model.observables[t].projectors])
            for t, E in enumerate(model.maps)]


def conditioned_trajectory(model: QuantumPathModel) -> ConditionedTrajectory:
    hat = conditioned_maps(model)
    states = [nonselective_measure(model.sigma0, model.observables[0])]
    for E in hat:
        states.append(E(states[-1]))
    return ConditionedTrajectory(tuple(states), tuple(hat))


def backward_weights(model: QuantumPathModel, traj: ConditionedTrajectory | None = None,
                     cutoff: float | None = None) -> PathTable:
    """Weights evaluated backwards from ``sigma_hat_T`` through the reversals
    of the conditioned maps at ``sigma_hat_t`` (no augmentation)."""
    _guard(model.dims)
    traj = conditioned_trajectory(model) if traj is None else traj
    T = model.T
    S = _select_batch(model.projectors(T), traj.states[T])  # axes: i_T
    for t in range(T - 1, -1, -1):
        R = _kraus_array(t_rho(traj.hat_maps[t], traj.states[t], cutoff))
        S = _sandwich_batch(R, S)
        # prepend the i_t axis
        S = np.moveaxis(_select_batch(model.projectors(t), S), -3, 0)
    return PathTable(_trace_table(S))


# --- decompositions on weight tables -------------------------------------------


def qpath_relative_entropy(W1: PathTable, W2: PathTable) -> float:
    return path_relative_entropy(W1, W2)


@dataclass(frozen=True)
class QDecomposition:
    conditional_term: float
    marginal_term: float
    total: float

    @property
    def term_sum(self) -> float:
        return self.conditional_term + self.marginal_term


def _split(W1: PathTable, W2: PathTable, axis: int) -> QDecomposition:
    total = qpath_relative_entropy(W1, W2)
    m1, m2 = W1.marginal(axis), W2.marginal(axis)
    marginal = relative_entropy(m1, m2)
    if not np.isfinite(total):
        return QDecomposition(float("inf"), marginal, total)
    a = np.moveaxis(W1.weights, axis, 0)
    b = np.moveaxis(W2.weights, axis, 0)
    cond = 0.0
    for i in np.flatnonzero(m1 > 0):
        cond += m1[i] * relative_entropy(a[i] / m1[i], b[i] / m2[i])
    return QDecomposition(cond, marginal, total)


def decompose_qback(W1: PathTable, W2: PathTable) -> QDecomposition:
    """``D = sum_iT w1(i_T) D(w1(.|i_T) || w2(.|i_T)) + D(w1_T || w2_T)``."""
    return _split(W1, W2, W1.T)


def decompose_qforward(W1: PathTable, W2: PathTable) -> QDecomposition:
    """``D = D(w1_0 || w2_0) + sum_i0 w1(i_0) D(w1(.|i_0) || w2(.|i_0))``."""
    return _split(W1, W2, 0)


# --- QMEP1: prescribed final state ---------------------------------------------


def _commutes(a, b, tol=1e-10) -> bool:
    return float(np.max(np.abs(a @ b - b @ a))) <= tol


def eigen_observable(rho) -> Observable:
    """Rank-one spectral family of ``rho`` in ascending eigenvalue order."""
    w, v = np.linalg.eigh((np.asarray(rho) + dag(np.asarray(rho))) / 2)
    return Observable.from_basis(v, w)


def compatible_final(X: Observable, rho_bar) -> bool:
    return X.is_nondegenerate() and _commutes(X.matrix, rho_bar) and all(_commutes(P, rho_bar) for P in X.projectors)


@dataclass
class QMEP1Result:
    model: QuantumPathModel  # solution process (initial state rho_hat_0, maps F_t)
    prior: QuantumPathModel  # prior with the final observable actually used
    cost: float
    rho_hat: list
    sigma_hat: list
    N: list
    Y: list
    harmonic_residuals: list
    replaced_final_observable: bool
    raw_maps: list  # F_t before augmentation


def qmep1_solve(model: QuantumPathModel, rho_bar_T, cutoff: float | None = None) -> QMEP1Result:
    """Closest path law (in relative entropy) whose final conditioned state is ``rho_bar_T``.

    The reverse-time mechanism is inherited from the prior: ``rho_hat_t`` is
    obtained by running ``rho_bar_T`` backwards through the reversals of the
    dephased conditioned maps, and the forward maps are the transformed
    operators ``N_{t+1} K N_t^+`` with ``N_t = rho_hat_t^(1/2) sigma_hat_t^(-1/2)``.
    """
    rho_bar = density(rho_bar_T)
    T = model.T
    obs = list(model.observables)
    replaced = not compatible_final(obs[T], rho_bar)
    if replaced:
        obs[T] = eigen_observable(rho_bar)
    prior = QuantumPathModel(model.sigma0, model.maps, tuple(obs))
    sigma_hat = list(conditioned_trajectory(prior).states)

    cost = quantum_relative_entropy(rho_bar, sigma_hat[T])
    if not np.isfinite(cost):
        raise InfeasibleError("support of the target final state is not contained in the conditioned prior state",
                              cost=float("inf"))

    maps = dephased_maps(prior)
    rho_hat = [None] * (T + 1)
    rho_hat[T] = rho_bar
    for t in range(T - 1, -1, -1):
        x = t_rho(maps[t], sigma_hat[t], cutoff)(rho_hat[t + 1])
        rho_hat[t] = (x + dag(x)) / 2

    N = [psd_sqrt(r) @ pinv_sqrt(s, cutoff) for r, s in zip(rho_hat, sigma_hat)]
    Y = [dag(n) @ n for n in N]
    harm = quantum_harmonic_check(Y, maps)
    raw = [KrausMap([N[t + 1] @ K @ np.linalg.pinv(N[t]) for K in E.operators]) for t, E in enumerate(maps)]
    solution = QuantumPathModel(rho_hat[0], tuple(augment_to_tp(F) for F in raw), tuple(obs))
    return QMEP1Result(solution, prior, cost, rho_hat, sigma_hat, N, Y, harm.residuals, replaced, raw)


def conditioned_final(model: QuantumPathModel) -> np.ndarray:
    return conditioned_trajectory(model).states[-1]


@dataclass
class CompetitorReport:
    trials: int
    cost: float
    min_gap: float
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def qmep1_competitors(result: QMEP1Result, trials: int, seed: int, tol: float = 1e-10,
                      alpha: float = 1.0) -> CompetitorReport:
    """Random weight tables with the prescribed final marginal: each keeps
    ``w(i_T)`` from ``rho_bar_T`` and draws the past given ``i_T`` at random
    on the prior's support."""
    prior = path_weights(result.prior).weights
    T = prior.ndim - 1
    r = np.array([np.trace(P @ result.rho_hat[T]).real for P in result.prior.observables[T].projectors])
    r = np.clip(r, 0, None)
    rng = np.random.default_rng(seed)
    past = np.moveaxis(prior, T, 0).reshape(prior.shape[T], -1)
    gaps, violations = [], []
    for trial in range(trials):
        table = np.zeros_like(past)
        for j in np.flatnonzero(r > 0):
            idx = np.flatnonzero(past[j] > 0)
            table[j, idx] = r[j] * rng.dirichlet(np.full(idx.size, alpha))
        comp = np.moveaxis(table.reshape((prior.shape[T],) + prior.shape[:T]), 0, T)
        gap = relative_entropy(comp, prior) - result.cost
        gaps.append(gap)
        if gap < -tol:
            violations.append((trial, gap))
    return CompetitorReport(trials, result.cost, float(min(gaps)), violations)


# --- QMEP2: prescribed initial state ---------------------------------------------


@dataclass
class QMEP2Result:
    model: QuantumPathModel
    cost: float
    bound: float
    path_entropy: float
    independence_residual: float | None


def qmep2_solve(model: QuantumPathModel, rho_bar_0, alt_observables: Sequence[Observable] | None = None) -> QMEP2Result:
    """Keep the prior's forward maps and start from ``rho_bar_0``.

    With a non-degenerate ``X_0`` the conditional law of the future given
    ``i_0`` does not depend on the initial state, so the path cost reduces to
    the divergence of the dephased initial states. ``alt_observables``
    (another family with the same ``X_0``) is used to confirm that the
    solution maps do not depend on the interior observables.
    """
    if not model.observables[0].is_nondegenerate():
        raise PreconditionError("X_0 must have non-degenerate spectrum")
    rho_bar = density(rho_bar_0)
    solution = QuantumPathModel(rho_bar, model.maps, model.observables)
    hat_rho = nonselective_measure(rho_bar, model.observables[0])
    hat_sigma = nonselective_measure(model.sigma0, model.observables[0])
    cost = quantum_relative_entropy(hat_rho, hat_sigma)
    if not np.isfinite(cost):
        raise InfeasibleError("dephased target is not supported by the dephased prior state", cost=float("inf"))
    bound = quantum_relative_entropy(rho_bar, model.sigma0)
    path_kl = qpath_relative_entropy(path_weights(solution), path_weights(model))
    resid = None
    if alt_observables is not None:
        alt = QuantumPathModel(model.sigma0, model.maps, tuple(alt_observables))
        other = qmep2_solve(alt, rho_bar).model
        resid = max(channel_distance(a, b) for a, b in zip(solution.maps, other.maps))
        resid = max(resid, float(np.max(np.abs(solution.sigma0 - other.sigma0))))
    return QMEP2Result(solution, cost, bound, path_kl, resid)
