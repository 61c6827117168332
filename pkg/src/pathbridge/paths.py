"""Exhaustive path-space oracle and desk-scale Monte Carlo.

Path laws are stored densely as arrays with one axis per time, so
``weights[i_0, ..., i_T]`` is the probability of the trajectory. Everything
here is meant for small instances that can be checked by enumeration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bridge
from .chain import ChainModel, propagate_forward, relative_entropy, reverse_kernels
from .errors import GenerationError, InfeasibleError, ModelError, SizeGuardError

PATH_GUARD = 10**7


@dataclass(frozen=True)
class PathTable:
    """Dense joint law over index tuples, one axis per time."""

    weights: np.ndarray

    @property
    def dims(self) -> tuple:
        return self.weights.shape

    @property
    def T(self) -> int:
        return self.weights.ndim - 1

    def total(self) -> float:
        return float(self.weights.sum())

    def marginal(self, t: int) -> np.ndarray:
        axes = tuple(a for a in range(self.weights.ndim) if a != t)
        return self.weights.sum(axis=axes)

    def pair_marginal(self, s: int, t: int) -> np.ndarray:
        """Joint law of the indices at times ``s < t`` (rows: time ``s``)."""
        axes = tuple(a for a in range(self.weights.ndim) if a not in (s, t))
        return self.weights.sum(axis=axes)


WeightTable = PathTable


def _guard(dims):
    size = int(np.prod(dims, dtype=object))
    if size > PATH_GUARD:
        raise SizeGuardError(f"path table would have {size} entries (guard {PATH_GUARD})")


def enumerate_path_distribution(chain: ChainModel, check: bool = False, tol: float = 1e-12) -> PathTable:
    """Path law from the forward product ``p0(i_0) prod_t p_{i_t i_t+1}(t)``.

    With ``check=True`` the backward product through the reverse-time kernels
    is evaluated too and the two must agree entrywise within ``tol``.
    """
    n, T = chain.n, chain.T
    _guard((n,) * (T + 1))
    w = np.array(chain.initial)
    for t, P in enumerate(chain.transitions):
        w = w[..., None] * P.reshape((1,) * t + (n, n))
    table = PathTable(w)
    if check:
        gap = float(np.max(np.abs(w - backward_path_distribution(chain).weights)))
        if gap > tol:
            raise ModelError(f"forward and backward factorizations differ by {gap:.3g}")
    return table


def backward_path_distribution(chain: ChainModel) -> PathTable:
    """Path law from ``p_{i_T}(T) prod_t q_{i_t+1 i_t}(t)``."""
    n, T = chain.n, chain.T
    _guard((n,) * (T + 1))
    final = propagate_forward(chain)[-1]
    rks = reverse_kernels(chain)
    w = final.reshape((n,))
    # build from the last axis backwards: w[i_t, ..., i_T]
    for t in range(T - 1, -1, -1):
        q = rks[t].matrix  # q[j, i] = P(X_t = i | X_t+1 = j)
        w = q.T.reshape((n, n) + (1,) * (T - 1 - t)) * w[None, ...]
    return PathTable(w)


def path_relative_entropy(P: PathTable, Q: PathTable) -> float:
    if P.dims != Q.dims:
        raise ModelError(f"path tables have different shapes {P.dims} and {Q.dims}")
    return relative_entropy(P.weights, Q.weights)


@dataclass(frozen=True)
class Decomposition:
    transition_terms: np.ndarray | None
    endpoint_term: float
    total: float

    @property
    def term_sum(self) -> float:
        if self.transition_terms is None:
            return float("inf")
        return float(self.transition_terms.sum() + self.endpoint_term)


def _conditional_terms(joint_p: np.ndarray, joint_q: np.ndarray, cond_p: np.ndarray, cond_q: np.ndarray) -> float:
    """``sum_j p(j) D(p(.|j) || q(.|j))`` where ``joint[j, i]`` holds ``P(cond=j, other=i)``."""
    term = 0.0
    for j in np.flatnonzero(cond_p > 0):
        term += cond_p[j] * relative_entropy(joint_p[j] / cond_p[j], joint_q[j] / cond_q[j])
    return term


def decompose_backward(P: PathTable, Q: PathTable) -> Decomposition:
    """Split ``D(P||Q)`` into reverse-kernel terms (one per step) plus the
    final-marginal term. Both laws must be Markov for the split to be exact."""
    total = path_relative_entropy(P, Q)
    if not np.isfinite(total):
        return Decomposition(None, float("inf"), total)
    terms = np.empty(P.T)
    for k in range(1, P.T + 1):
        jp = P.pair_marginal(k - 1, k).T  # [i_k, i_k-1]
        jq = Q.pair_marginal(k - 1, k).T
        terms[k - 1] = _conditional_terms(jp, jq, P.marginal(k), Q.marginal(k))
    return Decomposition(terms, relative_entropy(P.marginal(P.T), Q.marginal(Q.T)), total)


def decompose_forward(P: PathTable, Q: PathTable) -> Decomposition:
    """Split ``D(P||Q)`` into the initial-marginal term plus forward-kernel terms."""
    total = path_relative_entropy(P, Q)
    if not np.isfinite(total):
        return Decomposition(None, float("inf"), total)
    terms = np.empty(P.T)
    for k in range(P.T):
        jp = P.pair_marginal(k, k + 1)  # [i_k, i_k+1]
        jq = Q.pair_marginal(k, k + 1)
        terms[k] = _conditional_terms(jp, jq, P.marginal(k), Q.marginal(k))
    return Decomposition(terms, relative_entropy(P.marginal(0), Q.marginal(0)), total)


# --- optimality sweeps -------------------------------------------------------


def _masked_dirichlet(mask: np.ndarray, rng: np.random.Generator, alpha: float) -> np.ndarray:
    """Random rows supported on ``mask`` (rows with an empty mask stay uniform)."""
    n = mask.shape[1]
    out = np.full(mask.shape, 1.0 / n)
    for r in range(mask.shape[0]):
        idx = np.flatnonzero(mask[r])
        if idx.size:
            out[r] = 0.0
            out[r, idx] = rng.dirichlet(np.full(idx.size, alpha))
    return out


def _backward_table(final: np.ndarray, q: list) -> np.ndarray:
    n = final.size
    T = len(q)
    w = final
    for t in range(T - 1, -1, -1):
        w = q[t].T.reshape((n, n) + (1,) * (T - 1 - t)) * w[None, ...]
    return w


def _mep1_competitor(prior, p1, rng, alpha):
    q = [_masked_dirichlet(rk.matrix > 0, rng, alpha) for rk in reverse_kernels(prior)]
    return PathTable(_backward_table(np.asarray(p1, float), q))


def _mep2_competitor(prior, p0, rng, alpha):
    mats = tuple(_masked_dirichlet(P > 0, rng, alpha) for P in prior.transitions)
    return enumerate_path_distribution(ChainModel(p0, mats))


def _mep3_competitor(prior, candidate, p0, p1, rng, cfg):
    scale = rng.uniform(0.01, 2.0)
    mats = []
    for P in candidate.chain.transitions:
        Q = np.where(P > 0, P * np.exp(scale * rng.normal(size=P.shape)), 0.0)
        mats.append(Q / Q.sum(axis=1, keepdims=True))
    perturbed = ChainModel(candidate.chain.initial, tuple(mats))
    # restore both endpoint marginals by proportional fitting on the perturbed kernel
    fitted = bridge.mep3_bridge(perturbed, p0, p1, cfg).chain
    marg = propagate_forward(fitted)
    if np.max(np.abs(marg[0] - p0)) > 1e-9 or np.max(np.abs(marg[-1] - p1)) > 1e-9:
        raise ValueError("endpoint correction missed the marginals")
    return enumerate_path_distribution(fitted)


@dataclass
class OptimalityReport:
    kind: str
    trials: int
    candidate_value: float
    min_gap: float
    violations: list = field(default_factory=list)
    tol: float = 1e-10

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_optimality(kind: str, prior: ChainModel, candidate: bridge.BridgeSolution, trials: int, seed: int,
                      p0=None, p1=None, tol: float = 1e-10, alpha: float = 1.0, retries: int = 20,
                      cfg: bridge.SolverConfig = bridge.SolverConfig(tol=1e-13)) -> OptimalityReport:
    """Draw random feasible competitors and confirm none beats the candidate."""
    prior_table = enumerate_path_distribution(prior)
    value = path_relative_entropy(enumerate_path_distribution(candidate.chain), prior_table)
    rng = np.random.default_rng(seed)
    gaps = []
    violations = []
    for trial in range(trials):
        for _ in range(retries):
            try:
                if kind == "mep1":
                    comp = _mep1_competitor(prior, p1, rng, alpha)
                elif kind == "mep2":
                    comp = _mep2_competitor(prior, p0, rng, alpha)
                elif kind == "mep3":
                    comp = _mep3_competitor(prior, candidate, np.asarray(p0, float), np.asarray(p1, float), rng, cfg)
                else:
                    raise ValueError(f"unknown problem kind {kind!r}")
                break
            except (InfeasibleError, ValueError, ModelError) as exc:
                if isinstance(exc, ValueError) and "unknown problem" in str(exc):
                    raise
                continue
        else:
            raise GenerationError(f"could not generate a feasible competitor after {retries} attempts")
        gap = path_relative_entropy(comp, prior_table) - value
        gaps.append(gap)
        if gap < -tol:
            violations.append((trial, gap))
    return OptimalityReport(kind, trials, value, float(min(gaps)) if gaps else float("nan"), violations, tol)


# --- Monte Carlo ---------------------------------------------------------------


@dataclass(frozen=True)
class SampleBatch:
    n: int
    seed: int
    paths: np.ndarray  # (n, T+1) integer states

    def empirical(self, n_states: int) -> PathTable:
        T1 = self.paths.shape[1]
        flat = np.ravel_multi_index(self.paths.T, (n_states,) * T1)
        counts = np.bincount(flat, minlength=n_states**T1).astype(float)
        return PathTable(counts.reshape((n_states,) * T1) / self.n)


def _draw(p_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling: ``p_rows[k]`` is the law used for ``u[k]``."""
    cdf = np.cumsum(p_rows, axis=-1)
    cdf[..., -1] = 1.0
    return (u[:, None] > cdf).sum(axis=1)


def _simulate(chain: ChainModel, n: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random((n, chain.T + 1))
    paths = np.empty((n, chain.T + 1), dtype=np.int64)
    paths[:, 0] = _draw(np.broadcast_to(chain.initial, (n, chain.n)), u[:, 0])
    for t, P in enumerate(chain.transitions):
        paths[:, t + 1] = _draw(P[paths[:, t]], u[:, t + 1])
    return paths


def sample_paths(chain: ChainModel, n: int, seed: int) -> tuple[SampleBatch, PathTable]:
    if n < 1:
        raise ValueError("n must be positive")
    _guard((chain.n,) * (chain.T + 1))
    paths = _simulate(chain, n, np.random.default_rng(seed))
    batch = SampleBatch(n, seed, paths)
    return batch, batch.empirical(chain.n)


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


@dataclass
class SanovRow:
    n: int
    probability: float
    rate: float | None  # None when censored
    censored: bool
    hits: int


@dataclass
class SanovResult:
    exponent: float
    kind: str
    delta: float
    replicates: int
    seed: int
    importance_sampling: bool
    rows: list


def _path_logprob(chain: ChainModel, paths: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        lp = np.log(chain.initial[paths[:, 0]])
        for t, P in enumerate(chain.transitions):
            lp = lp + np.log(P[paths[:, t], paths[:, t + 1]])
    return lp


def _blend(target, ref, delta):
    """Point on the segment from ``target`` towards ``ref`` at TV distance ``delta / 2``."""
    dist = total_variation(target, ref)
    if dist == 0:
        return np.asarray(target, float)
    eta = min(1.0, delta / (2 * dist))
    return (1 - eta) * np.asarray(target, float) + eta * np.asarray(ref, float)


def sanov_demo(chain: ChainModel, n_grid, replicates: int, seed: int, p1=None, p0=None, delta: float = 0.05,
               importance_sampling: bool = True) -> SanovResult:
    """Empirical decay rates ``-(1/n) log P(event)`` next to the exponent.

    The event is that the empirical endpoint marginal(s) of ``n`` i.i.d. paths
    lie within total-variation distance ``delta`` of the target(s). Rare events
    are estimated by importance sampling from the maximum-entropy solution for
    targets pulled slightly towards the prior (an unbiased likelihood-ratio
    estimator); replicate ``r`` of each ``n`` uses its own spawned seed.
    """
    if p0 is None and p1 is None:
        raise ValueError("give at least one target marginal")
    pi = propagate_forward(chain)
    if p0 is not None and p1 is not None:
        kind = "mep3"
        exponent = bridge.ld_exponent(kind, chain, p0, p1)
        proposal = bridge.mep3_bridge(chain, _blend(p0, pi[0], delta), _blend(p1, pi[-1], delta)).chain
    elif p1 is not None:
        kind = "mep1"
        exponent = bridge.ld_exponent(kind, chain, p1=p1)
        proposal = bridge.mep1_solution(chain, _blend(p1, pi[-1], delta)).chain
    else:
        kind = "mep2"
        exponent = bridge.ld_exponent(kind, chain, p0=p0)
        proposal = bridge.mep2_solution(chain, _blend(p0, pi[0], delta)).chain
    if not importance_sampling:
        proposal = chain

    root = np.random.SeedSequence(seed)
    rows = []
    for n, child in zip(n_grid, root.spawn(len(n_grid))):
        n = int(n)
        estimates = np.empty(replicates)
        hits = 0
        for r, ss in enumerate(child.spawn(replicates)):
            paths = _simulate(proposal, n, np.random.default_rng(ss))
            ok = True
            if p1 is not None:
                emp = np.bincount(paths[:, -1], minlength=chain.n) / n
                ok &= total_variation(emp, p1) <= delta + 1e-12
            if p0 is not None:
                emp = np.bincount(paths[:, 0], minlength=chain.n) / n
                ok &= total_variation(emp, p0) <= delta + 1e-12
            if ok:
                hits += 1
                log_lr = float(np.sum(_path_logprob(chain, paths) - _path_logprob(proposal, paths)))
                estimates[r] = np.exp(log_lr)
            else:
                estimates[r] = 0.0
        prob = float(estimates.mean())
        censored = prob <= 0
        rows.append(SanovRow(n, prob, None if censored else float(-np.log(prob) / n), censored, hits))
    return SanovResult(exponent, kind, delta, replicates, seed, importance_sampling, rows)
