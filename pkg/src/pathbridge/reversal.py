"""Time reversal of quantum operations with respect to a reference state.

For a map with Kraus operators ``M_k`` and a state ``rho``, the reversal has
Kraus operators ``rho^(1/2) M_k^dag E(rho)^(-1/2)`` (pseudoinverse on the
kernel of ``E(rho)``); it maps ``E(rho)`` back to ``rho``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, ModelError
from .quantum import (
    PSD_TOL,
    KrausMap,
    apply_heisenberg,
    apply_schrodinger,
    dag,
    default_cutoff,
    eigh_psd,
    hermitian_part,
    pinv_sqrt,
    psd_sqrt,
    spectral_decompose,
    support_projector,
)


@dataclass(frozen=True)
class ReversalResult:
    map: KrausMap
    augmented: KrausMap | None
    rank: int
    cutoff: float
    defect_before: float
    defect_after: float | None = None

    @property
    def channel(self) -> KrausMap:
        """The trace-preserving version when augmentation was requested."""
        return self.augmented if self.augmented is not None else self.map


def _require_operation(E: KrausMap):
    if not E.is_quantum_operation():
        raise DomainError("map is not trace non-increasing (I - sum M^dag M is not PSD)")


def t_rho(E: KrausMap, rho, cutoff: float | None = None) -> KrausMap:
    """The state-dependent transformation sending ``E`` to its reversal at ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (E.dim, E.dim):
        raise ModelError(f"dimension mismatch: map acts on {E.dim}x{E.dim}, state is {rho.shape}")
    out = apply_schrodinger(E, rho)
    left = psd_sqrt(rho)
    right = pinv_sqrt(out, cutoff)
    return KrausMap([left @ dag(M) @ right for M in E.operators])


def petz_reversal(E: KrausMap, rho_t, cutoff: float | None = None, augment: bool = False) -> ReversalResult:
    _require_operation(E)
    rho_t = np.asarray(rho_t, dtype=complex)
    if rho_t.shape != (E.dim, E.dim):
        raise ModelError(f"dimension mismatch: map acts on {E.dim}x{E.dim}, state is {rho_t.shape}")
    rho_next = apply_schrodinger(E, rho_t)
    w, _ = eigh_psd(rho_next)
    c = default_cutoff(w) if cutoff is None else cutoff
    R = t_rho(E, rho_t, c)
    before = R.tp_defect_norm()
    aug = augment_to_tp(R) if augment else None
    return ReversalResult(
        map=R,
        augmented=aug,
        rank=int(np.sum(w > c)),
        cutoff=float(c),
        defect_before=before,
        defect_after=aug.tp_defect_norm() if aug is not None else None,
    )


def augment_to_tp(Q: KrausMap, tol: float = PSD_TOL) -> KrausMap:
    """Append ``sqrt(I - sum K^dag K)`` so the map becomes trace preserving."""
    defect = hermitian_part(Q.tp_defect)
    if np.linalg.norm(defect, 2) <= tol:
        return Q
    w = np.linalg.eigvalsh(defect)
    if w.min() < -tol:
        raise DomainError(f"trace-preservation defect is not PSD (eigenvalue {w.min():.3g})")
    return KrausMap(list(Q.operators) + [psd_sqrt(defect, tol=tol)])


@dataclass
class ReversalReport:
    revprop_residual: float
    consistency_residual: float
    joint_residual: float
    tol: float
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _random_state_on(support: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    d = support.shape[0]
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    s = support @ g @ dag(g) @ support
    return s / np.trace(s).real


def joint_tables(E: KrausMap, rho_t, R: KrausMap) -> tuple[np.ndarray, np.ndarray]:
    """Forward and backward two-time event tables on the eigenprojectors of
    ``rho_t`` (rows) and ``E(rho_t)`` (columns)."""
    rho_next = apply_schrodinger(E, rho_t)
    before = spectral_decompose(hermitian_part(np.asarray(rho_t, dtype=complex))).projectors
    after = spectral_decompose(hermitian_part(rho_next)).projectors
    fwd = np.empty((len(before), len(after)))
    bwd = np.empty_like(fwd)
    for i, Pi in enumerate(before):
        pushed = apply_schrodinger(E, Pi @ rho_t @ Pi)
        for j, Pj in enumerate(after):
            fwd[i, j] = np.trace(Pj @ pushed @ Pj).real
    for j, Pj in enumerate(after):
        pulled = apply_schrodinger(R, Pj @ rho_next @ Pj)
        for i, Pi in enumerate(before):
            bwd[i, j] = np.trace(Pi @ pulled @ Pi).real
    return fwd, bwd


def verify_reversal(E: KrausMap, rho_t, tol: float = 1e-10, samples: int = 5, seed: int = 0,
                    reversal: KrausMap | None = None) -> ReversalReport:
    """Check the reversal property, the consistency (double reversal) property
    on random states supported in supp(rho_t), and agreement of forward and
    backward joint event probabilities."""
    rho_t = np.asarray(rho_t, dtype=complex)
    R = petz_reversal(E, rho_t).map if reversal is None else reversal
    rho_next = apply_schrodinger(E, rho_t)
    rev = float(np.max(np.abs(apply_schrodinger(R, rho_next) - rho_t)))

    back = t_rho(R, rho_next)
    supp = support_projector(rho_t)
    rng = np.random.default_rng(seed)
    cons = 0.0
    for _ in range(samples):
        s = _random_state_on(supp, rng)
        cons = max(cons, float(np.max(np.abs(apply_schrodinger(back, s) - apply_schrodinger(E, s)))))

    fwd, bwd = joint_tables(E, rho_t, R)
    joint = float(np.max(np.abs(fwd - bwd)))

    failures = [name for name, r in
                (("revprop", rev), ("consistency", cons), ("joint", joint)) if not r <= tol]
    return ReversalReport(rev, cons, joint, tol, failures)


@dataclass
class ReverseHarmonicReport:
    Y: list
    residuals: list
    tol: float

    @property
    def ok(self) -> bool:
        return all(r <= self.tol for r in self.residuals)


def propagate_states(maps: Sequence[KrausMap], rho0) -> list[np.ndarray]:
    states = [np.asarray(rho0, dtype=complex)]
    for E in maps:
        states.append(apply_schrodinger(E, states[-1]))
    return states


def reverse_harmonic_verify(maps: Sequence[KrausMap], sigma: Sequence[np.ndarray], rho: Sequence[np.ndarray],
                            tol: float = 1e-10) -> ReverseHarmonicReport:
    """Check that ``Y_t = sigma_t^(-1/2) rho_t sigma_t^(-1/2)`` is carried forward
    by the Heisenberg action of the reversal of ``E_t`` at ``sigma_t``."""
    if not len(sigma) == len(rho) == len(maps) + 1:
        raise ModelError("trajectories must have length len(maps) + 1")
    for t, (s, r) in enumerate(zip(sigma, rho)):
        ker = np.eye(s.shape[0]) - support_projector(s)
        if float(np.trace(ker @ r).real) > tol:
            raise DomainError(f"supp(rho_{t}) is not contained in supp(sigma_{t})")
    Y = [pinv_sqrt(s) @ r @ pinv_sqrt(s) for s, r in zip(sigma, rho)]
    res = []
    for t, E in enumerate(maps):
        R = t_rho(E, sigma[t])
        res.append(float(np.linalg.norm(apply_heisenberg(R, Y[t]) - Y[t + 1], 2)))
    return ReverseHarmonicReport(Y, res, tol)
