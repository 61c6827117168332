"""Finite-dimensional quantum primitives.

Matrices are plain complex ``numpy`` arrays. A Kraus map acts on states in the
Schroedinger picture as ``rho -> sum_k M_k rho M_k^dag`` and on observables in
the Heisenberg picture as ``X -> sum_k M_k^dag X M_k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConditioningError, DomainError, ModelError

HERM_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_TOL = 1e-12
DEGENERACY_TOL = 1e-10


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return (a + dag(a)) / 2


def is_hermitian(a: np.ndarray, tol: float = HERM_TOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.max(np.abs(a - dag(a)), initial=0.0) <= tol


def _square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ModelError(f"{name}: expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ModelError(f"{name}: non-finite entries")
    return a


def density(rho, tol: float = TRACE_TOL, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Validate a density matrix and return it with round-off negativity clipped."""
    rho = _square(rho, "density matrix")
    if not is_hermitian(rho, HERM_TOL):
        raise ModelError("density matrix is not Hermitian")
    rho = hermitian_part(rho)
    w, v = np.linalg.eigh(rho)
    if w.min() < -psd_tol:
        raise ModelError(f"density matrix has eigenvalue {w.min():.3g} < 0")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ModelError(f"density matrix has trace {np.trace(rho).real:.15g}, not 1")
    if w.min() < 0:
        rho = (v * np.clip(w, 0, None)) @ dag(v)
    return rho


def eigh_psd(m: np.ndarray, tol: float = PSD_TOL) -> tuple[np.ndarray, np.ndarray]:
    m = _square(m)
    if not is_hermitian(m, max(tol, HERM_TOL)):
        raise DomainError("matrix is not Hermitian")
    w, v = np.linalg.eigh(hermitian_part(m))
    if w.size and w.min() < -tol:
        raise DomainError(f"matrix is not positive semidefinite (eigenvalue {w.min():.3g})")
    return w, v


def psd_sqrt(m, tol: float = PSD_TOL) -> np.ndarray:
    w, v = eigh_psd(m, tol)
    w = np.where(w < tol, 0.0, w)
    return (v * np.sqrt(w)) @ dag(v)


def default_cutoff(w: np.ndarray) -> float:
    return w.size * np.finfo(float).eps * max(float(w.max(initial=0.0)), 0.0)


def pinv_sqrt(m, cutoff: float | None = None, tol: float = PSD_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse of the PSD square root; eigenvalues at or
    below ``cutoff`` (default ``n * eps * lambda_max``) are treated as zero."""
    w, v = eigh_psd(m, tol)
    c = default_cutoff(w) if cutoff is None else cutoff
    inv = np.zeros_like(w)
    keep = w > c
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (v * inv) @ dag(v)


def support_projector(m, cutoff: float | None = None, tol: float = PSD_TOL) -> np.ndarray:
    w, v = eigh_psd(m, tol)
    c = default_cutoff(w) if cutoff is None else cutoff
    vk = v[:, w > c]
    return vk @ dag(vk)


def rank(m, cutoff: float | None = None) -> int:
    w, _ = eigh_psd(m)
    c = default_cutoff(w) if cutoff is None else cutoff
    return int(np.sum(w > c))


@dataclass(frozen=True)
class Observable:
    """Hermitian matrix with its spectral family ``X = sum_j x_j P_j``."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    projectors: tuple

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __len__(self) -> int:
        return len(self.projectors)

    @classmethod
    def from_basis(cls, vectors: np.ndarray, values: Sequence[float]) -> "Observable":
        """Rank-one spectral family from the columns of a unitary matrix."""
        vectors = np.asarray(vectors, dtype=complex)
        projs = tuple(np.outer(vectors[:, j], vectors[:, j].conj()) for j in range(vectors.shape[1]))
        values = np.asarray(values, dtype=float)
        matrix = sum(x * P for x, P in zip(values, projs))
        return cls(matrix, values, projs)

    def is_nondegenerate(self) -> bool:
        return all(abs(np.trace(P).real - 1) < 1e-9 for P in self.projectors)


def spectral_decompose(H, degeneracy_tol: float = DEGENERACY_TOL) -> Observable:
    """Group the eigenvalues of a Hermitian matrix into spectral projectors
    (ascending; neighbours within ``degeneracy_tol`` share a projector)."""
    H = _square(H, "observable")
    if not is_hermitian(H, HERM_TOL):
        raise DomainError("observable is not Hermitian")
    H = hermitian_part(H)
    w, v = np.linalg.eigh(H)
    groups = [[0]]
    for k in range(1, w.size):
        if w[k] - w[groups[-1][-1]] <= degeneracy_tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    values = np.array([w[g].mean() for g in groups])
    projs = tuple(v[:, g] @ dag(v[:, g]) for g in groups)
    return Observable(H, values, projs)


@dataclass(frozen=True)
class KrausMap:
    """A completely positive map given by Kraus operators."""

    operators: tuple

    def __post_init__(self):
        ops = tuple(_square(M, "Kraus operator") for M in self.operators)
        if not ops:
            raise ModelError("a Kraus map needs at least one operator")
        d = ops[0].shape[0]
        if any(M.shape != (d, d) for M in ops):
            raise ModelError("Kraus operators must share one square shape")
        for M in ops:
            M.setflags(write=False)
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    def __len__(self) -> int:
        return len(self.operators)

    @property
    def tp_defect(self) -> np.ndarray:
        """``I - sum_k M_k^dag M_k``."""
        return np.eye(self.dim) - sum(dag(M) @ M for M in self.operators)

    def tp_defect_norm(self) -> float:
        return float(np.linalg.norm(self.tp_defect, 2))

    def is_trace_preserving(self, tol: float = 1e-10) -> bool:
        return self.tp_defect_norm() <= tol

    def is_quantum_operation(self, tol: float = PSD_TOL) -> bool:
        return float(np.linalg.eigvalsh(hermitian_part(self.tp_defect)).min()) >= -tol

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply_schrodinger(self, rho)

    def then(self, other: "KrausMap") -> "KrausMap":
        """``other`` applied after ``self`` (Schroedinger picture)."""
        return KrausMap([B @ A for A in self.operators for B in other.operators])

    def superoperator(self) -> np.ndarray:
        """Matrix of the Schroedinger action on row-major vectorized inputs."""
        return sum(np.kron(M, M.conj()) for M in self.operators)


def _check_dims(E: KrausMap, a: np.ndarray):
    if a.shape != (E.dim, E.dim):
        raise ModelError(f"dimension mismatch: map acts on {E.dim}x{E.dim}, got {a.shape}")


def apply_schrodinger(E: KrausMap, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    _check_dims(E, rho)
    return sum(M @ rho @ dag(M) for M in E.operators)


def apply_heisenberg(E: KrausMap, X) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    _check_dims(E, X)
    return sum(dag(M) @ X @ M for M in E.operators)


def _check_projector(P: np.ndarray, tol: float = 1e-10):
    if not is_hermitian(P, tol) or np.max(np.abs(P @ P - P)) > tol:
        raise DomainError("not an orthogonal projector")


def event_probability(rho, P) -> float:
    P = np.asarray(P, dtype=complex)
    _check_projector(P)
    p = float(np.trace(P @ rho @ P).real)
    if -1e-12 <= p < 0:
        p = 0.0
    elif 1 < p <= 1 + 1e-12:
        p = 1.0
    return p


def conditioned_state(rho, P) -> np.ndarray:
    """State after observing the event ``P``."""
    p = event_probability(rho, P)
    if p <= 0:
        raise ConditioningError("conditioning on an event of zero probability")
    P = np.asarray(P, dtype=complex)
    return P @ rho @ P / p


def nonselective_measure(rho, observable) -> np.ndarray:
    """``sum_j P_j rho P_j``; accepts an :class:`Observable` or a projector list."""
    projs = observable.projectors if isinstance(observable, Observable) else observable
    rho = np.asarray(rho, dtype=complex)
    return sum(P @ rho @ P for P in projs)


def measurement_map(observable) -> KrausMap:
    projs = observable.projectors if isinstance(observable, Observable) else observable
    return KrausMap(projs)


def quantum_relative_entropy(rho, sigma, tol: float = PSD_TOL) -> float:
    """Umegaki relative entropy ``tr rho (log rho - log sigma)``, evaluated on
    the supports; ``inf`` unless supp(rho) lies inside supp(sigma)."""
    wr, vr = eigh_psd(rho, tol)
    ws, vs = eigh_psd(sigma, tol)
    rho = np.asarray(rho, dtype=complex)
    on_s = ws > tol
    kernel = vs[:, ~on_s]
    leak = float(np.trace(dag(kernel) @ rho @ kernel).real) if kernel.size else 0.0
    if leak > tol:
        return float("inf")
    pos = wr > tol
    neg_entropy = float(np.sum(wr[pos] * np.log(wr[pos])))
    # <v_k| rho |v_k> weights on the eigenbasis of sigma
    diag = np.einsum("ik,ij,jk->k", vs[:, on_s].conj(), rho, vs[:, on_s]).real
    cross = float(np.sum(diag * np.log(ws[on_s])))
    return max(neg_entropy - cross, 0.0)


class HarmonicReport(NamedTuple):
    ok: bool
    residuals: list


def quantum_harmonic_check(Y: Sequence[np.ndarray], maps: Sequence[KrausMap], tol: float = 1e-10) -> HarmonicReport:
    """Check ``Y_t = E_t(Y_{t+1})`` (Heisenberg picture) in operator norm."""
    if len(Y) != len(maps) + 1:
        raise ModelError(f"need len(Y) == len(maps) + 1, got {len(Y)} and {len(maps)}")
    res = [float(np.linalg.norm(Y[t] - apply_heisenberg(E, Y[t + 1]), 2)) for t, E in enumerate(maps)]
    return HarmonicReport(all(r <= tol for r in res), res)


def matrix_basis(dim: int) -> list[np.ndarray]:
    """Matrix units ``|i><j|``, a basis for comparing channel actions."""
    basis = []
    for i in range(dim):
        for j in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1.0
            basis.append(e)
    return basis


def channel_distance(A: KrausMap, B: KrausMap, inputs: Sequence[np.ndarray] | None = None) -> float:
    """Largest entrywise difference of the two Schroedinger actions on ``inputs``
    (default: all matrix units)."""
    inputs = matrix_basis(A.dim) if inputs is None else inputs
    return max(float(np.max(np.abs(A(x) - B(x)))) for x in inputs)


def pauli() -> dict[str, np.ndarray]:
    return {
        "I": np.eye(2, dtype=complex),
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    }


def bit_flip(p: float) -> KrausMap:
    s = pauli()
    return KrausMap([np.sqrt(1 - p) * s["I"], np.sqrt(p) * s["X"]])


def ket_plus() -> np.ndarray:
    v = np.array([1, 1], dtype=complex) / np.sqrt(2)
    return np.outer(v, v.conj())
