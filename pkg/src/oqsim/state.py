"""Validated density matrices, ensembles, and the PPT separability test."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import matrixcore as mc
from .errors import DomainError, ParseError, ShapeError, ValidationError

TRACE_ATOL = 1e-10
POSITIVITY_ATOL = 1e-10


class DensityMatrix:
    """A quantum state: unit-trace, Hermitian, positive semidefinite matrix.

    The three defining properties are checked at construction and the stored
    matrix is frozen; every operation that produces a new state revalidates.
    Tiny negative eigenvalues from roundoff are tolerated down to
    ``-POSITIVITY_ATOL`` but never clamped.
    """

    __slots__ = ("_matrix",)

    def __init__(self, matrix):
        m = mc.as_matrix(matrix, "density matrix")
        if m.shape[0] != m.shape[1]:
            raise ShapeError(f"density matrix must be square, got shape {m.shape}")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValidationError(f"trace must be 1, got {tr:.12g}")
        defect = mc.hermiticity_defect(m)
        if defect > mc.HERMITICITY_ATOL:
            raise ValidationError(f"not Hermitian: max |m - m†| = {defect:.3e}")
        lo = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
        if lo < -POSITIVITY_ATOL:
            raise ValidationError(f"not positive semidefinite: min eigenvalue {lo:.3e}")
        m = m.copy()
        m.flags.writeable = False
        self._matrix = m

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        """Projector |psi><psi| onto a unit vector."""
        v = np.asarray(psi, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > 1e-10:
            raise DomainError(f"state vector must be unit norm, got |psi| = {nrm:.12g}")
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Pure states with classical probabilities."""

    weights: tuple[float, ...]
    states: tuple[np.ndarray, ...]

    def __init__(self, weights: Sequence[float], states: Sequence):
        w = tuple(float(x) for x in weights)
        kets = tuple(np.asarray(s, dtype=complex).reshape(-1) for s in states)
        if len(w) != len(kets) or len(w) == 0:
            raise ValidationError("need equally many weights and states, at least one")
        if any(x < 0 for x in w):
            raise ValidationError(f"weights must be nonnegative, got {w}")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ValidationError(f"weights must sum to 1, got {sum(w):.15g}")
        dims = {k.size for k in kets}
        if len(dims) != 1:
            raise ShapeError(f"all states must share one dimension, got {sorted(dims)}")
        for k in kets:
            nrm = np.linalg.norm(k)
            if abs(nrm - 1.0) > 1e-12:
                raise ValidationError(f"state vector norm {nrm:.15g} differs from 1")
            k.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "states", kets)

    @property
    def dim(self) -> int:
        return self.states[0].size


@dataclass(frozen=True)
class QubitDephasingState:
    """Qubit with populations ``(p, 1-p)`` and off-diagonal suppressed by ``v``.

    ``phase`` carries the unit-modulus phase of the initial coherence;
    ``v`` is the (complex) visibility with ``|v| <= 1``.
    """

    p: float
    phase: complex = 1.0 + 0j
    v: complex = 1.0 + 0j

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"population p must be in [0, 1], got {self.p}")
        if abs(abs(complex(self.phase)) - 1.0) > 1e-12:
            raise DomainError(f"phase must have unit modulus, got |phase| = {abs(self.phase):.12g}")
        if abs(complex(self.v)) > 1.0 + 1e-12:
            raise DomainError(f"visibility must satisfy |v| <= 1, got |v| = {abs(self.v):.12g}")

    def to_density_matrix(self) -> DensityMatrix:
        p = self.p
        off = np.sqrt(p * (1.0 - p)) * complex(self.phase) * complex(self.v)
        return DensityMatrix(np.array([[p, off], [np.conj(off), 1.0 - p]], dtype=complex))


def dephased_qubit(p: float, phase: complex = 1.0, v: complex = 1.0) -> DensityMatrix:
    """Qubit state with diagonal ``(p, 1-p)`` and coherence ``sqrt(p(1-p)) phase v``."""
    return QubitDephasingState(p, phase, v).to_density_matrix()


def from_ensemble(e: Ensemble) -> DensityMatrix:
    """Weighted sum of projectors ``sum_j w_j |psi_j><psi_j|``."""
    rho = np.zeros((e.dim, e.dim), dtype=complex)
    for w, psi in zip(e.weights, e.states):
        rho += w * np.outer(psi, psi.conj())
    return DensityMatrix(rho)


def expectation(rho: DensityMatrix, a) -> complex:
    """``tr(rho a)``; complex in general, real up to roundoff for Hermitian ``a``."""
    a = mc.as_matrix(a, "observable")
    if a.shape != (rho.dim, rho.dim):
        raise ShapeError(f"observable shape {a.shape} does not match state dim {rho.dim}")
    return complex(np.trace(rho.matrix @ a))


def measure_probability(rho: DensityMatrix, phi) -> float:
    """Probability ``<phi|rho|phi>`` of finding the unit vector ``phi``."""
    v = np.asarray(phi, dtype=complex).reshape(-1)
    if v.size != rho.dim:
        raise ShapeError(f"vector dimension {v.size} does not match state dim {rho.dim}")
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > 1e-10:
        raise DomainError(f"measurement vector must be unit norm, got {nrm:.12g}")
    return float(np.real(v.conj() @ rho.matrix @ v))


def purity(rho: DensityMatrix) -> float:
    """``tr rho^2``: 1 for pure states, down to ``1/dim`` for the fully mixed state."""
    return float(np.real(np.trace(rho.matrix @ rho.matrix)))


def reduce(rho: DensityMatrix, dims: tuple[int, int], keep: str = "a") -> DensityMatrix:
    """Reduced state of one subsystem; the result is revalidated."""
    return DensityMatrix(mc.partial_trace(rho.matrix, dims, keep=keep))


class PPTResult(NamedTuple):
    ppt: bool
    min_eigenvalue: float
    separability: str  # "separable" | "entangled" | "inconclusive"


def is_ppt(rho: DensityMatrix, dims: tuple[int, int], tol: float = 1e-10) -> PPTResult:
    """Peres positive-partial-transpose test.

    A negative partial transpose proves entanglement in any dimension. The
    converse (PPT implies separable) holds only for 2x2 and 2x3 systems, so
    for larger systems a PPT verdict is flagged as inconclusive.
    """
    pt = mc.partial_transpose(rho.matrix, dims)
    lo = float(mc.hermitian_eigenvalues(pt)[0])
    ppt = lo >= -tol
    da, db = int(dims[0]), int(dims[1])
    decided = sorted((da, db)) in ([2, 2], [2, 3])
    if not ppt:
        verdict = "entangled"
    elif decided:
        verdict = "separable"
    else:
        verdict = "inconclusive"
    return PPTResult(ppt, lo, verdict)


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random full-rank (or rank-limited) state from a Wishart matrix."""
    r = dim if rank is None else rank
    g = rng.standard_normal((dim, r)) + 1j * rng.standard_normal((dim, r))
    w = g @ g.conj().T
    return DensityMatrix(w / np.trace(w))


# --- file format -----------------------------------------------------------


def format_density_matrix(rho: DensityMatrix) -> str:
    return mc.format_matrix(rho.matrix, comment=f"density-matrix dim={rho.dim}")


def write_density_matrix(path, rho: DensityMatrix) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_density_matrix(rho))


def read_density_matrix(path) -> DensityMatrix:
    """Read a matrix file and validate it as a density matrix."""
    m = mc.read_matrix(path)
    if m.shape[0] != m.shape[1]:
        raise ParseError(f"density matrix file holds a non-square {m.shape} matrix")
    return DensityMatrix(m)
