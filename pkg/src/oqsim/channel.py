"""Quantum channels as Kraus operator sets.

A channel acts as ``rho -> sum_j K_j rho K_j†`` with the trace-preserving
normalization ``sum_j K_j† K_j = 1``. Kraus sets are not unique (any
isometric mixing of the operators gives the same map), so channel equality
is decided on the Choi matrix, which is unique. The Choi matrix here is the
channel applied to half of a *normalized* maximally entangled pair, so it is
itself a valid state: Hermitian with unit trace, and positive semidefinite
exactly when the map is completely positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import matrixcore as mc
from .errors import DomainError, ParseError, ShapeError, ValidationError
from .state import DensityMatrix

COMPLETENESS_ATOL = 1e-10
CANONICAL_TOL = 1e-12


class KrausChannel:
    """Trace-preserving channel given by an explicit Kraus operator list.

    The supplied operators are kept verbatim (no canonicalization), so the
    list may be longer than the ``dim**2`` needed after canonicalization.
    ``completeness_atol`` exists for channels that are trace preserving only
    to some order, e.g. the first-order Kraus set of a Lindblad generator.
    """

    __slots__ = ("_ops", "_dim")

    def __init__(self, kraus_ops: Sequence, completeness_atol: float = COMPLETENESS_ATOL):
        ops = [mc.as_matrix(k, "Kraus operator") for k in kraus_ops]
        if not ops:
            raise ValidationError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        for k in ops:
            if k.shape != (d, d):
                raise ShapeError(f"all Kraus operators must be {d} x {d}, got {k.shape}")
        frozen = []
        for k in ops:
            k = k.copy()
            k.flags.writeable = False
            frozen.append(k)
        self._ops = tuple(frozen)
        self._dim = d
        defect = self.completeness_defect()
        if defect > completeness_atol:
            raise ValidationError(
                f"Kraus set is not trace preserving: max |sum K†K - 1| = {defect:.3e}"
            )

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def kraus_ops(self) -> tuple[np.ndarray, ...]:
        return self._ops

    def __len__(self) -> int:
        return len(self._ops)

    def __repr__(self) -> str:
        return f"KrausChannel(dim={self._dim}, n_ops={len(self._ops)})"

    def completeness_defect(self) -> float:
        """``max |sum_j K_j† K_j - 1|`` entrywise; 0 for a valid channel."""
        acc = np.zeros((self._dim, self._dim), dtype=complex)
        for k in self._ops:
            acc += k.conj().T @ k
        return mc.max_abs(acc - np.eye(self._dim))

    def apply_matrix(self, m) -> np.ndarray:
        """``sum_j K_j m K_j†`` on a raw matrix, no validation of the result."""
        m = mc.as_matrix(m)
        if m.shape != (self._dim, self._dim):
            raise ShapeError(f"input shape {m.shape} does not match channel dim {self._dim}")
        out = np.zeros_like(m)
        for k in self._ops:
            out += k @ m @ k.conj().T
        return out

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        """Apply to a state; the output is revalidated as a density matrix."""
        return DensityMatrix(self.apply_matrix(rho.matrix))

    def choi(self) -> "ChoiMatrix":
        """Channel acting on half of the normalized maximally entangled pair."""
        d = self._dim
        acc = np.zeros((d * d, d * d), dtype=complex)
        for k in self._ops:
            v = k.reshape(-1)  # row-major vec matches the A-slow index convention
            acc += np.outer(v, v.conj())
        return ChoiMatrix(acc / d)


class ChoiMatrix:
    """State-like carrier of a linear map: Hermitian with unit trace."""

    __slots__ = ("_matrix", "_dim")

    def __init__(self, matrix):
        m = mc.as_matrix(matrix, "Choi matrix")
        n = m.shape[0]
        d = int(round(np.sqrt(n)))
        if m.shape[0] != m.shape[1] or d * d != n:
            raise ShapeError(f"Choi matrix must be d^2 x d^2, got shape {m.shape}")
        defect = mc.hermiticity_defect(m)
        if defect > mc.HERMITICITY_ATOL:
            raise ValidationError(f"Choi matrix not Hermitian: defect {defect:.3e}")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > 1e-10:
            raise ValidationError(f"Choi matrix trace must be 1, got {tr:.12g}")
        m = m.copy()
        m.flags.writeable = False
        self._matrix = m
        self._dim = d

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._dim

    def __repr__(self) -> str:
        return f"ChoiMatrix(dim={self._dim})"


class CPResult(NamedTuple):
    cp: bool
    min_eigenvalue: float


def is_completely_positive(c: ChoiMatrix, tol: float = 1e-10) -> CPResult:
    """A map is CP iff its Choi matrix is positive semidefinite."""
    lo = float(mc.hermitian_eigenvalues(c.matrix)[0])
    return CPResult(lo >= -tol, lo)


def choi_to_kraus(c: ChoiMatrix, tol: float = CANONICAL_TOL) -> KrausChannel:
    """Extract a canonical Kraus set from the spectral decomposition of a Choi matrix.

    Eigenvalues below ``tol`` are discarded, so the result has at most
    ``dim**2`` operators. Requires the map to be CP and trace preserving
    within ``tol``.
    """
    d = c.dim
    tp_defect = mc.max_abs(d * mc.partial_trace(c.matrix, (d, d), keep="b") - np.eye(d))
    if tp_defect > max(tol, 1e-10):
        raise DomainError(f"Choi matrix is not trace preserving as a map: defect {tp_defect:.3e}")
    vals, vecs = np.linalg.eigh((c.matrix + c.matrix.conj().T) / 2)
    if vals[0] < -tol:
        raise DomainError(f"Choi matrix is not CP: min eigenvalue {vals[0]:.3e}")
    ops = [
        np.sqrt(d * lam) * vecs[:, i].reshape(d, d)
        for i, lam in enumerate(vals)
        if lam > tol
    ]
    return KrausChannel(ops)


def choi_distance(a: KrausChannel, b: KrausChannel) -> float:
    """Max-entry distance between the Choi matrices of two channels."""
    if a.dim != b.dim:
        raise ShapeError(f"channel dims differ: {a.dim} vs {b.dim}")
    return mc.max_abs(a.choi().matrix - b.choi().matrix)


def channels_equal(a: KrausChannel, b: KrausChannel, tol: float = 1e-10) -> bool:
    """True when two Kraus sets represent the same map (Choi matrices agree)."""
    return choi_distance(a, b) <= tol


def compose(outer: KrausChannel, inner: KrausChannel) -> KrausChannel:
    """Channel for "inner first, then outer", canonicalized to <= dim**2 operators."""
    if outer.dim != inner.dim:
        raise ShapeError(f"channel dims differ: {outer.dim} vs {inner.dim}")
    products = [ko @ ki for ko in outer.kraus_ops for ki in inner.kraus_ops]
    return choi_to_kraus(KrausChannel(products).choi())


def _check_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size == 0 or np.any(w < 0):
        raise DomainError(f"weights must be nonnegative and non-empty, got {w}")
    if abs(w.sum() - 1.0) > 1e-12:
        raise DomainError(f"weights must sum to 1, got {w.sum():.15g}")
    return w


def unitarity_defect(u) -> float:
    u = mc.as_matrix(u, "unitary")
    if u.shape[0] != u.shape[1]:
        raise ShapeError(f"unitary must be square, got {u.shape}")
    return mc.max_abs(u.conj().T @ u - np.eye(u.shape[0]))


def random_unitary_channel(weights, unitaries: Sequence) -> KrausChannel:
    """Channel for applying ``U_j`` with probability ``w_j``: Kraus set ``sqrt(w_j) U_j``."""
    w = _check_weights(weights)
    us = [mc.as_matrix(u, "unitary") for u in unitaries]
    if len(us) != w.size:
        raise ShapeError(f"got {w.size} weights but {len(us)} unitaries")
    for u in us:
        defect = unitarity_defect(u)
        if defect > 1e-10:
            raise DomainError(f"matrix is not unitary: max |U†U - 1| = {defect:.3e}")
    return KrausChannel([np.sqrt(wi) * u for wi, u in zip(w, us)])


_PAULI = {"x": mc.SIGMA_X, "y": mc.SIGMA_Y, "z": mc.SIGMA_Z}


def pauli_flip_channel(axis: str, flip_probability: float) -> KrausChannel:
    """Qubit channel applying a Pauli with probability ``p``: phase flip for
    ``z``, bit flip for ``x``, both combined for ``y``."""
    if axis not in _PAULI:
        raise DomainError(f'axis must be one of "x", "y", "z", got {axis!r}')
    p = float(flip_probability)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"flip probability must be in [0, 1], got {p}")
    return KrausChannel([np.sqrt(1.0 - p) * np.eye(2), np.sqrt(p) * _PAULI[axis]])


def dephasing_channel(v: complex) -> KrausChannel:
    """Two-Kraus qubit channel scaling the upper coherence by ``v`` (``|v| <= 1``).

    For real nonnegative ``v`` this is the pair
    ``{1 sqrt((1+v)/2), sigma_z sqrt((1-v)/2)}``; a complex ``v`` additionally
    rotates the coherence phase.
    """
    v = complex(v)
    mag = abs(v)
    if mag > 1.0 + 1e-12:
        raise DomainError(f"visibility must satisfy |v| <= 1, got |v| = {mag:.12g}")
    mag = min(mag, 1.0)
    half_phase = np.exp(1j * np.angle(v) / 2)
    d1 = np.diag([half_phase, np.conj(half_phase)])
    d2 = np.diag([half_phase, -np.conj(half_phase)])
    return KrausChannel([np.sqrt((1 + mag) / 2) * d1, np.sqrt((1 - mag) / 2) * d2])


def povm_probability(rho: DensityMatrix, k) -> float:
    """Outcome probability ``tr(rho K†K)`` of the measurement operator ``K``."""
    k = mc.as_matrix(k, "measurement operator")
    if k.shape != (rho.dim, rho.dim):
        raise ShapeError(f"operator shape {k.shape} does not match state dim {rho.dim}")
    return float(np.real(np.trace(rho.matrix @ k.conj().T @ k)))


def pointer_overlap(chi_up, chi_down) -> complex:
    """Overlap ``<chi_down|chi_up>`` of the two conditional bath states.

    Its magnitude is the visibility left in the system: 1 means the bath holds
    no which-path information, 0 means interference is fully destroyed.
    """
    up = np.asarray(chi_up, dtype=complex).reshape(-1)
    down = np.asarray(chi_down, dtype=complex).reshape(-1)
    if up.size != down.size:
        raise ShapeError(f"bath state dims differ: {up.size} vs {down.size}")
    for name, vec in (("chi_up", up), ("chi_down", down)):
        nrm = np.linalg.norm(vec)
        if abs(nrm - 1.0) > 1e-10:
            raise DomainError(f"{name} must be unit norm, got {nrm:.12g}")
    return complex(down.conj() @ up)


@dataclass(frozen=True, eq=False)
class SystemBathModel:
    """Joint unitary on system x bath with an uncorrelated initial bath.

    ``bath_init`` is the pure initial bath state; if ``bath_weights`` is given
    instead, the bath starts in the classical mixture of basis states with
    those probabilities and ``bath_init`` is ignored.
    """

    dim_s: int
    dim_b: int
    u_sb: np.ndarray
    bath_init: np.ndarray
    bath_weights: tuple[float, ...] | None = None

    def __init__(self, dim_s: int, dim_b: int, u_sb, bath_init=None, bath_weights=None):
        ds, db = int(dim_s), int(dim_b)
        if ds < 1 or db < 1:
            raise ShapeError(f"dimensions must be positive, got {ds}, {db}")
        u = mc.as_matrix(u_sb, "u_sb")
        if u.shape != (ds * db, ds * db):
            raise ShapeError(f"u_sb must be {ds * db} x {ds * db}, got {u.shape}")
        defect = unitarity_defect(u)
        if defect > 1e-10:
            raise ValidationError(f"u_sb is not unitary: max |U†U - 1| = {defect:.3e}")
        if bath_weights is not None:
            w = _check_weights(bath_weights)
            if w.size != db:
                raise ShapeError(f"need {db} bath weights, got {w.size}")
            weights = tuple(float(x) for x in w)
            chi0 = np.zeros(db, dtype=complex)
            chi0[0] = 1.0
        else:
            weights = None
            if bath_init is None:
                raise DomainError("need either bath_init or bath_weights")
            chi0 = np.asarray(bath_init, dtype=complex).reshape(-1)
            if chi0.size != db:
                raise ShapeError(f"bath_init dimension {chi0.size} differs from dim_b {db}")
            nrm = np.linalg.norm(chi0)
            if abs(nrm - 1.0) > 1e-10:
                raise ValidationError(f"bath_init must be unit norm, got {nrm:.12g}")
        u = u.copy()
        u.flags.writeable = False
        chi0 = chi0.copy()
        chi0.flags.writeable = False
        object.__setattr__(self, "dim_s", ds)
        object.__setattr__(self, "dim_b", db)
        object.__setattr__(self, "u_sb", u)
        object.__setattr__(self, "bath_init", chi0)
        object.__setattr__(self, "bath_weights", weights)


def kraus_from_system_bath(model: SystemBathModel) -> KrausChannel:
    """Kraus operators ``K_j = <chi_j| U_SB |chi(0)>`` of the reduced dynamics.

    For a mixed bath the per-basis-state sets are concatenated, scaled by
    ``sqrt(w_j)``. Completeness follows from unitarity of ``U_SB``.
    """
    ds, db = model.dim_s, model.dim_b
    u4 = model.u_sb.reshape(ds, db, ds, db)
    if model.bath_weights is not None:
        initial = [
            (w, np.eye(db, dtype=complex)[m])
            for m, w in enumerate(model.bath_weights)
            if w > 0.0
        ]
    else:
        initial = [(1.0, model.bath_init)]
    ops = []
    for w, chi in initial:
        # k_all[j, s_out, s_in] = sum_b U[(s_out, j), (s_in, b)] chi[b]
        k_all = np.einsum("ajsb,b->jas", u4, chi)
        ops.extend(np.sqrt(w) * k_all[j] for j in range(db))
    return KrausChannel(ops)


def transpose_map_choi(dim: int) -> ChoiMatrix:
    """Choi matrix of matrix transposition: the swap operator divided by dim.

    Its negative eigenvalue ``-1/dim`` is why the transpose map is positive
    but not completely positive.
    """
    d = int(dim)
    swap = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            swap[i * d + j, j * d + i] = 1.0
    return ChoiMatrix(swap / d)


def projector_channel(vectors: Sequence) -> KrausChannel:
    """Measurement channel with projector Kraus operators ``|phi_j><phi_j|``
    over an orthonormal basis."""
    vs = [np.asarray(v, dtype=complex).reshape(-1) for v in vectors]
    d = vs[0].size
    gram = np.array([[vj.conj() @ vk for vk in vs] for vj in vs])
    if len(vs) != d or mc.max_abs(gram - np.eye(d)) > 1e-10:
        raise DomainError("projector channel needs a complete orthonormal basis")
    return KrausChannel([np.outer(v, v.conj()) for v in vs])


# --- file format -----------------------------------------------------------


def format_channel(ch: KrausChannel) -> str:
    parts = [f"kraus {len(ch)} {ch.dim}\n"]
    parts.extend(mc.format_matrix(k) for k in ch.kraus_ops)
    return "".join(parts)


def write_channel(path, ch: KrausChannel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_channel(ch))


def parse_channel(text: str, completeness_atol: float = COMPLETENESS_ATOL) -> KrausChannel:
    tokens = mc.tokenize_matrix_text(text)
    if len(tokens) < 3 or tokens[0] != "kraus":
        raise ParseError('channel file must start with a "kraus N dim" header')
    try:
        n, d = int(tokens[1]), int(tokens[2])
    except ValueError as exc:
        raise ParseError(f"bad channel header {tokens[:3]!r}") from exc
    if n < 1 or d < 1:
        raise ParseError(f"channel header values must be positive, got N={n} dim={d}")
    pos = 3
    ops = []
    for _ in range(n):
        m, pos = mc.parse_matrix_tokens(tokens, pos)
        if m.shape != (d, d):
            raise ParseError(f"channel matrix has shape {m.shape}, expected {d} x {d}")
        ops.append(m)
    if pos != len(tokens):
        raise ParseError(f"{len(tokens) - pos} unexpected trailing tokens after channel")
    return KrausChannel(ops, completeness_atol=completeness_atol)


def read_channel(path, completeness_atol: float = COMPLETENESS_ATOL) -> KrausChannel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_channel(fh.read(), completeness_atol=completeness_atol)


