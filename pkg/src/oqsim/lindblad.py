"""Markovian master equations in Lindblad form and their time evolution.

The generator is

    L(rho) = -i [H, rho] + sum_j (R_j rho R_j†
                                  - R_j† R_j rho / 2 - rho R_j† R_j / 2)

with hbar = 1 throughout: energies are angular frequencies and rates are
inverse times in the same unit. Evolution uses a fixed-step classical
fourth-order Runge-Kutta scheme, so the error model is deterministic and
testable; positivity and trace are checked at every recorded time rather
than enforced, because a violation indicates a too-large step or a bug.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import matrixcore as mc
from .channel import KrausChannel
from .errors import (
    DivergenceError,
    DomainError,
    IntegrationError,
    ShapeError,
    ValidationError,
)
from .state import DensityMatrix, dephased_qubit

MODEL_KINDS = (
    "pure_dephasing",
    "amplitude_decay",
    "thermal",
    "bloch",
    "damped_oscillator",
    "naive_decay",
)


class Lindbladian:
    """Hamiltonian plus relaxation operators defining a Lindblad generator.

    The relaxation operators carry units of sqrt(rate) and need not satisfy
    any constraint; the Hamiltonian must be Hermitian.
    """

    __slots__ = ("_dim", "_h", "_ops", "_rr")

    def __init__(self, hamiltonian, relaxation_ops: Sequence = ()):
        h = mc.as_matrix(hamiltonian, "hamiltonian")
        if h.shape[0] != h.shape[1]:
            raise ShapeError(f"hamiltonian must be square, got {h.shape}")
        defect = mc.hermiticity_defect(h)
        if defect > mc.HERMITICITY_ATOL:
            raise ValidationError(f"hamiltonian not Hermitian: defect {defect:.3e}")
        d = h.shape[0]
        ops = [mc.as_matrix(r, "relaxation operator") for r in relaxation_ops]
        for r in ops:
            if r.shape != (d, d):
                raise ShapeError(f"relaxation operator shape {r.shape} does not match dim {d}")
        h = h.copy()
        h.flags.writeable = False
        frozen = []
        for r in ops:
            r = r.copy()
            r.flags.writeable = False
            frozen.append(r)
        self._dim = d
        self._h = h
        self._ops = tuple(frozen)
        # precomputed sum_j R_j† R_j, reused by the right-hand side
        rr = np.zeros((d, d), dtype=complex)
        for r in self._ops:
            rr += r.conj().T @ r
        rr.flags.writeable = False
        self._rr = rr

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def hamiltonian(self) -> np.ndarray:
        return self._h

    @property
    def relaxation_ops(self) -> tuple[np.ndarray, ...]:
        return self._ops

    def __repr__(self) -> str:
        return f"Lindbladian(dim={self._dim}, n_relaxation_ops={len(self._ops)})"


def liouvillian_apply(l: Lindbladian, rho) -> np.ndarray:
    """The generator applied to a matrix. Traceless for any input; Hermitian
    for Hermitian input."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else mc.as_matrix(rho)
    if m.shape != (l.dim, l.dim):
        raise ShapeError(f"input shape {m.shape} does not match generator dim {l.dim}")
    h = l.hamiltonian
    out = -1j * (h @ m - m @ h)
    for r in l.relaxation_ops:
        out += r @ m @ r.conj().T
    rr = l._rr
    out -= 0.5 * (rr @ m + m @ rr)
    return out


# --- observables recorded during evolution ---------------------------------


def _observable(name: str, dim: int) -> Callable[[np.ndarray], float]:
    if name.startswith("pop"):
        idx = int(name[3:])
        if not 0 <= idx < dim:
            raise DomainError(f"population index out of range in {name!r} for dim {dim}")
        return lambda m: float(m[idx, idx].real)
    if name == "coherence":
        if dim < 2:
            raise DomainError("coherence needs dim >= 2")
        return lambda m: float(abs(m[0, 1]))
    if name == "mean_n":
        n_diag = np.arange(dim, dtype=float)
        return lambda m: float(np.real(np.diag(m)) @ n_diag)
    if name == "purity":
        return lambda m: float(np.real(np.trace(m @ m)))
    if name == "trace":
        return lambda m: float(np.trace(m).real)
    raise DomainError(f"unknown observable {name!r}")


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    """Recorded trajectory: one validated state per time, plus named series."""

    times: np.ndarray
    states: tuple[DensityMatrix, ...]
    observables: dict[str, np.ndarray]

    def observable(self, name: str) -> np.ndarray:
        return self.observables[name]

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]

    def to_csv(self) -> str:
        names = list(self.observables)
        lines = [",".join(["t"] + names)]
        for i, t in enumerate(self.times):
            row = [f"{t:.15g}"] + [f"{self.observables[n][i]:.15g}" for n in names]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def _rk4_step(l: Lindbladian, m: np.ndarray, dt: float) -> np.ndarray:
    k1 = liouvillian_apply(l, m)
    k2 = liouvillian_apply(l, m + 0.5 * dt * k1)
    k3 = liouvillian_apply(l, m + 0.5 * dt * k2)
    k4 = liouvillian_apply(l, m + dt * k3)
    return m + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolve(
    l: Lindbladian,
    rho0: DensityMatrix,
    t_final: float,
    dt: float,
    record: Sequence[str] = (),
    record_every: int = 1,
) -> EvolutionResult:
    """Integrate ``drho/dt = L rho`` from 0 to ``t_final`` with fixed step ``dt``.

    Global error is O(dt^4). Recommended: ``dt * (max rate + spectral span of
    H) <= 0.1``. Every recorded state is validated; a validation failure
    raises with the offending time, NaN raises a divergence error.
    """
    if t_final <= 0 or dt <= 0:
        raise DomainError(f"t_final and dt must be positive, got {t_final}, {dt}")
    if rho0.dim != l.dim:
        raise ShapeError(f"state dim {rho0.dim} does not match generator dim {l.dim}")
    if record_every < 1:
        raise DomainError(f"record_every must be >= 1, got {record_every}")
    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise DomainError(f"t_final = {t_final} is not an integer multiple of dt = {dt}")
    funcs = {name: _observable(name, l.dim) for name in record}

    m = rho0.matrix.copy()
    times = [0.0]
    states = [rho0]
    series: dict[str, list[float]] = {name: [f(m)] for name, f in funcs.items()}
    for step in range(1, n_steps + 1):
        m = _rk4_step(l, m, dt)
        if step % record_every and step != n_steps:
            continue
        t = step * dt
        if not np.all(np.isfinite(m)):
            raise DivergenceError(f"non-finite density matrix at t = {t:.6g}")
        try:
            rho = DensityMatrix(m)
        except ValidationError as exc:
            raise IntegrationError(f"invalid state at t = {t:.6g}: {exc}") from exc
        times.append(t)
        states.append(rho)
        for name, f in funcs.items():
            series[name].append(f(m))
    return EvolutionResult(
        times=np.array(times),
        states=tuple(states),
        observables={name: np.array(vals) for name, vals in series.items()},
    )


# --- prebuilt physical models -----------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of the prebuilt generators.

    Rates: ``dephasing_rate`` is the pure dephasing rate, ``decay_rate`` the
    excited-to-ground relaxation rate, ``excitation_rate`` the thermal
    up-transition rate. ``energy_up/energy_down`` set the qubit Hamiltonian;
    ``frequency`` and ``fock_cutoff`` apply to the damped oscillator.
    """

    kind: str
    dephasing_rate: float = 0.0
    decay_rate: float = 0.0
    excitation_rate: float = 0.0
    energy_up: float = 0.0
    energy_down: float = 0.0
    frequency: float = 0.0
    fock_cutoff: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise DomainError(f"unknown model kind {self.kind!r}; choose from {MODEL_KINDS}")
        for name in ("dephasing_rate", "decay_rate", "excitation_rate"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.kind == "damped_oscillator" and self.fock_cutoff < 2:
            raise DomainError(f"fock_cutoff must be >= 2, got {self.fock_cutoff}")


def lowering_operator(dim: int) -> np.ndarray:
    """Truncated annihilation operator: ``a|n> = sqrt(n)|n-1>``."""
    a = np.zeros((dim, dim), dtype=complex)
    for n in range(1, dim):
        a[n - 1, n] = np.sqrt(n)
    return a


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=complex))


def build_model(spec: ModelSpec) -> Lindbladian:
    """Construct the generator for a named model.

    pure_dephasing:    R = sqrt(dephasing_rate / 2) sigma_z
    amplitude_decay:   R = sqrt(decay_rate) sigma_minus, H diagonal
    thermal:           amplitude_decay plus R = sqrt(excitation_rate) sigma_plus
    bloch:             all three relaxation operators
    damped_oscillator: R = sqrt(decay_rate) a on a truncated Fock space,
                       H = frequency * n
    """
    kind = spec.kind
    if kind == "naive_decay":
        raise DomainError(
            "naive_decay is not a Lindblad generator; use naive_decay_map instead"
        )
    if kind == "damped_oscillator":
        d = spec.fock_cutoff
        h = spec.frequency * number_operator(d)
        return Lindbladian(h, [np.sqrt(spec.decay_rate) * lowering_operator(d)])

    h = np.diag([spec.energy_up, spec.energy_down]).astype(complex)
    ops = []
    if kind in ("amplitude_decay", "thermal", "bloch"):
        ops.append(np.sqrt(spec.decay_rate) * mc.SIGMA_MINUS)
    if kind in ("thermal", "bloch"):
        ops.append(np.sqrt(spec.excitation_rate) * mc.SIGMA_PLUS)
    if kind in ("pure_dephasing", "bloch"):
        ops.append(np.sqrt(spec.dephasing_rate / 2.0) * mc.SIGMA_Z)
    if kind == "pure_dephasing":
        h = np.zeros((2, 2), dtype=complex)
    return Lindbladian(h, ops)


def coherence_decay_rate(
    l: Lindbladian,
    t_final: float = 3.0,
    dt: float = 1e-3,
    fit_tol: float = 1e-4,
) -> float:
    """Fitted exponential decay rate of ``|rho_01(t)|`` for a qubit generator.

    Starts from the equal-weight superposition state, fits ``log |rho_01|``
    by least squares over the window where the coherence exceeds 1e-6, and
    rejects the fit when the residuals show the decay is not exponential.
    """
    if l.dim != 2:
        raise DomainError(f"coherence decay rate needs a qubit generator, got dim {l.dim}")
    result = evolve(l, dephased_qubit(0.5, 1.0, 1.0), t_final, dt, record=("coherence",))
    coh = result.observable("coherence")
    mask = coh > 1e-6
    if mask.sum() < 10:
        raise DomainError("coherence decays below 1e-6 too quickly to fit; reduce t_final")
    t = result.times[mask]
    log_coh = np.log(coh[mask])
    slope, intercept = np.polyfit(t, log_coh, 1)
    residual = float(np.max(np.abs(log_coh - (slope * t + intercept))))
    if residual > fit_tol:
        raise DomainError(
            f"coherence decay is not exponential: max log-residual {residual:.3e} > {fit_tol:.1e}"
        )
    return float(-slope)


def kraus_first_order(l: Lindbladian, delta_t: float) -> tuple[KrausChannel, float]:
    """First-order Kraus set of the generator over a small step ``delta_t``.

    ``K_0 = 1 + (-iH + A) dt`` with ``A = -sum_j R_j† R_j / 2`` and
    ``K_j = R_j sqrt(dt)``. Returns the channel and its completeness defect,
    which is O(dt^2) and is accepted by the channel constructor up to twice
    its computed value.
    """
    if delta_t <= 0:
        raise DomainError(f"delta_t must be positive, got {delta_t}")
    d = l.dim
    a_op = -0.5 * l._rr
    ops = [np.eye(d, dtype=complex) + (-1j * l.hamiltonian + a_op) * delta_t]
    ops.extend(r * np.sqrt(delta_t) for r in l.relaxation_ops)
    acc = np.zeros((d, d), dtype=complex)
    for k in ops:
        acc += k.conj().T @ k
    defect = mc.max_abs(acc - np.eye(d))
    channel = KrausChannel(ops, completeness_atol=max(1e-10, 2.0 * defect))
    return channel, defect


def naive_decay_map(gamma: float, t: float, rho0: DensityMatrix) -> tuple[np.ndarray, float]:
    """The tempting but wrong decay ansatz: populations relax exponentially
    while the coherences are frozen.

    Returns the raw output matrix and its smallest eigenvalue; once the
    surviving population product drops below ``|rho_01(0)|^2`` the matrix is
    no longer positive semidefinite, which is exactly why this map is not a
    permissible evolution. Deliberately does not return a DensityMatrix.
    """
    if rho0.dim != 2:
        raise DomainError(f"naive decay map is defined for qubits, got dim {rho0.dim}")
    if gamma < 0 or t < 0:
        raise DomainError(f"gamma and t must be nonnegative, got {gamma}, {t}")
    m = rho0.matrix.copy()
    survive = np.exp(-gamma * t)
    p0 = m[0, 0]
    m[0, 0] = survive * p0
    m[1, 1] = 1.0 - survive * p0
    lo = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
    return m, lo


def truncated_poisson_state(mean_occupation: float, max_level: int, dim: int) -> DensityMatrix:
    """Diagonal Fock-space mixture with Poissonian weights on levels
    ``0..max_level``, reweighted so the mean occupation is exact.

    Intended for damped-oscillator runs where the support must stay well
    below the truncation edge.
    """
    if not 0 < max_level < dim:
        raise DomainError(f"need 0 < max_level < dim, got max_level={max_level}, dim={dim}")
    if not 0 < mean_occupation < max_level:
        raise DomainError(
            f"mean occupation must lie in (0, max_level), got {mean_occupation}"
        )
    levels = np.arange(max_level + 1)
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, max_level + 1)))))

    def mean_of(lam: float) -> float:
        logw = levels * np.log(lam) - log_fact
        w = np.exp(logw - logw.max())
        w /= w.sum()
        return float(w @ levels)

    lam = brentq(lambda x: mean_of(x) - mean_occupation, 1e-9, 1e6, xtol=1e-14)
    logw = levels * np.log(lam) - log_fact
    w = np.exp(logw - logw.max())
    w /= w.sum()
    diag = np.zeros(dim)
    diag[: max_level + 1] = w
    return DensityMatrix(np.diag(diag).astype(complex))
