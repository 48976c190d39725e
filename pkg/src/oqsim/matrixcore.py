"""Dense complex linear algebra primitives shared by the rest of the package.

Bipartite operations use one composite-index convention throughout: for a
matrix on a product space of dimensions ``(dim_a, dim_b)``, the row index
``(i, j)`` is ``i * dim_b + j`` (subsystem A is the slow index). This matches
``np.kron(a, b)``.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ParseError, ShapeError

HERMITICITY_ATOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |down><up|
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |up><down|

for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z, SIGMA_MINUS, SIGMA_PLUS):
    _m.flags.writeable = False


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D complex array and reject non-finite entries."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name} must be non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise DomainError(f"{name} contains NaN or Inf entries")
    return a


def adjoint(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.asarray(m).conj().T


def max_abs(m) -> float:
    """Max-entry norm ``max_ij |m_ij|``."""
    return float(np.max(np.abs(m)))


def multiply_adjoint_trace(a, b) -> tuple[np.ndarray, np.ndarray, complex]:
    """Return ``(a @ b, a†, tr a)`` for a square matrix ``a``.

    ``b`` may be rectangular as long as the product is conformable.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"a must be square for the trace, got shape {a.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b, adjoint(a), complex(np.trace(a))


def kron(a, b) -> np.ndarray:
    """Tensor product with subsystem A as the slow index."""
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def _check_bipartite(m: np.ndarray, dims: tuple[int, int]) -> tuple[int, int]:
    da, db = int(dims[0]), int(dims[1])
    if da < 1 or db < 1:
        raise ShapeError(f"subsystem dimensions must be positive, got {dims}")
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"bipartite operations need a square matrix, got shape {m.shape}")
    if m.shape[0] != da * db:
        raise ShapeError(
            f"matrix dimension {m.shape[0]} does not factor as {da} x {db}"
        )
    return da, db


def partial_trace(m, dims: tuple[int, int], keep: str = "a") -> np.ndarray:
    """Trace out one subsystem of a bipartite matrix.

    ``keep="a"`` returns ``out[i',i] = sum_j m[(i',j),(i,j)]``; ``keep="b"``
    is the symmetric formula.
    """
    m = as_matrix(m)
    da, db = _check_bipartite(m, dims)
    blocks = m.reshape(da, db, da, db)
    if keep == "a":
        return np.einsum("ijkj->ik", blocks)
    if keep == "b":
        return np.einsum("ijil->jl", blocks)
    raise DomainError(f'keep must be "a" or "b", got {keep!r}')


def partial_transpose(m, dims: tuple[int, int]) -> np.ndarray:
    """Transpose subsystem A only: ``out[(i',j'),(i,j)] = m[(i,j'),(i',j)]``.

    Pure index permutation, so applying it twice restores the input exactly.
    """
    m = as_matrix(m)
    da, db = _check_bipartite(m, dims)
    return m.reshape(da, db, da, db).transpose(2, 1, 0, 3).reshape(da * db, da * db)


def hermiticity_defect(m) -> float:
    """``max |m - m†|`` entrywise."""
    m = np.asarray(m)
    return max_abs(m - m.conj().T)


def hermitian_eigenvalues(m, tol: float = HERMITICITY_ATOL) -> np.ndarray:
    """Real eigenvalues of a Hermitian matrix, ascending.

    The input is symmetrized as ``(m + m†)/2`` before solving, which absorbs
    roundoff; anything non-Hermitian beyond ``tol`` is rejected instead.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"eigenvalues need a square matrix, got shape {m.shape}")
    defect = hermiticity_defect(m)
    if defect > tol:
        raise DomainError(f"matrix is not Hermitian: max |m - m†| = {defect:.3e} > {tol:.3e}")
    return np.linalg.eigvalsh((m + m.conj().T) / 2)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    # normalize the R phases so the distribution is Haar
    return q * (np.diag(r) / np.abs(np.diag(r)))


# ---------------------------------------------------------------------------
# Plain-text matrix file format: first line "dim_rows dim_cols", then
# row-major entries as "re im" pairs. Lines starting with '#' are comments.
# ---------------------------------------------------------------------------


def format_matrix(m, comment: str | None = None) -> str:
    """Serialize a matrix to the plain-text format."""
    m = as_matrix(m)
    lines = []
    if comment is not None:
        lines.append(f"# {comment}")
    lines.append(f"{m.shape[0]} {m.shape[1]}")
    for row in m:
        lines.append(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row))
    return "\n".join(lines) + "\n"


def tokenize_matrix_text(text: str) -> list[str]:
    """Whitespace tokens of the format, with comment and blank lines removed."""
    tokens: list[str] = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens.extend(stripped.split())
    return tokens


def parse_matrix_tokens(tokens: list[str], pos: int = 0) -> tuple[np.ndarray, int]:
    """Parse one matrix starting at ``tokens[pos]``; return it and the next position."""
    if pos + 2 > len(tokens):
        raise ParseError("missing matrix dimension header")
    try:
        rows, cols = int(tokens[pos]), int(tokens[pos + 1])
    except ValueError as exc:
        raise ParseError(f"bad dimension header {tokens[pos:pos + 2]!r}") from exc
    if rows < 1 or cols < 1:
        raise ParseError(f"dimensions must be positive, got {rows} x {cols}")
    n = 2 * rows * cols
    entries = tokens[pos + 2 : pos + 2 + n]
    if len(entries) < n:
        raise ParseError(f"expected {n} numbers for a {rows} x {cols} matrix, got {len(entries)}")
    try:
        values = np.array([float(t) for t in entries])
    except ValueError as exc:
        raise ParseError(f"non-numeric matrix entry: {exc}") from exc
    m = (values[0::2] + 1j * values[1::2]).reshape(rows, cols)
    return m, pos + 2 + n


def parse_matrix(text: str) -> np.ndarray:
    """Parse exactly one matrix from ``text``; trailing content is an error."""
    tokens = tokenize_matrix_text(text)
    m, pos = parse_matrix_tokens(tokens)
    if pos != len(tokens):
        raise ParseError(f"{len(tokens) - pos} unexpected trailing tokens after matrix")
    return m


def read_matrix(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_matrix(fh.read())


def write_matrix(path, m, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_matrix(m, comment=comment))
