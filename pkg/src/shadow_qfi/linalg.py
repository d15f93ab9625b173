"""Dense complex linear algebra on small multi-qubit Hilbert spaces.

All operators are plain ``numpy`` arrays of ``complex128`` in row-major
order.  Dimensions are capped at ``2**12``; anything larger is rejected
rather than silently attempted.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, ValidationError

MAX_QUBITS = 12
MAX_DIM = 2**MAX_QUBITS

#: entrywise tolerance for declaring a matrix Hermitian
HERMITIAN_ATOL = 1e-12
#: looser tolerance accepted by the cone projection (shadow means carry noise)
CONE_HERMITIAN_ATOL = 1e-9


def as_complex_matrix(a) -> np.ndarray:
    """Coerce to a finite 2-d complex array within the dimension cap."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValidationError(f"expected a 2-d matrix, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ValidationError("matrix has non-finite entries")
    if max(m.shape) > MAX_DIM:
        raise ValidationError(
            f"dimension {max(m.shape)} exceeds the 2**{MAX_QUBITS} cap"
        )
    return m


def check_square(a) -> np.ndarray:
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    return m


def hermitize(a: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (a + a†)/2."""
    return 0.5 * (a + a.conj().T)


def hermiticity_defect(a: np.ndarray) -> float:
    """Largest entrywise deviation of ``a`` from its conjugate transpose."""
    return float(np.abs(a - a.conj().T).max()) if a.size else 0.0


def check_hermitian(a, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    m = check_square(a)
    defect = hermiticity_defect(m)
    if defect > atol:
        raise ValidationError(
            f"matrix is not Hermitian: max |a - a†| = {defect:.3e} > {atol:.1e}"
        )
    return m


class Spectral(NamedTuple):
    """Eigendecomposition of a Hermitian operator, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # orthonormal columns


def eig_hermitian(op, atol: float = HERMITIAN_ATOL) -> Spectral:
    """Validated Hermitian eigendecomposition, eigenvalues ascending."""
    m = check_hermitian(op, atol)
    w, v = np.linalg.eigh(hermitize(m))
    return Spectral(w, v)


def expm_unitary(generator, angle: float, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """exp(-i * generator * angle) for a Hermitian generator, via eigh."""
    w, v = eig_hermitian(generator, atol)
    phases = np.exp(-1j * w * float(angle))
    return (v * phases) @ v.conj().T


def kron(a, b) -> np.ndarray:
    """Tensor product; the left factor acts on the leading subsystem."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def project_to_density_cone(m, herm_atol: float = CONE_HERMITIAN_ATOL) -> np.ndarray:
    """Nearest-by-convention valid density matrix.

    Hermitizes, clips negative eigenvalues at zero, and renormalizes the
    trace to one.  Idempotent on valid density matrices.

    Raises:
        DegenerateInputError: if every eigenvalue clips to zero.
    """
    mat = check_square(m)
    if hermiticity_defect(mat) > herm_atol:
        raise ValidationError(
            f"cone projection needs a nearly Hermitian input "
            f"(defect {hermiticity_defect(mat):.3e} > {herm_atol:.1e})"
        )
    w, v = np.linalg.eigh(hermitize(mat))
    w = np.clip(w, 0.0, None)
    total = float(w.sum())
    if total <= 1e-12:
        raise DegenerateInputError("all eigenvalues clipped to zero; trace vanished")
    w /= total
    return hermitize((v * w) @ v.conj().T)


def check_density_matrix(
    rho,
    herm_atol: float = HERMITIAN_ATOL,
    trace_atol: float = 1e-10,
    eig_floor: float = -1e-10,
) -> np.ndarray:
    """Validate Hermiticity, unit trace, positivity, and 2**n dimension."""
    m = check_hermitian(rho, herm_atol)
    n_qubits_of(m.shape[0])
    tr = complex(np.trace(m))
    if abs(tr - 1.0) > trace_atol:
        raise ValidationError(f"trace {tr} deviates from 1 beyond {trace_atol:.1e}")
    w_min = float(np.linalg.eigvalsh(hermitize(m)).min())
    if w_min < eig_floor:
        raise ValidationError(f"minimum eigenvalue {w_min:.3e} below {eig_floor:.1e}")
    return m


def n_qubits_of(dim: int) -> int:
    """Number of qubits for a Hilbert-space dimension; rejects non-powers of 2."""
    n = int(dim).bit_length() - 1
    if dim <= 0 or 2**n != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    if n > MAX_QUBITS:
        raise ValidationError(f"{n} qubits exceeds the cap of {MAX_QUBITS}")
    return n


def spectral_norm_hermitian(op, atol: float = HERMITIAN_ATOL) -> float:
    """Spectral norm of a Hermitian operator (largest |eigenvalue|)."""
    w, _ = eig_hermitian(op, atol)
    return float(np.abs(w).max()) if w.size else 0.0
