"""Noisy entangled-state benchmark family.

A transverse-field ZZ entangler prepares the pure state, per-qubit
dephasing plus a global depolarizing channel mix it, and a fixed
Hermitian generator encodes the parameter.  Qubit 0 is the leftmost
tensor factor throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ValidationError
from .qfi import qfi_spectral

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

#: transverse-field weight in the entangling Hamiltonian
ENTANGLER_FIELD = 0.35
#: XX-coupling weight in the encoding generator
GENERATOR_XX = 0.08
#: single-qubit Z weight in the encoding generator
GENERATOR_Z = 0.5
DEFAULT_ALPHA = 0.25


@dataclass(frozen=True)
class NoiseConfig:
    """Family parameters: size, per-qubit dephasing, global depolarizing."""

    n_qubits: int
    p_phi: float
    p_dep: float
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValidationError(f"n_qubits must be >= 1, got {self.n_qubits}")
        if self.n_qubits > linalg.MAX_QUBITS:
            raise ValidationError(
                f"n_qubits {self.n_qubits} exceeds the cap of {linalg.MAX_QUBITS}"
            )
        for name, p in (("p_phi", self.p_phi), ("p_dep", self.p_dep)):
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {p}")


@dataclass(frozen=True)
class BenchmarkInstance:
    """Noisy base state, encoding generator, and its exact reference QFI."""

    rho: np.ndarray
    generator: np.ndarray
    config: NoiseConfig
    f_ref: float


def op_on_qubit(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Embed a single-qubit operator at position ``qubit`` (0 = leftmost)."""
    if not 0 <= qubit < n:
        raise ValidationError(f"qubit {qubit} out of range for n={n}")
    left = np.eye(2**qubit, dtype=complex)
    right = np.eye(2 ** (n - 1 - qubit), dtype=complex)
    return np.kron(np.kron(left, op), right)


def entangling_hamiltonian(n: int) -> np.ndarray:
    """Nearest-neighbour ZZ chain plus a transverse X field."""
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)
    for j in range(n - 1):
        h += op_on_qubit(PAULI_Z, j, n) @ op_on_qubit(PAULI_Z, j + 1, n)
    for j in range(n):
        h += ENTANGLER_FIELD * op_on_qubit(PAULI_X, j, n)
    return h


def build_entangled_state(config: NoiseConfig) -> np.ndarray:
    """exp(-i * alpha * H_ent) applied to the uniform-superposition state."""
    n = config.n_qubits
    dim = 2**n
    plus = np.full(dim, 1.0 / np.sqrt(dim), dtype=complex)
    if config.alpha == 0.0:
        return plus
    w, v = linalg.eig_hermitian(entangling_hamiltonian(n))
    psi = v @ (np.exp(-1j * config.alpha * w) * (v.conj().T @ plus))
    return psi / np.linalg.norm(psi)


def apply_dephasing(rho, p_phi: float) -> np.ndarray:
    """Independent single-qubit dephasing rho -> (1-p) rho + p Z_j rho Z_j.

    Applied sequentially for qubits j = 0..n-1; the channels commute, so
    the fixed order only pins down floating-point reproducibility.
    """
    r = linalg.check_density_matrix(rho)
    if not 0.0 <= p_phi <= 1.0:
        raise ValidationError(f"p_phi must lie in [0, 1], got {p_phi}")
    if p_phi == 0.0:
        return r
    n = linalg.n_qubits_of(r.shape[0])
    out = r
    for j in range(n):
        zj = op_on_qubit(PAULI_Z, j, n)
        out = (1.0 - p_phi) * out + p_phi * (zj @ out @ zj)
    return linalg.hermitize(out)


def apply_depolarizing(rho, p_dep: float) -> np.ndarray:
    """Global depolarizing channel rho -> (1-p) rho + p I / 2^n."""
    r = linalg.check_density_matrix(rho)
    if not 0.0 <= p_dep <= 1.0:
        raise ValidationError(f"p_dep must lie in [0, 1], got {p_dep}")
    dim = r.shape[0]
    return (1.0 - p_dep) * r + p_dep * np.eye(dim, dtype=complex) / dim


def build_generator(n: int) -> np.ndarray:
    """Encoding generator: half the total-Z sum plus a weak XX chain."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    dim = 2**n
    g = np.zeros((dim, dim), dtype=complex)
    for j in range(n):
        g += GENERATOR_Z * op_on_qubit(PAULI_Z, j, n)
    for j in range(n - 1):
        g += GENERATOR_XX * (
            op_on_qubit(PAULI_X, j, n) @ op_on_qubit(PAULI_X, j + 1, n)
        )
    return g


def build_instance(config: NoiseConfig) -> BenchmarkInstance:
    """Compose channels over the entangled pure state and attach F_ref."""
    psi = build_entangled_state(config)
    rho_pure = np.outer(psi, psi.conj())
    rho = apply_depolarizing(apply_dephasing(rho_pure, config.p_phi), config.p_dep)
    g = build_generator(config.n_qubits)
    f_ref = qfi_spectral(rho, g)
    return BenchmarkInstance(rho=rho, generator=g, config=config, f_ref=f_ref)
