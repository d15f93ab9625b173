"""Randomized local-Pauli measurement simulation and shadow estimates.

Each shot draws an independent uniform measurement basis per qubit,
samples a bitstring from the exact rotated outcome distribution, and is
summarized by the inverted single-shot estimate

    snapshot = tensor_j ( 3 * u_j^dag |b_j><b_j| u_j  -  I ).

Randomness comes from counter-based Philox streams keyed by (seed,
stream tag), with one stream word per (shot, qubit) basis draw and one
per shot outcome draw.  That layout makes prefixes exact: the batch of
size M' drawn from a seed is bit-for-bit the first M' shots of any
larger batch from the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ValidationError

BASIS_LABELS = "XYZ"

_MASK64 = (1 << 64) - 1
_STREAM_BASES = 0x5A11
_STREAM_OUTCOMES = 0x0B17
_STREAM_BOOT = 0xB007

_SQ2 = 1.0 / np.sqrt(2.0)
_HADAMARD = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
_S_DAGGER = np.array([[1.0, 0.0], [0.0, -1.0j]], dtype=complex)

#: rotation applied before a computational-basis readout, per basis label
_U_LOCAL = np.stack([_HADAMARD, _HADAMARD @ _S_DAGGER, np.eye(2, dtype=complex)])

# inverted single-shot local factors: 3 u^dag |b><b| u - I, trace 1 each
_INV_FACTOR = np.empty((3, 2, 2, 2), dtype=complex)
for _b in range(3):
    for _o in range(2):
        proj = np.zeros((2, 2), dtype=complex)
        proj[_o, _o] = 1.0
        _INV_FACTOR[_b, _o] = 3.0 * (_U_LOCAL[_b].conj().T @ proj @ _U_LOCAL[_b]) - np.eye(2)

#: largest qubit count for which per-batch snapshot matrices are cached
_PATTERN_CACHE_MAX_QUBITS = 7


def _philox(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, tag & _MASK64]))


@dataclass(frozen=True)
class Snapshot:
    """One randomized measurement and its inverted matrix estimate."""

    bases: np.ndarray  # (n,) uint8 indices into "XYZ"
    outcomes: np.ndarray  # (n,) bits
    snapshot_matrix: np.ndarray

    @property
    def basis_labels(self) -> str:
        return "".join(BASIS_LABELS[b] for b in self.bases)


def _pattern_matrix(bases: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    mat = _INV_FACTOR[bases[0], outcomes[0]]
    for b, o in zip(bases[1:], outcomes[1:]):
        mat = np.kron(mat, _INV_FACTOR[b, o])
    return mat


class ShadowBatch:
    """Ordered snapshots from one seed, stored as compact (bases, outcomes).

    Snapshot matrices and per-pattern tables are built lazily; the batch
    is immutable after construction and safe to share across workers.
    """

    def __init__(self, n_qubits: int, seed: int, bases: np.ndarray, outcomes: np.ndarray):
        self.n_qubits = int(n_qubits)
        self.seed = int(seed)
        self.bases = bases
        self.outcomes = outcomes
        # shots keyed by their local (basis, outcome) pattern, base-6 digits
        digits = bases.astype(np.int64) * 2 + outcomes.astype(np.int64)
        weights = 6 ** np.arange(n_qubits - 1, -1, -1, dtype=np.int64)
        self._pattern_ids = digits @ weights
        self._unique_ids: np.ndarray | None = None
        self._positions: np.ndarray | None = None
        self._unique_matrices: np.ndarray | None = None

    def __len__(self) -> int:
        return self.bases.shape[0]

    def snapshot(self, i: int) -> Snapshot:
        b = self.bases[i]
        o = self.outcomes[i]
        return Snapshot(bases=b.copy(), outcomes=o.copy(), snapshot_matrix=_pattern_matrix(b, o))

    # -- pattern-grouped acceleration ------------------------------------

    def _ensure_patterns(self) -> None:
        if self._unique_ids is None:
            self._unique_ids, self._positions = np.unique(
                self._pattern_ids, return_inverse=True
            )

    def _ensure_matrices(self) -> None:
        self._ensure_patterns()
        if self._unique_matrices is None:
            # decode each unique pattern id back into base-6 digits
            dim = 2**self.n_qubits
            mats = np.empty((len(self._unique_ids), dim, dim), dtype=complex)
            for u, pid in enumerate(self._unique_ids):
                digits = np.empty(self.n_qubits, dtype=np.int64)
                rem = int(pid)
                for q in range(self.n_qubits - 1, -1, -1):
                    digits[q] = rem % 6
                    rem //= 6
                mats[u] = _pattern_matrix(digits // 2, digits % 2)
            self._unique_matrices = mats

    def prefix_positions(self, m_prefix: int) -> np.ndarray:
        """Per-shot indices into the unique-pattern table, first m shots."""
        self._ensure_patterns()
        return self._positions[:m_prefix]

    def prefix_counts(self, m_prefix: int) -> np.ndarray:
        self._ensure_patterns()
        return np.bincount(
            self._positions[:m_prefix], minlength=len(self._unique_ids)
        )

    def weighted_mean(self, counts: np.ndarray) -> np.ndarray:
        """Count-weighted average of unique snapshot matrices."""
        total = int(counts.sum())
        if total <= 0:
            raise ValidationError("empty snapshot selection")
        if self.n_qubits <= _PATTERN_CACHE_MAX_QUBITS:
            self._ensure_matrices()
            return np.tensordot(counts.astype(float), self._unique_matrices, axes=1) / total
        self._ensure_patterns()
        dim = 2**self.n_qubits
        acc = np.zeros((dim, dim), dtype=complex)
        for u in np.nonzero(counts)[0]:
            i = int(np.argmax(self._positions == u))
            acc += counts[u] * _pattern_matrix(self.bases[i], self.outcomes[i])
        return acc / total


def _rotated_cumulative(rho: np.ndarray, basis_row: np.ndarray) -> np.ndarray:
    """Cumulative outcome distribution of rho measured in the given bases."""
    u = _U_LOCAL[basis_row[0]]
    for b in basis_row[1:]:
        u = np.kron(u, _U_LOCAL[b])
    probs = np.einsum("ij,jk,ik->i", u, rho, u.conj()).real
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    return np.cumsum(probs)


def draw_snapshots(rho, m: int, seed: int) -> ShadowBatch:
    """Simulate m randomized local-Pauli measurements of rho.

    Deterministic given (rho, m, seed), with exact nested prefixes: the
    first m' shots coincide with the batch of size m' from the same seed.
    """
    r = linalg.check_density_matrix(rho)
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    n = linalg.n_qubits_of(r.shape[0])
    dim = 2**n

    # one uniform word per (shot, qubit); floor(3u) has bias ~2^-53
    u_bases = _philox(seed, _STREAM_BASES).random((m, n))
    bases = np.minimum((3.0 * u_bases).astype(np.uint8), 2)
    u_out = _philox(seed, _STREAM_OUTCOMES).random(m)

    outcomes = np.empty((m, n), dtype=np.uint8)
    combo_ids = bases.astype(np.int64) @ (3 ** np.arange(n - 1, -1, -1, dtype=np.int64))
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    for cid in np.unique(combo_ids):
        rows = np.nonzero(combo_ids == cid)[0]
        cum = _rotated_cumulative(r, bases[rows[0]])
        idx = np.searchsorted(cum, u_out[rows], side="right")
        idx = np.clip(idx, 0, dim - 1)
        outcomes[rows] = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    return ShadowBatch(n, seed, bases, outcomes)


def mean_estimate(batch: ShadowBatch, m_prefix: int) -> np.ndarray:
    """Arithmetic mean of the first m_prefix snapshot matrices.

    Hermitian with unit trace by construction, but generally not
    positive semidefinite.
    """
    if not 1 <= m_prefix <= len(batch):
        raise ValidationError(
            f"m_prefix must lie in [1, {len(batch)}], got {m_prefix}"
        )
    return batch.weighted_mean(batch.prefix_counts(m_prefix))


def resample_bootstrap(
    batch: ShadowBatch, m_prefix: int, b_replicates: int, seed: int
) -> list[np.ndarray]:
    """Uniform-with-replacement index multisets over the first m_prefix shots."""
    if m_prefix < 1 or m_prefix > len(batch):
        raise ValidationError(f"m_prefix must lie in [1, {len(batch)}]")
    if b_replicates < 1:
        raise ValidationError("b_replicates must be >= 1")
    rng = _philox(seed, _STREAM_BOOT)
    return [rng.integers(0, m_prefix, size=m_prefix) for _ in range(b_replicates)]
