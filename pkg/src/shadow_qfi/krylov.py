"""Krylov-subspace projection of density matrices and the generator.

The projected QFI functional compresses (rho, G) into the span of
{v0, G v0, ..., G^(K-1) v0}, normalizes the compressed state, evaluates
the spectral QFI there, and weights the result by the retained trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg, qfi
from .errors import DegenerateProjectionError, ValidationError

#: residual threshold (relative to ||G||) below which a basis vector is
#: declared linearly dependent and the build stops early
BREAKDOWN_RTOL = 1e-12


@dataclass(frozen=True)
class KrylovBasis:
    columns: np.ndarray  # (dim, r), orthonormal
    requested_order: int
    seed_vector: np.ndarray

    @property
    def effective_rank(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class ProjectedPair:
    """Compressed state (normalized), compressed generator, retained trace."""

    rho_k: np.ndarray
    g_k: np.ndarray
    retained_trace: float


def dominant_eigvec_seed(rho) -> np.ndarray:
    """Dominant eigenvector with a deterministic phase.

    The phase convention makes the first entry of non-negligible modulus
    real and positive, so repeated calls agree bit-for-bit.
    """
    r = linalg.check_square(rho)
    _, v = np.linalg.eigh(linalg.hermitize(r))
    vec = v[:, -1].copy()
    mags = np.abs(vec)
    pivot = int(np.argmax(mags > 1e-12 * mags.max()))
    phase = vec[pivot] / abs(vec[pivot])
    vec *= np.conj(phase)
    return vec / np.linalg.norm(vec)


def build_basis(g, v0, k: int, g_norm: float | None = None) -> KrylovBasis:
    """Orthonormal basis of the order-k Krylov space of (G, v0).

    Modified Gram-Schmidt with one full reorthogonalization pass.  A
    residual below BREAKDOWN_RTOL * ||G|| stops the build early, leaving
    effective_rank < k.
    """
    gm = linalg.check_square(g)
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    v = np.asarray(v0, dtype=complex).ravel()
    if v.shape[0] != gm.shape[0]:
        raise ValidationError("seed vector dimension does not match the generator")
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValidationError("seed vector is zero")
    v = v / nrm
    if g_norm is None:
        g_norm = linalg.spectral_norm_hermitian(gm)
    tol = BREAKDOWN_RTOL * g_norm

    cols = [v]
    for _ in range(1, k):
        w = gm @ cols[-1]
        for _pass in range(2):  # MGS + one reorthogonalization
            for c in cols:
                w = w - np.vdot(c, w) * c
        res = np.linalg.norm(w)
        if res <= tol:
            break
        cols.append(w / res)
    return KrylovBasis(np.column_stack(cols), k, v)


def project_pair(basis: KrylovBasis, rho_like, g) -> ProjectedPair:
    """Compress (rho_like, G) into the basis and normalize the state.

    retained_trace is the trace of the compressed state before cone
    projection and normalization.
    """
    v = basis.columns
    r = linalg.check_square(rho_like)
    gm = linalg.check_square(g)
    raw = v.conj().T @ r @ v
    retained = float(np.trace(raw).real)
    if retained <= 1e-12:
        raise DegenerateProjectionError(
            f"projection retains trace {retained:.3e}; subspace sees no state"
        )
    rho_k = linalg.project_to_density_cone(raw)
    g_k = linalg.hermitize(v.conj().T @ gm @ v)
    return ProjectedPair(rho_k=rho_k, g_k=g_k, retained_trace=retained)


def phi_k(
    rho_input,
    g,
    k: int,
    seed_source,
    g_norm: float | None = None,
    cutoff: float = qfi.DEFAULT_RANK_CUTOFF,
) -> float:
    """Projected QFI at order k, weighted by the retained trace.

    The seed vector is the dominant eigenvector of ``seed_source`` (the
    exact state for population values, the reconstructed estimate on the
    estimator path).  The compressed state is cone-projected a second
    time inside the subspace to absorb compression round-off.

    An order at or above the space dimension is the full-space limit of
    the functional (any generic seed spans everything); it is evaluated
    with the identity basis so that symmetry-confined seeds, whose strict
    power sequence stalls early, still reach that limit exactly.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    v0 = dominant_eigvec_seed(seed_source)
    dim = v0.shape[0]
    if k >= dim:
        basis = KrylovBasis(np.eye(dim, dtype=complex), k, v0)
    else:
        basis = build_basis(g, v0, k, g_norm=g_norm)
    pair = project_pair(basis, rho_input, g)
    return pair.retained_trace * qfi.qfi_spectral(pair.rho_k, pair.g_k, cutoff)


def population_table(instance, k_max: int) -> list[tuple[int, float, float]]:
    """Rows (K, F_K, |B_K|) of infinite-sample values on the exact state.

    F_K is the projected QFI of the exact density matrix seeded from its
    own dominant eigenvector; |B_K| = |F_K - F_ref| is the truncation
    bias magnitude used by calibration tables.
    """
    if k_max < 1:
        raise ValidationError(f"k_max must be >= 1, got {k_max}")
    g_norm = linalg.spectral_norm_hermitian(instance.generator)
    rows = []
    for k in range(1, k_max + 1):
        f_k = phi_k(instance.rho, instance.generator, k, instance.rho, g_norm=g_norm)
        rows.append((k, f_k, abs(f_k - instance.f_ref)))
    return rows
