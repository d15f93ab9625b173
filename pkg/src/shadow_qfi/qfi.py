"""Exact quantum Fisher information references.

The spectral formula is the reference evaluator; the pure-state variance
formula and the symmetric logarithmic derivative provide independent
cross-checks.  Everything here is evaluated at encoding angle zero, where
the state derivative is the commutator -i[G, rho].
"""

from __future__ import annotations

import numpy as np

from . import linalg
from .errors import ValidationError

#: eigenvalue-pair cutoff: pairs with lambda_j + lambda_k at or below this
#: are excluded from the spectral sum (floating-point rank guard)
DEFAULT_RANK_CUTOFF = 1e-10


def drho(rho, g) -> np.ndarray:
    """State derivative -i[G, rho] under the unitary encoding, Hermitized."""
    r = linalg.check_square(rho)
    gm = linalg.check_square(g)
    if r.shape != gm.shape:
        raise ValidationError(f"dimension mismatch: {r.shape} vs {gm.shape}")
    return linalg.hermitize(-1j * (gm @ r - r @ gm))


def qfi_spectral(rho, g, cutoff: float = DEFAULT_RANK_CUTOFF) -> float:
    """QFI via the eigenbasis sum 2 * sum |<j|drho|k>|^2 / (l_j + l_k).

    Eigenvalue pairs with l_j + l_k <= cutoff are skipped.  The result is
    clamped to zero from tiny negative round-off.
    """
    r = linalg.check_square(rho)
    lam, v = np.linalg.eigh(linalg.hermitize(r))
    a = v.conj().T @ drho(r, g) @ v
    pair_sums = lam[:, None] + lam[None, :]
    mask = pair_sums > cutoff
    value = 2.0 * float(np.sum((np.abs(a) ** 2)[mask] / pair_sums[mask]))
    return max(value, 0.0)


def qfi_pure(psi, g, norm_atol: float = 1e-8) -> float:
    """Pure-state QFI 4 * Var_psi(G) for a normalized state vector."""
    v = np.asarray(psi, dtype=complex).ravel()
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > norm_atol:
        raise ValidationError(f"state vector norm {nrm} is not 1")
    gm = linalg.check_square(g)
    gv = gm @ v
    mean = float(np.vdot(v, gv).real)
    second = float(np.vdot(gv, gv).real)
    return max(4.0 * (second - mean * mean), 0.0)


def sld(rho, g, cutoff: float = DEFAULT_RANK_CUTOFF) -> np.ndarray:
    """Symmetric logarithmic derivative L solving drho = (rho L + L rho)/2.

    Built entrywise in the eigenbasis as L_jk = 2 (drho)_jk / (l_j + l_k),
    skipping pairs at or below the cutoff.  Test-side operation: the
    estimator path evaluates the spectral sum directly.
    """
    r = linalg.check_square(rho)
    lam, v = np.linalg.eigh(linalg.hermitize(r))
    a = v.conj().T @ drho(r, g) @ v
    pair_sums = lam[:, None] + lam[None, :]
    l_eig = np.where(pair_sums > cutoff, 2.0 * a / np.where(pair_sums > cutoff, pair_sums, 1.0), 0.0)
    return linalg.hermitize(v @ l_eig @ v.conj().T)
