"""Fixed-resource plug-in estimates, bootstrap widths, and Krylov stability.

The estimator pipeline for a prefix of M snapshots:

1. average the snapshot matrices,
2. project the mean back to the density-matrix cone (full space),
3. compress the result into the instance's Krylov basis,
4. evaluate the trace-weighted projected QFI there.

The seed vector, and with it the whole basis ladder, is fixed per
instance: the dominant eigenvector of the exact noisy state, the same
deterministic choice the population values use.  Seeding from the data
would point the estimator at a seed-dependent moving target and detach
it from the calibration tables, and it injects seed-selection
randomness the error split assigns to the resolution side.

The bootstrap resamples shots with replacement and pushes each
resampled mean through steps 1-4 with the basis held fixed, so the
interval measures sampling dispersion at the current configuration.
The Krylov-stability measure compares adjacent orders on the same
prefix and never uses the bootstrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import krylov, linalg, qfi, shadows
from .errors import DegenerateInputError, ValidationError

#: stability placeholder at the lowest Krylov order; forces one increase
SENTINEL_STABILITY = math.inf

#: above this prefix size bootstrap resamples pattern counts directly
#: (multinomial over the empirical distribution, same law as index draws)
_MULTINOMIAL_THRESHOLD = 100_000


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 200
    level: float = 0.90
    seed: int = 0

    def __post_init__(self):
        if self.replicates < 50:
            raise ValidationError(f"bootstrap replicates must be >= 50, got {self.replicates}")
        if not 0.5 < self.level < 1.0:
            raise ValidationError(f"bootstrap level must lie in (0.5, 1), got {self.level}")


@dataclass(frozen=True)
class EstimateBundle:
    """One (K, M) evaluation: point estimate, interval, and stability."""

    f_hat: float
    k: int
    m: int
    boot_lower: float
    boot_upper: float
    width: float
    d_k: float  # SENTINEL_STABILITY exactly when k == 1
    boot_level: float
    degenerate_boot: int = 0


class KrylovShadowEstimator:
    """Plug-in projected-QFI estimator with a fixed per-instance basis.

    Bases for every requested order are cached; orders at or above the
    space dimension use the identity basis (the full-space limit).
    """

    def __init__(self, g, seed_state, g_norm: float | None = None):
        self.g = linalg.check_square(g)
        self.dim = self.g.shape[0]
        self.g_norm = (
            linalg.spectral_norm_hermitian(self.g) if g_norm is None else float(g_norm)
        )
        self.v0 = krylov.dominant_eigvec_seed(seed_state)
        self._bases: dict[int, krylov.KrylovBasis] = {}

    @classmethod
    def for_instance(cls, instance) -> "KrylovShadowEstimator":
        return cls(instance.generator, instance.rho)

    def basis(self, k: int) -> krylov.KrylovBasis:
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        if k not in self._bases:
            if k >= self.dim:
                self._bases[k] = krylov.KrylovBasis(
                    np.eye(self.dim, dtype=complex), k, self.v0
                )
            else:
                self._bases[k] = krylov.build_basis(self.g, self.v0, k, g_norm=self.g_norm)
        return self._bases[k]

    def value_from_mean(self, mean: np.ndarray, k: int) -> float:
        """Cone-project a snapshot mean and evaluate the order-k functional."""
        rho_hat = linalg.project_to_density_cone(mean)
        pair = krylov.project_pair(self.basis(k), rho_hat, self.g)
        return pair.retained_trace * qfi.qfi_spectral(pair.rho_k, pair.g_k)

    def estimate(self, batch: shadows.ShadowBatch, k: int, m_prefix: int) -> float:
        return self.value_from_mean(shadows.mean_estimate(batch, m_prefix), k)

    def stability(self, batch: shadows.ShadowBatch, k: int, m_prefix: int) -> float:
        """Inter-order change |F(k) - F(k-1)| at the same prefix.

        Returns SENTINEL_STABILITY at k == 1, which no tolerance test can
        pass, so the controller always leaves the lowest order.
        """
        if k == 1:
            return SENTINEL_STABILITY
        return abs(
            self.estimate(batch, k, m_prefix) - self.estimate(batch, k - 1, m_prefix)
        )

    def _bootstrap(
        self,
        batch: shadows.ShadowBatch,
        k: int,
        m_prefix: int,
        cfg: BootstrapConfig,
        point: float,
    ) -> tuple[float, float, float, int]:
        positions = batch.prefix_positions(m_prefix)
        counts = batch.prefix_counts(m_prefix)
        n_unique = counts.shape[0]
        pvals = counts / float(m_prefix)
        # decorrelate resampling across resource pairs while staying seeded
        tag = (shadows._STREAM_BOOT << 32) ^ (m_prefix << 8) ^ k
        rng = shadows._philox(cfg.seed, tag)

        values = np.empty(cfg.replicates)
        degenerate = 0
        for b in range(cfg.replicates):
            if m_prefix > _MULTINOMIAL_THRESHOLD:
                counts_b = rng.multinomial(m_prefix, pvals)
            else:
                idx = rng.integers(0, m_prefix, size=m_prefix)
                counts_b = np.bincount(positions[idx], minlength=n_unique)
            try:
                values[b] = self.value_from_mean(batch.weighted_mean(counts_b), k)
            except DegenerateInputError:
                values[b] = point  # keep B fixed; surfaced in the audit count
                degenerate += 1
        alpha = 1.0 - cfg.level
        lower = float(np.quantile(values, alpha / 2.0))
        upper = float(np.quantile(values, 1.0 - alpha / 2.0))
        return lower, upper, upper - lower, degenerate

    def bootstrap_interval(
        self, batch: shadows.ShadowBatch, k: int, m_prefix: int, cfg: BootstrapConfig
    ) -> tuple[float, float, float]:
        """Equal-tailed percentile interval of the plug-in estimate.

        Quantiles use linear interpolation.  Replicates whose resampled
        mean degenerates under cone projection are imputed with the
        full-prefix point estimate so the replicate count stays fixed.
        """
        if m_prefix < 2:
            raise ValidationError("bootstrap needs m_prefix >= 2")
        point = self.estimate(batch, k, m_prefix)
        lower, upper, width, _ = self._bootstrap(batch, k, m_prefix, cfg, point)
        return lower, upper, width

    def bundle(
        self, batch: shadows.ShadowBatch, k: int, m_prefix: int, cfg: BootstrapConfig
    ) -> EstimateBundle:
        """Point estimate, bootstrap interval, and stability in one pass."""
        f_hat = self.estimate(batch, k, m_prefix)
        if k == 1:
            d_k = SENTINEL_STABILITY
        else:
            d_k = abs(f_hat - self.estimate(batch, k - 1, m_prefix))
        lower, upper, width, degenerate = self._bootstrap(batch, k, m_prefix, cfg, f_hat)
        return EstimateBundle(
            f_hat=f_hat,
            k=k,
            m=m_prefix,
            boot_lower=lower,
            boot_upper=upper,
            width=width,
            d_k=d_k,
            boot_level=cfg.level,
            degenerate_boot=degenerate,
        )


def estimate(batch: shadows.ShadowBatch, g, k: int, m_prefix: int, seed_state) -> float:
    """Plug-in projected QFI from the first m_prefix snapshots."""
    return KrylovShadowEstimator(g, seed_state).estimate(batch, k, m_prefix)


def stability(batch: shadows.ShadowBatch, g, k: int, m_prefix: int, seed_state) -> float:
    return KrylovShadowEstimator(g, seed_state).stability(batch, k, m_prefix)


def bootstrap_interval(
    batch: shadows.ShadowBatch, g, k: int, m_prefix: int, cfg: BootstrapConfig, seed_state
) -> tuple[float, float, float]:
    return KrylovShadowEstimator(g, seed_state).bootstrap_interval(batch, k, m_prefix, cfg)


def bundle(
    batch: shadows.ShadowBatch, g, k: int, m_prefix: int, cfg: BootstrapConfig, seed_state
) -> EstimateBundle:
    return KrylovShadowEstimator(g, seed_state).bundle(batch, k, m_prefix, cfg)


def severity(b: EstimateBundle) -> float:
    """Allocation severity max{d_K, w_M}; SENTINEL at the lowest order."""
    return max(b.d_k, b.width)
