"""Diagnostics for the sample-vs-population score asymptotics.

Everything here quantifies how the dual-PCA output relates to the
generating population: per-cell score ratios and their common-scaling
summary, the exact three-term decomposition of a signed ratio, eigenvalue
ratios, eigenvector angles, cross-spike overlaps, and tail leakage.

All component indices j, k are 0-based (j = 0 is the leading spike).
Inner products u_j'u_k are computed in the dual form
(X v_j)'u_k / (sqrt(divisor) sqrt(eigenvalue)) whenever loadings are not
stored, so no d-length loading vector needs to be kept at large d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pca_engine import PcaResult, ZERO_EIGENVALUE_RTOL
from .spike_model import DataMatrix, ZeroMean, _frame, basis_vectors, resolve_eigenvalues

DEFAULT_DENOMINATOR_GUARD = 1e-8


@dataclass(frozen=True)
class ScoreRatioTable:
    """Per-cell score ratios |sample / population| with column summaries.

    Cells whose population score fell below the denominator guard are
    excluded: NaN in ``ratios`` and listed in ``excluded``.  Columns with
    more than n/2 exclusions are degenerate and get NaN statistics.
    The relative spread is (max - min) / median over surviving cells,
    the operational measure of a common scaling across observations.
    """

    ratios: np.ndarray
    excluded: frozenset
    medians: np.ndarray
    means: np.ndarray
    rel_spreads: np.ndarray
    n_excluded: np.ndarray
    degenerate: np.ndarray


@dataclass(frozen=True)
class RatioDecomposition:
    """Exact split of one signed score ratio into its three sources.

    ``signal`` is the rescaled own-direction overlap, ``cross_spike`` the
    contribution of the other spike directions, ``noise`` the tail-direction
    sum.  ``total`` is the directly computed signed ratio, which the three
    terms reproduce to rounding.  ``noise_bound`` is the Cauchy-Schwarz
    upper bound on |noise|.
    """

    signal: float
    cross_spike: float
    noise: float
    total: float
    noise_bound: float


def score_ratio_table(
    s_hat: np.ndarray,
    s: np.ndarray,
    guard: float = DEFAULT_DENOMINATOR_GUARD,
) -> ScoreRatioTable:
    """Tabulate |s_hat / s| cellwise with guard-based exclusion.

    ``s_hat`` and ``s`` are n x m score matrices for the same sample.
    """
    s_hat = np.asarray(s_hat, dtype=float)
    s = np.asarray(s, dtype=float)
    if s_hat.shape != s.shape:
        raise ValueError(f"shape mismatch: {s_hat.shape} vs {s.shape}")
    if s_hat.ndim != 2:
        raise ValueError(f"score matrices must be 2-d, got shape {s_hat.shape}")
    if guard <= 0:
        raise ValueError(f"guard must be positive, got {guard}")

    n, m = s.shape
    ok = np.abs(s) >= guard
    ratios = np.full((n, m), np.nan)
    np.divide(np.abs(s_hat), np.abs(s), out=ratios, where=ok)

    excluded = frozenset(zip(*np.nonzero(~ok)))
    n_excluded = (~ok).sum(axis=0)
    degenerate = n_excluded > n / 2

    medians = np.full(m, np.nan)
    means = np.full(m, np.nan)
    rel_spreads = np.full(m, np.nan)
    for j in range(m):
        if degenerate[j]:
            continue
        col = ratios[ok[:, j], j]
        medians[j] = np.median(col)
        means[j] = col.mean()
        if medians[j] > 0:
            rel_spreads[j] = (col.max() - col.min()) / medians[j]
    return ScoreRatioTable(
        ratios=ratios,
        excluded=excluded,
        medians=medians,
        means=means,
        rel_spreads=rel_spreads,
        n_excluded=n_excluded,
        degenerate=degenerate,
    )


def spike_overlaps(
    pca: PcaResult,
    basis_m: np.ndarray,
    x: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Signed inner products of sample loadings with population directions.

    Returns O with O[j, k] = u_hat_j' u_k for the retained components j and
    the columns of ``basis_m``.  Uses stored loadings when present;
    otherwise ``x`` (the matrix the PCA was computed from) is required and
    the dual form is used.  Rows with a numerically zero eigenvalue are NaN.
    """
    basis_m = np.asarray(basis_m, dtype=float)
    if basis_m.ndim != 2:
        raise ValueError(f"basis must be a (d, m) matrix, got shape {basis_m.shape}")
    if pca.loadings is not None:
        out = pca.loadings.T @ basis_m
        if pca.loading_valid is not None:
            out[~pca.loading_valid, :] = np.nan
        return out
    if x is None:
        raise ValueError("pca has no loadings; pass x for the dual-form route")
    x = np.asarray(x, dtype=float)
    if x.shape != (pca.d, pca.n):
        raise ValueError(f"x must be ({pca.d}, {pca.n}), got {x.shape}")
    xc = x - x.mean(axis=1, keepdims=True) if pca.centered else x
    proj = xc.T @ basis_m  # (n, m), one pass over X
    out = pca.score_vectors.T @ proj
    w = pca.sample_eigenvalues
    zero_tol = ZERO_EIGENVALUE_RTOL * w[0] if w[0] > 0 else 0.0
    valid = w > zero_tol
    out[valid, :] /= (math.sqrt(pca.divisor) * np.sqrt(w[valid]))[:, None]
    out[~valid, :] = np.nan
    return out


def eigenvalue_ratio(pca: PcaResult, population_eigenvalues, j: int) -> float:
    """Ratio of sample to population eigenvalue for component j."""
    lam = np.asarray(population_eigenvalues, dtype=float)
    if not 0 <= j < pca.rank:
        raise ValueError(f"j must be in [0, {pca.rank}), got {j}")
    if j >= lam.size:
        raise ValueError(f"population eigenvalue {j} not provided")
    if lam[j] <= 0:
        raise ValueError(f"population eigenvalue {j} must be positive")
    return float(pca.sample_eigenvalues[j] / lam[j])


def angle_to_population(
    pca: PcaResult,
    basis_m: np.ndarray,
    j: int,
    x: Optional[np.ndarray] = None,
) -> float:
    """Angle in [0, pi/2] between sample loading j and population direction j."""
    overlap = spike_overlaps(pca, basis_m, x=x)[j, j]
    return float(np.arccos(min(1.0, abs(overlap))))


def cross_spike_overlap(
    pca: PcaResult,
    basis_m: np.ndarray,
    population_eigenvalues,
    j: int,
    k: int,
    x: Optional[np.ndarray] = None,
) -> float:
    """Eigenvalue-weighted overlap sqrt(lambda_k / lambda_j) |u_hat_j' u_k|."""
    if j == k:
        raise ValueError("cross-spike overlap needs j != k")
    lam = np.asarray(population_eigenvalues, dtype=float)
    overlap = spike_overlaps(pca, basis_m, x=x)[j, k]
    return float(math.sqrt(lam[k] / lam[j]) * abs(overlap))


def tail_leakage(
    pca: PcaResult,
    basis_m: np.ndarray,
    j: int,
    m: Optional[int] = None,
    x: Optional[np.ndarray] = None,
) -> float:
    """Squared mass of sample loading j outside the spike span.

    Computed as 1 - sum_{k<m} (u_hat_j' u_k)**2, which equals the tail sum
    exactly because the population basis is orthonormal.  May dip a hair
    below 0 from rounding.
    """
    basis_m = np.asarray(basis_m, dtype=float)
    if m is None:
        m = basis_m.shape[1]
    overlaps = spike_overlaps(pca, basis_m[:, :m], x=x)[j]
    return float(1.0 - overlaps @ overlaps)


def ratio_decomposition(
    data: DataMatrix,
    pca: PcaResult,
    i: int,
    j: int,
    guard: float = DEFAULT_DENOMINATOR_GUARD,
) -> RatioDecomposition:
    """Split the signed score ratio for cell (i, j) into its exact terms.

    Requires the full latent matrix (generation keeps it only when
    d <= DIAGNOSTIC_MAX_D) and a zero-mean model.  The three terms sum to
    the directly computed signed ratio up to rounding, and |noise| never
    exceeds ``noise_bound``.
    """
    spec = data.spec
    full = data.latent.full
    if full is None:
        raise ValueError(
            "ratio decomposition needs the full latent matrix; it is retained "
            "only in diagnostic mode (d <= 10_000)"
        )
    if not isinstance(spec.mean, ZeroMean):
        raise ValueError("ratio decomposition is defined for the zero-mean model")
    if not 0 <= j < min(pca.rank, spec.m):
        raise ValueError(f"j must be in [0, {min(pca.rank, spec.m)}), got {j}")
    if not 0 <= i < spec.n:
        raise ValueError(f"i must be in [0, {spec.n}), got {i}")
    lam_hat = float(pca.sample_eigenvalues[j])
    if lam_hat <= 0:
        raise ValueError(f"sample eigenvalue {j} is zero; ratio undefined")
    z_ij = float(full[i, j])
    if abs(z_ij) < guard:
        raise ValueError(
            f"population score z[{i},{j}] = {z_ij:g} is below the guard {guard:g}"
        )

    # u_hat_j in population coordinates: U' u_hat_j.
    if pca.loadings is not None and (
        pca.loading_valid is None or pca.loading_valid[j]
    ):
        u_hat = pca.loadings[:, j]
    else:
        u_hat = (data.values @ pca.score_vectors[:, j]) / (
            math.sqrt(pca.divisor) * math.sqrt(lam_hat)
        )
    frame = _frame(spec)
    w = u_hat if frame is None else frame.apply_transpose(u_hat)

    lam = resolve_eigenvalues(spec)
    m = spec.m
    z_i = full[i]
    coeff = np.sqrt(lam) * z_i * w / (math.sqrt(lam_hat) * z_ij)
    signal = float(math.sqrt(lam[j] / lam_hat) * w[j])
    cross = float(coeff[:m].sum() - coeff[j])
    noise = float(coeff[m:].sum())

    total = float(math.sqrt(pca.divisor) * pca.score_vectors[i, j] / z_ij)

    tail_z_sq = float(z_i[m:] @ z_i[m:])
    tail_w_sq = float(w[m:] @ w[m:])
    bound_sq = spec.tail_value * tail_z_sq * tail_w_sq / (lam_hat * z_ij**2)
    noise_bound = math.sqrt(max(bound_sq, 0.0))
    if abs(noise) > noise_bound * (1.0 + 1e-9) + 1e-300:
        raise ArithmeticError(
            f"noise term {noise:g} exceeds its Cauchy-Schwarz bound {noise_bound:g}"
        )
    return RatioDecomposition(
        signal=signal,
        cross_spike=cross,
        noise=noise,
        total=total,
        noise_bound=noise_bound,
    )


def comparable_sample_scores(pca: PcaResult, m: int) -> np.ndarray:
    """Sample scores on the population-score scale.

    The unit-norm score vectors are rescaled by sqrt(divisor), which makes
    them the per-observation projections on the sample directions divided
    by sqrt(sample eigenvalue) -- the normalization under which the ratio
    to the population scores has the sqrt(n / chi2_n) limit.
    """
    from .pca_engine import sample_score_matrix

    return math.sqrt(pca.divisor) * sample_score_matrix(pca, m)
