"""Sample PCA through the n x n Gram matrix.

For d >> n data the d x d sample covariance is never formed: eigenvalues
and score vectors come from the Gram matrix X'X / divisor, and loadings are
recovered on demand as X v / (sqrt(divisor) sqrt(eigenvalue)).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.linalg

# Eigenvalues below this fraction of the top one are treated as exactly
# zero when recovering loadings, to avoid dividing by a rounding artifact.
ZERO_EIGENVALUE_RTOL = 1e-12

# Absolute threshold for "first nonzero component" in the sign convention;
# score vectors have unit norm, so any real entry is far above this.
_SIGN_EPS = 1e-12


@dataclass(frozen=True)
class PcaResult:
    """Sample eigen-structure from the dual (Gram) route.

    ``sample_eigenvalues`` is non-increasing with r = rank retained entries.
    ``score_vectors`` (n x r) holds the orthonormal score vectors; column j
    of ``loadings`` (d x r, optional) is the corresponding unit loading
    vector, NaN-filled where ``loading_valid`` is False because the
    eigenvalue is numerically zero.  ``divisor`` is the actual number used
    in the covariance normalization (n or n - 1).
    """

    sample_eigenvalues: np.ndarray
    score_vectors: np.ndarray
    divisor: float
    centered: bool
    n: int
    d: int
    loadings: Optional[np.ndarray] = None
    loading_valid: Optional[np.ndarray] = None

    @property
    def rank(self) -> int:
        return int(self.sample_eigenvalues.shape[0])


def _resolve_divisor(divisor: Union[str, int, float], n: int) -> float:
    if divisor in ("n", None):
        return float(n)
    if divisor == "n-1":
        if n < 2:
            raise ValueError("divisor 'n-1' needs at least two samples")
        return float(n - 1)
    value = float(divisor)
    if value <= 0:
        raise ValueError(f"divisor must be positive, got {divisor}")
    return value


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the first nonzero component of each is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.nonzero(np.abs(col) > _SIGN_EPS)[0]
        if nz.size and col[nz[0]] < 0:
            out[:, j] = -col
    return out


def dual_pca(
    x: np.ndarray,
    *,
    center: bool = False,
    divisor: Union[str, int, float] = "n",
    want_loadings: bool = False,
    rank: Optional[int] = None,
) -> PcaResult:
    """Eigenvalues and scores of the sample covariance, via the Gram matrix.

    ``x`` is d x n with one observation per column.  The eigenpairs of
    G = X'X / divisor (after optional column centering) give the sample
    eigenvalues and score vectors; the nonzero eigenvalues agree with those
    of XX' / divisor.  ``rank`` limits how many leading components are
    retained (default min(n, d)).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"x must be a 2-d matrix, got shape {x.shape}")
    d, n = x.shape
    if not np.all(np.isfinite(x)):
        raise ValueError("x contains NaN or Inf entries")
    max_rank = min(n, d)
    if rank is None:
        rank = max_rank
    if not 1 <= rank <= max_rank:
        raise ValueError(f"rank must be in [1, {max_rank}], got {rank}")
    div = _resolve_divisor(divisor, n)

    xc = x - x.mean(axis=1, keepdims=True) if center else x
    g = xc.T @ xc / div
    g = (g + g.T) * 0.5

    if rank < n:
        w, v = scipy.linalg.eigh(g, subset_by_index=(n - rank, n - 1))
    else:
        w, v = np.linalg.eigh(g)
    w = w[::-1]
    v = v[:, ::-1]
    w = np.maximum(w, 0.0)
    v = _fix_signs(v)

    loadings = None
    valid = None
    if want_loadings:
        zero_tol = ZERO_EIGENVALUE_RTOL * w[0] if w[0] > 0 else 0.0
        valid = w > zero_tol
        loadings = np.full((d, rank), np.nan)
        if valid.any():
            scale = np.sqrt(div) * np.sqrt(w[valid])
            loadings[:, valid] = (xc @ v[:, valid]) / scale
    return PcaResult(
        sample_eigenvalues=w,
        score_vectors=v,
        divisor=div,
        centered=center,
        n=n,
        d=d,
        loadings=loadings,
        loading_valid=valid,
    )


def sample_score_matrix(result: PcaResult, m: int) -> np.ndarray:
    """First m score vectors as an n x m matrix (pure extraction).

    Columns have unit Euclidean norm.  Raises if m exceeds the retained rank.
    """
    if not 1 <= m <= result.rank:
        raise ValueError(f"m must be in [1, {result.rank}], got {m}")
    return result.score_vectors[:, :m].copy()


def align_signs(result: PcaResult, reference_basis: np.ndarray) -> PcaResult:
    """Flip loading/score pairs so each loading has nonnegative overlap
    with its reference direction.

    ``reference_basis`` is d x m with reference directions as columns.
    Column j of the loadings and column j of the scores are negated
    together, which leaves every rank-one term of the decomposition, and
    hence the reconstruction, unchanged.
    """
    if result.loadings is None:
        raise ValueError("align_signs needs loadings; rerun with want_loadings=True")
    ref = np.asarray(reference_basis, dtype=float)
    if ref.ndim != 2 or ref.shape[0] != result.d:
        raise ValueError(f"reference basis must be ({result.d}, m), got {ref.shape}")
    m = min(ref.shape[1], result.rank)
    loadings = result.loadings.copy()
    scores = result.score_vectors.copy()
    for j in range(m):
        if result.loading_valid is not None and not result.loading_valid[j]:
            continue
        if float(loadings[:, j] @ ref[:, j]) < 0:
            loadings[:, j] = -loadings[:, j]
            scores[:, j] = -scores[:, j]
    return replace(result, loadings=loadings, score_vectors=scores)


def load_matrix_csv(path: Union[str, Path], header: bool = False) -> np.ndarray:
    """Read a dense matrix from CSV: rows are dimensions, columns samples."""
    x = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1 if header else 0)
    return np.asarray(x, dtype=float)
