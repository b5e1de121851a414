"""Eigendecomposition, eigenvalue counting and multiplicity measurement."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class EigensolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_tol: float


def _check_symmetric(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(H).max(initial=0.0)))
    if np.abs(H - H.T).max(initial=0.0) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    return H


def eigendecompose(H: np.ndarray, residual_tol: float = 1e-10) -> EigenDecomposition:
    """Full symmetric eigendecomposition with residual and orthonormality checks."""
    H = _check_symmetric(H)
    try:
        evals, evecs = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver did not converge: {exc}") from exc
    norm = float(np.abs(evals).max(initial=0.0))
    resid = np.linalg.norm(H @ evecs - evecs * evals, axis=0)
    if resid.size and resid.max() > residual_tol * (1.0 + norm):
        raise EigensolverError(f"eigenpair residual {resid.max():.3e} above tolerance")
    gram = evecs.T @ evecs - np.eye(H.shape[0])
    if np.abs(gram).max(initial=0.0) > 1e-10:
        raise EigensolverError("eigenvectors lost orthonormality")
    return EigenDecomposition(evals, evecs, residual_tol)


def eigenvalues(H: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues only; accepts a stack ``(..., n, n)`` of matrices."""
    try:
        return np.linalg.eigvalsh(H)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver did not converge: {exc}") from exc


def restrict(H: np.ndarray, sites: Sequence[int]) -> np.ndarray:
    """Principal submatrix ``P_B H P_B`` on the sorted index set ``sites``."""
    idx = np.unique(np.asarray(sites, dtype=np.intp))
    n = H.shape[0]
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise IndexError("block index out of range")
    return H[np.ix_(idx, idx)]


@dataclass(frozen=True)
class CountingStat:
    eta: int
    interval: tuple[float, float]
    block: tuple[int, ...] | None = None


def count_in_interval(evals: np.ndarray, a: float, b: float,
                      block: Sequence[int] | None = None) -> CountingStat:
    """Number of sorted eigenvalues in the half-open window ``[a, b)``."""
    if a > b:
        raise ValueError("interval needs a <= b")
    lo, hi = np.searchsorted(evals, [a, b], side="left")
    return CountingStat(int(hi - lo), (float(a), float(b)),
                        None if block is None else tuple(int(i) for i in block))


def count_many(evals: np.ndarray, a: float, b: float) -> np.ndarray:
    """Vectorised count over the last axis of an array of sorted spectra."""
    evals = np.asarray(evals)
    return np.sum((evals >= a) & (evals < b), axis=-1)


@dataclass(frozen=True)
class Cluster:
    value: float
    count: int
    spread: float


@dataclass(frozen=True)
class MultiplicityReport:
    clusters: tuple[Cluster, ...]
    gap_threshold: float

    def counts_in(self, lo: float, hi: float) -> list[int]:
        """Counts of clusters whose representative lies in the open window."""
        return [c.count for c in self.clusters if lo < c.value < hi]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["value", "count", "spread"])
        for c in self.clusters:
            writer.writerow([repr(c.value), c.count, repr(c.spread)])
        return buf.getvalue()


def default_gap(evals: np.ndarray) -> float:
    return 1e-8 * max(float(np.abs(evals).max(initial=0.0)), np.finfo(float).tiny)


def cluster_multiplicities(evals: np.ndarray, delta: float | None = None) -> MultiplicityReport:
    """Single-linkage clustering: a gap larger than ``delta`` opens a new cluster."""
    evals = np.asarray(evals, dtype=float)
    if delta is None:
        delta = default_gap(evals)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if evals.size == 0:
        return MultiplicityReport((), float(delta))
    cuts = np.flatnonzero(np.diff(evals) > delta) + 1
    clusters = []
    for part in np.split(evals, cuts):
        clusters.append(Cluster(float(part.mean()), int(part.size), float(part[-1] - part[0])))
    return MultiplicityReport(tuple(clusters), float(delta))


def krylov_reachable_dim(H: np.ndarray, sites: Sequence[int], tol: float = 1e-10) -> int:
    """Dimension of ``span{H^k e_i : i in sites, k >= 0}``.

    Blocks are orthogonalised against the running basis as they are added;
    growth stops once a new block contributes no direction above
    ``tol * ||H||``.
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    idx = np.unique(np.asarray(sites, dtype=np.intp))
    if idx.size == 0:
        return 0
    scale = max(float(np.linalg.norm(H, 2)), 1.0)
    Q = np.eye(n)[:, idx]
    new = Q
    while Q.shape[1] < n:
        W = H @ new
        for _ in range(2):
            W -= Q @ (Q.T @ W)
        u, s, _ = np.linalg.svd(W, full_matrices=False)
        keep = s > tol * scale
        if not keep.any():
            break
        new = u[:, keep]
        Q = np.hstack([Q, new])
    return int(Q.shape[1])
