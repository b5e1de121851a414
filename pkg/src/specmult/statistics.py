"""Ensemble estimators: eigenvalue counts, Minami ratios and Poisson fits."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

from .operator_models import Model
from .spectral_core import EigensolverError, count_many, eigenvalues, restrict

POISSON_SUPPORT_MAX = 20


class EnsembleError(RuntimeError):
    def __init__(self, realization_index: int, cause: Exception):
        super().__init__(f"realization {realization_index}: {cause}")
        self.realization_index = realization_index


@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    """Realizations of ``model`` restricted to the disjoint ``regions`` ``B_k``."""

    model: Model
    regions: tuple[np.ndarray, ...]
    n_realizations: int
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_realizations < 1:
            raise ValueError("need at least one realization")
        regions = tuple(np.unique(np.asarray(r, dtype=np.intp)) for r in self.regions)
        object.__setattr__(self, "regions", regions)
        flat = np.concatenate(regions) if regions else np.zeros(0, np.intp)
        if flat.size != np.unique(flat).size:
            raise ValueError("ensemble regions must be disjoint")
        if flat.size and (flat.min() < 0 or flat.max() >= self.model.n_sites):
            raise ValueError("region index out of range")


@dataclass(frozen=True, eq=False)
class RealizationSpectra:
    index: int
    omega: np.ndarray
    region_eigs: tuple[np.ndarray, ...]


def _one_realization(spec: EnsembleSpec, i: int) -> RealizationSpectra:
    try:
        sample = spec.model.sample(spec.master_seed, i)
        subs = [restrict(sample.matrix, r) for r in spec.regions]
        if len({s.shape for s in subs}) == 1:
            eigs = tuple(eigenvalues(np.stack(subs)))
        else:
            eigs = tuple(eigenvalues(s) for s in subs)
    except (EigensolverError, np.linalg.LinAlgError, ValueError) as exc:
        raise EnsembleError(i, exc) from exc
    return RealizationSpectra(i, sample.omega, eigs)


def iter_ensemble(spec: EnsembleSpec, threads: int = 1) -> Iterator[RealizationSpectra]:
    """Realizations in index order; each one reads only its own random stream."""
    indices = range(spec.n_realizations)
    if threads <= 1:
        for i in indices:
            yield _one_realization(spec, i)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(lambda i: _one_realization(spec, i), indices,
                            chunksize=max(1, spec.n_realizations // (8 * threads)))


def run_ensemble(spec: EnsembleSpec, threads: int = 1) -> list[RealizationSpectra]:
    return list(iter_ensemble(spec, threads))


def count_matrix(results: Sequence[RealizationSpectra], lo: float, hi: float,
                 regions: Sequence[int] | None = None) -> np.ndarray:
    """``(realization, region)`` array of ``eta_{B_k, [lo, hi)}``."""
    if lo > hi:
        raise ValueError("interval needs lo <= hi")
    picks = range(len(results[0].region_eigs)) if regions is None else regions
    out = np.zeros((len(results), len(picks)), dtype=np.int64)
    for r, res in enumerate(results):
        for c, k in enumerate(picks):
            out[r, c] = count_many(res.region_eigs[k], lo, hi)
    return out


@dataclass(frozen=True, eq=False)
class CountDistribution:
    pmf: np.ndarray
    sample_size: int
    mean: float
    variance: float
    summed: bool
    counts: np.ndarray

    def divisible_by(self, m: int) -> bool:
        return bool(np.all(self.counts % m == 0))


def distribution_from_counts(values: np.ndarray, summed: bool, raw: np.ndarray | None = None) -> CountDistribution:
    values = np.asarray(values, dtype=np.int64).ravel()
    pmf = np.bincount(values) / values.size
    support = np.arange(pmf.size)
    mean = float(pmf @ support)
    var = float(pmf @ (support - mean) ** 2)
    return CountDistribution(pmf, int(values.size), mean, var, summed,
                             values if raw is None else raw)


def count_distribution(results: Sequence[RealizationSpectra], E: float, h: float,
                       regions: Sequence[int] | None = None, summed: bool = False) -> CountDistribution:
    """Counts in ``[E - h, E + h)``: pooled per region, or summed over regions."""
    counts = count_matrix(results, E - h, E + h, regions)
    values = counts.sum(axis=1) if summed else counts
    return distribution_from_counts(values, summed, counts)


def window_half_width(c: float, n_sites: int) -> float:
    """Window scaling ``h = c / N_sites``."""
    return c / n_sites


@dataclass(frozen=True)
class PoissonFit:
    lambda_hat: float
    tv_distance: float
    one_point_mass: float


def poisson_fit(dist: CountDistribution, support_max: int = POISSON_SUPPORT_MAX) -> PoissonFit:
    """Total variation to ``Poisson(mean)`` on ``0..support_max`` plus both tails."""
    lam = dist.mean
    k = np.arange(support_max + 1)
    emp = np.zeros(support_max + 1)
    m = min(dist.pmf.size, support_max + 1)
    emp[:m] = dist.pmf[:m]
    emp_tail = float(dist.pmf[m:].sum())
    ref = stats.poisson.pmf(k, lam) if lam > 0 else (k == 0).astype(float)
    ref_tail = float(stats.poisson.sf(support_max, lam)) if lam > 0 else 0.0
    tv = 0.5 * (np.abs(emp - ref).sum() + abs(emp_tail - ref_tail))
    p1 = float(dist.pmf[1]) if dist.pmf.size > 1 else 0.0
    return PoissonFit(float(lam), float(tv), p1)


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(int(successes), int(n)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class MinamiEstimate:
    """Empirical ``P(eta_{B,J} > K)`` and its ratio to ``|B|^a |J|^{1+b}``."""

    p_hat: float
    ci: tuple[float, float]
    ratio: float
    ratio_upper: float
    K: int
    a: float
    b: float
    volume: int
    length: float
    trials: int
    hits: int


def estimate_minami(results: Sequence[RealizationSpectra], J: tuple[float, float], K: int = 1,
                    a: float = 2.0, b: float = 1.0, regions: Sequence[int] | None = None,
                    volume: int | None = None) -> MinamiEstimate:
    """Pool every (realization, region) pair as one trial.

    Regions must be equal-sized translates so the trials share a law;
    ``volume`` defaults to their site count.
    """
    lo, hi = J
    length = hi - lo
    if length <= 0:
        raise ValueError("|J| must be positive")
    picks = list(range(len(results[0].region_eigs)) if regions is None else regions)
    sizes = {results[0].region_eigs[k].size for k in picks}
    if volume is None:
        if len(sizes) != 1:
            raise ValueError("regions differ in size; pass volume explicitly")
        volume = sizes.pop()
    counts = count_matrix(results, lo, hi, picks)
    hits = int(np.sum(counts >= K + 1))
    n = counts.size
    p = hits / n
    ci = wilson_interval(hits, n)
    norm = volume ** a * length ** (1.0 + b)
    return MinamiEstimate(p, ci, p / norm, ci[1] / norm, K, a, b, int(volume), float(length), n, hits)


@dataclass(frozen=True)
class Negligibility:
    max_probability: float
    per_region: tuple[float, ...]
    threshold: float

    @property
    def negligible(self) -> bool:
        return self.max_probability <= self.threshold


def negligibility_check(results: Sequence[RealizationSpectra], I: tuple[float, float],
                        regions: Sequence[int] | None = None, threshold: float = 0.2) -> Negligibility:
    """``max_k P(eta_k >= 1)`` over the regions of the array."""
    counts = count_matrix(results, I[0], I[1], regions)
    probs = (counts >= 1).mean(axis=0)
    return Negligibility(float(probs.max(initial=0.0)), tuple(float(p) for p in probs), threshold)
