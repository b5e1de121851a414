"""Finite-volume Anderson-type operators ``H = H0 + sum_n omega_n P_n``.

Sites are integers ``0..N-1``.  For the layered chain the site ``(n, m)``
(column ``n``, layer ``m``) lives at index ``m * L + n``, so ``H0`` is
block diagonal layer by layer and a column block gathers one site per layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

GEOMETRIES = ("chain", "box", "layered_chain")
BOUNDARIES = ("dirichlet", "periodic")
FAMILIES = {"gaussian": 2, "cauchy": 2, "uniform": 2}


class ModelError(ValueError):
    """Invalid lattice, projection scheme or disorder specification."""


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of the deterministic hopping part.

    ``extents`` is ``(L,)`` for a chain, the side lengths for a box and
    ``(L, M)`` for a layered chain.  ``hoppings`` holds one coefficient for
    chain and box, and ``M`` per-layer coefficients for the layered chain.
    ``onsite`` is an optional periodic diagonal pattern (site ``i`` gets
    ``onsite[i % len(onsite)]``).
    """

    kind: str
    extents: tuple[int, ...]
    hoppings: tuple[float, ...] = (1.0,)
    boundary: str = "dirichlet"
    onsite: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in GEOMETRIES:
            raise ModelError(f"unknown geometry {self.kind!r}")
        if self.boundary not in BOUNDARIES:
            raise ModelError(f"unknown boundary {self.boundary!r}")
        ext = tuple(int(e) for e in self.extents)
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "hoppings", tuple(float(t) for t in self.hoppings))
        object.__setattr__(self, "onsite", tuple(float(v) for v in self.onsite))
        if self.kind == "chain" and len(ext) != 1:
            raise ModelError("chain takes a single extent L")
        if self.kind == "layered_chain":
            if len(ext) != 2:
                raise ModelError("layered_chain takes extents (L, M)")
            if len(self.hoppings) != ext[1]:
                raise ModelError("layered_chain needs one hopping per layer")
            if ext[1] < 1:
                raise ModelError("layered_chain needs M >= 1")
        elif len(self.hoppings) != 1:
            raise ModelError(f"{self.kind} takes a single hopping coefficient")
        if not ext or min(ext[:1] if self.kind == "layered_chain" else ext) < 2:
            raise ModelError("all lattice extents must be >= 2")
        if not all(np.isfinite(self.hoppings)) or not all(np.isfinite(self.onsite)):
            raise ModelError("hoppings and onsite values must be finite")

    @classmethod
    def chain(cls, L: int, hopping: float = 1.0, boundary: str = "dirichlet") -> LatticeSpec:
        return cls("chain", (L,), (hopping,), boundary)

    @classmethod
    def box(cls, sides: Sequence[int], hopping: float = 1.0, boundary: str = "dirichlet") -> LatticeSpec:
        return cls("box", tuple(sides), (hopping,), boundary)

    @classmethod
    def layered_chain(cls, L: int, hoppings: Sequence[float], boundary: str = "dirichlet") -> LatticeSpec:
        return cls("layered_chain", (L, len(hoppings)), tuple(hoppings), boundary)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))

    @property
    def n_columns(self) -> int:
        """Number of columns: L for chains, every site for a box."""
        if self.kind == "box":
            return self.n_sites
        return self.extents[0]

    def column_sites(self, n: int) -> np.ndarray:
        if self.kind == "layered_chain":
            L, M = self.extents
            return np.arange(M) * L + n
        return np.array([n])


def _chain_adjacency(L: int, periodic: bool) -> np.ndarray:
    adj = np.zeros((L, L))
    idx = np.arange(L - 1)
    adj[idx, idx + 1] = 1.0
    adj[idx + 1, idx] = 1.0
    if periodic:
        # assignment, not accumulation: L=2 keeps a single bond
        adj[0, L - 1] = adj[L - 1, 0] = 1.0
    return adj


def build_h0(lattice: LatticeSpec) -> np.ndarray:
    """Dense hopping matrix for ``lattice`` (plus its optional onsite pattern)."""
    periodic = lattice.boundary == "periodic"
    if lattice.kind == "chain":
        h0 = lattice.hoppings[0] * _chain_adjacency(lattice.extents[0], periodic)
    elif lattice.kind == "layered_chain":
        L, M = lattice.extents
        h0 = np.zeros((L * M, L * M))
        adj = _chain_adjacency(L, periodic)
        for m, t in enumerate(lattice.hoppings):
            h0[m * L:(m + 1) * L, m * L:(m + 1) * L] = t * adj
    else:
        sides = lattice.extents
        n = lattice.n_sites
        h0 = np.zeros((n, n))
        coords = np.indices(sides).reshape(len(sides), -1).T
        for axis, side in enumerate(sides):
            nb = coords.copy()
            nb[:, axis] += 1
            if periodic:
                nb[:, axis] %= side
                keep = np.ones(n, dtype=bool)
            else:
                keep = nb[:, axis] < side
            src = np.ravel_multi_index(coords[keep].T, sides)
            dst = np.ravel_multi_index(nb[keep].T, sides)
            ok = src != dst
            h0[src[ok], dst[ok]] = lattice.hoppings[0]
            h0[dst[ok], src[ok]] = lattice.hoppings[0]
    if lattice.onsite:
        pattern = np.asarray(lattice.onsite)
        h0[np.diag_indices_from(h0)] += pattern[np.arange(h0.shape[0]) % len(pattern)]
    return h0


@dataclass(frozen=True, eq=False)
class ProjectionScheme:
    """Partition of the sites into the coordinate blocks ``B_n`` of ``P_n``."""

    blocks: tuple[np.ndarray, ...]
    n_sites: int

    def __post_init__(self) -> None:
        blocks = tuple(np.asarray(b, dtype=np.intp).ravel() for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if any(b.size == 0 for b in blocks):
            raise ModelError("projection blocks must be nonempty")
        flat = np.concatenate(blocks) if blocks else np.array([], dtype=np.intp)
        if flat.size and (flat.min() < 0 or flat.max() >= self.n_sites):
            raise ModelError("projection block index out of range")
        seen = np.bincount(flat, minlength=self.n_sites)
        if np.any(seen != 1):
            raise ModelError("projection blocks must partition the sites exactly once")

    @classmethod
    def from_lists(cls, blocks: Iterable[Sequence[int]], n_sites: int) -> ProjectionScheme:
        return cls(tuple(np.asarray(b) for b in blocks), n_sites)

    @classmethod
    def columns(cls, lattice: LatticeSpec, k: int = 1) -> ProjectionScheme:
        """Blocks of ``k`` consecutive columns (the ``rank_k_columns`` shorthand)."""
        if k < 1:
            raise ModelError("rank_k_columns needs k >= 1")
        ncol = lattice.n_columns
        if ncol % k:
            raise ModelError(f"{ncol} columns do not split into groups of {k}")
        groups = []
        for start in range(0, ncol, k):
            groups.append(np.sort(np.concatenate([lattice.column_sites(n) for n in range(start, start + k)])))
        return cls(tuple(groups), lattice.n_sites)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def ranks(self) -> np.ndarray:
        return np.array([b.size for b in self.blocks])

    @cached_property
    def site_to_block(self) -> np.ndarray:
        owner = np.empty(self.n_sites, dtype=np.intp)
        for n, b in enumerate(self.blocks):
            owner[b] = n
        return owner

    def potential(self, omega: np.ndarray) -> np.ndarray:
        """Diagonal of ``sum_n omega_n P_n``."""
        return np.asarray(omega, dtype=float)[self.site_to_block]

    def blocks_covering(self, sites: Sequence[int]) -> np.ndarray:
        """Indices of the blocks whose union is exactly ``sites``."""
        sites = np.unique(np.asarray(sites, dtype=np.intp))
        if sites.size and (sites.min() < 0 or sites.max() >= self.n_sites):
            raise ModelError("site index out of range")
        owners = np.unique(self.site_to_block[sites])
        if sum(self.blocks[n].size for n in owners) != sites.size:
            raise ModelError("site set is not a union of projection blocks")
        return owners


@dataclass(frozen=True)
class DisorderSpec:
    """Single-block coupling distribution, shared by every block."""

    family: str
    params: tuple[float, float]

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ModelError(f"unknown disorder family {self.family!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != FAMILIES[self.family]:
            raise ModelError(f"{self.family} takes {FAMILIES[self.family]} parameters")
        object.__setattr__(self, "params", params)
        if self.family in ("gaussian", "cauchy") and params[1] <= 0:
            raise ModelError(f"{self.family} scale must be positive")
        if self.family == "uniform" and params[1] <= params[0]:
            raise ModelError("uniform needs a < b")

    @property
    def support_full_R(self) -> bool:
        return self.family in ("gaussian", "cauchy")

    @property
    def density_sup(self) -> float:
        """Supremum of the coupling density."""
        a, b = self.params
        if self.family == "gaussian":
            return 1.0 / (b * np.sqrt(2 * np.pi))
        if self.family == "cauchy":
            return 1.0 / (np.pi * b)
        return 1.0 / (b - a)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        a, b = self.params
        if self.family == "gaussian":
            return rng.normal(a, b, size)
        if self.family == "cauchy":
            return a + b * rng.standard_cauchy(size)
        return rng.uniform(a, b, size)


def realization_rng(master_seed: int, realization_index: int) -> np.random.Generator:
    """Counter-based Philox stream for one realization.

    Realization ``i`` always sees the same stream regardless of how work is
    scheduled; block ``n`` takes the ``n``-th draw of it.
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(realization_index),))
    return np.random.Generator(np.random.Philox(seq))


def sample_disorder(spec: DisorderSpec, scheme: ProjectionScheme, master_seed: int,
                    realization_index: int) -> np.ndarray:
    return spec.draw(realization_rng(master_seed, realization_index), scheme.n_blocks)


@dataclass(frozen=True, eq=False)
class HamiltonianSample:
    matrix: np.ndarray
    omega: np.ndarray
    master_seed: int = 0
    realization_index: int = 0


def assemble(h0: np.ndarray, scheme: ProjectionScheme, omega: Sequence[float],
             master_seed: int = 0, realization_index: int = 0) -> HamiltonianSample:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (scheme.n_blocks,):
        raise ModelError(f"omega has length {omega.size}, scheme has {scheme.n_blocks} blocks")
    if h0.shape != (scheme.n_sites, scheme.n_sites):
        raise ModelError("h0 does not match the projection scheme size")
    matrix = np.array(h0, dtype=float)
    matrix[np.diag_indices_from(matrix)] += scheme.potential(omega)
    matrix.setflags(write=False)
    omega.setflags(write=False)
    return HamiltonianSample(matrix, omega, int(master_seed), int(realization_index))


@dataclass(frozen=True, eq=False)
class AveragingOrthogonal:
    U: np.ndarray


def build_averaging_orthogonal(b: int) -> AveragingOrthogonal:
    """Orthogonal ``b x b`` matrix whose first row is constant ``1/sqrt(b)``.

    Remaining rows: Gram-Schmidt (two passes) over ``e_0, e_1, ...``,
    skipping vectors already in the span.
    """
    if b < 1:
        raise ModelError("averaging matrix needs b >= 1")
    rows = [np.full(b, 1.0 / np.sqrt(b))]
    for k in range(b):
        if len(rows) == b:
            break
        v = np.zeros(b)
        v[k] = 1.0
        for _ in range(2):
            for r in rows:
                v -= (r @ v) * r
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            rows.append(v / norm)
    return AveragingOrthogonal(np.array(rows))


@dataclass(frozen=True, eq=False)
class Decomposition:
    """``matrix = background + mean_coupling * projector``."""

    background: np.ndarray
    mean_coupling: float
    projector: np.ndarray
    w: np.ndarray
    block_indices: np.ndarray


def decompose_sample(sample: HamiltonianSample, scheme: ProjectionScheme,
                     sites: Sequence[int]) -> Decomposition:
    """Split off the block-averaged coupling ``w_1/sqrt(|B|)`` on ``P_B``.

    ``|B|`` counts projection blocks, not sites.
    """
    owners = scheme.blocks_covering(sites)
    nb = owners.size
    if nb == 0:
        raise ModelError("empty block set")
    U = build_averaging_orthogonal(nb).U
    omega_B = sample.omega[owners]
    w = U @ omega_B
    mean = w[0] / np.sqrt(nb)
    # sum_{j>=2} w_j u_{j,i}: the fluctuating part that stays in the background
    fluct = U[1:].T @ w[1:]
    omega_bg = np.array(sample.omega, dtype=float)
    omega_bg[owners] = fluct
    pot = scheme.potential(omega_bg)
    background = sample.matrix - np.diag(scheme.potential(sample.omega)) + np.diag(pot)
    proj_diag = np.zeros(scheme.n_sites)
    proj_diag[np.concatenate([scheme.blocks[n] for n in owners])] = 1.0
    return Decomposition(background, float(mean), np.diag(proj_diag), w, owners)


@dataclass(frozen=True, eq=False)
class Model:
    """A lattice, its projection scheme and the coupling distribution."""

    lattice: LatticeSpec
    scheme: ProjectionScheme
    disorder: DisorderSpec
    name: str = "custom"
    h0: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.scheme.n_sites != self.lattice.n_sites:
            raise ModelError("projection scheme does not cover the lattice")
        h0 = build_h0(self.lattice)
        h0.setflags(write=False)
        object.__setattr__(self, "h0", h0)

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    def sample(self, master_seed: int, realization_index: int) -> HamiltonianSample:
        omega = sample_disorder(self.disorder, self.scheme, master_seed, realization_index)
        return assemble(self.h0, self.scheme, omega, master_seed, realization_index)

    def column_regions(self, columns_per_region: int) -> list[np.ndarray]:
        """Disjoint regions of consecutive columns; a leftover tail is dropped."""
        ncol = self.lattice.n_columns
        regions = []
        for start in range(0, ncol - columns_per_region + 1, columns_per_region):
            cols = range(start, start + columns_per_region)
            regions.append(np.sort(np.concatenate([self.lattice.column_sites(n) for n in cols])))
        return regions


REMARK_HOPPINGS = (1.0, 1.0, 2.0, 2.0, 2.0)


def remark_stacked_model(L: int = 60, disorder: DisorderSpec | None = None,
                         boundary: str = "dirichlet") -> Model:
    """Five layers, hoppings (1, 1, 2, 2, 2), one coupling per column."""
    lattice = LatticeSpec.layered_chain(L, REMARK_HOPPINGS, boundary)
    disorder = disorder or DisorderSpec("uniform", (0.0, 1.0))
    return Model(lattice, ProjectionScheme.columns(lattice), disorder, "remark-stacked-5")


def stacked_model(L: int, M: int, hopping: float = 1.0, disorder: DisorderSpec | None = None,
                  boundary: str = "dirichlet") -> Model:
    """``M`` identical layers sharing the column couplings: exact M-fold degeneracy."""
    lattice = LatticeSpec.layered_chain(L, (hopping,) * M, boundary)
    disorder = disorder or DisorderSpec("gaussian", (0.0, 1.0))
    return Model(lattice, ProjectionScheme.columns(lattice), disorder, f"stacked-{M}")


def trivial_minami_model(L: int = 100, disorder: DisorderSpec | None = None) -> Model:
    """``H0 = diag(1, 0, 1, 0, ...)`` with rank-2 blocks ``{2n, 2n+1}``."""
    if L % 2:
        raise ModelError("trivial-minami needs an even number of sites")
    lattice = LatticeSpec("chain", (L,), (0.0,), "dirichlet", (1.0, 0.0))
    disorder = disorder or DisorderSpec("gaussian", (0.0, 1.0))
    return Model(lattice, ProjectionScheme.columns(lattice, 2), disorder, "trivial-minami")


def anderson_1d_model(L: int = 500, disorder: DisorderSpec | None = None,
                      boundary: str = "dirichlet") -> Model:
    """Rank-one Anderson chain; default couplings uniform on [-5, 5]."""
    lattice = LatticeSpec.chain(L, 1.0, boundary)
    disorder = disorder or DisorderSpec("uniform", (-5.0, 5.0))
    return Model(lattice, ProjectionScheme.columns(lattice), disorder, "anderson-1d-rank1")
