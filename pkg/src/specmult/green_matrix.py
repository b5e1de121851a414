"""Block Green matrix ``G_B(z) = P_B (H - z)^{-1} P_B`` and its boundary values."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla


class SingularResolventError(ArithmeticError):
    """``H - z`` (or the Schur complement) could not be inverted."""


class InconclusiveBoundaryValue(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GreenMatrix:
    z: complex
    G: np.ndarray
    method: str

    @property
    def imag_part(self) -> np.ndarray:
        return hermitian_imag(self.G)


def hermitian_imag(G: np.ndarray) -> np.ndarray:
    """``(G - G^*) / 2i``; positive semidefinite for a Herglotz value."""
    return (G - G.conj().T) / 2j


def herglotz_min_eig(G: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitian_imag(G)).min())


def _sites(H: np.ndarray, sites: Sequence[int]) -> np.ndarray:
    idx = np.unique(np.asarray(sites, dtype=np.intp))
    if idx.size == 0:
        raise ValueError("empty block")
    if idx[0] < 0 or idx[-1] >= H.shape[0]:
        raise IndexError("block index out of range")
    return idx


def _lu_solve(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(A, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularResolventError(str(exc)) from exc
    diag = np.abs(np.diag(lu))
    if diag.min(initial=np.inf) <= np.finfo(float).eps * max(diag.max(initial=0.0), 1.0):
        raise SingularResolventError("resolvent is singular at this z")
    return sla.lu_solve((lu, piv), rhs)


def green_direct(H: np.ndarray, sites: Sequence[int], z: complex) -> GreenMatrix:
    """Solve ``(H - z) x = e_i`` for each ``i`` in the block and keep the block rows."""
    idx = _sites(H, sites)
    n = H.shape[0]
    A = np.asarray(H, dtype=complex) - z * np.eye(n)
    rhs = np.zeros((n, idx.size), dtype=complex)
    rhs[idx, np.arange(idx.size)] = 1.0
    X = _lu_solve(A, rhs)
    return GreenMatrix(complex(z), X[idx], "direct")


def green_schur(H: np.ndarray, sites: Sequence[int], z: complex) -> GreenMatrix:
    """Invert the Schur complement of ``H - z`` onto the block.

    The coupling is the off-block part of ``H``; when the block is a union of
    projection blocks this is exactly the off-block part of ``H0``.
    """
    idx = _sites(H, sites)
    n = H.shape[0]
    comp = np.setdiff1d(np.arange(n), idx)
    H = np.asarray(H, dtype=complex)
    inner = H[np.ix_(idx, idx)] - z * np.eye(idx.size)
    if comp.size:
        coupling = H[np.ix_(idx, comp)]
        outer = H[np.ix_(comp, comp)] - z * np.eye(comp.size)
        inner = inner - coupling @ _lu_solve(outer, coupling.T)
    G = _lu_solve(inner, np.eye(idx.size, dtype=complex))
    return GreenMatrix(complex(z), G, "schur")


def default_eps_schedule() -> np.ndarray:
    return 2.0 ** -np.arange(4, 25)


@dataclass(frozen=True, eq=False)
class BoundaryValue:
    E: float
    G0: np.ndarray | None
    epsilons: np.ndarray
    converged: bool
    divergence_detected: bool
    increments: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    @property
    def status(self) -> str:
        if self.converged:
            return "converged"
        if self.divergence_detected:
            return "divergent"
        return "inconclusive"


def boundary_value(H: np.ndarray, sites: Sequence[int], E: float,
                   eps_schedule: Iterable[float] | None = None, abs_tol: float = 1e-8,
                   divergence_floor: float = 0.1, window: int = 5) -> BoundaryValue:
    """Approximate ``G(E + i0)`` along a decreasing ``eps`` schedule.

    Consecutive values are combined by one Richardson step
    (``2 G(eps/2) - G(eps)`` for the dyadic schedule) which cancels the term
    linear in ``eps``; the limit is declared converged once successive
    extrapolants agree to ``abs_tol`` in max norm.  A point mass of the
    spectral measure shows up as ``eps * |G|`` staying above
    ``divergence_floor`` over the last ``window`` points.
    """
    eps = np.asarray(default_eps_schedule() if eps_schedule is None else list(eps_schedule), float)
    if eps.size < 3 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("eps schedule must be positive, strictly decreasing, length >= 3")
    Gs = [green_direct(H, sites, E + 1j * e).G for e in eps]
    weight = np.array([e * np.abs(G).max() for e, G in zip(eps, Gs)])
    divergent = bool(np.all(weight[-window:] >= divergence_floor))

    extrap = []
    for k in range(len(eps) - 1):
        r = eps[k] / eps[k + 1]
        extrap.append((r * Gs[k + 1] - Gs[k]) / (r - 1.0))
    increments = np.array([np.abs(b - a).max() for a, b in zip(extrap, extrap[1:])])
    converged = (not divergent) and bool(increments[-1] < abs_tol)
    G0 = extrap[-1] if converged else None
    return BoundaryValue(float(E), G0, eps, converged, divergent, increments)


def kernel_dim_check(H: np.ndarray, sites: Sequence[int], lam: float, E: float,
                     tol: float = 1e-7) -> tuple[int, int]:
    """``(dim ker(H + lam P_B - E), dim ker(I + lam G(E + i0)))``."""
    bv = boundary_value(H, sites, E)
    if not bv.converged:
        raise InconclusiveBoundaryValue(f"boundary value at E={E} is {bv.status}")
    idx = _sites(H, sites)
    H_lam = np.array(H, dtype=float)
    H_lam[idx, idx] += lam
    evals = np.linalg.eigvalsh(H_lam)
    d1 = int(np.sum(np.abs(evals - E) <= tol))
    sv = np.linalg.svd(np.eye(idx.size) + lam * bv.G0, compute_uv=False)
    d2 = int(np.sum(sv < tol))
    return d1, d2


def green_grid_rows(H: np.ndarray, sites: Sequence[int], zs: Iterable[complex],
                    method: str = "direct") -> list[tuple]:
    """Rows ``(re_z, im_z, row, col, re_g, im_g, method)`` for CSV output."""
    solver = {"direct": green_direct, "schur": green_schur}[method]
    rows = []
    for z in zs:
        G = solver(H, sites, z).G
        for i in range(G.shape[0]):
            for j in range(G.shape[1]):
                rows.append((z.real, z.imag, i, j, G[i, j].real, G[i, j].imag, method))
    return rows
