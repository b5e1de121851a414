"""Polynomial multiplicity certificates: approximate gcd, squarefree part,
remainder test, Sylvester discriminant and a root-clustering cross-check.

Coefficients are stored in ascending degree order throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

CHAR_POLY_MAX_DIM = 12
TAU_GCD = 1e-7
TAU_REMAINDER = 1e-8
TAU_DISC = 1e-8
DELTA_ROOT = 0.05


class IllConditionedError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class Poly:
    """Polynomial with complex coefficients, ascending order.

    High-order coefficients of modulus ``<= trim_tol`` are dropped; the zero
    polynomial has empty ``coeffs`` and degree ``-1``.
    """

    coeffs: np.ndarray
    trim_tol: float = 0.0

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        n = c.size
        while n and abs(c[n - 1]) <= self.trim_tol:
            n -= 1
        c = c[:n].copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_roots(cls, roots: Sequence[complex], leading: complex = 1.0) -> Poly:
        return cls(leading * npoly.polyfromroots(np.asarray(roots, dtype=complex))
                   if len(roots) else np.array([leading]))

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    @property
    def leading(self) -> complex:
        return complex(self.coeffs[-1])

    def norm(self) -> float:
        return float(np.abs(self.coeffs).max(initial=0.0))

    def monic(self) -> Poly:
        if self.is_zero:
            raise ZeroDivisionError("zero polynomial has no monic form")
        return Poly(self.coeffs / self.coeffs[-1])

    def derivative(self) -> Poly:
        if self.degree < 1:
            return Poly(np.zeros(0))
        return Poly(self.coeffs[1:] * np.arange(1, self.coeffs.size))

    def __call__(self, x):
        return npoly.polyval(x, self.coeffs) if not self.is_zero else np.zeros_like(x, dtype=complex)

    def __mul__(self, other: Poly) -> Poly:
        if self.is_zero or other.is_zero:
            return Poly(np.zeros(0))
        return Poly(np.convolve(self.coeffs, other.coeffs))

    def __pow__(self, k: int) -> Poly:
        out = Poly(np.ones(1))
        for _ in range(k):
            out = out * self
        return out

    def roots(self) -> np.ndarray:
        """Companion-matrix eigenvalues."""
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        return npoly.polyroots(self.coeffs)


def poly_divmod(num: Poly, den: Poly) -> tuple[Poly, Poly]:
    """Long division; the remainder keeps all ``deg(den)`` low coefficients."""
    if den.is_zero:
        raise ZeroDivisionError("division by the zero polynomial")
    a = num.coeffs.copy()
    b = den.coeffs
    db = b.size - 1
    if a.size - 1 < db:
        return Poly(np.zeros(0)), Poly(a)
    q = np.zeros(a.size - db, dtype=complex)
    for k in range(a.size - 1, db - 1, -1):
        coef = a[k] / b[-1]
        q[k - db] = coef
        a[k - db:k + 1] -= coef * b
    return Poly(q), Poly(a[:db])


def char_poly(M: np.ndarray) -> Poly:
    """``det(M - x I)`` by the Faddeev-LeVerrier recurrence."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("expected a square matrix")
    if n > CHAR_POLY_MAX_DIM:
        raise ValueError(f"char_poly is capped at dimension {CHAR_POLY_MAX_DIM}; got {n}")
    # c[k] are the coefficients of det(x I - M), c[n] = 1
    c = np.zeros(n + 1, dtype=complex)
    c[n] = 1.0
    Mk = np.zeros_like(M)
    eye = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ Mk + c[n - k + 1] * eye
        c[n - k] = -np.trace(M @ Mk) / k
    return Poly((-1) ** n * c)


def poly_gcd(F: Poly, G: Poly, tau: float = TAU_GCD) -> Poly:
    """Monic approximate gcd by the Euclidean remainder sequence.

    Operands are made monic at every step; a remainder whose coefficients all
    fall below ``tau`` times the dividend's max-norm counts as zero, and
    negligible leading coefficients are trimmed at the same threshold.
    """
    if F.is_zero or G.is_zero:
        raise ValueError("gcd needs nonzero polynomials")
    a, b = F.monic(), G.monic()
    if b.degree > a.degree:
        a, b = b, a
    while b.degree > 0:
        _, r = poly_divmod(a, b)
        r = Poly(r.coeffs, trim_tol=tau * max(a.norm(), 1.0))
        if r.is_zero:
            return b
        a, b = b, r.monic()
    return Poly(np.ones(1))


def squarefree_part(F: Poly, tau: float = TAU_GCD, residual_tol: float = 1e-6) -> Poly:
    """``F / gcd(F, F')`` made monic; raises if the division leaves a residue."""
    if F.is_zero:
        raise ValueError("zero polynomial")
    Fm = F.monic()
    if Fm.degree < 1:
        return Fm
    g = poly_gcd(Fm, Fm.derivative(), tau)
    q, r = poly_divmod(Fm, g)
    if r.norm() > residual_tol * Fm.norm():
        raise IllConditionedError(f"gcd does not divide F (residual {r.norm():.2e})")
    return q.monic()


@dataclass(frozen=True)
class MultiplicityCertificate:
    """Evidence that every root has multiplicity at least ``K``.

    ``status`` is ``granted``, ``refused`` or ``inconclusive``;
    ``max_granted_K`` is the largest ``K`` for which the remainder vanishes.
    """

    K: int
    granted: bool
    remainder_norm: float
    max_granted_K: int
    method: str = "gcd-remainder"
    status: str = "granted"
    tolerances: dict = field(default_factory=dict)


def _remainder_norm(F: Poly, base: Poly, K: int) -> float:
    _, r = poly_divmod(F, base ** K)
    return r.norm()


def remainder_test(F: Poly, K: int, tau: float = TAU_REMAINDER,
                   tau_gcd: float = TAU_GCD) -> MultiplicityCertificate:
    """Certify that ``squarefree_part(F)**K`` divides ``F``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    tols = {"tau": tau, "tau_gcd": tau_gcd}
    try:
        base = squarefree_part(F, tau_gcd)
    except IllConditionedError:
        return MultiplicityCertificate(K, False, float("nan"), 0, status="inconclusive", tolerances=tols)
    Fm = F.monic()
    scale = Fm.norm()
    d = max(base.degree, 1)
    best = 0
    norms = {}
    for k in range(1, Fm.degree // d + 1):
        norms[k] = _remainder_norm(Fm, base, k)
        if norms[k] > tau * scale:
            break
        best = k
    if K not in norms:
        norms[K] = _remainder_norm(Fm, base, K) if K * base.degree <= Fm.degree else Fm.norm()
    granted = K <= best
    return MultiplicityCertificate(K, granted, float(norms[K]), best,
                                   status="granted" if granted else "refused", tolerances=tols)


@dataclass(frozen=True, eq=False)
class SylvesterMatrix:
    entries: np.ndarray
    degrees: tuple[int, int]

    def determinant(self) -> complex:
        return complex(np.linalg.det(self.entries))


def sylvester_matrix(F: Poly, G: Poly) -> SylvesterMatrix:
    """``(m+n) x (m+n)`` Sylvester matrix, ``n`` shifted rows of ``F`` then ``m`` of ``G``."""
    m, n = F.degree, G.degree
    if m < 1 or n < 0 or m + n < 1:
        raise ValueError("degenerate degrees for a Sylvester matrix")
    S = np.zeros((m + n, m + n), dtype=complex)
    f, g = F.coeffs[::-1], G.coeffs[::-1]
    for i in range(n):
        S[i, i:i + m + 1] = f
    for i in range(m):
        S[n + i, i:i + n + 1] = g
    return SylvesterMatrix(S, (m, n))


def resultant(F: Poly, G: Poly) -> complex:
    return sylvester_matrix(F, G).determinant()


def discriminant(F: Poly) -> complex:
    """``(-1)^{n(n-1)/2} Res(F, F') / a_n``; equals ``a_n^{2n-2} prod_{i<j} (r_i - r_j)^2``."""
    n = F.degree
    if n < 2:
        raise ValueError("discriminant needs degree >= 2")
    sign = -1 if (n * (n - 1) // 2) % 2 else 1
    return sign * resultant(F, F.derivative()) / F.leading


def has_simple_roots(F: Poly, tau_disc: float = TAU_DISC) -> bool:
    return abs(discriminant(F.monic())) > tau_disc


def root_multiplicities(F: Poly, delta_root: float = DELTA_ROOT) -> list[tuple[complex, int]]:
    """Roots clustered by single linkage at radius ``delta_root``."""
    if F.degree < 1:
        raise ValueError("root_multiplicities needs degree >= 1")
    roots = F.roots()
    n = roots.size
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    close = np.abs(roots[:, None] - roots[None, :]) <= delta_root
    for i, j in zip(*np.nonzero(np.triu(close, 1))):
        parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = [(complex(roots[g].mean()), len(g)) for g in groups.values()]
    return sorted(out, key=lambda rc: (rc[0].real, rc[0].imag))


def min_root_multiplicity(F: Poly, delta_root: float = DELTA_ROOT) -> int:
    return min(m for _, m in root_multiplicities(F, delta_root))
