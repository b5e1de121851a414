import numpy as np
import pytest

from specmult.experiments import kernel_instance
from specmult.green_matrix import (
    InconclusiveBoundaryValue,
    SingularResolventError,
    boundary_value,
    green_direct,
    green_grid_rows,
    green_schur,
    herglotz_min_eig,
    kernel_dim_check,
)
from specmult.operator_models import realization_rng


def random_symmetric(rng, n):
    A = rng.normal(size=(n, n))
    return (A + A.T) / 2


def test_direct_diag():
    G = green_direct(np.diag([1.0, 2.0]), [0], 1j)
    assert G.G.shape == (1, 1)
    assert G.G[0, 0] == pytest.approx(1 / (1 - 1j))


@pytest.mark.parametrize("method", [green_direct, green_schur])
def test_two_by_two_scalar_schur_complement(method):
    a, b, d, z = 0.7, -1.3, 2.1, 0.4 + 0.9j
    H = np.array([[a, b], [b, d]])
    expected = 1 / ((a - z) - b ** 2 / (d - z))
    assert method(H, [0], z).G[0, 0] == pytest.approx(expected, rel=1e-13)


def test_trace_nonzero_in_upper_half_plane():
    rng = np.random.default_rng(3)
    H = random_symmetric(rng, 10)
    G = green_direct(H, [2, 7], 2j).G
    assert abs(np.trace(G)) > 1e-3
    # Herglotz: Im tr G > 0 in the upper half plane
    assert np.trace(G).imag > 0


def test_schur_block_diagonal_is_exact():
    rng = np.random.default_rng(4)
    H = np.zeros((6, 6))
    H[:2, :2] = random_symmetric(rng, 2)
    H[2:, 2:] = random_symmetric(rng, 4)
    z = 0.2 + 0.5j
    np.testing.assert_array_equal(green_schur(H, [0, 1], z).G, np.linalg.inv(H[:2, :2] - z * np.eye(2)))


def test_schur_matches_direct_50():
    rng = np.random.default_rng(5)
    H = random_symmetric(rng, 50)
    sites = [4, 17, 33]
    z = 0.3 + 0.7j
    d, s = green_direct(H, sites, z).G, green_schur(H, sites, z).G
    assert np.abs(d - s).max() <= 1e-10


def test_cross_method_equivalence_many():
    for i in range(100):
        rng = realization_rng(77, i)
        n = int(rng.integers(5, 40))
        H = random_symmetric(rng, n)
        sites = rng.choice(n, int(rng.integers(1, 5)), replace=False)
        z = complex(rng.uniform(-4, 4), rng.uniform(0.1, 3))
        d, s = green_direct(H, sites, z).G, green_schur(H, sites, z).G
        assert np.abs(d - s).max() <= 1e-9 * (1 + np.abs(d).max())


def test_green_complex_symmetric_and_herglotz():
    rng = np.random.default_rng(6)
    H = random_symmetric(rng, 30)
    for eps in (3.0, 1.0, 0.1, 0.01, 1e-3):
        G = green_direct(H, [1, 5, 9, 20], 0.4 + 1j * eps).G
        assert np.abs(G - G.T).max() <= 1e-10 * max(1, np.abs(G).max())
        assert herglotz_min_eig(G) >= -1e-10


def test_resolvent_identity():
    rng = np.random.default_rng(7)
    H = random_symmetric(rng, 25)
    sites = [0, 3, 11]
    z1, z2 = 0.1 + 0.3j, -0.7 + 1.1j
    R1 = np.linalg.inv(H - z1 * np.eye(25))
    R2 = np.linalg.inv(H - z2 * np.eye(25))
    lhs = green_direct(H, sites, z1).G - green_direct(H, sites, z2).G
    rhs = (z1 - z2) * (R1 @ R2)[np.ix_(sites, sites)]
    assert np.abs(lhs - rhs).max() <= 1e-10


def test_singular_direct_reported():
    with pytest.raises(SingularResolventError):
        green_direct(np.diag([1.0, 2.0]), [0], 1.0)


def test_boundary_value_off_spectrum():
    rng = np.random.default_rng(8)
    H = random_symmetric(rng, 12)
    ev = np.linalg.eigvalsh(H)
    E = 0.5 * (ev[5] + ev[6])
    bv = boundary_value(H, [2, 8], E)
    assert bv.converged and not bv.divergence_detected
    exact = np.linalg.inv(H - E * np.eye(12))[np.ix_([2, 8], [2, 8])]
    assert np.abs(bv.G0 - exact).max() <= 1e-8
    assert np.abs(bv.G0.imag).max() <= 1e-6


def test_boundary_value_at_eigenvalue_diverges():
    bv = boundary_value(np.diag([0.0]), [0], 0.0)
    assert bv.divergence_detected and not bv.converged
    assert bv.status == "divergent"


def test_boundary_value_inconclusive_when_overlap_is_tiny():
    # eigenvector at E=0 has weight 1e-4 on the block: neither criterion fires
    c, s = np.sqrt(1 - 1e-4), 1e-2
    Q = np.array([[c, -s], [s, c]])
    H = Q @ np.diag([1.0, 0.0]) @ Q.T
    bv = boundary_value(H, [0], 0.0)
    assert bv.status == "inconclusive"
    with pytest.raises(InconclusiveBoundaryValue):
        kernel_dim_check(H, [0], 1.0, 0.0)


def test_boundary_schedule_validation():
    with pytest.raises(ValueError):
        boundary_value(np.eye(2), [0], 0.5, [0.1, 0.2, 0.05])


def test_kernel_dim_scalar_degenerate_block():
    H = np.diag([1.0, 1.0, 2.0])
    G = boundary_value(H, [0, 1], 0.5).G0
    np.testing.assert_allclose(G, 2 * np.eye(2), atol=1e-9)
    assert kernel_dim_check(H, [0, 1], -0.5, 0.5) == (2, 2)


def test_kernel_dim_simple_eigenvalue_of_g():
    rng = np.random.default_rng(9)
    H = random_symmetric(rng, 8)
    sites = [1, 4, 6]
    ev = np.linalg.eigvalsh(H)
    E = 0.5 * (ev[3] + ev[4])
    g = np.linalg.eigvalsh(np.linalg.inv(H - E * np.eye(8))[np.ix_(sites, sites)])
    assert kernel_dim_check(H, sites, -1 / g[1], E) == (1, 1)
    assert kernel_dim_check(H, sites, 0.123, E) == (0, 0)


@pytest.mark.parametrize("d", [0, 1, 2])
def test_constructed_instances(d):
    for i in range(20):
        H, sites, lam, E = kernel_instance(realization_rng(5, 100 * d + i), d)
        assert kernel_dim_check(H, sites, lam, E) == (d, d)


def test_grid_rows_layout():
    H = np.diag([1.0, 2.0, 3.0])
    rows = green_grid_rows(H, [0, 2], [0.5 + 1j], "schur")
    assert len(rows) == 4
    re_z, im_z, i, j, re_g, im_g, method = rows[0]
    assert (re_z, im_z, i, j, method) == (0.5, 1.0, 0, 0, "schur")
    assert complex(re_g, im_g) == pytest.approx(1 / (1 - (0.5 + 1j)))
