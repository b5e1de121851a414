import numpy as np
import pytest

from specmult.operator_models import (
    DisorderSpec,
    anderson_1d_model,
    remark_stacked_model,
    stacked_model,
    trivial_minami_model,
)
from specmult.spectral_core import eigenvalues, restrict
from specmult.statistics import (
    EnsembleSpec,
    count_distribution,
    distribution_from_counts,
    estimate_minami,
    negligibility_check,
    poisson_fit,
    run_ensemble,
    window_half_width,
    wilson_interval,
)


def ensemble(model, regions, R, seed=0, threads=1):
    return run_ensemble(EnsembleSpec(model, tuple(regions), R, seed), threads)


def test_single_realization_matches_pipeline():
    model = stacked_model(L=12, M=3)
    regions = model.column_regions(4)
    (res,) = ensemble(model, regions, 1, seed=11)
    H = model.sample(11, 0).matrix
    for r, eig in zip(regions, res.region_eigs):
        np.testing.assert_array_equal(eig, eigenvalues(restrict(H, r)))


def test_regions_must_be_disjoint():
    model = anderson_1d_model(L=10)
    with pytest.raises(ValueError):
        EnsembleSpec(model, (np.arange(5), np.arange(4, 8)), 3)


def test_ensemble_deterministic_and_thread_independent():
    model = anderson_1d_model(L=60)
    regions = model.column_regions(10)
    a = ensemble(model, regions, 40, seed=5)
    b = ensemble(model, regions, 40, seed=5)
    c = ensemble(model, regions, 40, seed=5, threads=4)
    for x, y, z in zip(a, b, c):
        np.testing.assert_array_equal(x.omega, y.omega)
        np.testing.assert_array_equal(x.omega, z.omega)
        for ex, ez in zip(x.region_eigs, z.region_eigs):
            np.testing.assert_array_equal(ex, ez)
    other = ensemble(model, regions, 2, seed=6)
    assert not np.array_equal(other[0].omega, a[0].omega)


def test_minami_no_spectrum_in_window():
    model = anderson_1d_model(L=40)
    res = ensemble(model, model.column_regions(10), 20)
    est = estimate_minami(res, (100.0, 101.0))
    assert est.p_hat == 0.0 and est.ratio == 0.0 and est.hits == 0
    assert est.trials == 20 * 4 and est.volume == 10


def test_minami_zero_length_rejected():
    model = anderson_1d_model(L=20)
    res = ensemble(model, model.column_regions(10), 2)
    with pytest.raises(ValueError):
        estimate_minami(res, (0.3, 0.3))


def test_minami_trivial_model_never_pairs_in_short_window():
    # a single 2x2 block has eigenvalues w and 1 + w, one apart
    model = trivial_minami_model(L=40)
    res = ensemble(model, model.column_regions(1), 200)
    for length in (0.5, 0.1):
        est = estimate_minami(res, (-length / 2, length / 2))
        assert est.hits == 0
        assert est.ratio_upper < 1.0


def test_minami_degenerate_layers_grow_like_inverse_length():
    model = stacked_model(L=40, M=3)
    res = ensemble(model, model.column_regions(10), 600, seed=3)
    ratios = [estimate_minami(res, (-l / 2, l / 2)).ratio for l in (0.4, 0.2, 0.1)]
    assert ratios[1] / ratios[0] > 1.5 and ratios[2] / ratios[1] > 1.5
    est = estimate_minami(res, (-0.05, 0.05))
    # every hit is a full triple: P(eta >= 2) equals P(eta >= 1)
    assert est.hits == estimate_minami(res, (-0.05, 0.05), K=0).hits


def test_count_distribution_extremes():
    model = remark_stacked_model(L=10)
    regions = model.column_regions(5)
    res = ensemble(model, regions, 10)
    full = count_distribution(res, 0.0, 1e6, summed=True)
    assert np.all(full.counts.sum(axis=1) == model.n_sites)
    assert full.pmf[model.n_sites] == 1.0
    empty = count_distribution(res, 0.0, 0.0)
    assert empty.mean == 0.0 and empty.pmf[0] == 1.0


def test_count_distribution_remark_upper_window_divisible_by_three():
    model = remark_stacked_model(L=40)
    res = ensemble(model, model.column_regions(10), 100)
    dist = count_distribution(res, 4.0, 0.5)
    assert dist.divisible_by(3)
    assert dist.mean > 0


def test_window_half_width():
    assert window_half_width(3.0, 300) == pytest.approx(0.01)


def test_poisson_fit_on_poisson_sample():
    rng = np.random.default_rng(0)
    fit = poisson_fit(distribution_from_counts(rng.poisson(0.5, 10_000), False))
    assert fit.lambda_hat == pytest.approx(0.5, abs=0.03)
    assert fit.tv_distance <= 0.02


def test_poisson_fit_all_zero():
    fit = poisson_fit(distribution_from_counts(np.zeros(100, int), False))
    assert fit.tv_distance == 0.0 and fit.lambda_hat == 0.0


def test_poisson_fit_compound_sample_is_far():
    rng = np.random.default_rng(1)
    fit = poisson_fit(distribution_from_counts(3 * rng.poisson(0.2, 10_000), False))
    assert fit.one_point_mass == 0.0
    assert fit.tv_distance >= 0.1


def test_poisson_fit_counts_tail_mass():
    # half the sample sits at 30, where Poisson(15) has little mass
    values = np.r_[np.zeros(50, int), np.full(50, 30)]
    fit = poisson_fit(distribution_from_counts(values, False), support_max=20)
    assert fit.tv_distance > 0.9


def test_wilson_interval_contains_estimate():
    lo, hi = wilson_interval(3, 100)
    assert lo < 0.03 < hi
    lo, hi = wilson_interval(0, 50)
    assert lo == 0.0 and 0 < hi < 0.1


def test_negligibility_empty_interval():
    model = anderson_1d_model(L=40)
    res = ensemble(model, model.column_regions(10), 10)
    neg = negligibility_check(res, (0.0, 0.0))
    assert neg.max_probability == 0.0 and neg.negligible


def test_negligibility_single_region_covering_spectrum():
    model = anderson_1d_model(L=40)
    res = ensemble(model, [np.arange(40)], 50)
    neg = negligibility_check(res, (-1.0, 1.0))
    assert neg.max_probability > 0.9
    assert not neg.negligible


def test_negligibility_decreases_with_volume():
    c, region = 5.0, 20
    probs = []
    for N in (200, 400, 800):
        model = anderson_1d_model(L=N)
        res = ensemble(model, model.column_regions(region), 200, seed=N)
        h = window_half_width(c, N)
        probs.append(negligibility_check(res, (-h, h)).max_probability)
    assert probs[0] > probs[1] > probs[2]


def test_disorder_without_full_support_still_runs():
    model = stacked_model(L=10, M=2, disorder=DisorderSpec("uniform", (0.0, 1.0)))
    res = ensemble(model, model.column_regions(5), 5)
    assert count_distribution(res, 1.0, 1.0).divisible_by(2)
