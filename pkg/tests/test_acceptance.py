"""Acceptance criteria, each run at its stated sample size, tolerance and time budget.

Every test records one PASS/FAIL line; the lines are printed together in the
``acceptance criteria`` section of the pytest terminal summary.
"""

import time

import pytest

from specmult import cli
from specmult.config import parse_config
from specmult.experiments import RUNNERS
from specmult.poly_multiplicity import TAU_DISC, discriminant, remainder_test

pytestmark = pytest.mark.acceptance

THREADS = 4


def record(report, n, title, ok, detail, elapsed, budget):
    within = elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    report[f"criterion {n}"] = f"criterion {n} {status}  {title}: {detail}; {elapsed:.2f}s (budget {budget:g}s)"
    return ok and within


def run(kind, raw=None, seed=None, out=None):
    cfg = parse_config(raw or {}, kind, seed)
    t0 = time.perf_counter()
    result = RUNNERS[kind](cfg, threads=THREADS, out=out)
    return result, time.perf_counter() - t0


def test_criterion_1_counterexample_multiplicity(acceptance_report, tmp_path):
    result, dt = run("counterexample", {"params": {"realizations": 20}}, seed=1, out=tmp_path)
    windows = {c for c in result.checks if c.startswith("window")}
    ok = all(result.checks[c] for c in windows)
    detail = ", ".join(f"{c}={'ok' if result.checks[c] else 'violated'}" for c in sorted(windows))
    assert record(acceptance_report, 1, "counterexample multiplicity", ok, detail, dt, 30), detail


def test_criterion_2_schur_direct_equivalence(acceptance_report):
    result, dt = run("green-check", seed=1)
    key = "schur == direct within 1e-9(1+|G|)"
    ok = result.checks[key]
    detail = f"{result.summary['instances']} instances, max gap/bound {result.summary['max_discrepancy_over_bound']:.2e}"
    assert record(acceptance_report, 2, "Schur/direct Green equivalence", ok, detail, dt, 10), detail


def test_criterion_3_herglotz_positivity(acceptance_report):
    result, dt = run("green-check", seed=2)
    key = "Im G(z) >= -1e-10 on grid"
    ok = result.checks[key]
    detail = f"min eigenvalue of Im G = {result.summary['min_herglotz_eig']:.3e} over {result.summary['herglotz_points']} points"
    assert record(acceptance_report, 3, "Herglotz positivity", ok, detail, dt, 10), detail


def test_criterion_4_kernel_bijection(acceptance_report):
    result, dt = run("kernel-check", seed=3)
    ok = result.checks["d1 == d2 on every instance"] and result.summary["dimensions_covered"] == [0, 1, 2]
    detail = f"{result.summary['instances']} instances, dimensions {result.summary['dimensions_covered']}"
    assert record(acceptance_report, 4, "kernel bijection", ok, detail, dt, 5), detail


def test_criterion_5_polynomial_certificates(acceptance_report, corpus):
    t0 = time.perf_counter()
    k_agree = disc_agree = 0
    for F, roots, mults in corpus:
        k_agree += remainder_test(F, 1).max_granted_K == mults.min()
        repeated = bool(mults.max() > 1)
        disc_agree += (abs(discriminant(F.monic())) <= TAU_DISC) == repeated
    dt = time.perf_counter() - t0
    n = len(corpus)
    ok = k_agree == n and disc_agree == n
    detail = f"max granted K agrees {k_agree}/{n}, discriminant test agrees {disc_agree}/{n}"
    assert record(acceptance_report, 5, "polynomial certificates", ok, detail, dt, 5), detail


def test_criterion_6_non_poisson_statistics(acceptance_report):
    result, dt = run("stats", {"params": {"realizations": 2000, "columns_per_region": 10}}, seed=1)
    s = result.summary
    ok = all(result.checks.values()) and s["divisor"] == 3
    detail = (f"summed mean {s['summed_mean']:.3f}, P(N=1)={s['one_point_mass']}, "
              f"TV {s['tv_distance']:.3f}, checks {sorted(k for k, v in result.checks.items() if not v) or 'all ok'}")
    assert record(acceptance_report, 6, "compound (non-Poisson) statistics", ok, detail, dt, 300), detail


BASELINE = {"model": "anderson-1d-rank1",
            "params": {"realizations": 2000, "columns_per_region": 20, "window_constant": 5.0}}


def test_criterion_7_poisson_baseline(acceptance_report):
    result, dt = run("stats", BASELINE, seed=1)
    s = result.summary
    ok = all(result.checks.values()) and s["regions"] == 25 and s["expect"] == "poisson"
    detail = (f"{s['regions']} blocks, summed mean {s['summed_mean']:.3f}, TV {s['tv_distance']:.4f}, "
              f"negligibility max {s['negligibility_max']:.3f}")
    assert record(acceptance_report, 7, "Poisson baseline", ok, detail, dt, 600), detail


def test_criterion_8_minami_ratio(acceptance_report):
    result, dt = run("minami", seed=1)
    s = result.summary
    failed = sorted(k for k, v in result.checks.items() if not v)
    growth = ", ".join(f"{g:.2f}" for g in s["contrast_growth_per_halving"])
    detail = (f"baseline max ratio upper {s['max_ratio_upper']:.4g} vs constant {s['constant']:.4g}; "
              f"contrast growth per halving [{growth}]; failed: {failed or 'none'}")
    ok = all(result.checks.values())
    assert record(acceptance_report, 8, "Minami ratio boundedness", ok, detail, dt, 600), detail


@pytest.mark.parametrize("kind", ["counterexample", "stats"])
def test_criterion_9_determinism(acceptance_report, tmp_path, kind):
    outs = {}
    for threads in (1, 4):
        out = tmp_path / f"t{threads}"
        assert cli.main([kind, "--seed", "20240", "--threads", str(threads), "--out", str(out)]) == 0
        outs[threads] = {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}
    same = bool(outs[1]) and outs[1] == outs[4]
    prev = acceptance_report.get("criterion 9", "")
    files = ", ".join(sorted(outs[1]))
    part = f"{kind} [{files}] {'identical' if same else 'DIFFER'}"
    earlier_ok = "FAIL" not in prev
    parts = (prev.split(": ", 1)[1] + "; " if prev else "") + part
    status = "PASS" if same and earlier_ok else "FAIL"
    acceptance_report["criterion 9"] = f"criterion 9 {status}  serial vs 4-thread byte identity: {parts}"
    assert same, part
