import numpy as np
import pytest

from specmult.poly_multiplicity import Poly

ACCEPTANCE_LINES: dict[str, str] = {}


def planted_corpus(n=200, seed=2024, max_degree=8, separation=0.3, max_mult=4):
    """Polynomials with planted roots in the unit disk.

    Planted minimum multiplicity cycles through 1..max_mult so every class is
    represented; degree is kept >= 2 so the discriminant is defined.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        m = len(out) % max_mult + 1
        k = int(rng.integers(1, max_degree // m + 1))
        mults = rng.integers(m, max_mult + 1, size=k)
        mults[int(rng.integers(k))] = m
        if mults.sum() > max_degree or mults.sum() < 2:
            continue
        roots = []
        for _ in range(1000):
            r = np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
            if all(abs(r - s) >= separation for s in roots):
                roots.append(r)
            if len(roots) == k:
                break
        if len(roots) < k:
            continue
        leading = rng.uniform(0.5, 2.0) * np.exp(2j * np.pi * rng.uniform())
        F = Poly.from_roots(np.repeat(roots, mults), leading)
        out.append((F, np.array(roots), mults))
    return out


@pytest.fixture(scope="session")
def corpus():
    return planted_corpus()


@pytest.fixture(scope="session")
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[1])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
