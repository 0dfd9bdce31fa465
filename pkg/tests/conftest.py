import numpy as np
import pytest

from altlin import oracle, problems

BOUND_SEEDS = range(10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class LassoCase:
    """A bound-suite lasso instance with smoothed and exact objectives and their optima."""

    def __init__(self, seed, sigma=1e-3):
        self.seed = seed
        self.sigma = sigma
        self.inst = problems.random_lasso(30, 50, 0.1, seed)
        self.smooth = problems.lasso_handles(self.inst, sigma=sigma)
        self.exact = problems.lasso_handles(self.inst)
        self.opt_smooth = oracle.reference_optimum(self.smooth, tol=1e-12)
        self.opt_exact = oracle.reference_optimum(self.exact, tol=1e-12)
        assert self.opt_smooth.certified and self.opt_exact.certified
        self.mu_smooth = min(1.0 / self.inst.lipschitz, sigma)
        self.mu_exact = 1.0 / self.inst.lipschitz

    @property
    def dist_smooth(self):
        return float(self.opt_smooth.x_star @ self.opt_smooth.x_star)

    @property
    def dist_exact(self):
        return float(self.opt_exact.x_star @ self.opt_exact.x_star)


@pytest.fixture(scope="session")
def lasso_cases():
    return [LassoCase(s) for s in BOUND_SEEDS]


_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record and assert one acceptance criterion: ``verdict(n, ok, detail)``."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _VERDICTS[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])
