import pytest

from ksol import orbit, phase, picard

# orbit pipelines are the expensive part of the suite; share them per-session
_CACHE = {}


def pipeline(n, k, rho, theta=1.0, alpha=1.0, **ctrl):
    key = (n, k, rho, theta, alpha, tuple(sorted(ctrl.items())))
    if key not in _CACHE:
        p = phase.make_params(n, k, rho, theta)
        controls = orbit.OrbitControls(**ctrl) if ctrl else None
        _CACHE[key] = (p,) + orbit.run_orbit(p, alpha, controls)
    return _CACHE[key]


@pytest.fixture(scope="session")
def run():
    return pipeline


@pytest.fixture(scope="session")
def solve_local():
    cache = {}

    def _solve(n, k, rho, theta=1.0, alpha=1.0):
        key = (n, k, rho, theta, alpha)
        if key not in cache:
            p = phase.make_params(n, k, rho, theta)
            cache[key] = (p, picard.picard_solve(alpha, p))
        return cache[key]

    return _solve
