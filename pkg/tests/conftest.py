"""Shared fixtures: random states and a bank of exact-diagonalization oracles.

A 14-site spectrum costs about a minute and half a gigabyte, so each
field value is diagonalized once, every reduced state registered for it
is extracted, and the spectrum is dropped.
"""
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from thermolens.hamiltonians import ChainSpectrum, SpinChain

settings.register_profile(
    "thermolens", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("thermolens")

# 14-site chain, centre pair (6, 7)
CENTER = (6, 7)
ED14_REQUESTS = {
    0.1: [(2.0, CENTER), (2.5, CENTER)],
    0.25: [(1.0, CENTER), (5.0, CENTER), (10.0, CENTER), (50.0, CENTER)],
    0.5: [(1.0, CENTER), (5.0, CENTER), (10.0, CENTER), (10.0, (6, 8)), (50.0, CENTER)],
    0.6: [(50.0, CENTER)],
    0.8: [(5.0, CENTER), (50.0, CENTER)],
    1.0: [(1.0, CENTER), (5.0, CENTER), (10.0, CENTER), (50.0, CENTER)],
    1.5: [(1.0, CENTER), (5.0, CENTER), (10.0, CENTER)],
}


class EDBank:
    """Lazily filled store of exact reduced thermal states."""

    def __init__(self):
        self._states = {}
        self._small = {}
        self.seconds = {}

    def _fill(self, n, h, requests):
        t0 = time.perf_counter()
        spec = ChainSpectrum(SpinChain(n, h))
        for beta, keep in requests:
            self._states[(n, h, beta, tuple(keep))] = spec.reduced_state(beta, list(keep))
        self.seconds[(n, h)] = time.perf_counter() - t0

    def rdm(self, n, h, beta, keep):
        key = (n, h, beta, tuple(keep))
        if key not in self._states:
            if n == 14:
                if (beta, tuple(keep)) not in ED14_REQUESTS.get(h, []):
                    raise KeyError(f"14-site oracle {key} is not registered in ED14_REQUESTS")
                self._fill(n, h, ED14_REQUESTS[h])
            else:
                if (n, h) not in self._small:
                    t0 = time.perf_counter()
                    self._small[(n, h)] = ChainSpectrum(SpinChain(n, h))
                    self.seconds[(n, h)] = time.perf_counter() - t0
                self._states[key] = self._small[(n, h)].reduced_state(beta, list(keep))
        return self._states[key]

    def center_pair(self, n, h, beta):
        c = n // 2 - 1
        return self.rdm(n, h, beta, (c, c + 1))


@pytest.fixture(scope="session")
def ed_bank():
    return EDBank()


def random_density(dim, rng, rank=None):
    a = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim, rng):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance report: one line per criterion, repeated at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
