"""Thermal descriptions of reduced blocks: fidelities and local temperatures.

A block of ``m`` spins cut out of a chain at inverse temperature ``beta``
is compared with the Gibbs state of the same ``m``-site Hamiltonian,
either at the global ``beta`` or at an optimized local ``beta'``.
Reduced states come from a backend:

* :class:`ExactBackend` - infinite chain, nearest-neighbour pairs only
  (``m = 2``), from the quadrature correlators;
* :class:`MPSBackend` - finite chain (default 50 sites) simulated with a
  purified MPS, any ``m`` up to 6.
"""
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .exact_ising import DEFAULT_QUAD_TOL, build_pair_rdm, reference_distant_pair
from .hamiltonians import SpinChain, gibbs_dense, gibbs_weights, local_block_hamiltonian
from .mps_thermal import (
    DEFAULT_BOND_DIM,
    DEFAULT_CUTOFF,
    DEFAULT_DT,
    block_rdm,
    thermal_state,
)
from .qstate import RANK_RTOL, eig_hermitian, fidelity, psd_factor

GRID_POINTS = 64
DEFAULT_TOL = 1e-4
DERIVATIVE_TOL = 1e-10
PLATEAU_RTOL = 1e-6
RICHARDSON_RTOL = 0.1
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class ExactBackend:
    """Nearest-neighbour pair of the infinite chain (``m = 2`` only)."""

    name = "exact"

    def __init__(self, quad_tol=DEFAULT_QUAD_TOL):
        self.quad_tol = float(quad_tol)

    def check_block(self, m):
        if m != 2:
            raise ValueError(f"the exact backend only provides m = 2 blocks, got m = {m}")

    def reduced_state(self, beta, h, m=2):
        self.check_block(m)
        return build_pair_rdm(beta, h, 1, self.quad_tol).rho

    def truncation_error(self, beta, h):
        return 0.0

    def params(self):
        return {"backend": self.name, "n": "inf", "bond_dim": "", "dt": "", "quad_tol": self.quad_tol}


class MPSBackend:
    """Centered block of a finite chain evolved as a purified MPS.

    Evolved states are kept in a small LRU cache keyed by ``(beta, h)`` so
    that different block sizes at the same point share one evolution.
    """

    name = "mps"

    def __init__(self, n=50, max_bond=DEFAULT_BOND_DIM, dt=DEFAULT_DT, cutoff=DEFAULT_CUTOFF,
                 first_site=None, method="contract", cache_size=8):
        self.n = int(n)
        self.max_bond = max_bond
        self.dt = float(dt)
        self.cutoff = float(cutoff)
        self.first_site = first_site
        self.method = method
        self._cache = OrderedDict()
        self._cache_size = cache_size

    def check_block(self, m):
        if not 2 <= m <= min(6, self.n):
            raise ValueError(f"block size must lie in [2, {min(6, self.n)}], got m = {m}")

    def state(self, beta, h):
        key = (float(beta), float(h))
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        st = thermal_state(SpinChain(self.n, h), beta, self.max_bond, self.dt, self.cutoff)
        self._cache[key] = st
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return st

    def reduced_state(self, beta, h, m=2):
        self.check_block(m)
        return block_rdm(self.state(beta, h), m, self.first_site, self.method)

    def truncation_error(self, beta, h):
        return self.state(beta, h).truncation_error

    def params(self):
        return {"backend": self.name, "n": self.n, "bond_dim": self.max_bond, "dt": self.dt, "quad_tol": ""}


def default_backend(m):
    """Quadrature for pairs, MPS for anything larger."""
    return ExactBackend() if m == 2 else MPSBackend()


def block_gibbs(h, m, beta):
    return gibbs_dense(local_block_hamiltonian(SpinChain(m, h), m), beta)


class FidelityObjective:
    """``beta' -> F[Omega_m(beta'), rho]`` with all beta'-independent work done once.

    Writes ``rho = C C^H`` and ``Omega(beta') = V diag(w) V^T`` so that
    the fidelity is the trace norm of ``C^H V diag(sqrt(w))``; each
    evaluation is one small batched SVD.  Round-off sized weights are
    dropped exactly as in :func:`qstate.fidelity`, so both agree.
    """

    def __init__(self, rho, h_block):
        self.energies, vecs = eig_hermitian(h_block)
        self.k = psd_factor(rho, "reduced state").conj().T @ vecs
        self.calls = 0

    def __call__(self, betas):
        betas = np.atleast_1d(np.asarray(betas, dtype=float))
        self.calls += betas.size
        e = self.energies - self.energies[0]
        w = np.exp(-betas[:, None] * e[None, :])
        w /= w.sum(axis=1, keepdims=True)
        w[w < RANK_RTOL * w.shape[1] * w.max(axis=1, keepdims=True)] = 0.0
        mats = self.k[None, :, :] * np.sqrt(w)[:, None, :]
        return np.minimum(1.0, np.linalg.svd(mats, compute_uv=False).sum(axis=1))


@dataclass(frozen=True)
class LocalTempResult:
    """Outcome of a local-temperature optimization at one ``(beta, h, m)``.

    ``plateau_flag`` marks points where the fidelity stays within a
    relative 1e-6 of its best value from there up to the top of the search
    bracket; there
    ``beta_local`` is the smallest ``beta'`` on that plateau and ``f_opt``
    the largest fidelity seen.  ``edge_flag`` marks a best point on either
    edge of the bracket.
    """

    beta: float
    h: float
    m: int
    beta_local: float
    f_opt: float
    f_at_global: float
    plateau_flag: bool
    edge_flag: bool
    evaluations: int


def _golden_max(func, lo, hi, tol):
    """Golden-section maximization of ``func`` on ``[lo, hi]`` down to width ``tol``."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = func(x1), func(x2)
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = func(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = func(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _bisect_threshold(func, lo, hi, threshold, tol):
    # Smallest x in [lo, hi] with func(x) >= threshold, func(lo) < threshold <= func(hi).
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if func(mid) >= threshold:
            hi = mid
        else:
            lo = mid
    return hi


def default_bracket(beta):
    return (1e-3, max(2.0 * beta, 50.0))


def optimize_rho(rho, beta, h, m, bracket=None, tol=DEFAULT_TOL):
    """Local-temperature search for an already computed reduced state ``rho``."""
    lo, hi = bracket if bracket is not None else default_bracket(beta)
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket ({lo}, {hi})")
    obj = FidelityObjective(rho, local_block_hamiltonian(SpinChain(m, h), m))

    def f_log(x):
        return float(obj(math.exp(x))[0])

    f_global = float(obj(beta)[0])
    grid = np.geomspace(lo, hi, GRID_POINTS)
    logs = np.log(grid)
    fvals = obj(grid)
    i = int(np.argmax(fvals))
    log_tol = math.log1p(tol)
    plateau = edge = False
    threshold = float(fvals[i]) * (1.0 - PLATEAU_RTOL)
    if np.all(fvals[i:] >= threshold):
        # flat from the best grid point up to the top of the bracket
        plateau = edge = True
        f_best = float(fvals[i])
        below = np.nonzero(fvals < threshold)[0]
        j = int(below[-1]) + 1 if below.size else 0
        if j == 0:
            x_best = logs[0]
        else:
            x_best = _bisect_threshold(f_log, logs[j - 1], logs[j], threshold, log_tol)
    else:
        x_best, f_best = _golden_max(f_log, logs[max(i - 1, 0)], logs[i + 1], log_tol)
        if i == 0 and x_best - logs[0] <= log_tol:
            edge = True
    beta_local = math.exp(x_best)
    if not plateau and f_global > f_best and lo <= beta <= hi:
        beta_local, f_best = float(beta), f_global
    f_opt = max(f_best, f_global) if plateau else f_best
    return LocalTempResult(
        float(beta), float(h), int(m), beta_local, f_opt, f_global, plateau, edge, obj.calls
    )


def optimize_local_beta(beta, h, m=2, backend=None, bracket=None, tol=DEFAULT_TOL):
    """Find the ``beta'`` whose block Gibbs state best matches the reduced state.

    Scans 64 log-spaced points of ``bracket`` (default ``[1e-3,
    max(2 beta, 50)]``), then refines around the best one by golden-section
    search in ``log beta'`` to relative precision ``tol``.  The reduced
    state is computed once.
    """
    backend = backend or default_backend(m)
    backend.check_block(m)
    rho = backend.reduced_state(beta, h, m)
    return optimize_rho(rho, beta, h, m, bracket, tol)


def intensive_fidelity(beta, h, m=2, backend=None):
    """``F[Omega_m(beta), rho_m(beta)]``: block Gibbs state vs reduced state at equal beta."""
    backend = backend or default_backend(m)
    backend.check_block(m)
    return fidelity(block_gibbs(h, m, beta), backend.reduced_state(beta, h, m))


@dataclass(frozen=True)
class DerivativeResult:
    """Central difference with a step-halving check."""

    value: float
    richardson_diff: float
    flagged: bool
    step: float


def _central_difference(func, h, step):
    d1 = (func(h + step) - func(h - step)) / (2 * step)
    half = 0.5 * step
    d2 = (func(h + half) - func(h - half)) / (2 * half)
    diff = abs(d1 - d2)
    scale = max(abs(d1), abs(d2))
    flagged = scale > 1e-8 and diff > RICHARDSON_RTOL * scale
    return DerivativeResult(float(d1), float(diff), bool(flagged), float(step))


def fidelity_derivative_h(beta, h, m=2, backend=None, step=1e-3):
    """``dF/dh`` of :func:`intensive_fidelity` by central differences."""
    backend = backend or default_backend(m)
    return _central_difference(lambda x: intensive_fidelity(beta, x, m, backend), h, step)


def local_beta_derivative_h(beta, h, m=2, backend=None, step=1e-3, tol=DERIVATIVE_TOL):
    """``d beta_local / dh`` by central differences.

    The optimizer runs with a much tighter tolerance than its default so
    that its own error stays far below the finite-difference signal.
    """
    backend = backend or default_backend(m)
    return _central_difference(
        lambda x: optimize_local_beta(beta, x, m, backend, tol=tol).beta_local, h, step
    )


def neighbor_fidelity(beta, dbeta, h, m=2, backend=None):
    """``F[rho_m(beta), rho_m(beta + dbeta)]`` between two reduced states."""
    if dbeta < 0:
        raise ValueError(f"dbeta must be >= 0, got {dbeta!r}")
    backend = backend or default_backend(m)
    backend.check_block(m)
    return fidelity(backend.reduced_state(beta, h, m), backend.reduced_state(beta + dbeta, h, m))


def distant_pair_fidelity(beta, h, r, quad_tol=DEFAULT_QUAD_TOL):
    """Fidelity between the end spins of an ``(r+1)``-site thermal chain and
    the pair at separation ``r`` of the infinite chain."""
    ref = reference_distant_pair(beta, h, r)
    return fidelity(ref, build_pair_rdm(beta, h, r, quad_tol).rho)


@dataclass(frozen=True)
class SweepGrid:
    """Rectangular ``(beta, h)`` grid plus block settings for a study."""

    betas: tuple
    hs: tuple
    m: int = 2
    r: int = 1
    backend: object = None

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "hs", tuple(float(h) for h in self.hs))
        if not self.betas or not self.hs:
            raise ValueError("sweep grid axes must be non-empty")
        if list(self.betas) != sorted(self.betas) or list(self.hs) != sorted(self.hs):
            raise ValueError("sweep grid axes must be ascending")
        if any(b < 0 for b in self.betas):
            raise ValueError("beta values must be >= 0")
        if self.backend is None:
            object.__setattr__(self, "backend", default_backend(self.m))
        self.backend.check_block(self.m)

    def points(self):
        return [(b, h) for b in self.betas for h in self.hs]
