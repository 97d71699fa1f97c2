"""Transverse-field Ising chains: dense Hamiltonians and Gibbs states.

The chain Hamiltonian with open boundaries is

    H = (J/2) sum_{i<n-1} X_i X_{i+1} - (h/2) sum_i Z_i

with ``J = 1`` for the model studied here.  Energies are in units of the
coupling and ``k_B = 1``.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import CapacityError
from .qstate import eig_hermitian, partial_trace

DENSE_MAX_SITES = 14
BETA_MAX = 1e6


@dataclass(frozen=True)
class SpinChain:
    """Open transverse-field Ising chain.

    ``coupling`` scales the XX term; 1 is the model of interest and 0
    decouples the spins.  ``model`` is the hook for other two-body
    interactions; only ``"transverse_ising"`` is implemented.
    """

    n: int
    h: float
    coupling: float = 1.0
    model: str = "transverse_ising"
    boundary: str = "open"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"chain needs n >= 2 sites, got {self.n!r}")
        if not np.isfinite(self.h) or not np.isfinite(self.coupling):
            raise ValueError("field and coupling must be finite")
        if self.model != "transverse_ising":
            raise NotImplementedError(f"model {self.model!r} is not implemented")
        if self.boundary != "open":
            raise NotImplementedError("only open boundaries are supported")

    def bond_terms(self):
        """Two-site Hamiltonian for every bond as ``(n-1, 4, 4)`` real array.

        Field terms are split between the two bonds touching a site; edge
        sites belong to a single bond and keep their full weight.  The sum
        over bonds reproduces :func:`build_dense` exactly.
        """
        x = np.array([[0.0, 1.0], [1.0, 0.0]])
        z = np.diag([1.0, -1.0])
        eye = np.eye(2)
        xx = 0.5 * self.coupling * np.kron(x, x)
        zl = np.kron(z, eye)
        zr = np.kron(eye, z)
        out = np.empty((self.n - 1, 4, 4))
        for i in range(self.n - 1):
            wl = 1.0 if i == 0 else 0.5
            wr = 1.0 if i + 1 == self.n - 1 else 0.5
            out[i] = xx - 0.5 * self.h * (wl * zl + wr * zr)
        return out


def _spin_z(n):
    """``z[k, x]``: eigenvalue of Z on site k for basis state x."""
    x = np.arange(2 ** n)
    return np.array([1 - 2 * ((x >> (n - 1 - k)) & 1) for k in range(n)], dtype=float)


def build_sparse(chain):
    """Chain Hamiltonian as a scipy CSR matrix (any ``n`` that fits in memory)."""
    n = chain.n
    dim = 2 ** n
    x = np.arange(dim)
    diag = -0.5 * chain.h * _spin_z(n).sum(axis=0)
    rows = [x]
    cols = [x]
    vals = [diag]
    if chain.coupling != 0.0:
        for i in range(n - 1):
            mask = (1 << (n - 1 - i)) | (1 << (n - 2 - i))
            rows.append(x ^ mask)
            cols.append(x)
            vals.append(np.full(dim, 0.5 * chain.coupling))
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )


def build_dense(chain):
    """Dense ``2**n`` Hamiltonian; refuses chains longer than 14 sites."""
    if chain.n > DENSE_MAX_SITES:
        raise CapacityError(
            f"dense Hamiltonian limited to {DENSE_MAX_SITES} sites (got {chain.n}); "
            "use thermolens.mps_thermal for longer chains"
        )
    return build_sparse(chain).toarray()


def local_block_hamiltonian(chain, m):
    """Hamiltonian of ``m`` contiguous sites with the chain's couplings.

    No boundary or mean-field correction is added: the mean-field term
    is proportional to ``<X>``, which vanishes at any finite temperature.
    """
    if m < 2:
        raise ValueError(f"block needs at least 2 sites to contain a bond, got m={m}")
    if m > chain.n:
        raise ValueError(f"block of {m} sites does not fit a {chain.n}-site chain")
    return build_dense(SpinChain(m, chain.h, chain.coupling, chain.model, chain.boundary))


def gibbs_weights(energies, beta):
    """Normalized Boltzmann weights with the ground energy shifted to zero."""
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta!r}")
    w = np.exp(-beta * (energies - energies.min()))
    return w / w.sum()


def gibbs_dense(h_mat, beta):
    """Thermal state ``exp(-beta H) / Z`` of a dense Hermitian matrix."""
    energies, vecs = eig_hermitian(h_mat)
    w = gibbs_weights(energies, beta)
    rho = (vecs * w) @ vecs.conj().T
    return 0.5 * (rho + rho.conj().T)


def thermal_energy(h_mat, beta):
    energies, _ = eig_hermitian(h_mat)
    return float(gibbs_weights(energies, beta) @ energies)


class ChainSpectrum:
    """Full spectrum of a chain, resolved into parity and reflection sectors.

    The global spin flip ``prod_i Z_i`` and the mirror ``i -> n-1-i`` both
    commute with the Hamiltonian, so it splits into four blocks of about
    ``2**n / 4`` states.  Diagonalizing the blocks makes exact thermal
    reduced states of 14 sites affordable.

    Examples
    --------
    >>> spec = ChainSpectrum(SpinChain(8, 0.5))
    >>> rho = spec.reduced_state(2.0, keep=[3, 4])
    """

    def __init__(self, chain):
        self.chain = chain
        n = chain.n
        dim = 2 ** n
        x = np.arange(dim)
        mirror = np.zeros(dim, dtype=np.int64)
        for k in range(n):
            mirror |= ((x >> k) & 1) << (n - 1 - k)
        parity = np.zeros(dim, dtype=np.int64)
        for k in range(n):
            parity ^= (x >> k) & 1
        h_sp = build_sparse(chain)
        self.sectors = []
        for p in (0, 1):
            fixed = x[(parity == p) & (mirror == x)]
            paired = x[(parity == p) & (x < mirror)]
            for eps in (1.0, -1.0):
                cols = [np.arange(paired.size), np.arange(paired.size)]
                rows = [paired, mirror[paired]]
                vals = [np.full(paired.size, np.sqrt(0.5)), np.full(paired.size, eps * np.sqrt(0.5))]
                if eps > 0:
                    rows.append(fixed)
                    cols.append(paired.size + np.arange(fixed.size))
                    vals.append(np.ones(fixed.size))
                k = paired.size + (fixed.size if eps > 0 else 0)
                if k == 0:
                    continue
                basis = sparse.csc_matrix(
                    (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                    shape=(dim, k),
                )
                block = (basis.T @ (h_sp @ basis)).toarray()
                energies, vecs = np.linalg.eigh(0.5 * (block + block.T))
                self.sectors.append((basis, energies, vecs))

    @cached_property
    def energies(self):
        return np.sort(np.concatenate([e for _, e, _ in self.sectors]))

    def _weights(self, beta):
        e0 = self.energies[0]
        z = np.exp(-beta * (self.energies - e0)).sum()
        return [np.exp(-beta * (e - e0)) / z for _, e, _ in self.sectors]

    def energy(self, beta):
        return float(sum(w @ e for w, (_, e, _) in zip(self._weights(beta), self.sectors)))

    def reduced_state(self, beta, keep, chunk=512):
        """Exact ``Tr_rest exp(-beta H)/Z`` on the sites in ``keep``."""
        n = self.chain.n
        keep = sorted(set(int(k) for k in keep))
        rest = [k for k in range(n) if k not in keep]
        dk = 2 ** len(keep)
        rho = np.zeros((dk, dk))
        for w, (basis, _, vecs) in zip(self._weights(beta), self.sectors):
            live = np.nonzero(w > 1e-300)[0]
            for start in range(0, live.size, chunk):
                idx = live[start:start + chunk]
                full = basis @ (vecs[:, idx] * np.sqrt(w[idx]))
                t = full.reshape([2] * n + [idx.size])
                t = np.transpose(t, keep + rest + [n]).reshape(dk, -1)
                rho += t @ t.T
        return 0.5 * (rho + rho.T)


def thermal_reduced_state(chain, beta, keep):
    """Exact reduced thermal state of a chain of at most 14 sites."""
    if chain.n > DENSE_MAX_SITES:
        raise CapacityError(f"exact thermal states limited to {DENSE_MAX_SITES} sites")
    if chain.n <= 8:
        return partial_trace(gibbs_dense(build_dense(chain), beta), keep)
    return ChainSpectrum(chain).reduced_state(beta, keep)


def classical_pair_distribution(beta):
    """``exp(-beta s s') / Z_2`` on ``s, s' in (+1, -1)``, indexed ``[s, s']``."""
    s = np.array([1.0, -1.0])
    p = np.exp(-beta * np.outer(s, s))
    return p / p.sum()


def classical_block_marginal(n, beta, k):
    """Marginal of the pair ``(k, k+1)`` in the classical chain ``sum s_i s_{i+1}``.

    Sums out the other ``n - 2`` spins with transfer matrices.  Sites are
    zero-based; the pair must be interior (``1 <= k <= n - 3``), so that
    both of its spins have a neighbour outside the pair.

    Returns
    -------
    ndarray, shape (2, 2)
        ``P[a, b]`` with index 0 for spin +1 and 1 for spin -1.
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta!r}")
    if not 1 <= k <= n - 3:
        raise ValueError(f"pair ({k}, {k + 1}) is not interior to a {n}-site chain")
    s = np.array([1.0, -1.0])
    t = np.exp(-beta * np.outer(s, s))
    left = np.ones(2)
    for _ in range(k):
        left = left @ t
    right = np.ones(2)
    for _ in range(n - k - 2):
        right = t @ right
    p = left[:, None] * t * right[None, :]
    return p / p.sum()
