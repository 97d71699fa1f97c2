"""Dense linear algebra for small spin registers.

Operators are plain square numpy arrays.  A register of ``m`` spin-1/2
sites lives in dimension ``2**m`` with site 0 as the most significant
bit of the basis index, so ``|s_0 s_1 ... s_{m-1}>`` has index
``sum_k s_k 2**(m-1-k)``.  Pauli strings are written as text such as
``"XZI"``, one letter per site in the same order.
"""
from itertools import product

import numpy as np

from . import kernels
from .errors import DimensionError, NotHermitianError, NotPSDError

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
RANK_RTOL = 10 * np.finfo(float).eps

PAULI_LETTERS = "IXYZ"
PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def n_sites(dim):
    m = int(dim).bit_length() - 1
    if dim < 1 or 2 ** m != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return m


def _square(a, name="operator"):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def hermiticity_error(a):
    a = _square(a)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def check_density_matrix(rho, psd_tol=PSD_TOL, trace_tol=TRACE_TOL):
    """Raise if ``rho`` is not a valid density matrix; return it otherwise."""
    rho = _square(rho, "density matrix")
    dev = hermiticity_error(rho)
    if dev > 1e-12 * max(1.0, np.abs(rho).max()):
        raise NotHermitianError(dev, 1e-12)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace is {tr!r}, expected 1")
    lam_min = np.linalg.eigvalsh(rho)[0]
    if lam_min < -psd_tol:
        raise NotPSDError(lam_min, psd_tol)
    return rho


def eig_hermitian(a, tol=HERMITIAN_TOL):
    """Eigendecomposition ``a = V diag(w) V^H`` of a Hermitian matrix.

    Eigenvalues come back in ascending order.  Raises
    :class:`NotHermitianError` when ``max |a - a^H|`` exceeds ``tol``.
    """
    a = _square(a)
    dev = hermiticity_error(a)
    if dev > tol:
        raise NotHermitianError(dev, tol)
    a = 0.5 * (a + a.conj().T)
    return np.linalg.eigh(a)


def _clamped_spectrum(rho, tol, context=""):
    w, v = eig_hermitian(rho)
    if w.size and w[0] < -tol:
        raise NotPSDError(w[0], tol, context)
    return np.clip(w, 0.0, None), v


def sqrt_psd(rho, tol=PSD_TOL):
    """Principal square root of a positive semidefinite matrix.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything more
    negative raises :class:`NotPSDError`.
    """
    w, v = _clamped_spectrum(rho, tol)
    return (v * np.sqrt(w)) @ v.conj().T


def psd_factor(rho, name="state"):
    """``C`` with ``rho = C C^H``, dropping eigenvalues at round-off level.

    Eigenvalues below ``RANK_RTOL * dim * max(w)`` are set to zero (see
    :func:`fidelity`).
    """
    w, v = _clamped_spectrum(rho, PSD_TOL, name)
    w[w < RANK_RTOL * w.size * w.max()] = 0.0
    return v * np.sqrt(w)


def fidelity(rho, sigma):
    """Uhlmann fidelity ``Tr sqrt(sqrt(sigma) rho sqrt(sigma))``.

    This is the root form (not its square): orthogonal states give 0 and
    identical states give 1.

    With ``rho = C C^H`` and ``sigma = B B^H`` from the clamped spectra,
    the eigenvalues of ``sqrt(sigma) rho sqrt(sigma)`` are the squared
    singular values of ``C^H B``, so the fidelity is the sum of those
    singular values.  Taking them from an SVD avoids square roots of
    round-off sized eigenvalues.  Eigenvalues below ``RANK_RTOL * dim *
    max(w)`` are treated as exact zeros: they are indistinguishable from
    round-off, and because the fidelity is only Hoelder-1/2 continuous at
    rank-deficient states they would otherwise shift it by ``~1e-8``.

    Parameters
    ----------
    rho, sigma : ndarray
        Density matrices of equal dimension.

    Returns
    -------
    float
        Fidelity clipped to ``[0, 1]``.
    """
    rho = _square(rho, "rho")
    sigma = _square(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise DimensionError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    overlap = psd_factor(rho, "rho").conj().T @ psd_factor(sigma, "sigma")
    return float(min(1.0, np.linalg.svd(overlap, compute_uv=False).sum()))


def trace_distance(a, b):
    """Half the trace norm of ``a - b``."""
    d = _square(a) - _square(b)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum())


def partial_trace(rho, keep, dims=None):
    """Trace out every site not listed in ``keep``.

    Parameters
    ----------
    rho : ndarray
        Operator on the full register.
    keep : iterable of int
        Zero-based sites to retain.  The result keeps them in ascending
        order regardless of the order given.
    dims : sequence of int, optional
        Local dimension of each site; defaults to qubits.
    """
    rho = _square(rho)
    if dims is None:
        dims = [2] * n_sites(rho.shape[0])
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != rho.shape[0]:
        raise DimensionError(f"register shape {dims} does not match dimension {rho.shape[0]}")
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    for k in keep:
        if not 0 <= k < n:
            raise IndexError(f"site {k} out of range for a {n}-site register")
    traced = [k for k in range(n) if k not in keep]
    t = rho.reshape(dims + dims)
    # One einsum with explicit labels: kept ket, kept bra, traced shared.
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    ket = letters[:n]
    bra = letters[n:]
    for k in traced:
        bra[k] = ket[k]
    out = [ket[k] for k in keep] + [bra[k] for k in keep]
    spec = "".join(ket) + "".join(bra) + "->" + "".join(out)
    kdim = int(np.prod([dims[k] for k in keep])) if keep else 1
    return np.einsum(spec, t).reshape(kdim, kdim)


def pauli_matrix(label):
    """Dense matrix of a Pauli string such as ``"XIZ"``."""
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, PAULI[ch])
    return out


def pauli_index(label):
    idx = 0
    for ch in label:
        idx = 4 * idx + PAULI_LETTERS.index(ch)
    return idx


def pauli_labels(m):
    """All ``4**m`` Pauli strings in kernel index order."""
    return ["".join(p) for p in product(PAULI_LETTERS, repeat=m)]


def _check_label(label, m):
    if len(label) != m or any(ch not in PAULI_LETTERS for ch in label):
        raise DimensionError(f"Pauli string {label!r} does not fit a {m}-site register")


def all_pauli_expectations(rho):
    """Real expectations of every Pauli string, indexed as :func:`pauli_labels`."""
    rho = _square(rho)
    m = n_sites(rho.shape[0])
    vals = kernels.pauli_expectations(rho, m)
    resid = np.abs(vals.imag).max()
    if resid > 1e-10:
        raise NotHermitianError(resid, 1e-10)
    return vals.real


def pauli_expectation(rho, label):
    """``Tr(rho P)`` for a single Pauli string ``P``."""
    rho = _square(rho)
    m = n_sites(rho.shape[0])
    _check_label(label, m)
    x = np.arange(2 ** m)
    xm = zm = ny = 0
    for j, ch in enumerate(label):
        bit = 1 << (m - 1 - j)
        if ch in "XY":
            xm |= bit
        if ch in "YZ":
            zm |= bit
        ny += ch == "Y"
    signs = 1.0 - 2.0 * kernels._popcount_parity(x & zm, m)
    val = (1j ** ny) * np.sum(rho[x, x ^ xm] * signs)
    if abs(val.imag) > 1e-10:
        raise NotHermitianError(abs(val.imag), 1e-10)
    return float(val.real)


def from_pauli_coefficients(coeffs, m, psd_tol=PSD_TOL):
    """Density matrix ``2**-m * sum_P c_P P`` from Pauli expectations.

    Parameters
    ----------
    coeffs : mapping of str to float, or ndarray
        Either ``{"XX": 0.3, ...}`` with missing strings taken as zero,
        or a full length ``4**m`` array in :func:`pauli_labels` order.
        The identity coefficient must be 1.
    m : int
        Number of sites.

    Raises
    ------
    NotPSDError
        If the reconstruction has an eigenvalue below ``-psd_tol``, which
        means the supplied correlators are not mutually consistent.
    """
    if isinstance(coeffs, dict):
        vec = np.zeros(4 ** m)
        for label, c in coeffs.items():
            _check_label(label, m)
            vec[pauli_index(label)] = c
    else:
        vec = np.asarray(coeffs, dtype=float)
        if vec.shape != (4 ** m,):
            raise DimensionError(f"expected {4 ** m} coefficients, got {vec.shape}")
    if abs(vec[0] - 1.0) > 1e-12:
        raise ValueError(f"identity coefficient must be 1, got {vec[0]!r}")
    rho = kernels.pauli_assemble(vec, m) / 2 ** m
    rho = 0.5 * (rho + rho.conj().T)
    lam_min = np.linalg.eigvalsh(rho)[0]
    if lam_min < -psd_tol:
        raise NotPSDError(lam_min, psd_tol, "inconsistent Pauli coefficients")
    return rho
