"""Hot numerical kernels with a numba path and a pure-numpy fallback.

Set ``THERMOLENS_NUMBA=0`` in the environment before import to force the
numpy implementations (also used automatically when numba is missing).
Both variants of every kernel stay importable as ``<name>_numba`` and
``<name>_numpy`` so they can be cross-checked and benchmarked.

Pauli strings are indexed in base 4, one digit per site with the first
site as the most significant digit: 0 = I, 1 = X, 2 = Y, 3 = Z.  The
computational basis puts site 0 on the most significant bit.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("THERMOLENS_NUMBA", "1").lower() not in (
    "0",
    "false",
    "no",
    "off",
)
BACKEND = "numba" if USE_NUMBA else "numpy"


def _njit(func):
    if numba is None:
        return func
    return numba.njit(cache=True)(func)


# Gauss-Kronrod 7/15 nodes on [-1, 1]; Gauss nodes are the odd-indexed ones.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full 15-point rule laid out left to right.
GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GK_GAUSS_W = np.zeros(15)
GK_GAUSS_W[1:7:2] = _WG[:3]
GK_GAUSS_W[7] = _WG[3]
GK_GAUSS_W[9:15:2] = _WG[2::-1]

# Below this dispersion value tanh(b*w/2)/w uses its series expansion.
OMEGA_SERIES_CUTOFF = 1e-8


# ---------------------------------------------------------------------------
# Fermionic two-point integrand, integrated panel by panel
# ---------------------------------------------------------------------------

def _gk15_panels_numba(a, b, beta, h, rs):
    npan = a.shape[0]
    nr = rs.shape[0]
    vals = np.zeros((npan, nr))
    errs = np.zeros(npan)
    gauss = np.zeros(nr)
    inv_pi = 1.0 / np.pi
    for p in range(npan):
        half = 0.5 * (b[p] - a[p])
        mid = 0.5 * (b[p] + a[p])
        for r in range(nr):
            gauss[r] = 0.0
        for k in range(15):
            phi = mid + half * GK_NODES[k]
            c = np.cos(phi)
            s = np.sin(phi)
            omega = np.sqrt(s * s + (h - c) * (h - c))
            if omega < OMEGA_SERIES_CUTOFF:
                x = 0.5 * beta * omega
                t = 0.5 * beta * (1.0 - x * x / 3.0)
            else:
                t = np.tanh(0.5 * beta * omega) / omega
            for r in range(nr):
                f = inv_pi * t * (s * np.sin(phi * rs[r]) - (c - h) * np.cos(phi * rs[r]))
                vals[p, r] += GK_KRONROD_W[k] * f
                gauss[r] += GK_GAUSS_W[k] * f
        e = 0.0
        for r in range(nr):
            vals[p, r] *= half
            d = abs(vals[p, r] - half * gauss[r])
            if d > e:
                e = d
        errs[p] = e
    return vals, errs


def gk15_panels_numpy(a, b, beta, h, rs):
    """Kronrod-15 integrals of the G_r integrand on panels ``[a_i, b_i]``.

    Parameters
    ----------
    a, b : ndarray, shape (P,)
        Panel endpoints.
    beta, h : float
        Inverse temperature and transverse field.
    rs : ndarray, shape (R,)
        Separations, passed as floats.

    Returns
    -------
    vals : ndarray, shape (P, R)
        Kronrod estimate per panel and separation.
    errs : ndarray, shape (P,)
        ``max_r |K - G|`` per panel (Kronrod minus embedded Gauss rule).
    """
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    phi = mid[:, None] + half[:, None] * GK_NODES[None, :]
    c = np.cos(phi)
    s = np.sin(phi)
    omega = np.sqrt(s * s + (h - c) ** 2)
    small = omega < OMEGA_SERIES_CUTOFF
    safe = np.where(small, 1.0, omega)
    x = 0.5 * beta * omega
    t = np.where(small, 0.5 * beta * (1.0 - x * x / 3.0), np.tanh(x) / safe)
    pr = phi[:, :, None] * rs[None, None, :]
    f = (t / np.pi)[:, :, None] * (s[:, :, None] * np.sin(pr) - (c - h)[:, :, None] * np.cos(pr))
    kron = np.einsum("pkr,k->pr", f, GK_KRONROD_W) * half[:, None]
    gauss = np.einsum("pkr,k->pr", f, GK_GAUSS_W) * half[:, None]
    errs = np.abs(kron - gauss).max(axis=1) if rs.size else np.zeros(a.shape[0])
    return kron, errs


gk15_panels_numba = _njit(_gk15_panels_numba)


# ---------------------------------------------------------------------------
# Pauli-basis expansion and assembly
# ---------------------------------------------------------------------------

def pauli_masks(m):
    """Bit masks for all ``4**m`` Pauli strings on ``m`` sites.

    Returns ``(xmask, zmask, ny)``: bits flipped by the string, bits that
    pick up a sign, and the number of Y factors.
    """
    p = np.arange(4 ** m)
    xmask = np.zeros(4 ** m, dtype=np.int64)
    zmask = np.zeros(4 ** m, dtype=np.int64)
    ny = np.zeros(4 ** m, dtype=np.int64)
    for j in range(m):
        d = (p >> (2 * (m - 1 - j))) & 3
        bit = 1 << (m - 1 - j)
        xmask |= np.where((d == 1) | (d == 2), bit, 0)
        zmask |= np.where((d == 2) | (d == 3), bit, 0)
        ny += d == 2
    return xmask, zmask, ny


def _popcount_parity(v, nbits):
    par = np.zeros_like(v)
    for j in range(nbits):
        par ^= (v >> j) & 1
    return par


def _hadamard_signs(m):
    x = np.arange(2 ** m)
    return 1.0 - 2.0 * _popcount_parity(x[:, None] & x[None, :], m)


_I_POW = np.array([1.0, 1.0j, -1.0, -1.0j])


def pauli_expectations_numpy(rho, m):
    """``Tr(rho P)`` for every Pauli string ``P`` (complex, length ``4**m``)."""
    dim = 2 ** m
    x = np.arange(dim)
    rows = x[None, :] ^ x[:, None]  # rows[xm, x] = x ^ xm
    shifted = rho[x[None, :], rows]  # shifted[xm, x] = rho[x, x ^ xm]
    table = shifted @ _hadamard_signs(m).T  # table[xm, zm]
    xmask, zmask, ny = pauli_masks(m)
    return table[xmask, zmask] * _I_POW[ny % 4]


def pauli_assemble_numpy(coeffs, m):
    """``sum_P coeffs[P] * P`` as a dense ``2**m`` square matrix."""
    dim = 2 ** m
    xmask, zmask, ny = pauli_masks(m)
    c = np.zeros((dim, dim), dtype=complex)
    c[xmask, zmask] = coeffs * _I_POW[ny % 4]
    vals = c @ _hadamard_signs(m)  # vals[xm, x] = <x ^ xm| sum |x>
    x = np.arange(dim)
    out = np.zeros((dim, dim), dtype=complex)
    out[x[None, :] ^ x[:, None], x[None, :]] = vals
    return out


def _pauli_expectations_numba(rho, m):
    n_str = 4 ** m
    dim = 2 ** m
    out = np.zeros(n_str, dtype=np.complex128)
    for p in range(n_str):
        xm = 0
        zm = 0
        ny = 0
        for j in range(m):
            d = (p >> (2 * (m - 1 - j))) & 3
            bit = 1 << (m - 1 - j)
            if d == 1 or d == 2:
                xm |= bit
            if d == 2 or d == 3:
                zm |= bit
            if d == 2:
                ny += 1
        acc = 0.0 + 0.0j
        for x in range(dim):
            v = x & zm
            par = 0
            while v:
                par ^= 1
                v &= v - 1
            term = rho[x, x ^ xm]
            if par:
                acc -= term
            else:
                acc += term
        k = ny % 4
        if k == 1:
            acc = 1j * acc
        elif k == 2:
            acc = -acc
        elif k == 3:
            acc = -1j * acc
        out[p] = acc
    return out


def _pauli_assemble_numba(coeffs, m):
    n_str = 4 ** m
    dim = 2 ** m
    out = np.zeros((dim, dim), dtype=np.complex128)
    for p in range(n_str):
        c = coeffs[p]
        if c == 0:
            continue
        xm = 0
        zm = 0
        ny = 0
        for j in range(m):
            d = (p >> (2 * (m - 1 - j))) & 3
            bit = 1 << (m - 1 - j)
            if d == 1 or d == 2:
                xm |= bit
            if d == 2 or d == 3:
                zm |= bit
            if d == 2:
                ny += 1
        k = ny % 4
        phase = 1.0 + 0.0j
        if k == 1:
            phase = 1j
        elif k == 2:
            phase = -1.0 + 0.0j
        elif k == 3:
            phase = -1j
        cp = c * phase
        for x in range(dim):
            v = x & zm
            par = 0
            while v:
                par ^= 1
                v &= v - 1
            if par:
                out[x ^ xm, x] -= cp
            else:
                out[x ^ xm, x] += cp
    return out


pauli_expectations_numba = _njit(_pauli_expectations_numba)
pauli_assemble_numba = _njit(_pauli_assemble_numba)


def gk15_panels(a, b, beta, h, rs):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    rs = np.ascontiguousarray(rs, dtype=np.float64)
    if USE_NUMBA:
        return gk15_panels_numba(a, b, float(beta), float(h), rs)
    return gk15_panels_numpy(a, b, float(beta), float(h), rs)


def pauli_expectations(rho, m):
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    if USE_NUMBA:
        return pauli_expectations_numba(rho, int(m))
    return pauli_expectations_numpy(rho, int(m))


def pauli_assemble(coeffs, m):
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    if USE_NUMBA:
        return pauli_assemble_numba(coeffs, int(m))
    return pauli_assemble_numpy(coeffs, int(m))
