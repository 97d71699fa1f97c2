"""Thermal states of long chains as purified matrix product states.

A mixed state ``rho`` on ``n`` spins is stored as a pure state on spins
plus one ancilla per site; ``rho = Tr_anc |psi><psi|``.  Each site tensor
has axes ``(left, physical, ancilla, right)`` and the chain is an open
tensor train with dimension-1 edge bonds.

Starting from the infinite-temperature purification (each spin maximally
entangled with its ancilla) the state is evolved in imaginary time with a
second-order even/odd Trotter splitting of ``exp(-beta H / 2)`` acting on
the physical legs only, which leaves ``Tr_anc |psi><psi| ~ exp(-beta H)``.

Checkpoint file layout (all little-endian)::

    magic       8 bytes   b"TLPMPS01"
    n           uint32
    max_bond    uint32    (0 = unbounded)
    beta        float64
    trunc_err   float64
    center      int32     (-1 = not canonical)
    shapes      n x 4 uint32
    payload     complex128 per tensor entry, C order, site by site
"""
import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CapacityError
from .qstate import PAULI, from_pauli_coefficients

DEFAULT_DT = 0.02
DT_MAX = 0.05
DEFAULT_BOND_DIM = 15
DEFAULT_CUTOFF = 1e-12
DEFAULT_TRUNCATION_BUDGET = 1e-6
PAULI_BLOCK_MAX = 6
CONTRACT_BLOCK_MAX = 10

_MAGIC = b"TLPMPS01"


@dataclass(frozen=True)
class TrotterSchedule:
    """Imaginary-time schedule: ``steps`` steps of ``dt = beta / (2 steps)``."""

    beta: float
    steps: int
    dt_max: float = DT_MAX

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta!r}")
        if self.steps < 0 or (self.steps == 0 and self.beta > 0):
            raise ValueError(f"need a positive step count for beta={self.beta}")
        if self.dt > self.dt_max:
            raise ValueError(f"time step {self.dt:.4g} exceeds dt_max={self.dt_max}")

    @property
    def dt(self):
        return self.beta / (2 * self.steps) if self.steps else 0.0

    @classmethod
    def from_step(cls, beta, dt=DEFAULT_DT, dt_max=DT_MAX):
        """Smallest number of steps whose step size does not exceed ``dt``."""
        steps = math.ceil(beta / (2 * dt) - 1e-9) if beta > 0 else 0
        return cls(float(beta), steps, dt_max)


class PurifiedMPS:
    """Purification of a thermal state as an open tensor train.

    Attributes
    ----------
    tensors : list of ndarray
        Site tensors with axes ``(left, physical, ancilla, right)``.
    beta : float
        Inverse temperature reached so far.
    max_bond : int or None
        Bond-dimension cap used during evolution.
    center : int or None
        Orthogonality center, if the train is in mixed canonical form.
    truncation_error : float
        Accumulated discarded weight from all SVD truncations.
    """

    def __init__(self, tensors, beta=0.0, max_bond=None, center=None, truncation_error=0.0):
        self.tensors = list(tensors)
        self.beta = float(beta)
        self.max_bond = max_bond
        self.center = center
        self.truncation_error = float(truncation_error)
        self.warnings = []

    @property
    def n(self):
        return len(self.tensors)

    @property
    def bond_dims(self):
        return [t.shape[3] for t in self.tensors[:-1]]

    def copy(self):
        out = PurifiedMPS(
            [t.copy() for t in self.tensors], self.beta, self.max_bond, self.center, self.truncation_error
        )
        out.warnings = list(self.warnings)
        return out

    def __repr__(self):
        return (
            f"PurifiedMPS(n={self.n}, beta={self.beta:g}, bond_dims<={max(self.bond_dims, default=1)}, "
            f"truncation_error={self.truncation_error:.2e})"
        )


def init_infinite_temperature(n):
    """Product of maximally entangled spin-ancilla pairs; traces to ``I / 2**n``."""
    if n < 2:
        raise ValueError(f"need n >= 2 sites, got {n}")
    site = (np.eye(2) / np.sqrt(2.0)).reshape(1, 2, 2, 1)
    return PurifiedMPS([site.copy() for _ in range(n)], beta=0.0, center=0)


def _bond_gates(chain, tau):
    gates = []
    for hb in chain.bond_terms():
        w, v = np.linalg.eigh(hb)
        gates.append(((v * np.exp(-tau * w)) @ v.T).reshape(2, 2, 2, 2))
    return gates


def _svd(mat):
    try:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


def _shift_center(state, target):
    t = state.tensors
    c = state.center
    while c < target:
        l, _, _, r = t[c].shape
        q, rr = np.linalg.qr(t[c].reshape(l * 4, r))
        t[c] = q.reshape(l, 2, 2, q.shape[1])
        t[c + 1] = np.tensordot(rr, t[c + 1], axes=(1, 0))
        c += 1
    while c > target:
        l, _, _, r = t[c].shape
        q, rr = np.linalg.qr(t[c].reshape(l, 4 * r).T)
        t[c] = q.T.reshape(q.shape[1], 2, 2, r)
        t[c - 1] = np.tensordot(t[c - 1], rr.T, axes=(3, 0))
        c -= 1
    state.center = c


def _apply_gate(state, i, gate, max_bond, cutoff, moving_right):
    t = state.tensors
    l = t[i].shape[0]
    r = t[i + 1].shape[3]
    theta = np.tensordot(t[i], t[i + 1], axes=(3, 0))  # l s1 a1 s2 a2 r
    theta = np.tensordot(gate, theta, axes=([2, 3], [1, 3]))  # s1' s2' l a1 a2 r
    theta = theta.transpose(2, 0, 3, 1, 4, 5).reshape(l * 4, 4 * r)
    u, s, vh = _svd(theta)
    total = np.dot(s, s)
    keep = int(np.count_nonzero(s > cutoff * s[0]))
    if max_bond is not None:
        keep = min(keep, max_bond)
    keep = max(keep, 1)
    state.truncation_error += float(np.dot(s[keep:], s[keep:]) / total)
    s = s[:keep] / np.linalg.norm(s[:keep])
    if moving_right:
        t[i] = u[:, :keep].reshape(l, 2, 2, keep)
        t[i + 1] = (s[:, None] * vh[:keep]).reshape(keep, 2, 2, r)
        state.center = i + 1
    else:
        t[i] = (u[:, :keep] * s).reshape(l, 2, 2, keep)
        t[i + 1] = vh[:keep].reshape(keep, 2, 2, r)
        state.center = i


def _apply_layer(state, gates, parity, max_bond, cutoff, moving_right):
    bonds = list(range(parity, state.n - 1, 2))
    if not moving_right:
        bonds.reverse()
    for i in bonds:
        _shift_center(state, i if moving_right else i + 1)
        _apply_gate(state, i, gates[i], max_bond, cutoff, moving_right)


def evolve_to_beta(
    state,
    chain,
    schedule,
    max_bond=DEFAULT_BOND_DIM,
    cutoff=DEFAULT_CUTOFF,
    truncation_budget=DEFAULT_TRUNCATION_BUDGET,
):
    """Evolve a purification in imaginary time up to ``schedule.beta``.

    The input is not modified.  A state already at ``0 < beta_0 <
    schedule.beta`` is continued with steps no longer than
    ``schedule.dt``.  Every two-site gate is followed by an SVD truncated
    to ``max_bond`` singular values (and a relative cutoff); discarded
    weight accumulates on the returned state, and exceeding
    ``truncation_budget`` appends a warning to ``state.warnings``.

    Parameters
    ----------
    state : PurifiedMPS
    chain : SpinChain
        Must have ``chain.n == state.n``.
    schedule : TrotterSchedule
    max_bond : int or None
        Bond-dimension cap ``D``.
    """
    if chain.n != state.n:
        raise ValueError(f"chain has {chain.n} sites but the state has {state.n}")
    if schedule.beta < state.beta - 1e-12:
        raise ValueError(f"state is already at beta={state.beta}, beyond target {schedule.beta}")
    out = state.copy()
    out.max_bond = max_bond
    if out.center is None:
        out.center = 0
        _canonicalize(out)
    remaining = schedule.beta - state.beta
    if remaining <= 1e-14:
        return out
    if state.beta == 0.0:
        steps, dt = schedule.steps, schedule.dt
    else:
        sub = TrotterSchedule.from_step(remaining, schedule.dt or DEFAULT_DT, schedule.dt_max)
        steps, dt = sub.steps, sub.dt
    full = _bond_gates(chain, dt)
    half = _bond_gates(chain, dt / 2)
    # e^{-dt H} ~ e^{-dt/2 A} e^{-dt B} e^{-dt/2 A}; inner half layers fused.
    layers = [(half, 0)]
    for k in range(steps):
        layers.append((full, 1))
        layers.append((half if k == steps - 1 else full, 0))
    moving_right = out.center <= out.n // 2
    for gates, parity in layers:
        _apply_layer(out, gates, parity, max_bond, cutoff, moving_right)
        moving_right = not moving_right
    out.beta = float(schedule.beta)
    if out.truncation_error > truncation_budget:
        msg = (
            f"accumulated truncation error {out.truncation_error:.2e} exceeds budget "
            f"{truncation_budget:.1e} (beta={out.beta:g}, D={max_bond})"
        )
        out.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return out


def thermal_state(chain, beta, max_bond=DEFAULT_BOND_DIM, dt=DEFAULT_DT, cutoff=DEFAULT_CUTOFF):
    """Convenience wrapper: evolve the infinite-temperature state of ``chain`` to ``beta``."""
    return evolve_to_beta(
        init_infinite_temperature(chain.n), chain, TrotterSchedule.from_step(beta, dt), max_bond, cutoff
    )


def _canonicalize(state):
    state.center = state.n - 1
    _shift_center(state, 0)
    nrm = np.linalg.norm(state.tensors[0])
    state.tensors[0] = state.tensors[0] / nrm


def _step_right(env, a, op=None):
    # env[l_ket, l_bra] -> env[r_ket, r_bra]
    t = np.tensordot(env, a, axes=(0, 0))  # l_bra s a r
    if op is not None:
        t = np.tensordot(op, t, axes=(1, 1)).transpose(1, 0, 2, 3)
    return np.tensordot(t, a.conj(), axes=([0, 1, 2], [0, 1, 2]))


def _step_left(env, a):
    t = np.tensordot(a, env, axes=(3, 0))  # l s a r_bra
    return np.tensordot(t, a.conj(), axes=([1, 2, 3], [1, 2, 3]))


def _left_env(state, stop):
    env = np.ones((1, 1))
    for k in range(stop):
        env = _step_right(env, state.tensors[k])
    return env


def _right_env(state, start):
    env = np.ones((1, 1))
    for k in range(state.n - 1, start - 1, -1):
        env = _step_left(env, state.tensors[k])
    return env


def expectation(state, ops):
    """``Tr(rho O_1 ... O_n) / Tr(rho)`` for single-site operators.

    Parameters
    ----------
    ops : mapping of int to ndarray
        Site index to 2x2 operator; other sites carry the identity.  Pauli
        letters ``"X"``, ``"Y"``, ``"Z"`` are accepted in place of arrays.
    """
    mats = {}
    for k, op in ops.items():
        if not 0 <= k < state.n:
            raise IndexError(f"site {k} out of range for {state.n} sites")
        mats[k] = PAULI[op] if isinstance(op, str) else np.asarray(op)
    env = np.ones((1, 1))
    norm = np.ones((1, 1))
    for k, a in enumerate(state.tensors):
        env = _step_right(env, a, mats.get(k))
        norm = _step_right(norm, a)
    val = env[0, 0] / norm[0, 0]
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}; operators not Hermitian?")
    return float(val.real)


def energy(state, chain):
    """Thermal energy ``<H>`` from cached left and right environments."""
    n = state.n
    lefts = [np.ones((1, 1))]
    for k in range(n):
        lefts.append(_step_right(lefts[-1], state.tensors[k]))
    rights = [np.ones((1, 1))]
    for k in range(n - 1, -1, -1):
        rights.append(_step_left(rights[-1], state.tensors[k]))
    rights = rights[::-1]  # rights[k]: environment of sites >= k
    norm = lefts[n][0, 0]
    z = PAULI["Z"].real
    x = PAULI["X"].real
    e = 0.0
    for k in range(n):
        env = _step_right(lefts[k], state.tensors[k], z)
        e -= 0.5 * chain.h * np.vdot(rights[k + 1].conj(), env).real / norm
    for k in range(n - 1):
        env = _step_right(lefts[k], state.tensors[k], x)
        env = _step_right(env, state.tensors[k + 1], x)
        e += 0.5 * chain.coupling * np.vdot(rights[k + 2].conj(), env).real / norm
    return float(e)


def _block_position(state, m, first_site):
    if first_site is None:
        first_site = (state.n - m) // 2
    if first_site < 0 or first_site + m > state.n:
        raise IndexError(f"block [{first_site}, {first_site + m}) outside a {state.n}-site chain")
    return first_site


def block_rdm(state, m, first_site=None, method="contract"):
    """Reduced density matrix of ``m`` contiguous sites.

    Parameters
    ----------
    m : int
        Block size.
    first_site : int, optional
        Leftmost block site; by default the block is centered.
    method : {"contract", "pauli"}
        ``"contract"`` contracts the environments and the block tensors
        directly (``m <= 10``).  ``"pauli"`` evaluates all ``4**m`` Pauli
        string expectations with transfer matrices and rebuilds the state
        from them (``m <= 6``).
    """
    if m < 1:
        raise ValueError("block size must be positive")
    first = _block_position(state, m, first_site)
    if method == "pauli":
        if m > PAULI_BLOCK_MAX:
            raise CapacityError(f"Pauli reconstruction limited to m <= {PAULI_BLOCK_MAX} (4**m strings)")
        return _block_rdm_pauli(state, m, first)
    if method != "contract":
        raise ValueError(f"unknown method {method!r}")
    if m > CONTRACT_BLOCK_MAX:
        raise CapacityError(f"dense block output limited to m <= {CONTRACT_BLOCK_MAX}")
    left = _left_env(state, first)
    right = _right_env(state, first + m)
    t = left[None, None]  # ket, bra, l_ket, l_bra
    for k in range(first, first + m):
        a = state.tensors[k]
        kd, bd = t.shape[:2]
        u = np.tensordot(t, a, axes=(2, 0))  # K B l_bra s anc r
        u = np.tensordot(u, a.conj(), axes=([2, 4], [0, 2]))  # K B s r s' r'
        u = u.transpose(0, 2, 1, 4, 3, 5)
        t = u.reshape(kd * 2, bd * 2, u.shape[4], u.shape[5])
    rho = np.tensordot(t, right, axes=([2, 3], [0, 1]))
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def pauli_block_expectations(state, m, first_site=None):
    """All ``4**m`` Pauli expectations on a block, in :func:`qstate.pauli_labels` order."""
    first = _block_position(state, m, first_site)
    ops = np.stack([PAULI[c] for c in "IXYZ"])
    env = _left_env(state, first)[None]
    for k in range(first, first + m):
        a = state.tensors[k]
        env = np.einsum("plm,lsar,qts,mtaz->pqrz", env, a, ops, a.conj(), optimize=True)
        env = env.reshape(-1, env.shape[2], env.shape[3])
    right = _right_env(state, first + m)
    vals = np.einsum("prz,rz->p", env, right)
    vals = vals / vals[0]
    resid = np.abs(vals.imag).max()
    if resid > 1e-9:
        raise ValueError(f"Pauli expectations carry imaginary residue {resid:.3e}")
    return vals.real


def _block_rdm_pauli(state, m, first):
    coeffs = pauli_block_expectations(state, m, first)
    coeffs[0] = 1.0
    return from_pauli_coefficients(coeffs, m)


def save_checkpoint(state, path):
    """Write ``state`` in the binary checkpoint format described above."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IIddi",
                state.n,
                state.max_bond or 0,
                state.beta,
                state.truncation_error,
                -1 if state.center is None else state.center,
            )
        )
        for t in state.tensors:
            fh.write(struct.pack("<4I", *t.shape))
        for t in state.tensors:
            fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path} is not a purified-MPS checkpoint")
        n, max_bond, beta, trunc, center = struct.unpack("<IIddi", fh.read(struct.calcsize("<IIddi")))
        shapes = [struct.unpack("<4I", fh.read(16)) for _ in range(n)]
        tensors = []
        for shape in shapes:
            count = int(np.prod(shape))
            data = np.frombuffer(fh.read(16 * count), dtype="<c16", count=count)
            t = data.reshape(shape)
            tensors.append(t.real.copy() if not np.any(t.imag) else t.astype(complex))
    return PurifiedMPS(tensors, beta, max_bond or None, None if center < 0 else center, trunc)
