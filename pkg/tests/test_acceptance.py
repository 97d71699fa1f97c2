"""Acceptance criteria, each checked at its stated tolerance.

Every test prints exactly one ``criterion N: PASS|FAIL ...`` line (also
collected into the end-of-run summary) and then asserts the verdict.
Runtimes are wall-clock on the machine running the suite.
"""
import time

import numpy as np
import pytest

from thermolens.exact_ising import build_pair_rdm, correlator_table, magnetization_z, xx_correlator, zz_correlator
from thermolens.hamiltonians import SpinChain, build_dense, classical_block_marginal, gibbs_dense
from thermolens.mps_thermal import block_rdm, expectation, pauli_block_expectations, thermal_state
from thermolens.qstate import all_pauli_expectations, fidelity, partial_trace, pauli_labels, trace_distance
from thermolens.thermometry import (
    MPSBackend,
    fidelity_derivative_h,
    intensive_fidelity,
    optimize_local_beta,
)

from conftest import ACCEPTANCE_LINES, random_density, random_unitary

BETA_GRID = np.geomspace(0.1, 1000, 40)
H_GRID = np.linspace(0, 2, 80)


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_optimized_fidelity_floor():
    t0 = time.perf_counter()
    f = np.array([[optimize_local_beta(b, h).f_opt for h in H_GRID] for b in BETA_GRID])
    elapsed = time.perf_counter() - t0
    ib, ih = np.unravel_index(np.argmin(f), f.shape)
    fmin, hmin = f[ib, ih], H_GRID[ih]
    ok = 0.96 <= fmin <= 0.99 and 0.45 <= hmin <= 0.75 and elapsed < 120
    report(1, ok, f"min F_opt = {fmin:.5f} at h = {hmin:.4f}, beta = {BETA_GRID[ib]:.4g}; "
                  f"runtime {elapsed:.1f} s (target < 120 s)")


def test_criterion_2_intensive_fidelity_structure():
    hot = [intensive_fidelity(b, h) for b in (1e-3, 1e-2, 0.05, 0.1) for h in [*H_GRID, 10.0]]
    betas = np.concatenate([[1e-3, 1e-2], BETA_GRID])
    edges = [intensive_fidelity(b, h) for b in betas for h in (0.01, 10.0)]
    at100 = np.array([intensive_fidelity(100.0, h) for h in H_GRID])
    ok = min(hot) >= 0.999 and min(edges) >= 0.99 and at100.min() < 0.95
    report(2, ok, f"min F(beta <= 0.1) = {min(hot):.6f} (>= 0.999); min F(h in {{0.01, 10}}) = "
                  f"{min(edges):.6f} (>= 0.99); min over h at beta = 100: {at100.min():.4f} at "
                  f"h = {H_GRID[np.argmin(at100)]:.3f} (< 0.95)")


def test_criterion_3_criticality_sensitivity():
    hs = np.linspace(0, 2, 201)
    d500 = np.array([fidelity_derivative_h(500.0, h).value for h in hs])
    d50 = np.array([fidelity_derivative_h(50.0, h).value for h in hs])
    arg = hs[np.argmax(d500)]
    ok = 0.9 <= arg <= 1.0 and d500.max() > d50.max()
    report(3, ok, f"argmax dF/dh at beta = 500: h = {arg:.3f}; peak {d500.max():.4f} vs beta = 50 peak "
                  f"{d50.max():.4f}")


def test_criterion_4_local_temperature_regimes():
    small = [b for b in np.concatenate([[0.01, 0.05, 0.2], BETA_GRID]) if b <= 0.2]
    rel = max(abs(optimize_local_beta(b, h).beta_local - b) / b for b in small for h in H_GRID)
    b1000 = optimize_local_beta(1000.0, 0.8).beta_local
    b2000 = optimize_local_beta(2000.0, 0.8).beta_local
    sat = abs(b1000 - b2000) / b1000
    res = [optimize_local_beta(b, 0.8) for b in BETA_GRID]
    viol = [(r.beta, r.beta_local) for r in res if r.beta_local < r.beta * (1 - 1e-4)]
    worst = max(viol, key=lambda v: (v[0] - v[1]) / v[0]) if viol else None
    ok_classical = rel <= 0.05
    ok_sat = sat <= 0.01
    ok_order = not viol
    detail = (f"classical max |dbeta|/beta = {rel:.4f} (<= 0.05) {'ok' if ok_classical else 'FAIL'}; "
              f"saturation {sat:.2e} (<= 0.01) {'ok' if ok_sat else 'FAIL'}; "
              f"beta_local >= beta at h = 0.8: {len(viol)}/{len(res)} grid points violate beyond optimizer tol")
    if worst:
        detail += (f", worst beta = {worst[0]:.4g} -> beta_local = {worst[1]:.4g} "
                   f"(local temperature above the global one, beta_local < beta)")
    report(4, ok_classical and ok_sat and ok_order, detail)


@pytest.mark.slow
def test_criterion_5_oracle_equivalence(ed_bank):
    hs = (0.25, 0.5, 1.0, 1.5)
    betas = (1.0, 5.0, 10.0)
    ns = (8, 10, 12, 14)
    t0 = time.perf_counter()
    lib = {(b, h): build_pair_rdm(b, h).rho for b in betas for h in hs}
    lib_seconds = time.perf_counter() - t0
    dist = {(b, h, n): trace_distance(lib[b, h], ed_bank.center_pair(n, h, b)) for b in betas for h in hs for n in ns}
    ed_seconds = sum(ed_bank.seconds[(n, h)] for n in ns for h in hs)
    worst14 = max(dist[b, h, 14] for b in betas for h in hs)
    not_decreasing = [
        (b, h, [dist[b, h, n] for n in ns])
        for b in betas for h in hs
        if not all(dist[b, h, a] > dist[b, h, c] for a, c in zip(ns, ns[1:]))
    ]
    elapsed = lib_seconds + ed_seconds
    ok_acc = worst14 <= 2e-2
    ok_mono = not not_decreasing
    ok_time = elapsed < 60
    detail = f"max n = 14 distance {worst14:.2e} (<= 2e-2) {'ok' if ok_acc else 'FAIL'}; strict decrease in n "
    if ok_mono:
        detail += "ok"
    else:
        parts = [f"(beta={b:g}, h={h:g}: " + ", ".join(f"{d:.1e}" for d in ds) + ")" for b, h, ds in not_decreasing]
        floor = max(max(ds) for _, _, ds in not_decreasing)
        detail += f"FAIL at {len(not_decreasing)} points, all distances <= {floor:.1e} (round-off floor): " + " ".join(parts)
    detail += (f"; runtime {elapsed:.0f} s = library {lib_seconds:.2f} s + exact diagonalization "
               f"{ed_seconds:.0f} s (target < 60 s) {'ok' if ok_time else 'FAIL'}")
    report(5, ok_acc and ok_mono and ok_time, detail)


def test_criterion_6_mps_correctness():
    chain = SpinChain(8, 0.8)
    exact = gibbs_dense(build_dense(chain), 4.0)
    t0 = time.perf_counter()
    err = trace_distance(block_rdm(thermal_state(chain, 4.0, max_bond=64, dt=0.01), 8), exact)
    err_half = trace_distance(block_rdm(thermal_state(chain, 4.0, max_bond=64, dt=0.005), 8), exact)
    elapsed = time.perf_counter() - t0
    ratio = err / err_half
    ok = err < 1e-5 and 3 <= ratio <= 5 and elapsed < 60
    report(6, ok, f"trace distance {err:.2e} at dt = 0.01 (< 1e-5); dt halving ratio {ratio:.3f} (in [3, 5]); "
                  f"runtime {elapsed:.1f} s (target < 60 s)")


def test_criterion_7_thermodynamic_limit_emulation():
    t0 = time.perf_counter()
    st = thermal_state(SpinChain(50, 0.8), 10.0, max_bond=15)
    i = 24
    xx = expectation(st, {i: "X", i + 1: "X"})
    zz = expectation(st, {i: "Z", i + 1: "Z"})
    mz = expectation(st, {i: "Z"})
    elapsed = time.perf_counter() - t0
    t = correlator_table(10.0, 0.8, 1)
    dev = {"xx": abs(xx - xx_correlator(t, 1)), "zz": abs(zz - zz_correlator(t, 1)), "mz": abs(mz - magnetization_z(t))}
    ok = max(dev.values()) <= 1e-3 and elapsed < 300
    report(7, ok, ", ".join(f"|d{k}| = {v:.1e}" for k, v in dev.items()) + f" (<= 1e-3); runtime {elapsed:.1f} s "
                  "(target < 300 s)")


def first_interior_minimum(hs, vals):
    """First interior local minimum of a sampled curve, refined by a parabola
    through the bracketing samples."""
    for i in range(1, len(vals) - 1):
        if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]:
            a, b, c = vals[i - 1], vals[i], vals[i + 1]
            step = hs[i + 1] - hs[i]
            denom = a - 2 * b + c
            return hs[i] + (0.5 * step * (a - c) / denom if denom > 0 else 0.0)
    return float("nan")


@pytest.mark.slow
def test_criterion_8_block_size_trend():
    hs = np.linspace(0, 2, 20)
    ms = (2, 3, 4, 5, 6)
    t0 = time.perf_counter()
    beta_local = np.empty((len(ms), len(hs)))
    for j, h in enumerate(hs):
        backend = MPSBackend()
        for i, m in enumerate(ms):
            beta_local[i, j] = optimize_local_beta(15.0, h, m, backend).beta_local
    elapsed = time.perf_counter() - t0
    gap = np.abs(beta_local - 15.0)
    bad_h = [hs[j] for j in range(len(hs)) if np.any(np.diff(gap[:, j]) > 0)]
    argmins = [first_interior_minimum(hs, beta_local[i]) for i in range(len(ms))]
    steps = np.diff(argmins)
    toward = np.sign(1.0 - argmins[0])
    monotone = bool(np.all(steps * toward >= 0)) and abs(argmins[-1] - 1) < abs(argmins[0] - 1)
    ok = not bad_h and monotone and elapsed < 1800
    report(8, ok, f"|beta_local - beta| non-increasing in m at {len(hs) - len(bad_h)}/{len(hs)} fields; "
                  f"argmin_h beta_local for m = 2..6: " + ", ".join(f"{a:.4f}" for a in argmins)
                  + f" ({'monotone toward 1' if monotone else 'not monotone toward 1'}); "
                  f"runtime {elapsed:.0f} s single-process (target < 1800 s with 8 jobs)")


def test_criterion_9_classical_exactness():
    worst, checked, empty = 0.0, 0, []
    for n in range(3, 11):
        ks = range(1, n - 2)
        if not ks:
            empty.append(n)
        for beta in (0.1, 1.0, 5.0):
            s = np.array([1.0, -1.0])
            w = np.exp(-beta * np.outer(s, s))
            ref = w / w.sum()
            for k in ks:
                worst = max(worst, float(np.abs(classical_block_marginal(n, beta, k) - ref).max()))
                checked += 1
    ok = worst <= 1e-12 and checked > 0
    report(9, ok, f"max deviation {worst:.1e} over {checked} (n, beta, k) cases (<= 1e-12); "
                  f"n = {empty} have no interior pair")


def test_criterion_10_symmetry_suite():
    rng = np.random.default_rng(1234)
    states = []
    for b in (0.3, 2.0, 20.0, 500.0):
        for h in (0.0, 0.4, 1.0, 1.7):
            states.append(("exact", build_pair_rdm(b, h).rho))
    backend = MPSBackend(n=20)
    for b, h in ((0.5, 0.3), (4.0, 1.0), (15.0, 1.6)):
        for m in (2, 3, 4):
            states.append(("mps", backend.reduced_state(b, h, m)))
    for n, b, h in ((6, 1.0, 0.5), (8, 7.0, 1.1), (9, 30.0, 0.2)):
        states.append(("ed", partial_trace(gibbs_dense(build_dense(SpinChain(n, h)), b), [n // 2 - 1, n // 2, n // 2 + 1])))
    sx = odd_y = 0.0
    for _, rho in states:
        m = int(np.log2(rho.shape[0]))
        c = all_pauli_expectations(rho)
        for lab, v in zip(pauli_labels(m), c):
            if lab.count("Y") % 2:
                odd_y = max(odd_y, abs(v))
            if lab.count("X") == 1 and set(lab) <= {"I", "X"}:
                sx = max(sx, abs(v))
    st = thermal_state(SpinChain(12, 0.9), 3.0)
    sx = max(sx, max(abs(expectation(st, {k: "X"})) for k in range(12)))
    odd_y = max(odd_y, max(abs(v) for lab, v in zip(pauli_labels(3), pauli_block_expectations(st, 3))
                           if lab.count("Y") % 2))
    sym = inv = 0.0
    for _ in range(100):
        rho = random_density(4, rng, rank=int(rng.integers(1, 5)))
        sigma = random_density(4, rng, rank=int(rng.integers(1, 5)))
        u = random_unitary(4, rng)
        f = fidelity(rho, sigma)
        sym = max(sym, abs(f - fidelity(sigma, rho)))
        inv = max(inv, abs(f - fidelity(u @ rho @ u.conj().T, u @ sigma @ u.conj().T)))
    ok = sx <= 1e-9 and odd_y <= 1e-9 and sym <= 1e-9 and inv <= 1e-9
    report(10, ok, f"max |<sigma_x>| = {sx:.1e}, max odd-Y correlator {odd_y:.1e} over {len(states) + 1} states "
                   f"(exact, mps, ed); fidelity symmetry {sym:.1e}, unitary invariance {inv:.1e} on 100 pairs")
