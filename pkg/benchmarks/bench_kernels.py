"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 20]

Both paths are called directly, so the THERMOLENS_NUMBA flag does not
matter here.  The first numba call (compilation or cache load) is done
before timing.
"""
import argparse
import time

import numpy as np

from thermolens import kernels
from thermolens.exact_ising import integrate_G


def _best(func, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        best = min(best, time.perf_counter() - t0)
    return best


def _random_state(m, rng):
    a = rng.normal(size=(2 ** m, 2 ** m)) + 1j * rng.normal(size=(2 ** m, 2 ** m))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def cases(rng):
    edges = np.linspace(0.0, np.pi, 2049)
    rs = np.arange(-7, 8, dtype=float)
    yield "gk15 2048 panels x 15 r", (
        lambda: kernels.gk15_panels_numba(edges[:-1], edges[1:], 500.0, 1.0, rs),
        lambda: kernels.gk15_panels_numpy(edges[:-1], edges[1:], 500.0, 1.0, rs),
    )
    for m in (2, 4, 6):
        rho = _random_state(m, rng)
        coeffs = kernels.pauli_expectations_numpy(rho, m)
        yield f"pauli expectations m={m}", (
            lambda rho=rho, m=m: kernels.pauli_expectations_numba(rho, m),
            lambda rho=rho, m=m: kernels.pauli_expectations_numpy(rho, m),
        )
        yield f"pauli assemble m={m}", (
            lambda c=coeffs, m=m: kernels.pauli_assemble_numba(c, m),
            lambda c=coeffs, m=m: kernels.pauli_assemble_numpy(c, m),
        )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(7)
    print(f"{'kernel':32s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, (fast, slow) in cases(rng):
        a, b = fast(), slow()
        # same numbers from both paths
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            assert np.allclose(x, y, atol=1e-12), name
        tn = _best(fast, args.repeat)
        tp = _best(slow, args.repeat)
        print(f"{name:32s} {1e3 * tn:11.3f} {1e3 * tp:11.3f} {tp / tn:8.1f}")
    # end-to-end: one adaptive G_r table at a near-critical low temperature point
    t0 = time.perf_counter()
    integrate_G(500.0, 1.0, np.arange(-7, 8), 1e-10)
    print(f"integrate_G(beta=500, h=1, |r|<=7) with {kernels.BACKEND} kernels: "
          f"{1e3 * (time.perf_counter() - t0):.1f} ms")


if __name__ == "__main__":
    main()
