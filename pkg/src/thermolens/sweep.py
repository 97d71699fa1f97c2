"""Grid sweeps producing flat, self-describing datasets.

A sweep evaluates one *study* on every ``(beta, h)`` grid point.  The
point is the unit of work: all block sizes, separations or temperature
offsets requested for a point are computed together (so an MPS backend
evolves one state per point), and rows come back in grid order whatever
the number of workers.
"""
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import thermometry as thm
from .exact_ising import DEFAULT_QUAD_TOL, correlator_table, magnetization_z, xx_correlator, yy_correlator, zz_correlator
from .mps_thermal import DEFAULT_BOND_DIM, DEFAULT_CUTOFF, DEFAULT_DT

STUDIES = ("intensive", "local-temp", "dfdh", "dbeta-dh", "neighbor", "distant")

_BASE = ["study", "beta", "h", "m", "backend", "n", "bond_dim", "dt", "quad_tol"]
COLUMNS = {
    "intensive": _BASE + ["fidelity"],
    "local-temp": _BASE + [
        "tol", "bracket_lo", "bracket_hi", "beta_local", "f_opt", "f_at_global",
        "plateau_flag", "edge_flag", "evaluations", "truncation_error",
    ],
    "dfdh": _BASE + ["step", "dfdh", "richardson_diff", "flagged"],
    "dbeta-dh": _BASE + ["step", "dbeta_dh", "richardson_diff", "flagged"],
    "neighbor": _BASE + ["dbeta", "fidelity"],
    "distant": ["study", "beta", "h", "r", "quad_tol", "fidelity"],
}
CORRELATOR_COLUMNS = ["beta", "h", "r", "G_r", "xx", "yy", "zz", "mz"]


@dataclass(frozen=True)
class SweepOptions:
    """Everything besides the grid that a study needs; defaults match the library."""

    ms: tuple = (2,)
    rs: tuple = (1,)
    dbetas: tuple = (0.5,)
    backend: str = "auto"
    n: int = 50
    bond_dim: int = DEFAULT_BOND_DIM
    dt: float = DEFAULT_DT
    cutoff: float = DEFAULT_CUTOFF
    quad_tol: float = DEFAULT_QUAD_TOL
    tol: float = thm.DEFAULT_TOL
    bracket: tuple = None
    step: float = 1e-3
    extra: dict = field(default_factory=dict)

    def make_backend(self, m):
        kind = self.backend
        if kind == "auto":
            kind = "exact" if m == 2 else "mps"
        if kind == "exact":
            return thm.ExactBackend(self.quad_tol)
        if kind == "mps":
            return thm.MPSBackend(self.n, self.bond_dim, self.dt, self.cutoff)
        raise ValueError(f"unknown backend {self.backend!r}")

    def validate(self, study):
        if study not in STUDIES:
            raise ValueError(f"unknown study {study!r}; choose from {', '.join(STUDIES)}")
        if study == "distant":
            for r in self.rs:
                if r < 1 or r + 1 > 14:
                    raise ValueError(f"separation r={r} outside [1, 13]")
            return
        for m in self.ms:
            self.make_backend(m).check_block(m)
        if study == "neighbor" and any(d < 0 for d in self.dbetas):
            raise ValueError("dbeta values must be >= 0")


def _base_row(study, beta, h, m, backend):
    row = {"study": study, "beta": beta, "h": h, "m": m}
    row.update(backend.params())
    return row


def evaluate_point(study, beta, h, options):
    """All dataset rows for one grid point."""
    rows = []
    if study == "distant":
        for r in options.rs:
            f = thm.distant_pair_fidelity(beta, h, r, options.quad_tol)
            rows.append({"study": study, "beta": beta, "h": h, "r": r,
                         "quad_tol": options.quad_tol, "fidelity": f})
        return rows
    backends = {}
    for m in options.ms:
        key = "exact" if options.backend == "exact" or (options.backend == "auto" and m == 2) else "mps"
        if key not in backends:
            backends[key] = options.make_backend(m)
        be = backends[key]
        row = _base_row(study, beta, h, m, be)
        if study == "intensive":
            row["fidelity"] = thm.intensive_fidelity(beta, h, m, be)
            rows.append(row)
        elif study == "local-temp":
            res = thm.optimize_local_beta(beta, h, m, be, options.bracket, options.tol)
            lo, hi = options.bracket or thm.default_bracket(beta)
            row.update(
                tol=options.tol, bracket_lo=lo, bracket_hi=hi, beta_local=res.beta_local,
                f_opt=res.f_opt, f_at_global=res.f_at_global, plateau_flag=res.plateau_flag,
                edge_flag=res.edge_flag, evaluations=res.evaluations,
                truncation_error=be.truncation_error(beta, h),
            )
            rows.append(row)
        elif study in ("dfdh", "dbeta-dh"):
            if study == "dfdh":
                d = thm.fidelity_derivative_h(beta, h, m, be, options.step)
            else:
                d = thm.local_beta_derivative_h(beta, h, m, be, options.step)
            row["step"] = options.step
            row["dfdh" if study == "dfdh" else "dbeta_dh"] = d.value
            row.update(richardson_diff=d.richardson_diff, flagged=d.flagged)
            rows.append(row)
        elif study == "neighbor":
            for db in options.dbetas:
                r = dict(row)
                r["dbeta"] = db
                r["fidelity"] = thm.neighbor_fidelity(beta, db, h, m, be)
                rows.append(r)
    return rows


def _task(args):
    return evaluate_point(*args)


def run_sweep(study, betas, hs, options, jobs=1, progress=None):
    """Yield rows for every grid point in ``(beta, h)`` order.

    With ``jobs > 1`` points are farmed out to a process pool; rows are
    still yielded in grid order.
    """
    options.validate(study)
    tasks = [(study, float(b), float(h), options) for b in betas for h in hs]
    total = len(tasks)
    if jobs <= 1 or total <= 1:
        results = map(_task, tasks)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=jobs)
        results = pool.map(_task, tasks)
    try:
        for k, rows in enumerate(results, 1):
            if progress:
                progress(k, total, tasks[k - 1][1], tasks[k - 1][2])
            yield from rows
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)


def correlator_rows(betas, hs, r_max, quad_tol=DEFAULT_QUAD_TOL):
    """``G_r`` and spin correlators for ``-r_max <= r <= r_max`` at each point.

    Spin correlators are defined for ``r >= 1`` and left empty otherwise.
    """
    for beta in betas:
        for h in hs:
            table = correlator_table(beta, h, r_max, quad_tol)
            mz = magnetization_z(table)
            for r in range(-r_max, r_max + 1):
                row = {"beta": float(beta), "h": float(h), "r": r, "G_r": table.g(r),
                       "xx": "", "yy": "", "zz": "", "mz": mz}
                if r >= 1:
                    row.update(xx=xx_correlator(table, r), yy=yy_correlator(table, r),
                               zz=zz_correlator(table, r))
                yield row


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


class DatasetWriter:
    """Streams rows as CSV (header first) or JSON lines, flushing each row."""

    def __init__(self, fh, columns, fmt="csv"):
        if fmt not in ("csv", "jsonl"):
            raise ValueError(f"unknown format {fmt!r}")
        self.fh = fh
        self.columns = list(columns)
        self.fmt = fmt
        self.count = 0
        if fmt == "csv":
            self._csv = csv.writer(fh, lineterminator="\n")
            self._csv.writerow(self.columns)
            fh.flush()

    def write(self, row):
        if self.fmt == "csv":
            self._csv.writerow([_cell(row.get(c, "")) for c in self.columns])
        else:
            self.fh.write(json.dumps({c: row.get(c, "") for c in self.columns}) + "\n")
        self.fh.flush()
        self.count += 1


def stderr_progress(k, total, beta, h):
    print(f"[{k}/{total}] beta={beta:g} h={h:g}", file=sys.stderr, flush=True)
