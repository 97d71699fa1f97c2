"""Command-line front end.

::

    thermolens correlators --beta 10 --h 0.5 --r-max 3
    thermolens sweep --study intensive --m 2 --beta-log 0.1:100:60 --h 0:2:80
    thermolens reproduce local-temp-vs-h --outdir results/

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""
import argparse
import contextlib
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__, kernels
from .errors import ThermolensError
from .exact_ising import DEFAULT_QUAD_TOL
from .mps_thermal import DEFAULT_BOND_DIM, DEFAULT_CUTOFF, DEFAULT_DT
from .sweep import (
    COLUMNS,
    CORRELATOR_COLUMNS,
    STUDIES,
    DatasetWriter,
    SweepOptions,
    correlator_rows,
    run_sweep,
    stderr_progress,
)
from .thermometry import DEFAULT_TOL

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

# Figure presets.  Grids not fixed by a caption are chosen to resolve the
# features of each figure.
PRESETS = {
    "fidelity-map": dict(study="intensive", ms=(2,), beta_log="0.1:100:60", h="0:2:80"),
    "dfdh": dict(study="dfdh", ms=(2,), beta="50,100,500", h="0:2:201"),
    "distant-pairs": dict(study="distant", rs=(3, 5, 7), beta="10", h="0:2:41"),
    "local-temp-vs-beta": dict(study="local-temp", ms=(2,), beta_log="0.1:1000:60", h="0.2,0.5,0.8,1,1.5"),
    "fopt-map": dict(study="local-temp", ms=(2,), beta_log="0.1:1000:40", h="0:2:80"),
    "dbetadh": dict(study="dbeta-dh", ms=(2,), beta="100,250,1000", h="0:2:201"),
    "neighbor-fid": dict(study="neighbor", ms=(2,), dbetas=(0.3, 0.5, 0.7), beta_log="0.1:100:60", h="0.1"),
    "local-temp-m-sweep": dict(study="local-temp", ms=(2, 3, 4, 5, 6), backend="mps", beta="1:30:30", h="0.8"),
    "local-temp-vs-h": dict(study="local-temp", ms=(2, 3, 4, 5, 6), backend="mps", beta="15", h="0:2:20"),
}


class UsageError(Exception):
    pass


def parse_grid(text, log=False):
    """``start:end:count`` (linear, or geometric with ``log``), a comma list, or one value."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise UsageError(f"grid {text!r} must look like start:end:count")
            start, end, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise UsageError(f"grid {text!r} needs a positive count")
            if count == 1:
                return np.array([start])
            if log:
                if start <= 0 or end <= 0:
                    raise UsageError(f"log grid {text!r} needs positive endpoints")
                return np.geomspace(start, end, count)
            return np.linspace(start, end, count)
        vals = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise UsageError(f"cannot parse grid {text!r}: {exc}") from None
    if vals.size == 0:
        raise UsageError("empty grid")
    if not np.all(np.isfinite(vals)):
        raise UsageError(f"grid {text!r} has non-finite values")
    return vals


def _int_list(text):
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise UsageError(f"expected a comma-separated number list, got {text!r}") from None


def _jobs_default():
    env = os.environ.get("THERMOLENS_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"THERMOLENS_JOBS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_grid(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--beta", help="inverse temperatures: start:end:count, list a,b,c or a value")
    g.add_argument("--beta-log", help="log-spaced inverse temperatures start:end:count")
    p.add_argument("--h", help="transverse fields: start:end:count, list or value")


def _add_output(p):
    p.add_argument("--output", "-o", help="output file (default: standard output)")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--config", help="flat key = value file; command-line flags take precedence")


def _add_numerics(p):
    p.add_argument("--m", default="2", help="block sizes, comma-separated (default 2)")
    p.add_argument("--r", default="1", help="pair separations for the distant study (default 1)")
    p.add_argument("--dbeta", default="0.5", help="beta offsets for the neighbor study (default 0.5)")
    p.add_argument("--backend", choices=("auto", "exact", "mps"), default="auto",
                   help="auto: exact for m = 2, MPS otherwise")
    p.add_argument("--n", type=int, default=50, help="MPS chain length (default 50)")
    p.add_argument("--bond-dim", type=int, default=DEFAULT_BOND_DIM)
    p.add_argument("--dt", type=float, default=DEFAULT_DT, help="imaginary-time step")
    p.add_argument("--cutoff", type=float, default=DEFAULT_CUTOFF, help="relative SVD cutoff")
    p.add_argument("--quad-tol", type=float, default=DEFAULT_QUAD_TOL)
    p.add_argument("--bracket", help="local-temperature search bracket lo:hi")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="optimizer relative tolerance")
    p.add_argument("--step", type=float, default=1e-3, help="finite-difference step in h")
    p.add_argument("--jobs", "-j", type=int, help="worker processes (default $THERMOLENS_JOBS or all cores)")
    p.add_argument("--quiet", "-q", action="store_true", help="no progress on stderr")


def build_parser():
    parser = _Parser(prog="thermolens", description="Local temperature of spin blocks in thermal Ising chains.")
    parser.add_argument("--version", action="version", version=f"thermolens {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("correlators", help="G_r and spin correlators of the infinite chain")
    _add_grid(p)
    p.add_argument("--r-max", type=int, default=3)
    p.add_argument("--quad-tol", type=float, default=DEFAULT_QUAD_TOL)
    _add_output(p)

    p = sub.add_parser("sweep", help="evaluate a study on a (beta, h) grid")
    p.add_argument("--study", choices=STUDIES, required=False)
    _add_grid(p)
    _add_numerics(p)
    _add_output(p)

    p = sub.add_parser("reproduce", help="run a figure preset and write dataset plus metadata")
    p.add_argument("figure", help=f"one of: {', '.join(PRESETS)}")
    p.add_argument("--outdir", default=".", help="directory for <figure>.csv and <figure>.json")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--jobs", "-j", type=int)
    p.add_argument("--quiet", "-q", action="store_true")
    return parser


def read_config(path):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        conf = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        typed = {}
        for key, value in conf.items():
            if key not in known or key in ("help", "config"):
                raise UsageError(f"unknown config key {key!r}")
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                typed[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                try:
                    typed[key] = action.type(value) if action.type else value
                except ValueError:
                    raise UsageError(f"bad value for config key {key!r}: {value!r}") from None
                if action.choices and typed[key] not in action.choices:
                    raise UsageError(f"config key {key!r} must be one of {list(action.choices)}")
        # The beta and beta-log options exclude each other across file and flags.
        flags = {a for a in argv if a.startswith("--")}
        if "--beta" in flags or "--beta-log" in flags:
            typed.pop("beta", None)
            typed.pop("beta_log", None)
        sub.set_defaults(**typed)
        args = parser.parse_args(argv)
    return args


def _grid_from(args):
    if args.beta is None and args.beta_log is None:
        raise UsageError("one of --beta or --beta-log is required")
    if args.beta is not None and args.beta_log is not None:
        raise UsageError("--beta and --beta-log are mutually exclusive")
    if args.h is None:
        raise UsageError("--h is required")
    betas = parse_grid(args.beta_log, log=True) if args.beta_log is not None else parse_grid(args.beta)
    hs = parse_grid(args.h)
    if np.any(betas < 0):
        raise UsageError("beta values must be >= 0")
    return betas, hs


def _options_from(args):
    bracket = None
    if args.bracket:
        try:
            lo, hi = (float(v) for v in args.bracket.split(":"))
        except ValueError:
            raise UsageError(f"--bracket must look like lo:hi, got {args.bracket!r}") from None
        if not 0 < lo < hi:
            raise UsageError(f"--bracket needs 0 < lo < hi, got {args.bracket!r}")
        bracket = (lo, hi)
    for name in ("dt", "quad_tol", "tol", "step", "cutoff"):
        if not getattr(args, name) > 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    if args.bond_dim < 1 or args.n < 2:
        raise UsageError("--bond-dim must be >= 1 and --n >= 2")
    return SweepOptions(
        ms=_int_list(args.m), rs=_int_list(args.r), dbetas=_float_list(args.dbeta),
        backend=args.backend, n=args.n, bond_dim=args.bond_dim, dt=args.dt, cutoff=args.cutoff,
        quad_tol=args.quad_tol, tol=args.tol, bracket=bracket, step=args.step,
    )


@contextlib.contextmanager
def _open_output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _jobs(args):
    if args.jobs is not None:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        return args.jobs
    return _jobs_default()


def _write_sweep(study, betas, hs, options, jobs, fh, fmt, quiet):
    writer = DatasetWriter(fh, COLUMNS[study], fmt)
    progress = None if quiet else stderr_progress
    for row in run_sweep(study, betas, hs, options, jobs, progress):
        writer.write(row)
    return writer.count


def cmd_correlators(args):
    betas, hs = _grid_from(args)
    if args.r_max < 0:
        raise UsageError("--r-max must be >= 0")
    if not args.quad_tol > 0:
        raise UsageError("--quad-tol must be positive")
    with _open_output(args.output) as fh:
        writer = DatasetWriter(fh, CORRELATOR_COLUMNS, args.format)
        for row in correlator_rows(betas, hs, args.r_max, args.quad_tol):
            writer.write(row)


def cmd_sweep(args):
    if args.study is None:
        raise UsageError("--study is required")
    betas, hs = _grid_from(args)
    options = _options_from(args)
    try:
        options.validate(args.study)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    jobs = _jobs(args)
    with _open_output(args.output) as fh:
        _write_sweep(args.study, betas, hs, options, jobs, fh, args.format, args.quiet)


def preset_grid(name):
    """``(study, betas, hs, options)`` for a figure preset."""
    if name not in PRESETS:
        raise UsageError(f"unknown figure {name!r}; choose from {', '.join(PRESETS)}")
    spec = dict(PRESETS[name])
    study = spec.pop("study")
    betas = parse_grid(spec.pop("beta_log"), log=True) if "beta_log" in spec else parse_grid(spec.pop("beta"))
    hs = parse_grid(spec.pop("h"))
    return study, betas, hs, SweepOptions(**spec)


def cmd_reproduce(args):
    study, betas, hs, options = preset_grid(args.figure)
    jobs = _jobs(args)
    os.makedirs(args.outdir, exist_ok=True)
    ext = "csv" if args.format == "csv" else "jsonl"
    data_path = os.path.join(args.outdir, f"{args.figure}.{ext}")
    t0 = time.perf_counter()
    with open(data_path, "w", newline="") as fh:
        rows = _write_sweep(study, betas, hs, options, jobs, fh, args.format, args.quiet)
    meta = {
        "figure": args.figure,
        "study": study,
        "dataset": os.path.basename(data_path),
        "rows": rows,
        "parameters": {
            "betas": betas.tolist(),
            "hs": hs.tolist(),
            "ms": list(options.ms),
            "rs": list(options.rs),
            "dbetas": list(options.dbetas),
            "backend": options.backend,
            "n": options.n,
            "bond_dim": options.bond_dim,
            "dt": options.dt,
            "cutoff": options.cutoff,
            "quad_tol": options.quad_tol,
            "tol": options.tol,
            "step": options.step,
        },
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "jobs": jobs,
        "runtime_seconds": round(time.perf_counter() - t0, 3),
    }
    with open(os.path.join(args.outdir, f"{args.figure}.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


COMMANDS = {"correlators": cmd_correlators, "sweep": cmd_sweep, "reproduce": cmd_reproduce}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"thermolens: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ThermolensError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"thermolens: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"thermolens: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("thermolens: interrupted; rows written so far were flushed", file=sys.stderr)
        return 130
    except BrokenPipeError:
        return EXIT_OK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
