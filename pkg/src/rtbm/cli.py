"""Command-line surface: fit, evaluate, condition, sample, compare.

Subcommands
-----------
fit          train a model on a headerless CSV of samples
density      evaluate a model on a grid or at points from a CSV
conditional  write the child model for ``--on idx=value[,...]``
sample       draw seeded samples to CSV
mse          mean squared difference of two density CSV columns
student      generate Student-t samples / evaluate analytic conditionals

Exit codes: 0 success, 1 validation or data error, 2 usage error.
``--theta-eps``, ``--seed``, ``--restarts`` and ``--max-evals`` fall back
to the environment variables RTBM_THETA_EPS, RTBM_SEED, RTBM_RESTARTS and
RTBM_MAX_EVALS when the flag is absent.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .density import condition_on, log_pdf_many
from .errors import RtbmError
from .fit import FitConfig, fit_density
from .model import load_model, save_model, validate
from .oracle import (StudentTParams, conditional_logpdf, sample_student,
                     student_conditional)
from .sampling import RNG_NAME, sample_visible
from .theta import DEFAULT_EPS, Lattice

ENV_PREFIX = "RTBM_"


def _env_default(name, cast, fallback):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    return cast(raw) if raw is not None else fallback


def conditional_mse(reference, candidate) -> float:
    """Mean squared difference of two aligned density-value arrays."""
    reference = np.asarray(reference, dtype=float).ravel()
    candidate = np.asarray(candidate, dtype=float).ravel()
    if reference.shape != candidate.shape or reference.size == 0:
        raise ValueError("reference and candidate must have equal nonzero length")
    return float(np.mean((reference - candidate) ** 2))


def _write_csv(path, rows):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            np.savetxt(fh, rows, delimiter=",", fmt="%.17g")
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _write_json(path, doc):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _read_csv(path, cols=None):
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    if cols is not None:
        data = data[:, cols]
    return data


def _parse_grid(spec):
    """Parse 'lo:hi:nodes[,lo:hi:nodes...]' into per-dimension axes."""
    axes = []
    for part in spec.split(","):
        pieces = part.split(":")
        if len(pieces) != 3:
            raise ValueError(f"bad grid component {part!r}, want lo:hi:nodes")
        lo, hi, nodes = float(pieces[0]), float(pieces[1]), int(pieces[2])
        if nodes < 2 or not lo < hi:
            raise ValueError(f"bad grid component {part!r}: need lo < hi, nodes >= 2")
        axes.append(np.linspace(lo, hi, nodes))
    return axes


def _grid_points(axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _parse_on(spec):
    """Parse 'idx=value[,idx=value...]' into (indices, values)."""
    indices, values = [], []
    for part in spec.split(","):
        if "=" not in part:
            raise ValueError(f"bad conditioning component {part!r}, want idx=value")
        idx, val = part.split("=", 1)
        indices.append(int(idx))
        values.append(float(val))
    return indices, np.array(values)


def _parse_cols(spec):
    return [int(c) for c in spec.split(",")]


def _parse_vector(spec):
    return np.array([float(x) for x in spec.split(",")])


def _parse_matrix(spec, n):
    vals = _parse_vector(spec)
    if vals.size != n * n:
        raise ValueError(f"expected {n * n} row-major entries, got {vals.size}")
    return vals.reshape(n, n)


def _load_valid_model(path):
    params = load_model(path)
    report = validate(params)
    if not report.valid:
        raise RtbmError(f"model {path} is invalid: {report}")
    return params


def _eval_points(args, width, what="model"):
    if args.grid and args.points_csv:
        raise ValueError("give either --grid or --points-csv, not both")
    if args.grid:
        axes = _parse_grid(args.grid)
        if len(axes) != width:
            raise ValueError(f"grid has {len(axes)} dimensions, {what} needs {width}")
        return _grid_points(axes)
    if args.points_csv:
        cols = _parse_cols(args.points_cols) if args.points_cols else None
        pts = _read_csv(args.points_csv, cols)
        if pts.shape[1] != width:
            raise ValueError(
                f"points have width {pts.shape[1]}, {what} needs {width}")
        return pts
    raise ValueError("one of --grid or --points-csv is required")


def _cmd_fit(args):
    data = _read_csv(args.data)
    config = FitConfig(
        n_h=args.nh, restarts=args.restarts, population=args.population,
        sigma0=args.sigma0, max_evals=args.max_evals, seed=args.seed,
        theta_eps=args.theta_eps, lattice=Lattice(args.lattice),
        standardize=args.standardize)
    start = time.time()
    result = fit_density(data, config)
    wall = time.time() - start
    save_model(result.params, args.out)
    trace_path = args.trace or args.out + ".trace.csv"
    _write_csv(trace_path, [(e, f) for e, f in result.trace])
    meta_path = args.meta or args.out + ".meta.json"
    _write_json(meta_path, {
        "command": "fit",
        "data": args.data,
        "rows": int(data.shape[0]),
        "nll": result.nll,
        "evals": result.evals,
        "wall_time_s": wall,
        "rng": RNG_NAME,
        "config": {
            "n_h": config.n_h, "restarts": config.restarts,
            "population": config.population, "sigma0": config.sigma0,
            "max_evals": config.max_evals, "seed": config.seed,
            "theta_eps": config.theta_eps, "lattice": config.lattice.value,
            "standardize": config.standardize,
        },
    })
    print(f"nll {result.nll:.6f}")
    print(f"model {args.out}")
    return 0


def _cmd_density(args):
    params = _load_valid_model(args.model)
    pts = _eval_points(args, params.n_v)
    logp = log_pdf_many(params, pts, eps=args.theta_eps)
    _write_csv(args.out, np.column_stack([pts, np.exp(logp), logp]))
    return 0


def _cmd_conditional(args):
    params = _load_valid_model(args.model)
    indices, values = _parse_on(args.on)
    child, free = condition_on(params, indices, values)
    save_model(child, args.out)
    print(f"child over coordinates {free} -> {args.out}")
    return 0


def _cmd_sample(args):
    params = _load_valid_model(args.model)
    samples = sample_visible(params, args.count, args.seed, eps=args.theta_eps)
    _write_csv(args.out, samples)
    if args.meta:
        _write_json(args.meta, {
            "command": "sample", "model": args.model, "count": args.count,
            "seed": args.seed, "theta_eps": args.theta_eps, "rng": RNG_NAME,
        })
    return 0


def _cmd_mse(args):
    ref = _read_csv(args.ref)
    cand = _read_csv(args.cand)
    col = args.density_col
    ref_col = ref[:, col] if col is not None else ref[:, -2]
    cand_col = cand[:, col] if col is not None else cand[:, -2]
    print(f"{conditional_mse(ref_col, cand_col):.12g}")
    return 0


def _student_params(args):
    mu = _parse_vector(args.mu)
    sigma = _parse_matrix(args.sigma, mu.size)
    return StudentTParams(mu=mu, sigma=sigma, nu=args.nu)


def _cmd_student_sample(args):
    tp = _student_params(args)
    _write_csv(args.out, sample_student(tp, args.count, args.seed))
    return 0


def _cmd_student_conditional(args):
    tp = _student_params(args)
    indices, values = _parse_on(args.on)
    free = [i for i in range(tp.p) if i not in indices]
    if not free:
        raise ValueError("cannot condition on every coordinate")
    order = indices + free
    perm_tp = StudentTParams(mu=tp.mu[order],
                             sigma=tp.sigma[np.ix_(order, order)], nu=tp.nu)
    ct = student_conditional(perm_tp, len(indices), values)
    pts = _eval_points(args, len(free), what="conditional")
    logp = np.atleast_1d(conditional_logpdf(ct, pts))
    _write_csv(args.out, np.column_stack([pts, np.exp(logp), logp]))
    return 0


def _add_eval_point_flags(p):
    p.add_argument("--grid", help="per-dimension lo:hi:nodes, comma separated")
    p.add_argument("--points-csv", help="headerless CSV of evaluation points")
    p.add_argument("--points-cols",
                   help="comma-separated column indices to take from --points-csv")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that accepts values like '-10:10:401' after a flag."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._negative_number_matcher = re.compile(r"^-\d")


def build_parser():
    parser = _Parser(
        prog="rtbm",
        description="Riemann-Theta Boltzmann machine densities and conditionals")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    theta_eps = _env_default("theta-eps", float, DEFAULT_EPS)
    seed = _env_default("seed", int, 0)

    p = sub.add_parser("fit", help="train a model on CSV samples")
    p.add_argument("--data", required=True)
    p.add_argument("--nh", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--restarts", type=int,
                   default=_env_default("restarts", int, 5))
    p.add_argument("--max-evals", type=int,
                   default=_env_default("max-evals", int, 50000))
    p.add_argument("--population", type=int, default=None)
    p.add_argument("--sigma0", type=float, default=0.3)
    p.add_argument("--theta-eps", type=float, default=theta_eps)
    p.add_argument("--lattice", choices=[l.value for l in Lattice],
                   default=Lattice.FULL.value)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--trace", help="trace CSV path (default <out>.trace.csv)")
    p.add_argument("--meta", help="metadata JSON path (default <out>.meta.json)")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("density", help="evaluate a model density")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--theta-eps", type=float, default=theta_eps)
    _add_eval_point_flags(p)
    p.set_defaults(func=_cmd_density)

    p = sub.add_parser("conditional", help="derive a child model")
    p.add_argument("--model", required=True)
    p.add_argument("--on", required=True, metavar="IDX=VAL[,IDX=VAL...]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_conditional)

    p = sub.add_parser("sample", help="draw seeded samples")
    p.add_argument("--model", required=True)
    p.add_argument("--count", required=True, type=int)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out", required=True)
    p.add_argument("--theta-eps", type=float, default=theta_eps)
    p.add_argument("--meta", help="optional run metadata JSON path")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("mse", help="mean squared difference of two density CSVs")
    p.add_argument("--ref", required=True)
    p.add_argument("--cand", required=True)
    p.add_argument("--density-col", type=int, default=None,
                   help="column index (default: second-to-last)")
    p.set_defaults(func=_cmd_mse)

    p = sub.add_parser("student", help="Student-t reference utilities")
    ssub = p.add_subparsers(dest="action", required=True)
    ps = ssub.add_parser("sample", help="draw Student-t samples")
    ps.add_argument("--mu", required=True)
    ps.add_argument("--sigma", required=True, help="row-major entries")
    ps.add_argument("--nu", required=True, type=float)
    ps.add_argument("--count", required=True, type=int)
    ps.add_argument("--seed", type=int, default=seed)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=_cmd_student_sample)
    pc = ssub.add_parser("conditional",
                         help="evaluate the analytic conditional density")
    pc.add_argument("--mu", required=True)
    pc.add_argument("--sigma", required=True, help="row-major entries")
    pc.add_argument("--nu", required=True, type=float)
    pc.add_argument("--on", required=True, metavar="IDX=VAL[,IDX=VAL...]")
    pc.add_argument("--out", required=True)
    _add_eval_point_flags(pc)
    pc.set_defaults(func=_cmd_student_conditional)

    return parser


def run_command(argv) -> int:
    """Run one CLI invocation; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles usage errors and --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (RtbmError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
