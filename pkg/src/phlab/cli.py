"""Command-line entry point: ``phlab <subcommand> [flags]``.

Every run writes its artifacts into ``--out`` (default ``$PHLAB_OUTPUT_DIR`` or
``./phlab-output``) and finishes with ``manifest.json`` listing the flags, the
master seed and a sha256 digest of each artifact.  Exit status is 0 on
success, 1 on a runtime error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import dynamics as dyn
from . import hyperbolic_times as ht
from . import measures as ms
from .config import RunManifest, load_config, utc_timestamp
from .errors import PhlabError
from .experiments import ExperimentConfig, ht_frequency_vs_ell, stability_sweep
from .pliss import PlissParams, brute_force_pliss, classical_pliss_indices, pliss_like_indices

OUTPUT_ENV = "PHLAB_OUTPUT_DIR"


# -- helpers ----------------------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _read_sequence(source: str) -> np.ndarray:
    text = sys.stdin.read() if source == "-" else Path(source).read_text()
    return np.array(_floats(text))


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(out: Path, name: str, text: str, manifest: RunManifest) -> Path:
    path = out / name
    path.write_text(text)
    manifest.add_output(path)
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _measure_csv(mu: ms.GridMeasure, spec_digest: str) -> str:
    """Row-major weights, one grid row per line, after a one-line header."""
    g, d = mu.resolution, mu.dim
    lines = [f"# resolution={g} d={d} spec={spec_digest}"]
    for row in mu.weights.reshape(-1, g):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _spec_digest(spec: dyn.MapSpec) -> str:
    import hashlib

    return hashlib.sha256(json.dumps(spec.describe(), sort_keys=True).encode()).hexdigest()[:16]


def _spec_from_args(args) -> dyn.MapSpec:
    matrix = dyn.parse_matrix(args.matrix) if args.matrix else dyn.DEFAULT_MATRIX
    shape = tuple(_floats(args.shape)) if args.shape else ()
    return dyn.MapSpec(args.family, matrix, args.epsilon, shape, args.check)


def _resolve_seed(args) -> int:
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy % (2**63))
    return args.seed


def _x0(args, d, rng):
    if args.x0:
        return dyn.torus_point(_floats(args.x0))
    return rng.random(d)


# -- subcommands --------------------------------------------------------------------


def cmd_pliss(args, out, manifest):
    a = _read_sequence(args.input)
    if args.mode == "oracle":
        idx = [int(i) for i in brute_force_pliss(a, args.gamma, args.tol)]
        payload = {"indices": idx, "m": len(idx), "theta": None, "N": int(a.size)}
    elif args.mode == "classical":
        c = float(np.max(a)) if args.c is None else args.c
        res = classical_pliss_indices(a, c, args.gamma, checked=not args.unchecked, tol=args.tol)
        payload = res.as_dict()
    else:
        if args.Gamma is None or args.lower_bound is None:
            raise SystemExit(_usage_error(args, "--Gamma and --lower-bound are required in 'like' mode"))
        params = PlissParams(args.lower_bound, args.gamma, args.Gamma, args.kappa)
        res = pliss_like_indices(a, params, checked=not args.unchecked, tol=args.tol)
        payload = res.as_dict()
    text = _dump_json(payload)
    _write(out, "pliss.json", text, manifest)
    sys.stdout.write(text)
    return 0


def cmd_orbit(args, out, manifest):
    spec = _spec_from_args(args)
    rng = np.random.default_rng(_resolve_seed(args))
    x0 = _x0(args, spec.dim, rng)
    seg = dyn.forward_orbit(spec, x0, args.steps)
    cols = ["k"] + [f"x{i}" for i in range(spec.dim)]
    _write(out, "orbit.csv", _csv_text(cols, [[k, *map(repr, map(float, p))] for k, p in enumerate(seg)]), manifest)
    count = args.steps // args.ell
    summary = {"spec": spec.describe(), "x0": [float(v) for v in x0], "steps": args.steps, "ell": args.ell}
    if count >= 1:
        rates = dyn.block_rates_along(spec, seg[: count * args.ell + 1], args.ell)
        _write(out, "rates.csv", _csv_text(["i", "a_i"], [[i + 1, repr(float(v))] for i, v in enumerate(rates)]), manifest)
        summary.update(blocks=count, mean_rate=float(np.mean(rates)), min_rate=float(np.min(rates)))
    text = _dump_json(summary)
    _write(out, "orbit.json", text, manifest)
    sys.stdout.write(text)
    return 0


def cmd_lyapunov(args, out, manifest):
    spec = _spec_from_args(args)
    rng = np.random.default_rng(_resolve_seed(args))
    x0 = _x0(args, spec.dim, rng)
    est = dyn.lyapunov_estimate(spec, x0, args.steps, tol=args.tol)
    payload = {"spec": spec.describe(), "x0": [float(v) for v in x0], **est.as_dict()}
    if spec.family is dyn.Family.LINEAR:
        payload["eigen_reference"] = float(math.log(spec.moduli[1]))
    text = _dump_json(payload)
    _write(out, "lyapunov.json", text, manifest)
    sys.stdout.write(text)
    return 0


def cmd_hts(args, out, manifest):
    spec = _spec_from_args(args)
    seed = _resolve_seed(args)
    config = ExperimentConfig(
        family=spec.family.value,
        matrix=spec.matrix,
        shape=spec.shape,
        sweep=(spec.epsilon,),
        ensemble=args.ensemble,
        ells=tuple(args.ells),
        ht_horizon=args.horizon,
        block_depth=args.depth,
        block_samples=args.samples,
        sigma=args.sigma,
        sigma_fraction=args.sigma_fraction,
        seed=seed,
    )
    rows = ht_frequency_vs_ell(config, epsilon=spec.epsilon)
    header = ["ell", "mean_frequency", "p05_frequency", "block_fraction", "block_half_width", "block_depth", "sigma", "sigma_ok"]
    body = [[_fmt(r[k]) for k in header] for r in rows]
    text = _csv_text(header, body)
    _write(out, "hts.csv", text, manifest)
    sys.stdout.write(text)
    return 0


def cmd_measure(args, out, manifest):
    spec = _spec_from_args(args)
    rng = np.random.default_rng(_resolve_seed(args))
    x0 = _x0(args, spec.dim, rng)
    if args.mode == "birkhoff":
        mu = ms.birkhoff_measure(spec, x0, args.steps, args.resolution)
    else:
        disk = ms.UnstableDisk.segment(spec, x0, args.disk_length, args.disk_samples)
        mu = ms.push_forward_disk_measure(spec, disk, args.steps, args.resolution, budget=args.budget)
    uniform = ms.GridMeasure.uniform(args.resolution, spec.dim)
    w1 = ms.w1_bracket(mu, uniform)
    _write(out, "measure.csv", _measure_csv(mu, _spec_digest(spec)), manifest)
    summary = {
        "spec": spec.describe(),
        "mode": args.mode,
        "x0": [float(v) for v in x0],
        "steps": args.steps,
        "resolution": args.resolution,
        "w1_to_uniform": float(w1.value),
        "w1_bracket": [float(w1.lower), float(w1.upper)],
        "grid_digest": mu.digest(),
    }
    text = _dump_json(summary)
    _write(out, "measure.json", text, manifest)
    sys.stdout.write(text)
    return 0


def cmd_stability(args, out, manifest):
    config = load_config(args.config)
    if args.seed is not None:
        config = ExperimentConfig(**{**config.__dict__, "seed": args.seed})
    manifest.master_seed = config.seed
    report = stability_sweep(config)
    _write(out, "report.json", report.to_json(), manifest)
    spec_digest = _spec_digest(config.spec(0.0))
    for eps, mu in sorted(report.measures.items()):
        _write(out, f"measure_eps_{eps:g}.csv", _measure_csv(mu, spec_digest), manifest)
    header = ["epsilon", "w1", "noise", "count", "stray_fraction", "ht_frequency", "min_exponent", "error"]
    body = [[_fmt(getattr(r, k)) for k in header] for r in report.rows]
    text = _csv_text(header, body)
    _write(out, "stability.csv", text, manifest)
    sys.stdout.write(text)
    return 0 if report.ok else 1


# -- parser ----------------------------------------------------------------------------


def _add_map_flags(p):
    p.add_argument("--family", default="LinearAutomorphism",
                   help="LinearAutomorphism, DerivedFromAnosov or SkewProductShear")
    p.add_argument("--matrix", default=None, help='integer matrix "a,b,c;d,e,f;g,h,i"')
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--shape", default=None, help="auxiliary shape parameters, comma separated")
    p.add_argument("--check", default="auto",
                   choices=["auto", "mostly_expanding", "partially_hyperbolic", "none"])
    p.add_argument("--x0", default=None, help="initial point, comma separated (default: random)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./phlab-output)")
    common.add_argument("--seed", type=int, default=None, help="master seed (default: drawn and recorded)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pliss", parents=[common], help="good indices of a sequence")
    p.add_argument("input", nargs="?", default="-", help="file with whitespace/comma separated values, '-' for stdin")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--Gamma", type=float, default=None)
    p.add_argument("--lower-bound", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None, help="default: smallest admissible value")
    p.add_argument("--c", type=float, default=None, help="upper bound for classical mode (default: max)")
    p.add_argument("--mode", choices=["like", "classical", "oracle"], default="like")
    p.add_argument("--tol", type=float, default=0.0)
    p.add_argument("--unchecked", action="store_true", help="skip hypothesis checks (no guarantee)")
    p.set_defaults(func=cmd_pliss)

    p = sub.add_parser("orbit", parents=[common], help="orbit points and block rates")
    _add_map_flags(p)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--ell", type=int, default=1)
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("lyapunov", parents=[common], help="minimum center exponent")
    _add_map_flags(p)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--ell", type=int, default=1, help=argparse.SUPPRESS)
    p.add_argument("--tol", type=float, default=None, help="fail when the N vs N/2 band exceeds this")
    p.set_defaults(func=cmd_lyapunov)

    p = sub.add_parser("hts", parents=[common], help="hyperbolic-time frequency and block fraction per ell")
    _add_map_flags(p)
    p.add_argument("--sigma", type=float, default=None, help="default: from the exponent floor")
    p.add_argument("--sigma-fraction", type=float, default=0.5)
    p.add_argument("--ell", dest="ells", type=_int_list, default=[1, 2, 4, 8], help="block lengths, comma separated")
    p.add_argument("--horizon", type=int, default=500)
    p.add_argument("--depth", type=int, default=64)
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--ensemble", type=int, default=64)
    p.set_defaults(func=cmd_hts)

    p = sub.add_parser("measure", parents=[common], help="Birkhoff or disk push-forward grid measure")
    _add_map_flags(p)
    p.add_argument("--mode", choices=["birkhoff", "disk"], default="birkhoff")
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--disk-length", type=float, default=0.5)
    p.add_argument("--disk-samples", type=int, default=256)
    p.add_argument("--budget", type=int, default=1_000_000)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("stability", parents=[common], help="perturbation sweep from a config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_stability)
    return parser


def _usage_error(args, message):
    sys.stderr.write(f"phlab {args.command}: error: {message}\n")
    return 2


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage to stderr
        return int(exc.code or 0)
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "phlab-output")
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    manifest = RunManifest(args.command, {}, args.seed, utc_timestamp())
    try:
        out.mkdir(parents=True, exist_ok=True)
        code = args.func(args, out, manifest)
    except SystemExit as exc:
        return int(exc.code)
    except (PhlabError, ValueError, OSError) as exc:
        sys.stderr.write(f"phlab {args.command}: {type(exc).__name__}: {exc}\n")
        code = 1
        if not out.is_dir():
            return code
    flags["seed"] = args.seed
    manifest.flags = flags
    if manifest.master_seed is None:
        manifest.master_seed = args.seed
    manifest.exit_code = code
    manifest.write(out)
    return code


def main(argv=None) -> int:
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
