"""Command-line workbench.

Exit codes: 0 success, 1 usage or input error, 2 numerical or convergence
failure, 3 ingest finished but dropped some tracks.
"""

import argparse
import csv
import io
import json
import os
import sys
import warnings

import numpy as np

from . import __version__
from ._seeding import as_generator
from .bridge import BridgeSpec, sample_bridges
from .circular import density_from_dict
from .diffusion import DiffusionModel, PathSample, simulate_euler, simulate_paths, transition_density
from .exceptions import ConvergenceError, DomainError, SingularityError
from .experiments import ExperimentConfig, run_experiment
from .inference import fit_mle, get_family, lr_test
from .ingest import ingest_tracks
from .jump import JumpModel, jump_transition_density, sample_jump_bridge, simulate_jump_paths
from .multisample import PRESETS, GroupedSample, LinearHypothesis, lr_test_linear
from .special import TWO_PI
from .toroidal import is_toroidal_spec, toroidal_from_dict

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_INGEST = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for numerical failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# input helpers


def _load_json(arg):
    if arg is None:
        return None
    if arg.lstrip().startswith("{"):
        return json.loads(arg)
    with open(arg) as fh:
        return json.load(fh)


def _density(args, required=True):
    spec = _load_json(args.density)
    if spec is None:
        if required:
            raise UsageError("--density is required")
        return None, None
    spec = dict(spec)
    sigma = spec.pop("sigma", None)
    if getattr(args, "sigma", None) is not None:
        sigma = args.sigma
    dens = toroidal_from_dict(spec) if is_toroidal_spec(spec) else density_from_dict(spec)
    return dens, sigma


def _floats(text, name):
    try:
        return np.array([float(v) for v in str(text).split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"{name} must be a comma-separated list of numbers") from None


def _points(text, name):
    # points separated by ';', coordinates by ','
    return np.array([_floats(chunk, name) for chunk in str(text).split(";") if chunk.strip()])


def _assignments(text, name):
    out = {}
    for item in str(text).split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise UsageError(f"{name} entries look like name=value")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise UsageError(f"{name}: {v!r} is not a number") from None
    return out


def read_paths(source, delta=None):
    """Paths from a CSV file: one path (``t,theta1..``) or many (``path,t,theta1..``)."""
    with open(source) as fh:
        text = fh.read()
    header = text.split("\n", 1)[0].strip().split(",")
    if header and header[0] == "path":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        groups = {}
        for r in rows:
            if r:
                groups.setdefault(r[0], []).append(",".join(r[1:]))
        head = ",".join(header[1:])
        return [PathSample.from_csv(head + "\n" + "\n".join(body) + "\n", delta) for body in groups.values()]
    return [PathSample.from_csv(text if "\n" in text else text + "\n", delta)]


# ---------------------------------------------------------------------------
# output helpers


class _Output:
    def __init__(self, args):
        self.target = args.out
        self.format = args.format

    def write_text(self, text):
        if self.target in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(self.target, "w", newline="") as fh:
                fh.write(text)

    def write_json(self, obj):
        self.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")

    def write_rows(self, header, rows, obj=None):
        if self.format == "json":
            self.write_json(obj if obj is not None else [dict(zip(header, r)) for r in rows])
            return
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
        self.write_text(buf.getvalue())


def _json_default(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _path_rows(arr, delta):
    header = ["path", "t"] + [f"theta{j + 1}" for j in range(arr.shape[2])]
    rows = [[i, delta * k, *map(float, arr[i, k])] for i in range(arr.shape[0]) for k in range(arr.shape[1])]
    return header, rows


def _emit_paths(out, arr, delta):
    if out.format == "json":
        out.write_json({"delta": delta, "paths": arr.tolist()})
    elif arr.shape[0] == 1:
        out.write_text(PathSample(delta, arr[0]).to_csv())
    else:
        out.write_rows(*_path_rows(arr, delta))


def _start(args, dens, rng, size):
    if args.theta0 is None:
        draw = dens.rvs(size=size, random_state=rng)
        return draw.reshape(size, -1)
    return np.broadcast_to(_floats(args.theta0, "--theta0").reshape(1, -1), (size, getattr(dens, "dim", 1)))


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args):
    dens, sigma = _density(args)
    if sigma is None:
        raise UsageError("--sigma (or a 'sigma' entry in the density JSON) is required")
    model = DiffusionModel(dens, sigma)
    rng = as_generator(args.seed)
    theta0 = _start(args, dens, rng, args.paths)
    if args.method == "exact":
        arr = np.stack([simulate_paths(model, theta0[i], args.n, args.delta, rng)[0] for i in range(args.paths)])
    else:
        arr = np.stack([simulate_euler(model, theta0[i], args.n, args.delta, args.substeps, rng)[0]
                        for i in range(args.paths)])
    _emit_paths(_Output(args), arr, args.delta)
    return EXIT_OK


def cmd_tpd(args):
    dens, sigma = _density(args)
    if sigma is None:
        raise UsageError("--sigma is required")
    src, dst = _points(args.source, "--from"), _points(args.to, "--to")
    if args.kernel == "jump":
        model = JumpModel(dens, sigma)
        vals = jump_transition_density(model, src[:, 0], dst[:, 0], args.t, log=args.log)
    else:
        model = DiffusionModel(dens, sigma)
        vals = transition_density(model, src, dst, args.t, log=args.log)
    vals = np.broadcast_to(vals, (max(len(src), len(dst)),))
    src = np.broadcast_to(src, (vals.size, src.shape[1]))
    dst = np.broadcast_to(dst, (vals.size, dst.shape[1]))
    name = "logpdf" if args.log else "pdf"
    header = [f"from{j + 1}" for j in range(src.shape[1])] + [f"to{j + 1}" for j in range(dst.shape[1])] + ["t", name]
    rows = [[*map(float, a), *map(float, b), float(args.t), float(v)] for a, b, v in zip(src, dst, vals)]
    _Output(args).write_rows(header, rows)
    return EXIT_OK


def _load_sample(args):
    paths = []
    for f in args.paths:
        paths += read_paths(f, args.delta)
    return paths


def _fit_table(res):
    names = res.family.names
    return ["parameter", "estimate", "standard_error"], [
        [n, float(v), float(s)] for n, v, s in zip(names, res.xi, res.standard_errors)]


def cmd_fit(args):
    paths = _load_sample(args)
    fixed = _assignments(args.fix, "--fix") if args.fix else None
    res = fit_mle(_family_arg(args), paths, kernel=args.kernel, fixed=fixed, n_starts=args.starts,
                  random_state=args.seed)
    out = _Output(args)
    if args.format == "json":
        out.write_json(res.to_dict())
    else:
        out.write_rows(*_fit_table(res))
    return EXIT_OK


def _family_arg(args):
    return get_family(args.family, args.components)


def cmd_test(args):
    paths = _load_sample(args)
    null = _assignments(args.null, "--null")
    res = lr_test(_family_arg(args), paths, null, kernel=args.kernel, random_state=args.seed)
    _emit_test(args, res)
    return EXIT_OK


def _emit_test(args, res):
    out = _Output(args)
    if args.format == "json":
        out.write_json(res.to_dict())
    else:
        out.write_rows(["statistic", "df", "p_value", "boundary"],
                       [[float(res.statistic), res.df, float(res.p_value), res.boundary]])


def cmd_ktest(args):
    manifest = _load_json(args.groups)
    base = os.path.dirname(os.path.abspath(args.groups)) if not args.groups.lstrip().startswith("{") else "."
    groups, labels = [], []
    for g in manifest["groups"]:
        paths = []
        for f in g["paths"]:
            paths += read_paths(os.path.join(base, f), args.delta)
        groups.append(paths)
        labels.append(g.get("label", f"group{len(labels) + 1}"))
    data = GroupedSample(groups, labels)
    if (args.preset is None) == (args.matrix is None):
        raise UsageError("give exactly one of --preset and --matrix")
    hyp = args.preset if args.preset else LinearHypothesis(np.loadtxt(args.matrix, delimiter=",", ndmin=2))
    res = lr_test_linear(_family_arg(args), data, hyp, args.kernel, random_state=args.seed)
    _emit_test(args, res)
    return EXIT_OK


def _bridge_times(args):
    if args.times is not None:
        return _floats(args.times, "--times")
    return args.horizon * np.arange(1, args.steps) / args.steps


def _emit_bridges(args, times, states, windings, extra=None):
    out = _Output(args)
    start, end = _floats(args.start, "--start"), _floats(args.end, "--end")
    p = start.size
    full_t = np.concatenate([[0.0], times, [args.horizon]])
    sidecar = {"seed": args.seed, "windings": [np.atleast_1d(k).tolist() for k in windings], **(extra or {})}
    if args.format == "json":
        out.write_json({**sidecar, "times": full_t.tolist(),
                        "draws": [np.vstack([start, s.reshape(-1, p), end]).tolist() for s in states]})
        return
    header = ["draw", "t"] + [f"theta{j + 1}" for j in range(p)]
    rows = []
    for d, s in enumerate(states):
        pts = np.vstack([np.mod(start, TWO_PI), s.reshape(-1, p), np.mod(end, TWO_PI)])
        rows += [[d, float(t), *map(float, x)] for t, x in zip(full_t, pts)]
    out.write_rows(header, rows)
    if args.out not in (None, "-"):
        with open(os.path.splitext(args.out)[0] + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=2, default=_json_default)
            fh.write("\n")


def cmd_bridge(args):
    dens, sigma = _density(args)
    if sigma is None:
        raise UsageError("--sigma is required")
    model = DiffusionModel(dens, sigma)
    times = _bridge_times(args)
    spec = BridgeSpec(model, _floats(args.start, "--start"), _floats(args.end, "--end"), args.horizon, times)
    draws = sample_bridges(spec, args.seed, args.draws)
    _emit_bridges(args, times, [d.states for d in draws], [d.winding for d in draws])
    return EXIT_OK


def cmd_jump(args):
    dens, sigma = _density(args)
    if sigma is None:
        raise UsageError("--sigma is required")
    model = JumpModel(dens, sigma)
    rng = as_generator(args.seed)
    if args.action == "simulate":
        if args.n is None:
            raise UsageError("jump simulate needs --n")
        theta0 = _start(args, dens, rng, args.paths)[:, 0]
        arr = np.stack([simulate_jump_paths(model, theta0[i], args.n, args.delta, rng, 1, args.mode)[0]
                        for i in range(args.paths)])
        _emit_paths(_Output(args), arr[..., None], args.delta)
        return EXIT_OK
    if args.start is None or args.end is None or args.horizon is None:
        raise UsageError("jump bridge needs --start, --end and --horizon")
    times = _bridge_times(args)
    start, end = float(_floats(args.start, "--start")[0]), float(_floats(args.end, "--end")[0])
    draws = [sample_jump_bridge(model, start, end, args.horizon, times, rng, args.sampler) for _ in range(args.draws)]
    _emit_bridges(args, times, [d.states for d in draws], [d.winding for d in draws],
                  {"proposals": [d.proposals for d in draws]})
    return EXIT_OK


def cmd_ingest(args):
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        report = ingest_tracks(args.input, args.max_missing, args.immobile_floor)
    out_dir = args.out if args.out not in (None, "-") else "."
    os.makedirs(out_dir, exist_ok=True)
    for p in report.paths:
        p.to_csv(os.path.join(out_dir, f"track_{p.labels['id']}.csv"))
    summary = report.to_dict()
    with open(os.path.join(out_dir, "ingest_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_INGEST if report.rejected else EXIT_OK


def cmd_experiment(args):
    cfg = _load_json(args.config)
    if args.replicates is not None:
        cfg["M"] = args.replicates
    if args.jobs is not None:
        cfg["n_jobs"] = args.jobs
    if args.seed is not None:
        cfg["base_seed"] = args.seed
    config = ExperimentConfig.from_dict(cfg)

    def progress(done, total):
        if done == total or done % max(1, total // 20) == 0:
            print(f"{config.experiment}: {done}/{total}", file=sys.stderr, flush=True)

    report = run_experiment(config, progress if args.progress else None)
    out_dir = args.out if args.out not in (None, "-") else "."
    written = report.write(out_dir, args.format)
    sys.stdout.write(report.table.to_csv(index=False))
    for w in written:
        print(f"wrote {w}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser():
    def global_flags(suppress):
        # the subcommand copies must not reset values given before the subcommand
        kw = {"default": argparse.SUPPRESS} if suppress else {}
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--seed", type=int, help="base random seed", **(kw or {"default": None}))
        g.add_argument("--out", help="output file (or directory for ingest/experiment)", **(kw or {"default": None}))
        g.add_argument("--format", choices=("csv", "json"), **(kw or {"default": "csv"}))
        g.add_argument("--density", help="density JSON file (or inline JSON)", **(kw or {"default": None}))
        return g

    common = global_flags(True)
    parser = _Parser(prog="torusdiff", description="Circular and toroidal diffusion workbench.",
                     parents=[global_flags(False)])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_args(p):
        p.add_argument("--sigma", type=float, default=None)

    def fit_args(p):
        p.add_argument("paths", nargs="+", help="path CSV files")
        p.add_argument("--family", default="von_mises",
                       choices=("uniform", "von_mises", "wrapped_cauchy", "von_mises_mixture"))
        p.add_argument("--components", type=int, default=2)
        p.add_argument("--kernel", choices=("diffusion", "jump"), default="diffusion")
        p.add_argument("--delta", type=float, default=None, help="override the spacing read from the files")
        p.add_argument("--starts", type=int, default=None)

    def bridge_args(p, required=True):
        p.add_argument("--start", required=required, help="theta_0 (comma-separated for p > 1)")
        p.add_argument("--end", required=required, help="theta_T")
        p.add_argument("--horizon", type=float, required=required)
        p.add_argument("--times", default=None, help="interior times, comma-separated")
        p.add_argument("--steps", type=int, default=10, help="equal interior grid when --times is absent")
        p.add_argument("--draws", type=int, default=1)

    p = sub.add_parser("simulate", parents=[common], help="exact (or Euler) path simulation")
    model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--theta0", default=None)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--method", choices=("exact", "euler"), default="exact")
    p.add_argument("--substeps", type=int, default=200)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tpd", parents=[common], help="transition density")
    model_args(p)
    p.add_argument("--from", dest="source", required=True, help="points; ';' between points, ',' within")
    p.add_argument("--to", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--log", action="store_true")
    p.add_argument("--kernel", choices=("diffusion", "jump"), default="diffusion")
    p.set_defaults(func=cmd_tpd)

    p = sub.add_parser("fit", parents=[common], help="maximum likelihood fit")
    fit_args(p)
    p.add_argument("--fix", default=None, help="name=value pairs held fixed")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", parents=[common], help="one-sample likelihood ratio test")
    fit_args(p)
    p.add_argument("--null", required=True, help="name=value pairs, e.g. mu=0,kappa=1")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("ktest", parents=[common], help="k-group linear hypothesis test")
    p.add_argument("--groups", required=True, help="manifest JSON listing path files per group")
    p.add_argument("--preset", choices=PRESETS, default=None)
    p.add_argument("--matrix", default=None, help="CSV restriction matrix")
    p.add_argument("--family", default="von_mises",
                   choices=("uniform", "von_mises", "wrapped_cauchy", "von_mises_mixture"))
    p.add_argument("--components", type=int, default=2)
    p.add_argument("--kernel", choices=("diffusion", "jump"), default="diffusion")
    p.add_argument("--delta", type=float, default=None)
    p.set_defaults(func=cmd_ktest)

    p = sub.add_parser("bridge", parents=[common], help="exact diffusion bridges")
    model_args(p)
    bridge_args(p)
    p.set_defaults(func=cmd_bridge)

    p = sub.add_parser("jump", parents=[common], help="Cauchy jump process: paths or bridges")
    model_args(p)
    p.add_argument("action", choices=("simulate", "bridge"))
    p.add_argument("--mode", choices=("direct", "subordinated"), default="direct")
    p.add_argument("--sampler", choices=("auto", "normal", "rayleigh"), default="auto",
                   help="auxiliary-variable sampler for bridges")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--theta0", default=None)
    p.add_argument("--paths", type=int, default=1)
    bridge_args(p, required=False)
    p.set_defaults(func=cmd_jump)

    p = sub.add_parser("ingest", parents=[common], help="convert (t, x, y) tracks to angle paths")
    p.add_argument("input", help="track CSV with columns t,x,y[,id]")
    p.add_argument("--max-missing", type=float, default=0.05)
    p.add_argument("--immobile-floor", type=float, default=np.pi / 2)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo harness")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON")
    p.add_argument("--replicates", type=int, default=None, help="override M")
    p.add_argument("--jobs", type=int, default=None, help="worker processes")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help/--version exit 0, parse errors exit EXIT_USAGE
        return exc.code
    try:
        return args.func(args)
    except (SingularityError, ConvergenceError, FloatingPointError) as exc:
        print(f"torusdiff: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DomainError, KeyError, ValueError, OSError) as exc:
        print(f"torusdiff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
