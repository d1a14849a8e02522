"""Command line entry point.

Every subcommand accepts ``--config`` (TOML or JSON) whose keys override the
argument defaults, and ``--out-dir`` for its CSV and JSON outputs.  Tables
start with a ``# config <hash>`` comment.  Failures print a JSON object with
``error`` and ``type`` keys to stderr and exit with status 1.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings

import numpy as np

from . import continuum, discrete, experiments, graph, microstructure, nonlocal_energy
from .data import BandwidthField, DensitySpec, PushforwardDensity, load_points, sample, save_points
from .kernels import FAMILIES, KernelSpec
from .maps import PiecewiseLinearMap
from .solver1d import fixed_point_solve

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("tsnelimits")


class MapSpecError(ValueError):
    pass


# ---------------------------------------------------------------------------
# map specifications


def _zigzag(k: int):
    def f(x):
        t = (k * x) % 2.0
        return np.where(t <= 1.0, t, 2.0 - t) / k
    return f


def _ramp(n: int, x0: float = 0.5):
    return lambda x: np.clip(n * (x - x0) + 0.5, 0.0, 1.0)


def parse_map(spec: str, d: int = 1):
    """Turn ``name[:param]`` into a vectorized function of ``(k, d)`` points.

    One dimensional names: ``identity``, ``linear:a``, ``sine:a``,
    ``zigzag:k``, ``ramp:n``.  Two dimensional names: ``identity``,
    ``linear:a``, ``shear:a``.  Returns ``(func, m)``.
    """
    name, _, param = spec.partition(":")
    try:
        value = float(param) if param else None
    except ValueError as exc:
        raise MapSpecError(f"bad parameter in map spec {spec!r}") from exc
    if d == 1:
        table = {
            "identity": lambda x: x,
            "linear": lambda x: (1.0 if value is None else value) * x,
            "sine": lambda x: x + (0.1 if value is None else value) * np.sin(2 * np.pi * x),
            "zigzag": _zigzag(int(value or 3)),
            "ramp": _ramp(int(value or 10)),
        }
        if name not in table:
            raise MapSpecError(f"unknown one dimensional map {name!r}")
        f = table[name]
        return (lambda pts: f(np.asarray(pts, dtype=float).reshape(-1))[:, None]), 1
    if d == 2:
        a = 1.0 if value is None else value
        if name == "identity":
            return (lambda pts: np.asarray(pts, dtype=float).reshape(-1, 2).copy()), 2
        if name == "linear":
            return (lambda pts: a * np.asarray(pts, dtype=float).reshape(-1, 2)), 2
        if name == "shear":
            def shear(pts):
                p = np.asarray(pts, dtype=float).reshape(-1, 2)
                return np.stack([p[:, 0] + a * p[:, 1], p[:, 1]], axis=1)
            return shear, 2
        raise MapSpecError(f"unknown two dimensional map {name!r}")
    raise MapSpecError("map specs cover d = 1 and d = 2")


def _pl_map(spec: str, d: int, n_grid: int) -> PiecewiseLinearMap:
    func, m = parse_map(spec, d)
    axes = [np.linspace(0.0, 1.0, n_grid)] * d
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    vals = func(pts).reshape(tuple(a.size for a in axes) + (m,))
    if d == 1 and m == 1:
        vals = vals[..., 0]
    return PiecewiseLinearMap(tuple(axes), vals)


def _density(args) -> DensitySpec:
    if args.density == "mixture":
        return DensitySpec.mixture(c=args.c)
    return DensitySpec("uniform", d=getattr(args, "d", 1))


def _sigma(args, density: DensitySpec) -> BandwidthField:
    if args.sigma == "constant":
        return BandwidthField()
    return BandwidthField(args.sigma, density=density)


# ---------------------------------------------------------------------------
# output helpers


def _config_of(args) -> dict:
    skip = {"func", "config", "out_dir", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _emit(args, stem: str, header, rows, summary: dict) -> dict:
    config = _config_of(args)
    tag = experiments.config_hash(config)
    if header is not None:
        experiments.write_csv(_out(args, stem + ".csv"), header, rows, f"config {tag}")
    payload = {"config": config, "config_hash": tag, **summary}
    experiments.write_json(_out(args, stem + ".json"), payload)
    return payload


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample(args):
    density = _density(args)
    cloud = sample(density, args.n, args.seed)
    tag = experiments.config_hash(_config_of(args))
    save_points(cloud, _out(args, "points.csv"), header=f"config {tag}")
    return _emit(args, "sample", None, None, {"n": cloud.n, "d": cloud.d})


def cmd_embed(args):
    density = _density(args)
    cloud = load_points(args.points) if args.points else sample(density, args.n, args.seed)
    h = args.h or 5.0 / cloud.n
    kernel = KernelSpec(args.kernel, cloud.d)
    P = graph.build_affinities(cloud, kernel, _sigma(args, density), h)
    T_star = None
    if args.init == "continuum":
        T_star = fixed_point_solve(KernelSpec(args.kernel, 1), _sigma(args, density), density).T_star
    Y0 = discrete.initialize(cloud.points, args.init, h, seed=args.seed, m=args.m, T_star=T_star)
    state = discrete.descend(P, Y0, args.steps, args.dt or cloud.n / 5.0, mode=args.mode,
                             record_every=args.record_every, seed=args.seed)
    Y = discrete.postprocess(state, h)
    Y = Y[:, None] if Y.ndim == 1 else Y
    tag = experiments.config_hash(_config_of(args))
    experiments.write_csv(_out(args, "trace.csv"), ["step", "kl", "A_n", "R_n", "loss"],
                          experiments.trace_rows(state.trace_array()), f"config {tag}")
    header = [f"x{i}" for i in range(cloud.d)] + [f"y{i}" for i in range(Y.shape[1])]
    rows = np.hstack([cloud.points, Y]).tolist()
    trace = state.trace_array()
    return _emit(args, "embedding", header, rows,
                 {"h": h, "final_loss": float(trace[-1, 4]) if trace.size else None, "diverged": state.diverged})


def cmd_solve1d(args):
    density = _density(args)
    res = fixed_point_solve(KernelSpec(args.kernel, 1), _sigma(args, density), density, n_grid=args.grid)
    prof = res.u_star
    rows = zip(prof.x, prof.u, res.T_star(prof.x))
    return _emit(args, "solution", ["x", "u", "T"], rows,
                 {"b_star": res.b_star, "F": res.F, "residual": res.residual, "iterations": res.iterations})


def cmd_continuum(args):
    density = DensitySpec("uniform", d=args.d)
    T = _pl_map(args.map, args.d, args.grid)
    s = math.inf if args.s == "inf" else float(args.s)
    kernel = KernelSpec(args.kernel, args.d)
    rep = continuum.continuum_energy(T, kernel, None, density, s)
    dec = continuum.attraction_decomposition(T, kernel, None, density) if math.isinf(s) else None
    return _emit(args, "continuum", None, None,
                 {"attraction": rep.attraction, "repulsion": rep.repulsion, "total": rep.total,
                  "regime": rep.regime, "decomposition": dec})


def _cutting_marginal_pf(cm, h: float) -> PushforwardDensity:
    """Exact marginal of a d=2, m=1 cutting map, binned on integer-aligned bins.

    The marginal is linear between integers, so midpoint values give exact bin masses.
    """
    per_unit = max(4, math.ceil(4.0 / h))
    edges = np.linspace(0.0, cm.k, cm.k * per_unit + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return PushforwardDensity("cutting-marginal", [edges], microstructure.cutting_marginal(cm, mid), True)


def cmd_nonlocal(args):
    hs = [float(h) for h in args.h]
    rows = []
    if args.map.startswith("cutting:"):
        k = int(args.map.split(":")[1])
        kernel = KernelSpec(args.kernel, 2)
        for h in hs:
            # ramps much thinner than the bandwidth unless mu is given
            mu = args.mu if args.mu is not None else (0.005 * k * h if k > 1 else None)
            cm = microstructure.build_cutting_map(2, 1, k, args.alpha, mu=mu)
            A = nonlocal_energy.cut_sensitivity(cm, kernel, h)
            R = math.log(nonlocal_energy.repulsion_integral_pushforward(_cutting_marginal_pf(cm, h), h))
            rows.append((h, A, R, nonlocal_energy.rescaled_repulsion_limit(R, h, 1)))
    else:
        func, m = parse_map(args.map, args.d)
        density = DensitySpec("uniform", d=args.d)
        kernel = KernelSpec(args.kernel, args.d)
        for h in hs:
            if args.d == 1:
                n_att = n_rep = args.grid or max(2049, 4 * math.ceil(1.0 / h) + 1)
            else:
                # attraction needs two nodes per kernel radius, repulsion two pixels per bandwidth
                n_att = args.grid or max(33, 2 * math.ceil(1.0 / h) + 1)
                n_rep = args.grid or max(257, 2 * math.ceil(1.0 / h) + 1)
            A = nonlocal_energy.nonlocal_attraction(nonlocal_energy.GridMap.from_function(func, args.d, n_att),
                                                    kernel, None, density, h)
            R = nonlocal_energy.nonlocal_repulsion(nonlocal_energy.GridMap.from_function(func, args.d, n_rep),
                                                   density, h)
            rows.append((h, A, R, nonlocal_energy.rescaled_repulsion_limit(R, h, m) if m <= 2 else math.nan))
    return _emit(args, "nonlocal", ["h", "A_h", "R_h", "rescaled_limit"], rows, {"rows": rows})


def cmd_microstructure(args):
    kernel = KernelSpec(args.kernel, args.dim) if args.potential != "sublinear" else None
    scan = microstructure.cutting_energy_scan(args.k, args.dim, args.m, args.alpha, args.potential, kernel,
                                              args.rescaled, args.samples, args.bins_per_unit)
    header = ["k", "mu", "attraction", "repulsion", "max_density", "k_max_density", "mass", "ramp_fraction"]
    rows = [[getattr(r, f) for f in header] for r in scan.rows]
    return _emit(args, "microstructure", header, rows,
                 {"repulsion_slope": scan.repulsion_slope, "attraction_slope": scan.attraction_slope,
                  "attraction_spread": scan.attraction_spread, "density_ratio": scan.density_ratio})


def cmd_consistency(args):
    sweep = experiments.run_consistency_sweep(args.mode, args.map, args.n, args.h_exponent, args.h_scale,
                                              args.trials, args.seed, KernelSpec(args.kernel, 1))
    return _emit(args, f"consistency_{args.mode}", ["n", "h", "mean", "sd", "median", "trials"],
                 sweep.as_rows(), {"target": sweep.target, "slope": sweep.slope})


def cmd_mixture(args):
    out = experiments.run_mixture_experiment(args.c, args.init, args.n, args.h, args.steps, args.dt, args.seed,
                                           args.preset, args.out_dir, args.record_every)
    return out["summary"]


# ---------------------------------------------------------------------------
# parser


def _common(p):
    p.add_argument("--config", help="TOML or JSON file with argument defaults")
    p.add_argument("--out-dir", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=0)


def _data_args(p):
    p.add_argument("--density", choices=["uniform", "mixture"], default="uniform")
    p.add_argument("--c", type=float, default=0.0, help="mixture bump offset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsnelimits", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw points from a data density")
    _common(p)
    _data_args(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--n", type=int, default=500)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("embed", help="gradient descent on the t-SNE or SNE loss")
    _common(p)
    _data_args(p)
    p.add_argument("--points", help="CSV from the sample subcommand")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--h", type=float, default=None, help="bandwidth (default 5/n)")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--kernel", choices=FAMILIES, default="epanechnikov")
    p.add_argument("--sigma", choices=["constant", "knn-proxy", "inverse-density-power"], default="constant")
    p.add_argument("--init", choices=experiments.INITS, default="identity")
    p.add_argument("--mode", choices=["tsne", "sne"], default="tsne")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--dt", type=float, default=None, help="step size (default n/5)")
    p.add_argument("--record-every", type=int, default=100)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("solve1d", help="one dimensional continuum minimizer")
    _common(p)
    _data_args(p)
    p.add_argument("--kernel", choices=FAMILIES, default="epanechnikov")
    p.add_argument("--sigma", choices=["constant", "knn-proxy"], default="constant")
    p.add_argument("--grid", type=int, default=4096)
    p.set_defaults(func=cmd_solve1d)

    p = sub.add_parser("continuum", help="continuum energy of a test map on uniform data")
    _common(p)
    p.add_argument("--map", default="identity")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--s", default="1", help="scale parameter, a number or 'inf'")
    p.add_argument("--kernel", choices=FAMILIES, default="epanechnikov")
    p.add_argument("--grid", type=int, default=257)
    p.set_defaults(func=cmd_continuum)

    p = sub.add_parser("nonlocal", help="bandwidth sweep of the nonlocal energies")
    _common(p)
    p.add_argument("--map", default="identity", help="test map spec or cutting:k")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--h", nargs="+", default=["0.1", "0.05", "0.02", "0.01"])
    p.add_argument("--kernel", choices=FAMILIES, default="epanechnikov")
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--mu", type=float, default=None)
    p.set_defaults(func=cmd_nonlocal)

    p = sub.add_parser("microstructure", help="energy scan of cutting maps")
    _common(p)
    p.add_argument("--k", type=int, nargs="+", default=[2, 4, 8, 16, 32])
    p.add_argument("--dim", type=int, default=2, help="data dimension d")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--potential", choices=microstructure.POTENTIALS, default="sublinear")
    p.add_argument("--kernel", choices=FAMILIES, default="epanechnikov")
    p.add_argument("--rescaled", action="store_true")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--bins-per-unit", type=int, default=8)
    p.set_defaults(func=cmd_microstructure)

    p = sub.add_parser("consistency", help="Monte-Carlo convergence sweep")
    _common(p)
    p.add_argument("--mode", choices=["attraction", "repulsion"], default="attraction")
    p.add_argument("--map", choices=sorted(experiments.TEST_MAPS), default="identity")
    p.add_argument("--n", type=int, nargs="+", default=[250, 500, 1000, 2000, 4000])
    p.add_argument("--h-exponent", type=float, default=1.0 / 3.0)
    p.add_argument("--h-scale", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--kernel", choices=FAMILIES, default="epanechnikov")
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("sec33", aliases=["mixture"], help="embed the two-bump mixture from three initializations")
    _common(p)
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--init", nargs="+", choices=experiments.INITS, default=list(experiments.INITS))
    p.add_argument("--preset", choices=sorted(experiments.PRESETS), default="reduced")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--record-every", type=int, default=1000)
    p.set_defaults(func=cmd_mixture)
    return parser


def load_config(path: str) -> dict:
    with open(path, "rb") as fh:
        if path.endswith(".json"):
            data = json.load(fh)
        else:
            data = tomllib.load(fh)
    return {k.replace("-", "_"): v for k, v in data.items()}


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        config = load_config(args.config)
        config.pop("command", None)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(config) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore")
            payload = args.func(args)
    except Exception as exc:  # noqa: BLE001
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1
    print(json.dumps(payload, sort_keys=True, default=experiments._jsonable))
    return 0


if __name__ == "__main__":
    sys.exit(main())
