"""Experiment drivers: embeddings of the two-bump mixture and consistency sweeps."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import continuum, discrete, graph
from .data import BandwidthField, DensitySpec, pushforward_density_1d, sample
from .kernels import KernelSpec
from .maps import PiecewiseLinearMap
from .solver1d import fixed_point_solve

logger = logging.getLogger(__name__)

INITS = ("random", "identity", "continuum")
PRESETS = {
    "reduced": {"n": 500, "steps": 10_000},
    "full": {"n": 2500, "steps": 100_000},
}


def config_hash(config: dict) -> str:
    """Short SHA-256 of the canonical JSON form of ``config``."""
    text = json.dumps(config, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def write_csv(path, header, rows, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def trace_rows(trace: np.ndarray) -> list:
    """Loss trace rows with integer step numbers."""
    return [[int(r[0]), *r[1:]] for r in np.asarray(trace).tolist()]


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


# ---------------------------------------------------------------------------
# embeddings of the mixture


@dataclass
class RunResult:
    init: str
    final_loss: float
    initial_loss: float
    diverged: bool
    x: np.ndarray
    T_n: np.ndarray
    T_star: np.ndarray
    trace: np.ndarray
    files: list = field(default_factory=list)


def _slopes(x, y):
    """One-sided difference quotients on sorted nodes, assigned to midpoints."""
    return 0.5 * (x[1:] + x[:-1]), np.diff(y) / np.diff(x)


def run_mixture_experiment(c: float = 0.5, inits=INITS, n: int | None = None, h: float | None = None,
                           steps: int | None = None, dt: float | None = None, seed: int = 0,
                           preset: str = "reduced", out_dir=None, record_every: int = 1000,
                           p: float = 0.4, var: float = 0.005) -> dict:
    """Embed a sample of the two-bump mixture from several initializations.

    Defaults follow ``preset`` (``reduced``: n=500, 1e4 steps; ``full``:
    n=2500, 1e5 steps) with ``h = 5/n`` and ``dt = n/5``.  The loss is the
    t-SNE energy, KL minus the entropy term of P, i.e. attraction plus
    repulsion.  With ``out_dir`` each run writes the map comparison
    ``(x, T_n, T*)``, the slope comparison ``(x, T_n', T*')`` and the loss trace.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}")
    if isinstance(inits, str):
        inits = (inits,)
    for init in inits:
        if init not in INITS:
            raise ValueError(f"unknown initialization {init!r}")
    n = n or PRESETS[preset]["n"]
    steps = PRESETS[preset]["steps"] if steps is None else steps
    h = h or 5.0 / n
    dt = dt or n / 5.0
    config = {"experiment": "mixture-embedding", "c": c, "p": p, "var": var, "n": n, "h": h, "steps": steps,
              "dt": dt, "seed": seed, "inits": list(inits), "record_every": record_every}
    tag = config_hash(config)
    density = DensitySpec.mixture(c=c, p=p, var=var)
    sigma = BandwidthField("knn-proxy", density=density)
    kernel = KernelSpec("epanechnikov", 1)
    cloud = sample(density, n, seed)
    P = graph.build_affinities(cloud, kernel, sigma, h)
    solution = fixed_point_solve(kernel, sigma, density)
    x = cloud.points[:, 0]
    order = np.argsort(x)
    xs = x[order]
    t_star = solution.T_star(xs)
    results = {}
    for init in inits:
        Y0 = discrete.initialize(cloud.points, init, h, seed=seed, T_star=solution.T_star)
        state = discrete.descend(P, Y0, steps, dt, record_every=record_every, seed=seed)
        Tn = discrete.postprocess(state, h)[order]
        trace = state.trace_array()
        final = float(trace[-1, 4]) if trace.size else math.nan
        initial = float(trace[0, 4]) if trace.size else math.nan
        res = RunResult(init, final, initial, state.diverged, xs, Tn, t_star, trace)
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            comment = f"config {tag} c={c} init={init}"
            f_map = os.path.join(out_dir, f"map_c{c}_{init}.csv")
            write_csv(f_map, ["x", "T_n", "T_star"], zip(xs, Tn, t_star), comment)
            mid, dTn = _slopes(xs, Tn)
            dTs = np.interp(mid, solution.u_star.x, solution.u_star.u)
            f_der = os.path.join(out_dir, f"slope_c{c}_{init}.csv")
            write_csv(f_der, ["x", "dT_n", "dT_star"], zip(mid, dTn, dTs), comment)
            f_tr = os.path.join(out_dir, f"trace_c{c}_{init}.csv")
            write_csv(f_tr, ["step", "kl", "A_n", "R_n", "loss"], trace_rows(trace), comment)
            res.files = [f_map, f_der, f_tr]
        results[init] = res
        logger.info("init=%s final loss %.6f", init, final)
    summary = {"config": config, "config_hash": tag, "b_star": solution.b_star, "F_star": solution.F,
               "final_loss": {k: r.final_loss for k, r in results.items()},
               "initial_loss": {k: r.initial_loss for k, r in results.items()},
               "diverged": {k: r.diverged for k, r in results.items()}}
    if out_dir is not None:
        write_json(os.path.join(out_dir, f"summary_c{c}.json"), summary)
    return {"summary": summary, "runs": results}


# name used by the public interface contract
run_experiment_sec33 = run_mixture_experiment


# ---------------------------------------------------------------------------
# consistency sweeps


TEST_MAPS = {
    "identity": lambda x: x,
    "sine": lambda x: x + 0.1 * np.sin(2.0 * np.pi * x),
}


@dataclass
class SweepRow:
    n: int
    h: float
    mean: float
    sd: float
    median: float
    trials: int
    errors: list


@dataclass
class SweepResult:
    mode: str
    target: float
    rows: list
    slope: float
    config: dict

    def medians(self) -> np.ndarray:
        return np.array([r.median for r in self.rows])

    def as_rows(self):
        return [(r.n, r.h, r.mean, r.sd, r.median, r.trials) for r in self.rows]


def _pushforward_l2(func, density: DensitySpec, n_grid: int = 20001) -> float:
    x = np.linspace(density.lower, density.upper, n_grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return pushforward_density_1d(PiecewiseLinearMap(x, func(x)), density).l2_squared()


def run_consistency_sweep(mode: str = "attraction", test_map: str = "identity", n_list=(250, 500, 1000, 2000, 4000),
                          h_exponent: float = 1.0 / 3.0, h_scale: float = 1.0, trials: int = 10, seed: int = 0,
                          kernel: KernelSpec | None = None, density: DensitySpec | None = None,
                          include_self_in_degree: bool = True) -> SweepResult:
    """Errors of the discrete energies against their continuum limits over ``n``.

    ``h = h_scale * n^(-h_exponent)``.  In attraction mode the error is
    ``|A_n[T] - A[T; phi_1]|``; in repulsion mode it is
    ``|exp(R_n) / (pi h) - |rho_Y|^2|`` (one dimensional embedding).  Trial
    ``t`` at size ``n`` uses seed ``seed + 1000 t + n``.
    """
    if mode not in ("attraction", "repulsion"):
        raise ValueError(f"unknown mode {mode!r}")
    if test_map not in TEST_MAPS:
        raise ValueError(f"unknown test map {test_map!r}")
    func = TEST_MAPS[test_map]
    kernel = kernel or KernelSpec("epanechnikov", 1)
    density = density or DensitySpec()
    sigma = BandwidthField()
    x = np.linspace(density.lower, density.upper, 20001)
    if mode == "attraction":
        target = continuum.continuum_attraction(PiecewiseLinearMap(x, func(x)), kernel, sigma, density, 1.0)
    else:
        target = _pushforward_l2(func, density)
    rows = []
    for n in n_list:
        h = h_scale * n ** (-h_exponent)
        errs = []
        for t in range(trials):
            cloud = sample(density, int(n), seed + 1000 * t + int(n))
            Y = func(cloud.points[:, 0])
            if mode == "attraction":
                P = graph.build_affinities(cloud, kernel, sigma, h, include_self_in_degree)
                errs.append(abs(discrete.rescaled_attraction(P, Y, h) - target))
            else:
                R = discrete.rescaled_repulsion(Y, h)
                errs.append(abs(math.exp(R) / (math.pi * h) - target))
        e = np.array(errs)
        rows.append(SweepRow(int(n), h, float(e.mean()), float(e.std(ddof=1)) if trials > 1 else 0.0,
                             float(np.median(e)), trials, errs))
    means = np.array([r.mean for r in rows])
    slope = float(np.polyfit(np.log([r.n for r in rows]), np.log(means), 1)[0]) if len(rows) > 1 else math.nan
    config = {"mode": mode, "test_map": test_map, "n_list": list(n_list), "h_exponent": h_exponent,
              "h_scale": h_scale, "trials": trials, "seed": seed, "kernel": asdict(kernel)}
    return SweepResult(mode, float(target), rows, slope, config)
