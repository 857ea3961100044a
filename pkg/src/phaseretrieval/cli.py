"""Command-line front end: thresholds, SE sweeps, potential grids, G-VAMP runs, spectra.

Every subcommand reads an optional JSON file (``--config``) whose keys are the
long flag names with dashes replaced by underscores; flags given on the
command line override it.  Exit codes: 0 success, 2 configuration error,
3 solver error.
"""

import argparse
import concurrent.futures
import contextlib
import csv
import json
import math
import os
import sys

import numpy as np

from . import ensembles, gvamp, spectra, thresholds
from . import scalar_models as sm
from . import state_evolution as se
from .errors import DomainError, EvaluationError, PhaseRetrievalError, SolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

ENSEMBLE_NAMES = {
    "gaussian": spectra.GAUSSIAN_IID,
    "orthogonal": spectra.COLUMN_ORTHONORMAL,
    "orthonormal": spectra.COLUMN_ORTHONORMAL,
    "unitary": spectra.COLUMN_ORTHONORMAL,
    "hadamard": spectra.SUBSAMPLED_HADAMARD,
    "dft": spectra.SUBSAMPLED_DFT,
    "product": spectra.PRODUCT_OF_GAUSSIANS,
}

COMMON_DEFAULTS = {
    "ensemble": "gaussian", "beta": 1, "gammas": [], "rho": 1.0, "channel": "noiseless",
    "delta": 0.0, "format": "csv", "output": None,
}
DEFAULTS = {
    "thresholds": {"ensemble": ["gaussian"], "format": "text", "full_recovery": True,
                   "tol_fr": None},
    "se-sweep": {"alpha_start": 0.3, "alpha_stop": 1.5, "alpha_step": 0.05, "damping": 0.5,
                 "tol": 1e-10, "max_iter": 2000},
    "potential-grid": {"alpha": 1.0, "points": 21},
    "gvamp-run": {"alpha_start": 1.5, "alpha_stop": 1.5, "alpha_step": 0.1, "n": 2000,
                  "seeds": "0-4", "max_iter": 200, "damping": 0.3, "matrix": None},
    "spectrum": {"alpha": 1.0, "nodes": 256, "n": None, "samples": None},
}


class ConfigError(PhaseRetrievalError):
    pass


def fmt(x):
    """Floats with 12 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def _round_json(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _round_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_json(v) for v in obj]
    return obj


# ---------------------------------------------------------------- configuration

def _add_model_flags(p, multi_ensemble=False):
    if multi_ensemble:
        p.add_argument("--ensemble", action="append", choices=sorted(ENSEMBLE_NAMES))
    else:
        p.add_argument("--ensemble", choices=sorted(ENSEMBLE_NAMES))
    p.add_argument("--beta", type=int, choices=(1, 2))
    p.add_argument("--gammas", type=float, nargs="+", help="product inner widths k_l / n")
    p.add_argument("--rho", type=float)
    p.add_argument("--channel", choices=("noiseless", "gaussian"))
    p.add_argument("--delta", type=float, help="output noise variance")
    p.add_argument("--config", help="JSON file with default flag values")
    p.add_argument("--output", "-o", help="output path (default stdout)")


def _add_alpha_grid(p):
    p.add_argument("--alpha-start", type=float)
    p.add_argument("--alpha-stop", type=float)
    p.add_argument("--alpha-step", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="phaseretrieval", description=__doc__.splitlines()[0],
                                     argument_default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", help="weak and full recovery thresholds",
                       argument_default=argparse.SUPPRESS)
    _add_model_flags(p, multi_ensemble=True)
    p.add_argument("--format", choices=("text", "json"))
    p.add_argument("--no-full-recovery", dest="full_recovery", action="store_false",
                   help="skip the state-evolution bisection")
    p.add_argument("--tol-fr", type=float)

    p = sub.add_parser("se-sweep", help="informed and uninformed SE over an alpha grid",
                       argument_default=argparse.SUPPRESS)
    _add_model_flags(p)
    _add_alpha_grid(p)
    p.add_argument("--damping", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("potential-grid", help="potential(q_x, q_z) on a grid",
                       argument_default=argparse.SUPPRESS)
    _add_model_flags(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--points", type=int, help="grid points per axis")
    p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("gvamp-run", help="finite-size G-VAMP runs",
                       argument_default=argparse.SUPPRESS)
    _add_model_flags(p)
    _add_alpha_grid(p)
    p.add_argument("--n", type=int)
    p.add_argument("--seeds", help="comma list or range such as 0-4")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--damping", type=float)
    p.add_argument("--matrix", help="replay a binary matrix dump (single alpha)")
    p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("spectrum", help="atoms of the limit spectrum",
                       argument_default=argparse.SUPPRESS)
    _add_model_flags(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--nodes", type=int)
    p.add_argument("--n", type=int, help="matrix size for empirical spectra")
    p.add_argument("--samples", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    return parser


def resolve_config(args):
    """Merge defaults < config file < command-line flags into a plain dict."""
    flags = vars(args).copy()
    command = flags.pop("command")
    cfg = dict(COMMON_DEFAULTS)
    cfg.update(DEFAULTS[command])
    path = flags.pop("config", None)
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(data)
    cfg.update(flags)
    cfg["command"] = command
    return cfg


def make_ensemble(name, beta, gammas):
    if name not in ENSEMBLE_NAMES:
        raise ConfigError(f"unknown ensemble {name!r}")
    kind = ENSEMBLE_NAMES[name]
    if name == "unitary" and beta != 2:
        raise ConfigError("the unitary ensemble is complex: use --beta 2")
    if kind == spectra.SUBSAMPLED_DFT:
        beta = 2
    if kind == spectra.SUBSAMPLED_HADAMARD:
        beta = 1
    gammas = tuple(gammas or ()) if kind == spectra.PRODUCT_OF_GAUSSIANS else ()
    return spectra.EnsembleSpec(kind, int(beta), gammas)


def make_models(cfg, beta):
    if cfg["channel"] == "noiseless" and cfg["delta"] not in (0, 0.0, None):
        raise ConfigError("--delta needs --channel gaussian")
    delta = 0.0 if cfg["channel"] == "noiseless" else float(cfg["delta"])
    if cfg["channel"] == "gaussian" and not delta > 0:
        raise ConfigError("--channel gaussian needs --delta > 0")
    return sm.Prior(beta, float(cfg["rho"])), sm.Channel(beta, delta)


def alpha_grid(cfg):
    start, stop, step = cfg["alpha_start"], cfg["alpha_stop"], cfg["alpha_step"]
    if not (start > 0 and stop >= start and step > 0):
        raise ConfigError("alpha grid must be positive, non-empty and increasing")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(count)]


def parse_seeds(text):
    if isinstance(text, list):
        return [int(s) for s in text]
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise ConfigError("no seeds given")
    return seeds


def worker_count():
    cap = os.environ.get("PR_THREADS")
    cores = os.cpu_count() or 1
    if cap:
        try:
            return max(1, min(int(cap), cores))
        except ValueError as exc:
            raise ConfigError("PR_THREADS must be an integer") from exc
    return cores


def parallel_map(fn, items):
    """Map in worker processes; results come back in input order."""
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@contextlib.contextmanager
def _sink(path):
    if path:
        with open(path, "w", newline="") as fh:
            yield fh
    else:
        yield sys.stdout


def _write_rows(cfg, header, rows, preamble=()):
    with _sink(cfg["output"]) as fh:
        if cfg["format"] == "json":
            json.dump(_round_json([dict(zip(header, r)) for r in rows]), fh, indent=2)
            fh.write("\n")
            return
        for line in preamble:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


# ---------------------------------------------------------------- subcommands

def cmd_thresholds(cfg):
    reports = []
    for name in cfg["ensemble"] if isinstance(cfg["ensemble"], list) else [cfg["ensemble"]]:
        ens = make_ensemble(name, cfg["beta"], cfg["gammas"])
        prior, channel = make_models(cfg, ens.beta)
        reports.append(thresholds.threshold_report(ens, channel, prior,
                                                   cfg["full_recovery"], cfg["tol_fr"]))
    with _sink(cfg["output"]) as fh:
        if cfg["format"] == "json":
            json.dump(_round_json({"reports": [r.as_dict() for r in reports]}), fh, indent=2)
            fh.write("\n")
        else:
            fh.write(f"{'ensemble':<32} {'alpha_WR,Algo':>16} {'alpha_FR,IT':>16} "
                     f"{'alpha_FR,Algo':>16}\n")
            for r in reports:
                fh.write(f"{r.ensemble:<32} {fmt(r.alpha_wr_algo):>16} {fmt(r.alpha_fr_it):>16} "
                         f"{fmt(r.alpha_fr_algo):>16}\n")
                for key, msg in r.errors.items():
                    fh.write(f"  error in {key}: {msg}\n")
    return EXIT_OK if all(r.ok for r in reports) else EXIT_SOLVER


def _sweep_point(job):
    ens, alpha, rho, delta, damping, tol, max_iter = job
    out = [alpha]
    conv = True
    fes = []
    try:
        spec = se.ProblemSpec.for_ensemble(ens, alpha, rho, delta)
    except DomainError as exc:
        return [alpha, math.nan, math.nan, math.nan, math.nan, f"error: {exc}"]
    for init in (se.Informed(), se.Uninformed()):
        cfg = se.SEConfig(damping=damping, tol=tol, max_iter=max_iter, init=init,
                          keep_trace=False)
        try:
            res = se.se_fixed_point(spec, cfg)
            out.append(res.mmse)
            fes.append(res.free_entropy)
            conv = conv and res.converged
        except (SolverError, EvaluationError):
            out.append(math.nan)
            fes.append(math.nan)
            conv = False
    return out + fes + [conv]


def cmd_se_sweep(cfg):
    ens = make_ensemble(cfg["ensemble"], cfg["beta"], cfg["gammas"])
    prior, channel = make_models(cfg, ens.beta)
    jobs = [(ens, a, prior.rho, channel.delta, cfg["damping"], cfg["tol"], cfg["max_iter"])
            for a in alpha_grid(cfg)]
    rows = parallel_map(_sweep_point, jobs)
    header = ["alpha", "mmse_informed", "mse_uninformed", "free_entropy_informed",
              "free_entropy_uninformed", "converged"]
    _write_rows(cfg, header, rows)
    return EXIT_OK


def cmd_potential_grid(cfg):
    ens = make_ensemble(cfg["ensemble"], cfg["beta"], cfg["gammas"])
    prior, channel = make_models(cfg, ens.beta)
    spec = se.ProblemSpec.for_ensemble(ens, cfg["alpha"], prior.rho, channel.delta)
    k = int(cfg["points"])
    if k < 2:
        raise ConfigError("--points must be at least 2")
    # interior grid: the potential is singular at q = rho and q_z = Q_z
    qx = spec.rho * np.arange(k) / k
    qz = spec.Q_z * np.arange(k) / k
    rows = []
    for a in qx:
        for b in qz:
            try:
                val = se.potential(spec, float(a), float(b))
            except (SolverError, EvaluationError):
                val = math.nan
            rows.append([a, b, val])
    _write_rows(cfg, ["q_x", "q_z", "potential"], rows)
    return EXIT_OK


def _gvamp_job(job):
    ens, alpha, n, seed, rho, delta, max_iter, damping, matrix = job
    prior = sm.Prior(ens.beta, rho)
    channel = sm.Channel(ens.beta, delta)
    if matrix:
        inst = ensembles.load_matrix(matrix, ens, seed)
        if inst.beta != ens.beta:
            raise ConfigError("matrix dump and --beta disagree")
        x, y = gvamp.observe(inst, prior, channel, seed)
    else:
        inst, x, y = gvamp.generate_instance(ens, prior, channel, n, alpha, seed)
    cfg = gvamp.GvampConfig(max_iter=max_iter, damping=damping, seed=seed)
    res = gvamp.run(inst, y, prior, channel, cfg, truth=x)
    return res.mse_trace.tolist(), res.overlap_trace.tolist(), res.diverged


def cmd_gvamp_run(cfg):
    ens = make_ensemble(cfg["ensemble"], cfg["beta"], cfg["gammas"])
    prior, channel = make_models(cfg, ens.beta)
    n = int(cfg["n"])
    if n < 16:
        raise ConfigError("n must be at least 16")
    alphas = alpha_grid(cfg)
    if cfg["matrix"] and len(alphas) != 1:
        raise ConfigError("--matrix replays one matrix: give a single alpha")
    seeds = parse_seeds(cfg["seeds"])
    jobs = [(ens, a, n, s, prior.rho, channel.delta, int(cfg["max_iter"]), float(cfg["damping"]),
             cfg["matrix"]) for a in alphas for s in seeds]
    results = parallel_map(_gvamp_job, jobs)
    rows = []
    k = 0
    for a in alphas:
        finals, overlaps, bad = [], [], 0
        for s in seeds:
            mse, ovl, diverged = results[k]
            k += 1
            bad += int(diverged)
            for it, (e, o) in enumerate(zip(mse, ovl)):
                rows.append([a, s, it, e, o, diverged])
            finals.append(mse[-1] if mse else math.nan)
            overlaps.append(ovl[-1] if ovl else math.nan)
        # summary rows count the diverged runs in the last column
        rows.append([a, "mean", "", float(np.mean(finals)), float(np.mean(overlaps)), bad])
        rows.append([a, "std", "", float(np.std(finals)), float(np.std(overlaps)), bad])
    _write_rows(cfg, ["alpha", "seed", "iter", "mse", "overlap", "diverged"], rows)
    return EXIT_OK


def cmd_spectrum(cfg):
    ens = make_ensemble(cfg["ensemble"], cfg["beta"], cfg["gammas"])
    kw = {"nodes": int(cfg["nodes"])}
    if cfg["n"]:
        kw["n"] = int(cfg["n"])
    if cfg["samples"]:
        kw["samples"] = int(cfg["samples"])
    nu = spectra.density_at(ens, float(cfg["alpha"]), **kw)
    rows = [[lam, w] for lam, w in nu.atoms]
    with _sink(cfg["output"]) as fh:
        if cfg["format"] == "json":
            json.dump(_round_json({"zero_mass": nu.zero_mass,
                                   "atoms": [{"lambda": a, "weight": b} for a, b in rows]}),
                      fh, indent=2)
            fh.write("\n")
            return EXIT_OK
        fh.write(f"# zero_mass={fmt(nu.zero_mass)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "weight"])
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return EXIT_OK


COMMANDS = {
    "thresholds": cmd_thresholds,
    "se-sweep": cmd_se_sweep,
    "potential-grid": cmd_potential_grid,
    "gvamp-run": cmd_gvamp_run,
    "spectrum": cmd_spectrum,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg["command"]](cfg)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, EvaluationError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
