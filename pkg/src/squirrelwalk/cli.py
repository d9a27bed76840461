"""Command-line front end.

Every run writes its tables plus ``manifest.json`` (config echo, tool
version, wall time, seed and config hash) into the output directory, which
defaults to ``$SQUIRRELWALK_OUT`` or ``./squirrelwalk-out``.

Exit codes: 0 success, 1 selftest failure, 2 invalid input, 3 evaluation
window exceeded, 4 output not writable.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ctsrw import clock_state_probabilities, ctsrw_propagator, parse_clock, time_changed_mean
from .dtarp import (aged_state_polynomial, aged_state_probabilities, forward_recurrence_deficit,
                    forward_recurrence_density)
from .montecarlo import (RngPolicy, exponent_fit, fixed_exponent_prefactor,
                         path_enumeration_oracle, simulate_ctsrw, simulate_srw)
from .renewal import parse_model
from .specfun import PrabhakarParams, WindowError, prabhakar_kernel, prabhakar_kernel_direct
from .srw import (MomentTrack, WalkSpec, moments, propagator, symmetrized,
                  symmetrized_propagator)


OUT_ENV = "SQUIRRELWALK_OUT"
EXIT_SELFTEST, EXIT_INVALID, EXIT_WINDOW, EXIT_IO = 1, 2, 3, 4
#: options that do not change any numerical output and are left out of the config hash
UNHASHED = {"out", "workers", "verbose", "config", "format"}


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _window(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    try:
        window = (float(lo), float(hi))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be 'lo:hi', got {text!r}") from None
    if not sep or not 0 < window[0] < window[1]:
        raise argparse.ArgumentTypeError(f"window must be 'lo:hi' with 0 < lo < hi, got {text!r}")
    return window


def _sigma(text: str) -> int:
    if text not in ("1", "+1", "-1"):
        raise argparse.ArgumentTypeError("sigma0 must be +1 or -1")
    return int(text)


def _common(p: argparse.ArgumentParser, model=True, seed=False) -> None:
    if model:
        p.add_argument("--model", required=True,
                       help="e.g. geometric:p=0.3, sibuya:mu=0.5, fracbernoulli:mu=0.7,lambda=1.5, "
                            "broad:lambda=1.5, custom:0.2,0.5,0.3")
        p.add_argument("--sigma0", type=_sigma, default=1, help="initial direction, +1 or -1")
        p.add_argument("--symmetrize", action="store_true",
                       help="average over both initial directions")
    if seed:
        p.add_argument("--seed", type=int, help="root seed (mandatory when sampling)")
        p.add_argument("--workers", type=int, default=1, help="worker threads")
    p.add_argument("--out", type=Path, default=None, help=f"output directory (default ${OUT_ENV})")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squirrelwalk",
                                     description="Exact analytics and simulation of the squirrel walk.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path,
                        help="JSON file with a 'command' key and option values; "
                             "flags given on the command line take precedence")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("exact", help="exact moments and propagators")
    _common(p)
    p.add_argument("--tmax", type=int, required=True)
    p.add_argument("--propagator-at", type=_int_list, default=[], metavar="T,...")

    p = sub.add_parser("simulate", help="Monte Carlo ensemble of the discrete walk")
    _common(p, seed=True)
    p.add_argument("--tmax", type=int, required=True)
    p.add_argument("--paths", type=int, required=True)
    p.add_argument("--checkpoints", type=_int_list, default=None, metavar="T,...")
    p.add_argument("--histogram-at", type=_int_list, default=[], metavar="T,...")

    p = sub.add_parser("oracle", help="2^t path enumeration versus the exact propagator")
    _common(p)
    p.add_argument("--t", type=int, required=True)

    p = sub.add_parser("dtarp", help="aging renewal process tables")
    _common(p)
    p.add_argument("--taumax", type=int, required=True)
    p.add_argument("--tmax", type=int, required=True)
    p.add_argument("--mmax", type=int, default=None, help="also write P[N_tau(t) = m]")
    p.add_argument("--v", type=float, default=None, help="also write <v^N_tau(t)>")

    p = sub.add_parser("kernel", help="discrete Prabhakar kernel")
    _common(p, model=False)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--tmax", type=int, required=True)
    p.add_argument("--route", choices=("recurrence", "direct"), default="recurrence")

    p = sub.add_parser("ctsrw", help="walk observed on a (fractional) Poisson clock")
    _common(p, seed=True)
    p.add_argument("--clock", required=True, help="poisson:xi=1 or fracpoisson:alpha=0.8,xi=1")
    p.add_argument("--times", type=_float_list, required=True, metavar="T,...")
    p.add_argument("--paths", type=int, default=None, help="also run Monte Carlo")
    p.add_argument("--frozen", action="store_true", help="Monte Carlo without reversals")
    p.add_argument("--propagator-at", type=float, default=None, metavar="T")

    p = sub.add_parser("asymptotics", help="log-log fit of an exact moment")
    _common(p)
    p.add_argument("--quantity", choices=("mean", "msd", "variance"), required=True)
    p.add_argument("--window", type=_window, required=True, metavar="LO:HI")
    p.add_argument("--exponent", type=float, default=None,
                   help="also fit the prefactor at this fixed exponent")

    p = sub.add_parser("selftest", help="run the acceptance suite")
    _common(p, model=False)
    p.add_argument("--criteria", type=_int_list, default=None, metavar="N,...")
    return parser


#: config keys whose flag differs from the attribute name
CONFIG_FLAGS = {"lam": "--lambda"}
#: list-valued keys and the separator their flag expects
CONFIG_SEPARATORS = {"window": ":"}


def _config_argv(config: dict) -> list[str]:
    """Translate a JSON config into command-line tokens."""
    config = dict(config)
    if "command" not in config:
        raise UsageError("config file needs a 'command' key")
    argv = [str(config.pop("command"))]
    for key, value in config.items():
        flag = CONFIG_FLAGS.get(key, "--" + key.replace("_", "-"))
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif isinstance(value, list):
            argv += [flag, CONFIG_SEPARATORS.get(key, ",").join(str(v) for v in value)]
        elif value is not None:
            argv += [flag, str(value)]
    return argv


def parse_args(argv: list[str]) -> argparse.Namespace:
    """Parse ``argv``; ``--config FILE`` supplies the command and defaults, flags override."""
    parser = build_parser()
    argv = list(argv)
    if "--config" in argv:
        i = argv.index("--config")
        if i + 1 >= len(argv):
            raise UsageError("--config needs a file name")
        path = Path(argv[i + 1])
        del argv[i : i + 2]
        try:
            config = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        commands = [a for a in argv if a in COMMANDS]
        if commands:
            config = {**config, "command": commands[0]}
            argv.remove(commands[0])
        argv = _config_argv(config) + argv
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a subcommand is required")
    return args


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


class Output:
    def __init__(self, directory: Path, fmt: str):
        self.directory = directory
        self.fmt = fmt
        self.files: list[str] = []
        try:
            directory.mkdir(parents=True, exist_ok=True)
            probe = directory / ".write-probe"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise PermissionError(f"output directory {directory} is not writable: {exc}") from None

    def table(self, name: str, columns: dict) -> Path:
        names = list(columns)
        cols = [np.asarray(columns[k]) for k in names]
        if self.fmt == "json":
            path = self.directory / f"{name}.json"
            data = {k: [float(x) if c.dtype.kind == "f" else int(x) for x in c]
                    for k, c in zip(names, cols)}
            path.write_text(json.dumps(data, indent=1))
        else:
            path = self.directory / f"{name}.csv"
            lines = [",".join(names)]
            lines += [",".join(_fmt(c[i]) for c in cols) for i in range(len(cols[0]))]
            path.write_text("\n".join(lines) + "\n")
        self.files.append(path.name)
        return path

    def json(self, name: str, data: dict) -> Path:
        path = self.directory / f"{name}.json"
        path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")
        self.files.append(path.name)
        return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def config_dict(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in UNHASHED}


def config_hash(config: dict) -> str:
    text = json.dumps(config, sort_keys=True, default=_jsonable, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _spec(args, t_max: int) -> WalkSpec:
    return WalkSpec(parse_model(args.model), args.sigma0, t_max)


def _require_seed(args) -> RngPolicy:
    if args.seed is None:
        raise UsageError(f"'{args.command}' samples random paths and needs --seed")
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    return RngPolicy(args.seed)


def _track_columns(track: MomentTrack) -> dict:
    return {"t": track.t, "mean": track.mean, "msd": track.msd, "variance": track.variance}


def _dist_columns(dist) -> dict:
    return {"x": dist.x, "probability": dist.masses}


def cmd_exact(args, out: Output) -> dict:
    if args.tmax < 0:
        raise UsageError("--tmax must be non-negative")
    spec = _spec(args, args.tmax)
    track = moments(spec)
    if args.symmetrize:
        track = symmetrized(track)
    out.table("moments", _track_columns(track))
    for t in args.propagator_at:
        if not 0 <= t <= args.tmax:
            raise UsageError(f"propagator time {t} outside [0, {args.tmax}]")
        dist = propagator(spec, t)
        if args.symmetrize:
            dist = symmetrized_propagator(dist)
        out.table(f"propagator_t{t}", _dist_columns(dist))
    return {"final_msd": float(track.msd[-1])}


def _default_checkpoints(t_max: int) -> list[int]:
    if t_max <= 1000:
        return list(range(t_max + 1))
    return sorted(set(np.unique(np.geomspace(1, t_max, 200).astype(int)).tolist()) | {0, t_max})


def cmd_simulate(args, out: Output) -> dict:
    rng = _require_seed(args)
    if args.paths < 2:
        raise UsageError("--paths must be at least 2")
    checkpoints = args.checkpoints or _default_checkpoints(args.tmax)
    spec = _spec(args, args.tmax)
    stats = simulate_srw(spec, args.paths, checkpoints, rng, workers=args.workers,
                         histogram_at=args.histogram_at)
    mean = np.zeros_like(stats.mean) if args.symmetrize else stats.mean
    variance = stats.msd - mean**2
    out.table("moments", {"t": stats.checkpoints, "mean": mean, "msd": stats.msd,
                          "variance": variance, "se_mean": stats.se_mean, "se_msd": stats.se_msd,
                          "no_reversal_fraction": stats.no_reversal_fraction})
    for t, counts in stats.histograms.items():
        x = np.arange(-t, t + 1)
        counts = np.asarray(counts)
        if args.symmetrize:
            counts = (counts + counts[::-1]) / 2.0
        out.table(f"histogram_t{t}", {"x": x, "count": counts})
    return {"n_paths": stats.n_paths, "n_capped": stats.n_capped}


def cmd_oracle(args, out: Output) -> dict:
    spec = _spec(args, args.t)
    dist, mean, msd = path_enumeration_oracle(spec, args.t)
    exact = propagator(spec, args.t)
    if args.symmetrize:
        dist, exact = symmetrized_propagator(dist), symmetrized_propagator(exact)
    diff = np.abs(dist.masses - exact.masses)
    out.table("oracle", {"x": dist.x, "oracle": dist.masses, "exact": exact.masses,
                         "abs_diff": diff})
    result = {"max_abs_diff": float(diff.max()), "oracle_mean": mean, "oracle_msd": msd}
    print(f"max |oracle - exact| = {result['max_abs_diff']:.3e}")
    return result


def cmd_dtarp(args, out: Output) -> dict:
    model = parse_model(args.model)
    f_E = forward_recurrence_density(model, args.taumax, args.tmax)
    tau, t = np.meshgrid(np.arange(args.taumax + 1), np.arange(args.tmax + 1), indexing="ij")
    out.table("forward_recurrence", {"tau": tau.ravel(), "t": t.ravel(), "f_E": f_E.ravel()})
    deficit = forward_recurrence_deficit(f_E)
    out.table("deficit", {"tau": np.arange(args.taumax + 1), "deficit": deficit})
    if args.mmax is not None:
        phi = aged_state_probabilities(model, args.taumax, args.mmax, args.tmax).phi
        a, m, tt = np.indices(phi.shape)
        out.table("aged_state_probabilities", {"tau": a.ravel(), "m": m.ravel(), "t": tt.ravel(),
                                               "probability": phi.ravel()})
    if args.v is not None:
        g = aged_state_polynomial(model, args.v, args.taumax, args.tmax)
        out.table("aged_state_polynomial", {"tau": tau.ravel(), "t": t.ravel(), "value": g.ravel()})
    spread = float(np.max(np.ptp(f_E, axis=0)))
    print(f"max spread of f_E across tau = {spread:.3e}")
    return {"tau_spread": spread, "max_deficit": float(deficit.max())}


def cmd_kernel(args, out: Output) -> dict:
    params = PrabhakarParams(args.mu, args.nu, args.lam)
    fn = prabhakar_kernel if args.route == "recurrence" else prabhakar_kernel_direct
    values = fn(params, args.tmax)
    out.table("kernel", {"t": np.arange(args.tmax + 1), "value": values})
    print(" ".join(_fmt(v) for v in values[:6]))
    return {"first_values": values[:6]}


def cmd_ctsrw(args, out: Output) -> dict:
    clock = parse_clock(args.clock)
    times = np.asarray(args.times, dtype=float)
    if np.any(times < 0):
        raise UsageError("times must be non-negative")
    m_max = max(clock_state_probabilities(clock, float(t)).size for t in times) - 1
    spec = _spec(args, m_max)
    track = moments(spec)
    if args.symmetrize:
        track = symmetrized(track)
    mean = [time_changed_mean(track.mean, clock, float(t)) for t in times]
    msd = [time_changed_mean(track.msd, clock, float(t)) for t in times]
    m1 = np.array([r.value for r in mean])
    m2 = np.array([r.value for r in msd])
    out.table("moments", {"t": times, "mean": m1, "msd": m2, "variance": m2 - m1**2,
                          "m_max": np.array([r.m_max for r in mean]),
                          "neglected_mass": np.array([r.neglected_mass for r in mean])})
    result = {"m_max": m_max}
    if args.propagator_at is not None:
        dist = ctsrw_propagator(spec, clock, args.propagator_at)
        if args.symmetrize:
            dist = symmetrized_propagator(dist)
        out.table("propagator", _dist_columns(dist))
    if args.paths is not None:
        rng = _require_seed(args)
        big = WalkSpec(spec.model, spec.sigma0, 10**9)
        stats = simulate_ctsrw(big, clock, args.paths, times, rng, workers=args.workers,
                               frozen=args.frozen)
        smean = np.zeros_like(stats.mean) if args.symmetrize else stats.mean
        out.table("simulated", {"t": times, "mean": smean, "msd": stats.msd,
                                "variance": stats.msd - smean**2, "se_mean": stats.se_mean,
                                "se_msd": stats.se_msd})
        result["n_capped"] = stats.n_capped
    return result


def cmd_asymptotics(args, out: Output) -> dict:
    lo, hi = args.window
    t_max = int(np.ceil(hi))
    track = moments(_spec(args, t_max))
    if args.symmetrize:
        track = symmetrized(track)
    values = {"mean": np.abs(track.mean), "msd": track.msd, "variance": track.variance}[args.quantity]
    t = track.t.astype(float)
    fit = exponent_fit(t, values, (lo, hi))
    result = {"quantity": args.quantity, "window": [lo, hi], "slope": fit.slope,
              "intercept": fit.intercept, "r2": fit.r2, "prefactor": fit.prefactor}
    if args.exponent is not None:
        result["fixed_exponent"] = args.exponent
        result["fixed_exponent_prefactor"] = fixed_exponent_prefactor(t, values, args.exponent,
                                                                      (lo, hi))
    out.json("fit", result)
    print(f"slope = {fit.slope:.6f}  prefactor = {fit.prefactor:.6g}  r2 = {fit.r2:.8f}")
    return result


def cmd_selftest(args, out: Output) -> dict:
    from .acceptance import operation_checks, run_criterion, CRITERIA

    ops = operation_checks()
    width = max(len(name) for name, _ in ops)
    print("operation examples")
    for name, ok in ops:
        print(f"  {name:<{width}}  {'PASS' if ok else 'FAIL'}")
    print("acceptance criteria")
    results = []
    for number in args.criteria or sorted(CRITERIA):
        if number not in CRITERIA:
            raise UsageError(f"unknown criterion {number}")
        res = run_criterion(number)
        print("  " + res.line(), flush=True)
        results.append(res)
    passed = all(ok for _, ok in ops) and all(r.passed for r in results)
    out.json("selftest", {
        "operations": dict(ops),
        "criteria": {r.number: {"title": r.title, "passed": r.passed, "seconds": r.seconds,
                                "details": r.details} for r in results},
        "passed": passed,
    })
    return {"passed": passed}


COMMANDS = {
    "exact": cmd_exact,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "dtarp": cmd_dtarp,
    "kernel": cmd_kernel,
    "ctsrw": cmd_ctsrw,
    "asymptotics": cmd_asymptotics,
    "selftest": cmd_selftest,
}


def run(args: argparse.Namespace) -> int:
    directory = args.out or Path(os.environ.get(OUT_ENV, "squirrelwalk-out"))
    config = config_dict(args)
    start = time.perf_counter()
    try:
        out = Output(directory, args.format)
        result = COMMANDS[args.command](args, out)
    except PermissionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except WindowError as exc:
        print(f"error: evaluation window exceeded: {exc}", file=sys.stderr)
        return EXIT_WINDOW
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    manifest = {
        "command": args.command,
        "config": config,
        "config_sha256": config_hash(config),
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "wall_time_s": time.perf_counter() - start,
        "outputs": list(out.files),
        "result": result,
    }
    out.json("manifest", manifest)
    if args.command == "selftest" and not result["passed"]:
        return EXIT_SELFTEST
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
