"""``momentfield`` command-line interface.

Every command reads a network config (a JSON path or a built-in name such as
``model1``), writes its outputs and a ``manifest.json`` into ``--out`` and
exits with 0 (ok), 2 (configuration error), 3 (numerical failure) or 4
(master-equation state space too large).

Run settings are resolved flag > the config's optional ``"run"`` object >
built-in default.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, MomentFieldError, SizeRefusal
from .io.manifest import RunManifest
from .io.tables import write_csv
from .network import NetworkConfig, resolve_config
from .stochastic.rng import default_seed

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SIZE = 0, 2, 3, 4

DEFAULTS = {
    "variant": "wc",
    "t_end": 200.0,
    "n_out": 2001,
    "paths": 100,
    "dt": None,
    "sde_dt": 1e-3,
    "transient": 0.0,
    "dwell": 30.0,
    "max_steps": 4000,
    "h_max": 0.05,
    "n_max": 0.05,
}


def _raw_run_section(source: str) -> dict:
    p = Path(source)
    if p.exists():
        text = p.read_text()
    else:
        ref = resources.files("momentfield") / "data" / f"{source.removesuffix('.json')}.json"
        text = ref.read_text() if ref.is_file() else "{}"
    try:
        d = json.loads(text)
    except json.JSONDecodeError:
        return {}
    run = d.get("run", {}) if isinstance(d, dict) else {}
    if not isinstance(run, dict):
        raise ConfigError('"run" must be an object')
    return run


class Settings:
    """Flag > config ``run`` section > default lookup."""

    def __init__(self, args, run: dict):
        self.args, self.run = args, run
        self.used = {}

    def __getitem__(self, key):
        v = getattr(self.args, key, None)
        if v is None:
            v = self.run.get(key, DEFAULTS.get(key))
        self.used[key] = v
        return v


def _parse_set(items) -> list[tuple[str, float]]:
    out = []
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out.append((k.strip(), float(v)))
        except ValueError as exc:
            raise ConfigError(f"--set {k}: not a number: {v!r}") from exc
    return out


def _load(args) -> tuple[NetworkConfig, Settings]:
    net = resolve_config(args.config)
    run = _raw_run_section(args.config)
    for k, v in list(run.get("set", {}).items()) + _parse_set(args.set):
        net = net.with_param(k, float(v))
    if getattr(args, "n", None) is not None:
        net = net.with_n(args.n)
    return net, Settings(args, run)


def _out_dir(args) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _workers(args) -> int:
    return args.workers if args.workers is not None else (os.cpu_count() or 1)


def _manifest(args, net, settings, seeds=()) -> RunManifest:
    cli_args = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return RunManifest(args.command, net.to_dict(), {"flags": cli_args, "resolved": settings.used}, list(seeds), __version__)


def _finish(man: RunManifest, out: Path, files) -> None:
    for f in files:
        man.add_output(f)
    man.write(out)


# --------------------------------------------------------------- commands
def cmd_integrate(args) -> int:
    from .integrate import integrate
    from .model import MomentState, Variant, corr_size

    net, s = _load(args)
    variant = Variant.parse(s["variant"])
    nu0 = np.asarray(args.init if args.init is not None else s.run.get("init", [0.1] * net.M), dtype=float)
    state = nu0
    if variant.has_corr:
        c = float(args.corr_seed if args.corr_seed is not None else s.run.get("corr_seed", 0.0))
        state = MomentState(nu0, np.full(corr_size(net.M), c))
    traj = integrate(variant, state, net, float(s["t_end"]), n_out=int(s["n_out"]))
    out = _out_dir(args)
    f = out / "trajectory.csv"
    traj.to_csv(f)
    _finish(_manifest(args, net, s), out, [f])
    return EXIT_OK


def cmd_fixed_points(args) -> int:
    from .steady import find_fixed_points, fixed_points_to_json

    net, s = _load(args)
    fps = find_fixed_points(s["variant"], net, workers=_workers(args))
    out = _out_dir(args)
    f = out / "fixed_points.json"
    fixed_points_to_json(fps, f)
    _finish(_manifest(args, net, s), out, [f])
    return EXIT_OK


def _range(args, s):
    rng = args.range if args.range is not None else s.run.get("range")
    if rng is None or len(rng) != 2:
        raise ConfigError("a parameter range LO HI is required")
    lo, hi = map(float, rng)
    if not lo < hi:
        raise ConfigError(f"empty parameter range [{lo}, {hi}]")
    s.used["range"] = [lo, hi]
    return lo, hi


def _sweep_atlas(args, net, s):
    from .bifurcation.atlas import BifurcationAtlas
    from .bifurcation.equilibria import sweep_equilibria

    param = args.param or s.run.get("param", "I1")
    s.used["param"] = param
    lo, hi = _range(args, s)
    res = sweep_equilibria(
        s["variant"], net, param, lo, hi, h_max=float(s["h_max"]), max_steps=int(s["max_steps"]), workers=_workers(args)
    )
    return BifurcationAtlas.from_sweep(res, lo, hi)


def cmd_sweep(args) -> int:
    net, s = _load(args)
    atlas = _sweep_atlas(args, net, s)
    out = _out_dir(args)
    files = [atlas.to_json(out / "atlas.json"), *atlas.write_tables(out)]
    _finish(_manifest(args, net, s), out, files)
    return EXIT_OK


def cmd_codim2(args) -> int:
    from .bifurcation.codim2 import N_MIN, continue_codim2

    net, s = _load(args)
    if net.inv_sizes.max() <= 0:
        raise ConfigError("two-parameter continuation in n needs a finite size (use --n)")
    atlas = _sweep_atlas(args, net, s)
    lo, hi = s.used["range"]
    for p in [q for q in atlas.points if q.kind in ("saddle-node", "hopf")]:
        try:
            curve = continue_codim2(
                s["variant"], net.with_param(atlas.branches[0].param, p.params[atlas.branches[0].param]), p,
                p1_bounds=(lo, hi), p2_bounds=(N_MIN, float(s["n_max"])),
            )
        except MomentFieldError as exc:
            print(f"warning: {p.label}: {exc}", file=sys.stderr)
            continue
        atlas.add_curve(curve)
    atlas.relabel()
    out = _out_dir(args)
    files = [atlas.to_json(out / "atlas.json"), *atlas.write_tables(out)]
    _finish(_manifest(args, net, s), out, files)
    return EXIT_OK


def cmd_cycle(args) -> int:
    from .integrate import cycle_from_transient
    from .model import MomentState, Variant, corr_size

    net, s = _load(args)
    variant = Variant.parse(s["variant"])
    nu0 = np.asarray(args.init if args.init is not None else s.run.get("init", [0.1] * net.M), dtype=float)
    state = MomentState(nu0, np.full(corr_size(net.M), float(args.corr_seed or 0.0))) if variant.has_corr else nu0
    cyc = cycle_from_transient(variant, state, net, t_transient=float(args.transient or 200.0))
    out = _out_dir(args)
    summary = {
        "variant": variant.value,
        "period": cyc.period,
        "anchor": cyc.anchor.tolist(),
        "multipliers": [[float(m.real), float(m.imag)] for m in cyc.multipliers],
        "stability": cyc.stability,
        "residual": cyc.residual,
    }
    f1 = out / "cycle.json"
    f1.write_text(json.dumps(summary, indent=2) + "\n")
    f2 = out / "orbit.csv"
    cyc.trajectory(net, n_out=int(s["n_out"])).to_csv(f2)
    files = [f1, f2]
    if args.param:
        from .bifurcation.cycles import sweep_cycles

        lo, hi = _range(args, s)
        br = sweep_cycles(variant, net, args.param, cyc, lo, hi, scale=float(args.scale), both_directions=True)
        head, rows = br.to_rows()
        files.append(write_csv(out / "cycle_branch.csv", head, rows))
        f3 = out / "cycle_points.json"
        f3.write_text(json.dumps([p.to_dict() for p in br.points], indent=2) + "\n")
        files.append(f3)
    _finish(_manifest(args, net, s), out, files)
    return EXIT_OK


def _seed(args, s) -> int:
    v = args.seed if args.seed is not None else s.run.get("seed", default_seed())
    s.used["seed"] = int(v)
    return int(v)


def _init_counts(args, s, net):
    from .stochastic.gillespie import counts_from_fractions

    if args.init is not None:
        return counts_from_fractions(args.init, net)
    return counts_from_fractions(s.run.get("init", [0.1] * net.M), net)


def cmd_gillespie(args) -> int:
    from .stochastic.gillespie import run_ensemble
    from .stochastic.spectrum import power_spectrum

    net, s = _load(args)
    seed = _seed(args, s)
    out = _out_dir(args)
    if args.hysteresis:
        from .bifurcation.hysteresis import hysteresis_sweep

        param = args.param or s.run.get("param", "I1")
        lo, hi = _range(args, s)
        vals = np.arange(lo, hi + 0.5 * args.step, args.step)
        h = hysteresis_sweep(
            net, param, vals, runner="gillespie", dwell=float(s["dwell"]), paths=int(s["paths"]), seed=seed,
            workers=_workers(args),
        )
        head, rows = h.to_rows()
        f = write_csv(out / "hysteresis.csv", head, rows)
        f2 = out / "hysteresis.json"
        f2.write_text(json.dumps({"window": h.window(), "jumps": h.jumps()}, indent=2) + "\n")
        _finish(_manifest(args, net, s, [seed]), out, [f, f2])
        return EXIT_OK
    t_end = float(s["t_end"])
    dt = s["dt"] or t_end / 2000
    log = open(out / "events.bin", "wb") if args.events else None
    try:
        st = run_ensemble(
            net, _init_counts(args, s, net), t_end, int(s["paths"]), seed, dt=dt,
            workers=1 if log else _workers(args), keep_paths=True, event_log=log,
        )
    finally:
        if log:
            log.close()
    f1 = out / "stats.csv"
    st.to_csv(f1)
    tr = float(s["transient"])
    ps = power_spectrum(st.counts[:, st.times >= tr], dt)
    f2 = out / "spectrum.csv"
    ps.to_csv(f2)
    files = [f1, f2] + ([out / "events.bin"] if args.events else [])
    _finish(_manifest(args, net, s, [seed]), out, files)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    from .stochastic.gillespie import run_ensemble
    from .stochastic.spectrum import power_spectrum

    net, s = _load(args)
    seed = _seed(args, s)
    t_end = float(s["t_end"])
    dt = s["dt"] or 0.05
    st = run_ensemble(net, _init_counts(args, s, net), t_end, int(s["paths"]), seed, dt=dt, workers=_workers(args), keep_paths=True)
    ps = power_spectrum(st.counts[:, st.times >= float(s["transient"])], dt)
    out = _out_dir(args)
    f1 = out / "spectrum.csv"
    ps.to_csv(f1)
    f2 = out / "peaks.json"
    f2.write_text(json.dumps({f"pop{i + 1}": ps.peaks(i) for i in range(net.M)}, indent=2) + "\n")
    _finish(_manifest(args, net, s, [seed]), out, [f1, f2])
    return EXIT_OK


def cmd_master(args) -> int:
    from .stochastic.master import master_evolve

    net, s = _load(args)
    t_end = float(s["t_end"])
    times = np.linspace(0.0, t_end, int(args.points))
    sol = master_evolve(net, _init_counts(args, s, net), times)
    M = net.M
    iu = np.triu_indices(M)
    head = ["t", *(f"nu_{i + 1}" for i in range(M)), *(f"C_{i + 1}{j + 1}" for i, j in zip(*iu))]
    mean, second = sol.mean, sol.second
    rows = [[float(t), *map(float, mean[k]), *map(float, second[k][iu])] for k, t in enumerate(times)]
    out = _out_dir(args)
    f = write_csv(out / "master.csv", head, rows)
    _finish(_manifest(args, net, s), out, [f])
    return EXIT_OK


def cmd_langevin(args) -> int:
    from .stochastic.langevin import langevin_run

    net, s = _load(args)
    seed = _seed(args, s)
    nu0 = args.init if args.init is not None else s.run.get("init", [0.1] * net.M)
    st = langevin_run(net, nu0, float(s["t_end"]), float(s["sde_dt"]), int(s["paths"]), seed, dt_out=s["dt"])
    out = _out_dir(args)
    f = out / "stats.csv"
    st.to_csv(f)
    man = _manifest(args, net, s, [seed])
    man.args["flagged_paths"] = st.meta["flagged_paths"]
    _finish(man, out, [f])
    return EXIT_OK


# ----------------------------------------------------------------- parser
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="momentfield", description="Stochastic neural-population models and their moment equations.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="network JSON file or built-in name (model1, model2, onepop, hopf_tanh)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--set", action="append", metavar="NAME=VALUE", help="override a parameter (I1, n, N, w12, ...)")
        p.add_argument("--n", type=float, help="inverse population size n = 1/N")
        p.add_argument("--workers", type=int, help="parallel workers (default: all cores)")
        p.set_defaults(func=func)
        return p

    def moment_opts(p):
        p.add_argument("--variant", help="wc, infinite, bcc, bressloff or rt")

    def stoch_opts(p):
        p.add_argument("--t-end", dest="t_end", type=float)
        p.add_argument("--paths", type=int)
        p.add_argument("--seed", type=int, help="default: $MOMENTFIELD_SEED or 12345")
        p.add_argument("--dt", type=float, help="output grid spacing")
        p.add_argument("--init", type=float, nargs="+", help="initial active fractions")
        p.add_argument("--transient", type=float, help="discard times before this for spectra")

    p = common("integrate", cmd_integrate, "integrate a moment system")
    moment_opts(p)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--n-out", dest="n_out", type=int)
    p.add_argument("--init", type=float, nargs="+")
    p.add_argument("--corr-seed", dest="corr_seed", type=float, help="initial value of every correlation entry")

    p = common("fixed-points", cmd_fixed_points, "locate and classify equilibria")
    moment_opts(p)

    for name, func, help_ in (("sweep", cmd_sweep, "one-parameter equilibrium continuation"),
                              ("codim2", cmd_codim2, "two-parameter continuation in (param, n)")):
        p = common(name, func, help_)
        moment_opts(p)
        p.add_argument("--param")
        p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
        p.add_argument("--h-max", dest="h_max", type=float)
        p.add_argument("--max-steps", dest="max_steps", type=int)
        if name == "codim2":
            p.add_argument("--n-max", dest="n_max", type=float, help="upper bound of n on the curves")

    p = common("cycle", cmd_cycle, "find a limit cycle and its Floquet multipliers")
    moment_opts(p)
    p.add_argument("--init", type=float, nargs="+")
    p.add_argument("--corr-seed", dest="corr_seed", type=float)
    p.add_argument("--transient", type=float)
    p.add_argument("--n-out", dest="n_out", type=int)
    p.add_argument("--param", help="continue the cycle in this parameter")
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--scale", type=float, default=1.0, help="parameter scale in the arclength metric")

    p = common("gillespie", cmd_gillespie, "exact Markov-chain ensemble")
    stoch_opts(p)
    p.add_argument("--events", action="store_true", help="write the binary event log events.bin")
    p.add_argument("--hysteresis", action="store_true", help="up/down parameter sweep instead of a single run")
    p.add_argument("--param")
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--dwell", type=float)

    p = common("spectrum", cmd_spectrum, "ensemble-averaged power spectrum of Markov paths")
    stoch_opts(p)

    p = common("master", cmd_master, "exact master-equation moments for small networks")
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--init", type=float, nargs="+", help="initial active fractions")
    p.add_argument("--points", type=int, default=101)

    p = common("langevin", cmd_langevin, "Euler-Maruyama diffusion approximation")
    stoch_opts(p)
    p.add_argument("--sde-dt", dest="sde_dt", type=float, help="time step")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SizeRefusal as exc:
        print(f"error: {exc} (estimated {exc.n_states} states)", file=sys.stderr)
        return EXIT_SIZE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MomentFieldError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
