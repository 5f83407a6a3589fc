"""Command-line interface.

Subcommands: ``optimize`` (single run), ``sweep-power``, ``sweep-elements``,
``cdf``, ``grad-check``, and ``convergence``. Every command writes its
delimited output plus a ``manifest.json`` run record into ``--out-dir``,
and renders a matching figure alongside. Settings come from built-in
defaults, overridden by a ``key=value`` config file (``--config``),
overridden by flags.
"""

import argparse
import os
import sys

from .channel import ChannelRecipe, PathlossParams, generate, save_channel_set, save_scattering
from .experiments import (
    Architecture,
    ExperimentPlan,
    build_manifest,
    plan_settings,
    run_cdf,
    run_convergence,
    run_element_sweep,
    run_grad_check,
    run_power_sweep,
    write_grad_check_csv,
    write_manifest,
    write_results_csv,
)
from .gradient import GradientMode
from .manifold import random_unitary_symmetric
from .model import SystemDims, mmse_beamformer, uniform_power_beamformer
from .optimizer import SolverConfig, optimize
from .plots import plot_cdf, plot_convergence, plot_element_sweep, plot_power_sweep, plot_trace
from .util import dbm_to_watts

_DEFAULT_ARCHS = "sc,gc:2,gc:4,fc"
_DEFAULT_POWER_GRID = "0,4,8,12,16,20"
_DEFAULT_R_GRID = "8,16,32"

_CONFIG_KEYS = {
    "users": int,
    "antennas": int,
    "elements": str,
    "trials": int,
    "seed": int,
    "solver_seed": int,
    "c0_db": float,
    "d0_m": float,
    "rho": float,
    "d_m": float,
    "user_distance_m": float,
    "n0_dbm": float,
    "carrier_ghz": float,
    "nu": float,
    "epsilon": float,
    "max_iters": int,
    "max_armijo": int,
    "armijo_sigma": float,
    "alpha_init": float,
    "alpha_shrink": float,
    "gradient_mode": str,
    "arch": str,
    "pmax_dbm": str,
}


def _load_config(path):
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SystemExit(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise SystemExit(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _CONFIG_KEYS[key](value)
            except ValueError as exc:
                raise SystemExit(f"{path}:{lineno}: bad value for {key}: {exc}")
    return values


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="bdris",
        description="Design reciprocal block-diagonal surface responses and "
        "reproduce the accompanying experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value settings file")
        p.add_argument("--out-dir", default="bdris-out", help="output directory")
        p.add_argument("--seed", type=int, help="base channel seed")
        p.add_argument("--trials", type=int, help="Monte Carlo trial count")
        p.add_argument(
            "--arch",
            action="append",
            help="architecture sc|gc:<group_size>|fc (repeatable or comma-separated)",
        )
        p.add_argument(
            "--pmax-dbm",
            help="transmit power in dBm (comma-separated grid for sweep-power)",
        )
        p.add_argument(
            "--elements",
            help="element count (comma-separated grid for sweep-elements)",
        )
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        return p

    common(sub.add_parser("optimize", help="one optimization run: trace + matrix files"))
    sub.choices["optimize"].add_argument(
        "--beamformer",
        choices=("uniform", "mmse"),
        default="uniform",
        help="transmit precoder fixed during the design",
    )
    common(sub.add_parser("sweep-power", help="sum-rate vs transmit power"))
    sub.choices["sweep-power"].add_argument(
        "--baselines", action="store_true", help="also record identity/random baselines"
    )
    common(sub.add_parser("sweep-elements", help="sum-rate vs element count"))
    common(sub.add_parser("cdf", help="sum-rate distribution at one power"))
    common(sub.add_parser("grad-check", help="verify closed-form gradients numerically"))
    common(sub.add_parser("convergence", help="per-architecture convergence traces"))
    return parser.parse_args(argv)


def _split_floats(text):
    return tuple(float(part) for part in str(text).split(",") if part.strip())


def _split_ints(text):
    return tuple(int(part) for part in str(text).split(",") if part.strip())


def _resolve(args, cfg):
    """Merge defaults, config file, and flags into one settings namespace."""
    get = lambda key, default: cfg.get(key, default)
    seed = args.seed if args.seed is not None else get("seed", 0)
    solver = SolverConfig(
        nu=get("nu", 1.0),
        epsilon=get("epsilon", 1e-8),
        max_iters=get("max_iters", 8000),
        max_armijo=get("max_armijo", 200),
        armijo_sigma=get("armijo_sigma", 2e-11),
        alpha_init=get("alpha_init", 1.0),
        alpha_shrink=get("alpha_shrink", 0.75),
        gradient_mode=GradientMode(get("gradient_mode", "exact_coupled")),
        seed=get("solver_seed", seed),
    )
    pathloss = PathlossParams(
        c0_db=get("c0_db", -30.0),
        d0_m=get("d0_m", 1.0),
        rho=get("rho", 2.2),
        d_m=get("d_m", 50.0),
    )
    if args.arch:
        arch_text = ",".join(args.arch)
    else:
        arch_text = get("arch", _DEFAULT_ARCHS)
    architectures = tuple(Architecture.parse(a) for a in arch_text.split(",") if a.strip())

    elements_text = args.elements if args.elements is not None else get("elements", None)
    power_text = args.pmax_dbm if args.pmax_dbm is not None else get("pmax_dbm", None)

    user_distance = get("user_distance_m", 1.73)
    return argparse.Namespace(
        users=get("users", 5),
        antennas=get("antennas", 5),
        elements=_split_ints(elements_text) if elements_text is not None else None,
        powers=_split_floats(power_text) if power_text is not None else None,
        trials=args.trials if args.trials is not None else get("trials", 50),
        seed=seed,
        n0_dbm=get("n0_dbm", -80.0),
        user_distance_m=user_distance if user_distance > 0 else None,
        carrier_ghz=get("carrier_ghz", 2.4),
        pathloss=pathloss,
        solver=solver,
        architectures=architectures,
    )


def _make_plan(s):
    return ExperimentPlan(
        architectures=s.architectures,
        p_max_dbm_grid=s.powers if s.powers else _split_floats(_DEFAULT_POWER_GRID),
        r_grid=s.elements if s.elements else _split_ints(_DEFAULT_R_GRID),
        trials=s.trials,
        base_seed=s.seed,
        users=s.users,
        antennas=s.antennas,
        elements=s.elements[0] if s.elements else 32,
        pathloss=s.pathloss,
        n0_dbm=s.n0_dbm,
        user_distance_m=s.user_distance_m,
        carrier_ghz=s.carrier_ghz,
        solver=s.solver,
    )


def _out(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _finalize(args, command, plan, outputs, extra=None):
    settings = plan_settings(plan)
    if extra:
        settings.update(extra)
    write_manifest(_out(args, "manifest.json"), build_manifest(command, settings, outputs))


def _cmd_optimize(args, s):
    plan = _make_plan(s)
    arch = s.architectures[0]
    elements = plan.elements
    p_dbm = s.powers[0] if s.powers else 20.0
    groups = arch.groups(elements)
    dims = SystemDims(s.users, s.antennas, elements, groups)
    recipe = ChannelRecipe(
        dims=dims,
        pathloss=s.pathloss,
        n0_dbm=s.n0_dbm,
        seed=s.seed,
        user_distance_m=s.user_distance_m,
        carrier_ghz=s.carrier_ghz,
    )
    channels = generate(recipe)
    theta0 = random_unitary_symmetric(dims, s.solver.seed)
    budget = dbm_to_watts(p_dbm)
    if args.beamformer == "mmse":
        bf = mmse_beamformer(channels, theta0, budget)
    else:
        bf = uniform_power_beamformer(dims, budget)
    theta, trace = optimize(channels, bf, groups, s.solver, theta0=theta0)

    trace_path = _out(args, "trace.csv")
    trace.to_csv(trace_path)
    theta_path = _out(args, "scattering.cmat")
    save_scattering(theta_path, theta, {"architecture": arch.label, "p_max_dbm": p_dbm})
    channel_path = _out(args, "channels.cmat")
    save_channel_set(channel_path, channels, recipe)
    figure_path = _out(args, "convergence.png")
    plot_trace(trace, figure_path, label=arch.label)
    _finalize(
        args,
        "optimize",
        plan,
        [trace_path, theta_path, channel_path, figure_path],
        extra={"architecture": arch.label, "p_max_dbm": p_dbm, "beamformer": args.beamformer},
    )
    print(
        f"{arch.label}: {trace.iterations} iterations ({trace.termination}), "
        f"sum-rate {trace.metadata['final_sum_rate']:.4f} bits/s/Hz, "
        f"feasible={theta.is_feasible()}"
    )
    return 0


def _cmd_sweep_power(args, s):
    plan = _make_plan(s)
    rows = run_power_sweep(plan, n_jobs=args.jobs, baselines=args.baselines)
    csv_path = _out(args, "results.csv")
    write_results_csv(rows, csv_path)
    figure_path = _out(args, "power_sweep.png")
    plot_power_sweep(rows, figure_path)
    _finalize(args, "sweep-power", plan, [csv_path, figure_path])
    print(f"{len(rows)} rows -> {csv_path}")
    return 0


def _cmd_sweep_elements(args, s):
    plan = _make_plan(s)
    p_dbm = s.powers[0] if s.powers else 20.0
    rows = run_element_sweep(plan, p_max_dbm=p_dbm, n_jobs=args.jobs)
    csv_path = _out(args, "results.csv")
    write_results_csv(rows, csv_path)
    figure_path = _out(args, "element_sweep.png")
    plot_element_sweep(rows, figure_path)
    _finalize(args, "sweep-elements", plan, [csv_path, figure_path], extra={"p_max_dbm": p_dbm})
    print(f"{len(rows)} rows -> {csv_path}")
    return 0


def _cmd_cdf(args, s):
    plan = _make_plan(s)
    p_dbm = s.powers[0] if s.powers else 20.0
    curves, rows = run_cdf(plan, p_dbm, n_jobs=args.jobs)
    csv_path = _out(args, "results.csv")
    write_results_csv(rows, csv_path)
    cdf_path = _out(args, "cdf.csv")
    with open(cdf_path, "w", encoding="utf-8") as fh:
        fh.write("architecture,sum_rate,cdf\n")
        for label, rates in curves.items():
            for rank, rate in enumerate(rates, start=1):
                fh.write(f"{label},{float(rate)!r},{rank / rates.size!r}\n")
    figure_path = _out(args, "cdf.png")
    plot_cdf(curves, figure_path)
    _finalize(args, "cdf", plan, [csv_path, cdf_path, figure_path], extra={"p_max_dbm": p_dbm})
    print(f"{len(rows)} rows -> {csv_path}")
    return 0


def _cmd_grad_check(args, s):
    elements = s.elements[0] if s.elements else 8
    dims_list = []
    for arch in s.architectures:
        groups = arch.groups(elements)
        dims_list.append(SystemDims(s.users, s.antennas, elements, groups))
    seeds = [s.seed + t for t in range(s.trials)]
    rows = run_grad_check(dims_list, seeds)
    csv_path = _out(args, "grad_check.csv")
    write_grad_check_csv(rows, csv_path)
    plan = _make_plan(s)
    _finalize(args, "grad-check", plan, [csv_path])
    worst = max(max(r.groupwise_err, r.coupled_err) for r in rows)
    failed = [r for r in rows if not r.passed]
    print(f"{len(rows)} checks, worst relative error {worst:.3e}, failures: {len(failed)}")
    return 1 if failed else 0


def _cmd_convergence(args, s):
    plan = _make_plan(s)
    p_dbm = s.powers[0] if s.powers else 20.0
    traces = run_convergence(plan, p_dbm)
    outputs = []
    for label, trace in traces.items():
        safe = label.replace("(", "").replace(")", "").lower()
        path = _out(args, f"trace_{safe}.csv")
        trace.to_csv(path)
        outputs.append(path)
        print(f"{label}: {trace.iterations} iterations ({trace.termination})")
    figure_path = _out(args, "convergence.png")
    plot_convergence(traces, figure_path)
    outputs.append(figure_path)
    _finalize(args, "convergence", plan, outputs, extra={"p_max_dbm": p_dbm})
    return 0


_HANDLERS = {
    "optimize": _cmd_optimize,
    "sweep-power": _cmd_sweep_power,
    "sweep-elements": _cmd_sweep_elements,
    "cdf": _cmd_cdf,
    "grad-check": _cmd_grad_check,
    "convergence": _cmd_convergence,
}


def main(argv=None) -> int:
    args = _parse_args(argv)
    cfg = _load_config(args.config) if args.config else {}
    settings = _resolve(args, cfg)
    return _HANDLERS[args.command](args, settings)


if __name__ == "__main__":
    sys.exit(main())
