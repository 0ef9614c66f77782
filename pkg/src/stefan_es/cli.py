"""Command-line entry point: scenarios, validation, sweeps, analysis checks.

Exit codes: 0 success, 1 any check or scenario failure, 2 usage or
configuration errors.  All outputs are plain CSV / key = value text with no
timestamps, so identical invocations produce identical files.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import backstepping, controller, dither, harness, oracles, plant


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stefan-es",
        description="Extremum seeking through moving-boundary diffusion "
                    "actuation dynamics: simulator and analysis checks.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", dest="config_path", default=None,
                       help="config file (section.key = value lines)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config key; repeatable, last wins")
        p.add_argument("--out", dest="out_dir", default="out",
                       help="output directory (default: out)")
        p.add_argument("--scenario", dest="scenario", default=None,
                       choices=harness.SCENARIOS,
                       help="shorthand for --set sim.scenario=...")

    run = sub.add_parser("run", help="run one scenario, write trace and metrics")
    common(run)
    validate = sub.add_parser("validate", help="run the oracle suite, print pass/fail")
    common(validate)
    sweep = sub.add_parser("sweep", help="vary one key over a list of values")
    sweep.add_argument("vary", metavar="SECTION.KEY=V1,V2,...",
                       help="key to vary and its comma-separated values")
    common(sweep)
    tcheck = sub.add_parser("transform-check",
                            help="transform round-trip and kernel residual report")
    common(tcheck)
    dexp = sub.add_parser("dither-export", help="sample the probing signal to CSV")
    common(dexp)
    return parser


def _load(args) -> harness.SimConfig:
    text = ""
    if args.config_path is not None:
        text = Path(args.config_path).read_text(encoding="utf-8")
    overrides = []
    if args.scenario is not None:
        overrides.append(f"sim.scenario = {args.scenario}")
    overrides.extend(args.overrides)
    return harness.load_config(text, overrides)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_run(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    try:
        trace, metrics = harness.run_scenario(cfg)
    except plant.IntegrationFailureError as exc:
        print(f"FAIL: {exc}")
        return 1
    harness.write_trace(trace, str(out / "trace.csv"))
    block = harness.metrics_block(metrics)
    (out / "metrics.txt").write_text(block, encoding="utf-8")
    sys.stdout.write(block)
    print(f"trace: {out / 'trace.csv'} ({len(trace)} rows)")
    return 0


def _check_rows():
    """The oracle suite: (name, passed, detail) triples."""
    rows = []
    dcfg = dither.DitherConfig()
    tight = replace(dcfg, term_tol=1e-13)

    lam = oracles.similarity_lambda(1.0)
    resid = abs(lam * math.exp(lam ** 2) * math.erf(lam) - 1.0 / math.sqrt(math.pi))
    rows.append(("similarity-root-residual", resid <= 1e-12, f"residual {resid:.2e}"))
    rows.append(("similarity-root-value", abs(lam - 0.620) <= 0.005, f"lambda {lam:.4f}"))

    pcfg = plant.PlantConfig(T_0=101.0, T_m=100.0, grid_n=200,
                             bc_mode=plant.BC_DIRICHLET_TEMPERATURE)
    err200 = _similarity_error(pcfg)
    rows.append(("plant-similarity-1pct", err200 <= 0.01, f"rel err {err200:.2e}"))
    err100 = _similarity_error(replace(pcfg, grid_n=100))
    ratio = err100 / err200 if err200 > 0 else math.inf
    rows.append(("plant-convergence-order", 3.0 <= ratio <= 5.0, f"ratio {ratio:.2f}"))

    ts = np.linspace(0.0, 2.0, 41)
    anchor = max(abs(dither.beta_eval(dcfg, dither.xi(dcfg, t), t)) for t in ts)
    rows.append(("dither-boundary-anchor", anchor <= 1e-8, f"max {anchor:.2e}"))
    flux_dev = _flux_anchor_deviation(tight, ts)
    rows.append(("dither-flux-anchor", flux_dev <= 1e-6, f"max {flux_dev:.2e}"))

    # FD probe at 3e-5 steps; the 1e-4 default would contribute its own
    # h^2 bias of a few 1e-6 from the field's harmonic content
    pts = [(x, t) for x in np.linspace(0.0, 0.5, 6) for t in np.linspace(0.05, 1.0, 11)]
    resid = oracles.fd_residual(lambda x, t: dither.beta_eval(tight, x, t), pts,
                                steps=(3e-5, 3e-5))
    rows.append(("dither-pde-residual", resid <= 1e-6, f"max {resid:.2e}"))

    rng = np.random.default_rng(7)
    dev = 0.0
    for _ in range(50):
        t = rng.uniform(0.0, 2.0)
        x = dither.xi(dcfg, t) + rng.uniform(-0.3, 0.3)
        prof = float(dither.beta_profile(dcfg, np.array([x]), t)[0])
        dev = max(dev, abs(prof - dither.beta_eval(dcfg, x, t)))
    rows.append(("dither-route-agreement", dev <= 1e-8, f"max {dev:.2e}"))

    spec = backstepping.KernelSpec(k_bar=0.1, s_star=0.8)
    resid = _kernel_ode_residual(spec)
    rows.append(("kernel-ode-residual", resid <= 1e-6, f"max {resid:.2e}"))
    rt = _round_trip_error(spec, grid_n=200)
    rows.append(("transform-round-trip", rt <= 1e-8, f"rel err {rt:.2e}"))

    cfg = replace(harness.default_config(), t_end=12.0,
                  plant=plant.PlantConfig(grid_n=60))
    report = harness.predictor_equivalence_report(cfg, n_times=40)
    pred_ok = max(report.max_predictor_dev, report.max_filter_dev) <= 1e-6
    rows.append(("predictor-consistency", pred_ok,
                 f"pred {report.max_predictor_dev:.2e} filt {report.max_filter_dev:.2e}"))
    return rows


def _similarity_error(pcfg: plant.PlantConfig) -> float:
    cfg = replace(harness.default_config(), plant=pcfg, t_end=1.0,
                  scenario=harness.SCENARIO_DIRICHLET_ORACLE)
    trace, _ = harness.run_scenario(cfg)
    spec = harness.similarity_spec_for(pcfg)
    s_exact = oracles.similarity_interface(spec, trace[-1].t, pcfg.alpha)
    return abs(trace[-1].s - s_exact) / s_exact


def _flux_anchor_deviation(dcfg: dither.DitherConfig, ts) -> float:
    h = 1e-5
    worst = 0.0
    for t in ts:
        x0 = dither.xi(dcfg, t)
        slope = (dither.beta_eval(dcfg, x0 + h, t) - dither.beta_eval(dcfg, x0 - h, t)) / (2 * h)
        worst = max(worst, abs(slope + dcfg.a * dcfg.omega * math.cos(dcfg.omega * t)))
    return worst


def _kernel_ode_residual(spec: backstepping.KernelSpec) -> float:
    rng = np.random.default_rng(3)
    h = 1e-4
    worst = 0.0
    for x in rng.uniform(-1.0, 1.0, 100):
        second = (backstepping.phi(x + h, spec) - 2.0 * backstepping.phi(x, spec)
                  + backstepping.phi(x - h, spec)) / (h * h)
        worst = max(worst, abs(second + spec.k_bar * backstepping.phi(x, spec)))
    return worst


def _round_trip_error(spec: backstepping.KernelSpec, grid_n: int) -> float:
    rng = np.random.default_rng(11)
    s = 0.8
    eta = np.linspace(0.0, 1.0, grid_n + 1)
    worst = 0.0
    for _ in range(5):
        u = (1.0 - eta) * (rng.normal() + rng.normal() * np.sin(math.pi * eta)
                           + rng.normal() * np.cos(2.0 * math.pi * eta))
        v_theta = rng.normal()
        w = backstepping.forward_transform(u, v_theta, s, spec)
        back = backstepping.inverse_transform(w, v_theta, s, spec)
        worst = max(worst, float(np.linalg.norm(back - u) / np.linalg.norm(u)))
    return worst


def _print_table(rows) -> bool:
    width = max(len(name) for name, _, _ in rows)
    ok = True
    for name, passed, detail in rows:
        ok &= passed
        print(f"{name:<{width}}  {'PASS' if passed else 'FAIL'}  {detail}")
    return ok


def _cmd_validate(args) -> int:
    ok = _print_table(_check_rows())
    print("all checks passed" if ok else "CHECK FAILURES PRESENT")
    return 0 if ok else 1


def _cmd_transform_check(args) -> int:
    spec = backstepping.KernelSpec(k_bar=0.1, s_star=0.8)
    rows = []
    for n in (50, 100, 200):
        err = _round_trip_error(spec, n)
        rows.append((f"round-trip-n{n}", err <= 1e-8, f"rel err {err:.2e}"))
    resid = _kernel_ode_residual(spec)
    rows.append(("kernel-ode-residual", resid <= 1e-6, f"max {resid:.2e}"))
    m, n_const = backstepping.decay_constants(spec)
    rows.append(("decay-constants", (m, n_const) == (0.1, 1.0), f"(m, n) = ({m}, {n_const})"))
    return 0 if _print_table(rows) else 1


def _cmd_sweep(args) -> int:
    key, _, raw_values = args.vary.partition("=")
    key = key.strip()
    values = [v.strip() for v in raw_values.split(",") if v.strip()]
    if not values:
        print(f"sweep needs SECTION.KEY=V1,V2,..., got {args.vary!r}")
        return 2
    out = _out_dir(args)
    text = ""
    if args.config_path is not None:
        text = Path(args.config_path).read_text(encoding="utf-8")
    summary_rows = []
    failed = False
    for value in values:
        overrides = []
        if args.scenario is not None:
            overrides.append(f"sim.scenario = {args.scenario}")
        overrides.extend(args.overrides)
        overrides.append(f"{key} = {value}")
        cfg = harness.load_config(text, overrides)
        tag = f"{key.replace('.', '_')}_{value.replace('.', 'd')}"
        try:
            trace, metrics = harness.run_scenario(cfg)
        except plant.IntegrationFailureError as exc:
            print(f"{key}={value}: FAIL ({exc})")
            failed = True
            continue
        harness.write_trace(trace, str(out / f"trace_{tag}.csv"))
        summary_rows.append((value, metrics))
        print(f"{key}={value}: s_residual_mean={metrics.s_residual_mean:.6g}")
    with open(out / "sweep_summary.csv", "w", newline="\n") as handle:
        handle.write(f"{key},s_residual_max,s_residual_mean,y_residual_max,"
                     "y_residual_mean,u_residual_mean,dither_amplitude_fit\n")
        for value, m in summary_rows:
            handle.write(f"{value},{m.s_residual_max:.12g},{m.s_residual_mean:.12g},"
                         f"{m.y_residual_max:.12g},{m.y_residual_mean:.12g},"
                         f"{m.u_residual_mean:.12g},{m.dither_amplitude_fit:.12g}\n")
    print(f"summary: {out / 'sweep_summary.csv'}")
    return 1 if failed else 0


def _cmd_dither_export(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    dt = cfg.controller.dt_ctrl
    n = int(round(cfg.t_end / dt))
    with open(out / "dither.csv", "w", newline="\n") as handle:
        handle.write("t,S\n")
        for k in range(n + 1):
            t = k * dt
            handle.write(f"{t:.12g},{dither.dither_signal(cfg.dither, t):.12g}\n")
    print(f"wrote {out / 'dither.csv'} ({n + 1} samples)")
    return 0


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    handlers = {
        "run": _cmd_run,
        "validate": _cmd_validate,
        "sweep": _cmd_sweep,
        "transform-check": _cmd_transform_check,
        "dither-export": _cmd_dither_export,
    }
    try:
        return handlers[args.verb](args)
    except (plant.ConfigurationError, harness.ParseError, FileNotFoundError) as exc:
        print(f"config error: {exc}")
        return 2


def main(argv=None) -> None:
    sys.exit(dispatch(argv if argv is not None else sys.argv[1:]))


if __name__ == "__main__":
    main()
