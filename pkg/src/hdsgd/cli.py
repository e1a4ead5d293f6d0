"""Command line interface.

Subcommands: run, compare, sweep-d, sweep-gamma, threshold, selftest.
Exit codes: 0 success, 2 when a run stopped early at the domain boundary,
1 on any error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import thresholds
from .errors import HdsgdError
from .harness import (RunConfig, compare, crossing_gamma, parse_config, run,
                      sweep_d, sweep_gamma, write_sweep_d_csv,
                      write_sweep_gamma_csv)


def _load_config(args) -> RunConfig:
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    for item in args.set or []:
        if "=" not in item:
            raise HdsgdError(f"--set needs key=value, got {item!r}")
        text += "\n" + item
    return parse_config(text)


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    if args.out:
        cfg.out = args.out
    traj, code = run(cfg)
    print(f"rows={len(traj)} final_t={traj.t[-1]:.6g} "
          f"final_risk={traj.risk[-1]:.6g} exited={traj.exited_domain}")
    if cfg.out:
        print(f"wrote {cfg.out}")
    return code


def _cmd_compare(args) -> int:
    ref_cfg = _load_config_from(args.reference)
    cfgs = [_load_config_from(path) for path in args.config]
    report = compare(cfgs, ref_cfg)
    if args.out:
        report.to_csv(args.out)
        print(f"wrote {args.out}")
    print(json.dumps(report.summary(), indent=2, sort_keys=True))
    return 0


def _load_config_from(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def _cmd_sweep_d(args) -> int:
    cfg = _load_config(args)
    d_list = [int(s) for s in args.d_list.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    rows, medians = sweep_d(cfg, d_list, seeds, stat=args.stat)
    if args.out:
        write_sweep_d_csv(rows, args.out)
        print(f"wrote {args.out}")
    print(json.dumps({"median_sup_dev": medians}, indent=2))
    return 0


def _cmd_sweep_gamma(args) -> int:
    cfg = _load_config(args)
    gammas = [float(s) for s in args.gammas.split(",")] if args.gammas else []
    rows = sweep_gamma(cfg, gammas)
    if args.out:
        write_sweep_gamma_csv(rows, args.out)
        print(f"wrote {args.out}")
    cross = crossing_gamma(rows)
    print(json.dumps({
        "rows": [{"gamma": r.gamma, "d2_final": r.d2_final} for r in rows],
        "crossing_gamma": cross,
    }, indent=2))
    return 0


def _cmd_threshold(args) -> int:
    if args.kind == "descent":
        value = thresholds.descent_threshold_q(args.q, args.avg_eig)
        print(json.dumps({"descent_threshold": value}))
    elif args.kind == "rsi-global":
        cert = thresholds.rate_rsi_global(args.mu, args.L, args.avg_eig,
                                          args.lam_min, args.zeta)
        print(json.dumps({"gamma": cert.gamma, "rate_a": cert.rate_a,
                          "regime": cert.regime}))
    elif args.kind == "rsi-local":
        cert = thresholds.rate_rsi_local(
            args.mu, args.theta, args.L, args.avg_eig, args.lam_min,
            args.opnorm, args.norm_init, args.norm_star, args.zeta)
        if cert is None:
            print(json.dumps({"feasible": False}))
        else:
            print(json.dumps({"feasible": True, "gamma": cert.gamma,
                              "rate_a": cert.rate_a,
                              "zeta0": cert.inputs["zeta0"]}))
    elif args.kind == "pr-escape":
        from .overlap import OverlapMatrix
        b = OverlapMatrix.from_blocks([[args.b11]], [[0.0]], [[args.b22]])
        print(json.dumps({"escape": thresholds.pr_escape_ok(b),
                          "sqrt_ratio": (args.b22 / args.b11) ** 0.5}))
    elif args.kind == "pr-saddle":
        beta = thresholds.pr_saddle_beta(args.gamma)
        roots = thresholds.pr_saddle_ratio(beta)
        if roots is None:
            print(json.dumps({"beta": beta, "real_saddle": False}))
        else:
            print(json.dumps({"beta": beta, "real_saddle": True,
                              "pi_sqrt_ratio_roots": list(roots)}))
    else:
        raise HdsgdError(f"unknown threshold kind {args.kind!r}")
    return 0


def _cmd_selftest(args) -> int:
    from .models import make_model
    from .overlap import OverlapMatrix
    from .ode import init_overlaps, integrate_ode
    from .spectrum import align_groups, identity_spectrum

    ok = True

    def check(name: str, passed: bool) -> None:
        nonlocal ok
        print(f"[{'PASS' if passed else 'FAIL'}] {name}")
        ok = ok and passed

    ls = make_model("least_squares", {})
    b = OverlapMatrix.from_blocks([[1.0]], [[0.0]], [[1.0]])
    check("least squares risk closed form", abs(ls.h(b) - 1.0) < 1e-12)

    pr = make_model("phase_retrieval", {})
    check("phase retrieval risk closed form",
          abs(pr.h(b) - (1.0 - 2.0 / np.pi)) < 1e-12)

    spec, rows = align_groups(identity_spectrum(16), np.full((16, 2), 0.25))
    init = init_overlaps(rows, 16, mults=spec.mults)
    t1 = integrate_ode(ls, spec, init, 0.5, 1.0, 1e-3)
    t2 = integrate_ode(ls, spec, init, 0.5, 1.0, 1e-3)
    check("deterministic replay", np.array_equal(t1.risk, t2.risk))

    b12 = t1.tr_B12
    target = 1.0 + (rows[0, 0] * rows[0, 1] * 16 - 1.0) * np.exp(-0.5 * t1.t)
    check("analytic cross-overlap decay", float(np.max(np.abs(b12 - target))) < 1e-8)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdsgd",
        description="Deterministic equivalents for streaming SGD: solvers, "
                    "simulators, sweeps, and threshold calculators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured run")
    p_run.add_argument("--config", help="config file path")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override or supply a config entry")
    p_run.add_argument("--out", help="trajectory CSV path")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="deviations between runs")
    p_cmp.add_argument("--config", action="append", required=True,
                       help="candidate config file (repeatable)")
    p_cmp.add_argument("--reference", required=True, help="reference config file")
    p_cmp.add_argument("--out", help="deviation CSV path")
    p_cmp.set_defaults(func=_cmd_compare)

    p_sd = sub.add_parser("sweep-d", help="SGD-vs-ODE deviation across d")
    p_sd.add_argument("--config", help="base config file")
    p_sd.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_sd.add_argument("--d-list", required=True, help="comma separated d values")
    p_sd.add_argument("--seeds", required=True, help="comma separated seeds")
    p_sd.add_argument("--stat", default="risk",
                      help="trajectory column or `kl` (binary logistic)")
    p_sd.add_argument("--out", help="table CSV path")
    p_sd.set_defaults(func=_cmd_sweep_d)

    p_sg = sub.add_parser("sweep-gamma", help="final D^2 across learning rates")
    p_sg.add_argument("--config", help="base config file")
    p_sg.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_sg.add_argument("--gammas", required=True, help="comma separated rates")
    p_sg.add_argument("--out", help="table CSV path")
    p_sg.set_defaults(func=_cmd_sweep_gamma)

    p_th = sub.add_parser("threshold", help="closed-form rate calculators")
    p_th.add_argument("kind", choices=["descent", "rsi-global", "rsi-local",
                                       "pr-saddle", "pr-escape"])
    p_th.add_argument("--q", type=float, default=0.5)
    p_th.add_argument("--avg-eig", type=float, default=1.0)
    p_th.add_argument("--mu", type=float, default=1.0)
    p_th.add_argument("--L", type=float, default=1.0)
    p_th.add_argument("--theta", type=float, default=1.0)
    p_th.add_argument("--lam-min", type=float, default=1.0)
    p_th.add_argument("--opnorm", type=float, default=1.0)
    p_th.add_argument("--norm-init", type=float, default=1.0)
    p_th.add_argument("--norm-star", type=float, default=1.0)
    p_th.add_argument("--zeta", type=float, default=0.5)
    p_th.add_argument("--gamma", type=float, default=1.0)
    p_th.add_argument("--b11", type=float, default=1.0)
    p_th.add_argument("--b22", type=float, default=1.0)
    p_th.set_defaults(func=_cmd_threshold)

    p_st = sub.add_parser("selftest", help="quick internal consistency checks")
    p_st.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HdsgdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
