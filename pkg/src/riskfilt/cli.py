"""Command-line front end.

    riskfilt riccati   --config model.toml [--T 1]
    riskfilt kernels   --config model.toml --horizons 1 2
    riskfilt volterra  --config model.toml [--K kernel.csv]
    riskfilt simulate  --config model.toml --n 10 --seed 1
    riskfilt compare   --config model.toml --n 100000 --seed 1 [--threads 8]
    riskfilt verify-cm --config model.toml --n 100000 --seed 1
    riskfilt example4  [--config model.toml]

Exit codes: 0 success, 1 validation error, 2 condition violation, 3 numeric
failure. Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import example4 as ex
from .cameron_martin import optimal_risk
from .config import config_hash, load_config, load_covariance
from .errors import RiskFiltError, ValidationError
from .export import write_columns, write_csv, write_json, write_kernel
from .filters import extract_kernel, leg_gains, risk_neutral_gains, rs_gains
from .montecarlo import mc_cameron_martin, mc_compare, simulate_paths
from .riccati import check_conditions, solve_backward_Gamma, solve_forward_gamma
from .volterra import solve_riccati_volterra

DEFAULT_SEED = 20240917


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("RISKFILT_THREADS")
    return max(1, int(env)) if env else 1


def _run_value(cfg, args, name, default):
    """CLI flag, else [run] section of the config, else default."""
    v = getattr(args, name, None)
    if v is None:
        v = cfg.section("run").get(name, default)
    return v


def _count(cfg, args, default) -> int:
    n = int(_run_value(cfg, args, "n", default))
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    return n


def _digest(cfg, command, **extra) -> str:
    return config_hash({"command": command, "model": cfg.resolved, **extra})


def _out(args, name):
    return os.path.join(args.out, name)


def cmd_riccati(args):
    cfg = load_config(args.config, T=args.T, N=args.N)
    m = cfg.model
    digest = _digest(cfg, "riccati")
    g = solve_forward_gamma(m).gammaXX
    write_columns(_out(args, "gammaXX.csv"), digest, ["t", "gammaXX"], m.t, g)
    reports = check_conditions(m)
    write_json(_out(args, "conditions.json"), digest,
               {"conditions": [r.__dict__ for r in reports]})
    b = solve_backward_Gamma(m, g)
    write_columns(_out(args, "Gamma.csv"), digest, ["t", "Gamma", "phi1", "phi2"],
                  m.t, b.Gamma, b.phi1, b.phi2)
    return 0


def cmd_kernels(args):
    cfg = load_config(args.config, N=args.N)
    horizons = [float(h) for h in (_run_value(cfg, args, "horizons", None) or [cfg.model.T])]
    dt = cfg.model.grid.dt
    Tmax = max(horizons)
    cfg_max = load_config(args.config, T=Tmax, N=int(round(Tmax / dt)))
    m = cfg_max.model
    digest = _digest(cfg_max, "kernels", horizons=horizons, stride=args.stride)
    g = solve_forward_gamma(m).gammaXX
    for T in horizons:
        write_kernel(_out(args, f"kernel_leg_T{T:g}.csv"), digest,
                     extract_kernel(leg_gains(m, T, g)), args.stride)
    write_kernel(_out(args, "kernel_rs.csv"), digest, extract_kernel(rs_gains(m, g)), args.stride)
    return 0


def cmd_volterra(args):
    cfg = load_config(args.config, N=args.N)
    cov, desc = load_covariance(cfg, args.K)
    digest = _digest(cfg, "volterra", covariance=desc, stride=args.stride)
    sol = solve_riccati_volterra(cov, cfg.model)
    write_kernel(_out(args, "gamma.csv"), digest, sol.gamma, args.stride)
    write_columns(_out(args, "gamma_diag.csv"), digest, ["t", "gamma"], cfg.model.t, sol.diag)
    return 0


def cmd_simulate(args):
    cfg = load_config(args.config, N=args.N)
    seed = int(_run_value(cfg, args, "seed", DEFAULT_SEED))
    n = _count(cfg, args, 10)
    digest = _digest(cfg, "simulate", seed=seed, n=n, zero=args.zero)
    t = cfg.model.t

    def rows():
        for k, b in enumerate(simulate_paths(cfg.model, n, seed, zero=args.zero)):
            for i in range(t.size):
                yield (k, t[i], b.X[i], b.Y[i])

    write_csv(_out(args, "paths.csv"), digest, ["path", "t", "X", "Y"], rows())
    return 0


def _strategies(m):
    return [("LEG", leg_gains(m)), ("RS", rs_gains(m)), ("risk-neutral", risk_neutral_gains(m))]


def cmd_compare(args):
    cfg = load_config(args.config, N=args.N)
    m = cfg.model
    seed = int(_run_value(cfg, args, "seed", DEFAULT_SEED))
    n = _count(cfg, args, 10000)
    digest = _digest(cfg, "compare", seed=seed, n=n)
    res = mc_compare(m, _strategies(m), n, seed, threads=_threads(args), keep_paths=args.per_path)
    summary = [{"strategy": k, "mean": e.mean, "stderr": e.stderr, "n": e.n, "seed": seed}
               for k, e in res.estimates.items()]
    paired = [{"strategy": f"{a} - {b}", "mean": e.mean, "stderr": e.stderr, "n": e.n,
               "seed": seed} for (a, b), e in res.paired.items()]
    try:
        opt = optimal_risk(m)
    except RiskFiltError:
        opt = None
    write_json(_out(args, "compare.json"), digest,
               {"strategies": summary, "paired": paired, "optimal_risk": opt,
                "tail_weight": {k: e.tail_weight for k, e in res.estimates.items()}})
    write_csv(_out(args, "compare.csv"), digest, ["strategy", "mean", "stderr", "n", "seed"],
              [(d["strategy"], d["mean"], d["stderr"], d["n"], d["seed"]) for d in summary + paired])
    if args.per_path:
        names = list(res.per_path)
        write_columns(_out(args, "compare_paths.csv"), digest, ["path"] + names,
                      np.arange(n), *(res.per_path[k] for k in names))
    return 0


def cmd_verify_cm(args):
    cfg = load_config(args.config, N=args.N)
    seed = int(_run_value(cfg, args, "seed", DEFAULT_SEED))
    n = _count(cfg, args, 10000)
    digest = _digest(cfg, "verify-cm", seed=seed, n=n)
    chk = mc_cameron_martin(cfg.model, n, seed, threads=_threads(args))
    ok = chk.gap <= 3 * chk.pooled_stderr
    write_json(_out(args, "cameron_martin.json"), digest, {
        "lhs": chk.lhs.as_dict(), "rhs": chk.rhs.as_dict(), "paired_difference": chk.diff.as_dict(),
        "gap": chk.gap, "pooled_stderr": chk.pooled_stderr, "within_3_stderr": ok, "seed": seed,
    })
    return 0


def _oracle_summary(N: int) -> dict:
    m = ex.example_model(1.0, N)
    t = m.t
    g = solve_forward_gamma(m).gammaXX
    b = solve_backward_Gamma(m, g)
    H = extract_kernel(leg_gains(m, gammaXX=g)).values
    Ti, Sj = np.meshgrid(t, t, indexing="ij")
    tri = Sj <= Ti
    return {
        "N": N,
        "max_abs_err_gammaXX": float(np.max(np.abs(g - ex.gammaXX(t)))),
        "max_abs_err_Gamma": float(np.max(np.abs(b.Gamma - ex.Gamma(1.0, t)))),
        "max_abs_err_phi1": float(np.max(np.abs(b.phi1 - ex.phi1(1.0, t)))),
        "max_abs_err_phi2": float(np.max(np.abs(b.phi2 - ex.phi2(1.0, t)))),
        "max_abs_Gamma_direct_vs_linearized": float(np.max(np.abs(b.Gamma - b.phi2 / b.phi1))),
        "max_abs_err_Hbar": float(np.max(np.abs(H - ex.Hbar(1.0, Ti, Sj))[tri])),
        "optimal_risk": optimal_risk(m, gammaXX=g),
    }


def cmd_example4(args):
    N = args.N
    if N is None and args.config:
        N = load_config(args.config).model.grid.N
    N = N or 2000
    digest = config_hash({"command": "example4", "N": N})
    rep = ex.discrepancy_report(N)
    header = f"# riskfilt config-sha256={digest}"
    rep.write(args.out, header)
    write_json(_out(args, "example4_oracles.json"), digest, {
        **_oracle_summary(N),
        "hbar_horizon_gap": rep.hbar_gap,
        "rs_bit_identical_across_T": rep.rs_bit_identical,
        "max_hhat_printed_deviation": rep.max_hhat_printed_dev,
        "singular_max_discrepancy": rep.singular_max_discrepancy,
    })
    return 0


COMMANDS = {
    "riccati": cmd_riccati, "kernels": cmd_kernels, "volterra": cmd_volterra,
    "simulate": cmd_simulate, "compare": cmd_compare, "verify-cm": cmd_verify_cm,
    "example4": cmd_example4,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riskfilt", description="LEG and RS filtering toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "example4", help="TOML model file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--N", type=int, default=None, help="override grid.N")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (fallback: RISKFILT_THREADS)")
        if name == "riccati":
            sp.add_argument("--T", type=float, default=None, help="override the horizon")
        if name in ("simulate", "compare", "verify-cm"):
            sp.add_argument("--seed", type=int, default=None)
            sp.add_argument("--n", type=int, default=None, help="number of paths")
        if name in ("kernels", "volterra"):
            sp.add_argument("--stride", type=int, default=1, help="export every k-th node")
        if name == "kernels":
            sp.add_argument("--horizons", type=float, nargs="+", default=None)
        if name == "volterra":
            sp.add_argument("--K", default=None, help="t,s,value CSV of the covariance")
        if name == "simulate":
            sp.add_argument("--zero", action="store_true", help="zero increments (diagnostic)")
        if name == "compare":
            sp.add_argument("--per-path", action="store_true", help="also write per-path costs")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except RiskFiltError as exc:
        err = {"error": exc.kind, "message": str(exc)}
        if getattr(exc, "key", None):
            err["key"] = exc.key
        print(json.dumps(err), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
