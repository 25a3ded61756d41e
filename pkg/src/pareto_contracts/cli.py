"""
Command line front end.

Exit codes: 0 success, 2 configuration error, 3 mode error, 4 I/O error,
5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional

import numpy as np

from . import lq_model as lq
from .bsde_engine import TimeGrid, ValueProcessSpec, contract_from_value, forward_value_process
from .config import ConfigError, ModelConfig, load_config
from .mc_verify import (certify_nash, certify_pareto, estimate, mc_agent_utility,
                        mc_principal_utility, simulate_paths)
from .moop_core import (check_bmo_condition, check_growth_conditions, condition_a1,
                        lemma_b1_constant, lq_general_model, lq_growth_constants)

EXIT_OK, EXIT_CONFIG, EXIT_MODE, EXIT_IO, EXIT_VERIFY = 0, 2, 3, 4, 5
# the cooperative principal payout is deterministic, so its SE is ~0 and
# rounding in the mean needs an absolute allowance
MC_ABS_FLOOR = 1e-12
VALUE_PROCESS_TOL = 1e-10
VALUE_PROCESS_PATHS = 1000


class ModeError(ValueError):
    pass


def _plain(obj):
    """Convert numpy containers and scalars to JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# --- commands ------------------------------------------------------------------------------

def cmd_solve(cfg: ModelConfig, mode: str, lam: Optional[float] = None,
              g_only: bool = False) -> dict:
    p = cfg.params
    if mode == "pareto":
        if lam is None:
            raise ModeError("mode pareto needs --lambda")
        if lam == 0.5:
            raise ModeError("lambda = 0.5 is the cooperative case: use --mode cooperative")
        if not 0 < lam < 1:
            raise ModeError("--lambda must lie in (0, 1)")
    elif lam is not None:
        raise ModeError(f"--lambda is only meaningful with --mode pareto, not {mode}")
    if p.r_p == 0 and not g_only:
        raise ModeError("r_p = 0: the exponential value degenerates; pass --g-only")
    report = lq.solve(mode, p, lam, principal_value=not g_only)
    out = report.to_dict()
    if out["principal_value"] is not None:
        # reservation utilities are paid out of the principal's profit
        out["principal_value"] *= math.exp(p.r_p * sum(p.r0))
    return out


def figure1_csv(cfg: ModelConfig, r_list=None, grid_size=None) -> str:
    r_list = cfg.run.r_list if r_list is None else r_list
    grid_size = cfg.run.grid_size if grid_size is None else grid_size
    table = lq.figure1_data(cfg.params, r_list, grid_size)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["series", "x", "y"])
    for series, x, y in table.rows():
        writer.writerow([series, f"{x:.12g}", f"{y:.12g}"])
    return buf.getvalue()


def cmd_lambda_set(cfg: ModelConfig) -> dict:
    p = cfg.params
    if p.r_p == 0:
        raise ModeError("lambda-set needs r_p > 0")
    intervals = lq.lambda_improvement_set(p, tol=cfg.run.lambda_tol)
    return {
        "r_p": p.r_p,
        "g_na_value": lq.g_na_at_optimum(p),
        "intervals": [list(iv) for iv in intervals],
        "g_at_endpoints": [[lq.g_pareto_value(lo, p), lq.g_pareto_value(hi, p)]
                           for lo, hi in intervals],
        "g_cooperative": lq.cooperative_value(p),
    }


def cmd_nash_pareto(cfg: ModelConfig) -> dict:
    p = cfg.params
    lam, ratio_1, ratio_2 = lq.nash_pareto_candidate(p)
    return {
        "lambda_star": lq.nash_pareto_check(p),
        "candidate": lam,
        "ratios": [ratio_1, ratio_2],
        "residuals": list(lq.nash_pareto_residuals(lam, p)),
        "z_nash": lq.z_nash(p),
    }


def _check(name, passed, **fields) -> dict:
    return {"name": name, "status": "PASS" if passed else "FAIL", **fields}


def _mc_checks(label, report, cfg: ModelConfig, grid: TimeGrid):
    p, run = cfg.params, cfg.run
    a = np.asarray(report.a_star)
    ens = simulate_paths(a, p, grid, run.paths, seed=run.seed)
    checks = []

    mean_drift = p.horizon * lq.drift_lq(a)
    for j in range(2):
        est = estimate(ens.x_terminal[:, j])
        checks.append(_check(f"{label}.terminal_mean_project_{j + 1}",
                             est.within(mean_drift[j], run.agent_n_se),
                             estimate=est.mean, std_error=est.std_error, target=mean_drift[j],
                             tolerance=f"{run.agent_n_se:g} SE"))
    for i, c in enumerate(report.contracts):
        est = mc_agent_utility(ens, c, i, a, p)
        checks.append(_check(f"{label}.agent_{i + 1}_utility", est.within(p.r0[i], run.agent_n_se),
                             estimate=est.mean, std_error=est.std_error, target=p.r0[i],
                             tolerance=f"{run.agent_n_se:g} SE"))
    if p.r_p > 0:
        target = -math.exp(-p.r_p * (p.horizon * report.g_value - sum(p.r0)))
        est = mc_principal_utility(ens, report.contracts, p)
        checks.append(_check(f"{label}.principal_utility",
                             est.within(target, run.principal_n_se, MC_ABS_FLOOR),
                             estimate=est.mean, std_error=est.std_error, target=target,
                             tolerance=f"{run.principal_n_se:g} SE + {MC_ABS_FLOOR:g}"))

    # value process built forward from the sensitivities reproduces the contract
    n = min(VALUE_PROCESS_PATHS, run.paths)
    z = np.asarray(report.z_star)
    costs = lq.cost_lq(a, p)
    for i, c in enumerate(report.contracts):
        spec = ValueProcessSpec(p.r0[i], z[:, i], lambda t, x, zz, ci=float(costs[i]): ci)
        y = forward_value_process(spec, grid, ens.increments[:n])
        pay = contract_from_value(y[:, -1], ens.x_terminal[:n], i, p)
        err = float(np.max(np.abs(pay - c.pay(ens.x_terminal[:n]))))
        checks.append(_check(f"{label}.value_process_contract_agent_{i + 1}",
                             err <= VALUE_PROCESS_TOL, estimate=err, target=0.0,
                             tolerance=VALUE_PROCESS_TOL))
    return checks


def cmd_verify(cfg: ModelConfig) -> dict:
    p, run = cfg.params, cfg.run
    grid = TimeGrid(p.horizon, run.steps)
    coop = lq.solve("cooperative", p, principal_value=False)
    nash = lq.solve("nash", p, principal_value=False)
    checks = _mc_checks("cooperative", coop, cfg, grid) + _mc_checks("nash", nash, cfg, grid)

    for lam in run.certify_lambdas:
        z = lq.z_pareto(lam, p)
        a = lq.a_star_lq(z, lam, p)
        cert = certify_pareto(a, lq.contracts_pareto(lam, p), p, run.grid_resolution)
        checks.append(_check(f"pareto_certificate.lambda={lam:.6g}", cert.passed,
                             certificate=cert.to_dict(), tolerance=run.grid_resolution))
    cert = certify_nash(nash.a_star, nash.contracts, p, run.grid_resolution)
    checks.append(_check("nash_certificate", cert.passed, certificate=cert.to_dict(),
                         tolerance=run.grid_resolution))

    lam_star = lq.nash_pareto_check(p)
    cert = certify_pareto(nash.a_star, nash.contracts, p, run.grid_resolution)
    if lam_star is not None:
        checks.append(_check("nash_effort_pareto_certificate", cert.passed,
                             lambda_star=lam_star, certificate=cert.to_dict()))
    info = {"nash_effort_pareto_dominated": not cert.passed, "lambda_star": lam_star,
            "nash_effort_certificate": cert.to_dict()}
    return {
        "all_passed": all(c["status"] == "PASS" for c in checks),
        "checks": checks,
        "info": info,
        "run": {"paths": run.paths, "steps": run.steps, "seed": run.seed,
                "grid_resolution": run.grid_resolution},
    }


def cmd_check_assumptions(cfg: ModelConfig) -> dict:
    gc = cfg.growth
    if gc is None:
        raise ConfigError("check-assumptions needs a 'growth' block in the config")
    n = 2
    out = {}
    try:
        r1, r2, holds = condition_a1(gc)
        out["condition_a1"] = {"holds": holds, "ratios": [r1, r2], "margin": 2 - max(r1, r2)}
    except ValueError as exc:
        out["condition_a1"] = {"holds": False, "error": str(exc)}
    try:
        c_f = lemma_b1_constant(gc, n)
        out["c_f"] = c_f
        bmo = gc.k_bmo * c_f * gc.c_p_prime
        out["bmo"] = {"holds": check_bmo_condition(gc, c_f), "value": bmo, "margin": 0.5 - bmo}
    except ValueError as exc:
        out["c_f"] = None
        out["bmo"] = {"holds": False, "error": str(exc)}
    gm = lq_general_model(cfg.params, gc)
    report = check_growth_conditions(gc, gm, sample=cfg.run.sample, seed=cfg.run.seed)
    out["sampled_bounds"] = report.to_dict()["bounds"]
    # constants the LQ model is known to satisfy, for comparison with the configured ones
    ref = lq_growth_constants(cfg.params)
    ref_report = check_growth_conditions(ref, gm, sample=cfg.run.sample, seed=cfg.run.seed)
    out["lq_reference"] = {"c": ref.c, "kappa": ref.kappa,
                           "sampled_bounds": ref_report.to_dict()["bounds"]}
    return out


# --- argument parsing --------------------------------------------------------------------------

def _float_list(text: str):
    try:
        return tuple(float(v) for v in text.replace(" ", ",").split(",") if v)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pareto-contracts",
                                     description="Optimal contracts with a Planner, LQ model.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--out", default=None, help="output file (default: stdout)")
        return sp

    sp = add("solve", "optimal sensitivities, efforts and contracts")
    sp.add_argument("--mode", required=True, choices=lq.MODES)
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--g-only", action="store_true", help="skip the exponential principal value")

    sp = add("figure1", "long-format CSV of the value curves")
    sp.add_argument("--r-list", type=_float_list, default=None)
    sp.add_argument("--grid-size", type=int, default=None)

    add("lambda-set", "weights where a Planner beats the Nash regime")
    add("nash-pareto", "weight at which the Nash effort is Pareto optimal")

    sp = add("verify", "Monte Carlo and brute-force verification report")
    sp.add_argument("--paths", type=int, default=None)
    sp.add_argument("--steps", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)

    add("check-assumptions", "growth, exponent and BMO conditions")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "solve":
            text = dumps(cmd_solve(cfg, args.mode, args.lam, args.g_only))
        elif args.command == "figure1":
            if args.grid_size is not None and args.grid_size < 3:
                raise ConfigError("--grid-size must be >= 3")
            if args.r_list is not None and not all(r > 0 for r in args.r_list):
                raise ConfigError("--r-list entries must be > 0")
            text = figure1_csv(cfg, args.r_list, args.grid_size)
        elif args.command == "lambda-set":
            text = dumps(cmd_lambda_set(cfg))
        elif args.command == "nash-pareto":
            text = dumps(cmd_nash_pareto(cfg))
        elif args.command == "verify":
            cfg = cfg.with_run(paths=args.paths, steps=args.steps, seed=args.seed)
            result = cmd_verify(cfg)
            text = dumps(result)
        else:
            text = dumps(cmd_check_assumptions(cfg))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModeError, ValueError) as exc:
        print(f"mode error: {exc}", file=sys.stderr)
        return EXIT_MODE
    try:
        _emit(text, args.out)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "verify" and not result["all_passed"]:
        failed = [c["name"] for c in result["checks"] if c["status"] == "FAIL"]
        print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def main() -> None:
    sys.exit(run())
