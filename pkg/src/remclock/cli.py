"""Batch experiment runner with deterministic seeds and CSV/JSON outputs.

Subcommands: simulate (correlation grids for either model), conditions
(clock-convergence condition reports), limits (subordinator overshoot,
arcsine tables, mark exports), compare (REM vs trap side by side),
summarize (pool result CSVs and gate on arcsine targets), and
tabulate-walk (exact walk transition probabilities).

Configs are JSON documents with an explicit schema_version; unknown
keys are rejected so typos fail loudly. Thread count resolution:
--threads flag, then the REMCLOCK_THREADS environment variable, then
the config value, then 1.
"""

from __future__ import annotations

import argparse
import csv
import glob as globmod
import json
import math
import os
import sys
import time
from typing import Optional

import numpy as np

from . import __version__
from .clock_conditions import check_conditions
from .clock_dynamics import estimate_correlation_grid
from .hypercube_walk import theta_n, transition_prob, tv_bound
from .landscape import LandscapeParams, ScaleSpec, classify_scale
from .limits import (SubordinatorSpec, asl_cdf, asl_table,
                     overshoot_correlation, sample_prm_marks)
from .trap_model import (TrapParams, compare_models,
                         estimate_trap_correlation_grid)

CSV_COLUMNS = ["model", "n", "beta", "eps", "scale_kind", "t", "rho", "mode",
               "init", "n_env", "n_chain", "p_hat", "ci95", "asl_target", "seed"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c)) for c in CSV_COLUMNS) + "\n")


def _manifest_path(out: str) -> str:
    return out + ".manifest.json"


def _write_manifest(out: str, master_seed, t0: float, config: dict, **extra) -> None:
    doc = {
        "version": __version__,
        "master_seed": master_seed,
        "wall_time_s": time.time() - t0,
        "config": config,
    }
    doc.update(extra)
    with open(_manifest_path(out), "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version must be {SCHEMA_VERSION}")
    return raw


def _check_keys(d: dict, required: set, optional: set, context: str) -> None:
    keys = set(d) - {"schema_version"}
    unknown = keys - required - optional
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")
    missing = required - keys
    if missing:
        raise ConfigError(f"{context}: missing keys {sorted(missing)}")


def _scale_spec(block: dict, context: str) -> ScaleSpec:
    present = [k for k in ("epsilon", "m_n", "log_rn") if k in block]
    if len(present) != 1:
        raise ConfigError(f"{context}: give exactly one of epsilon, m_n, log_rn")
    key = present[0]
    if key == "epsilon":
        return ScaleSpec.from_epsilon(float(block["epsilon"]))
    if key == "m_n":
        return ScaleSpec.from_mn(int(block["m_n"]))
    return ScaleSpec(log_rn=float(block["log_rn"]))


def _positive_grid(block: dict, key: str, context: str):
    grid = block.get(key)
    if not isinstance(grid, list) or len(grid) == 0:
        raise ConfigError(f"{context}: {key} must be a nonempty list")
    vals = [float(v) for v in grid]
    if any(v <= 0.0 for v in vals):
        raise ConfigError(f"{context}: {key} entries must be positive")
    return vals


REM_BLOCK_REQUIRED = {"model", "n", "beta", "t_grid", "rho_grid"}
REM_BLOCK_OPTIONAL = {"epsilon", "m_n", "log_rn", "n_env", "n_chain", "mode",
                      "init", "a_n", "c_n", "step_cap", "asl_alpha"}
TRAP_BLOCK_REQUIRED = {"model", "n_states", "alpha", "t_grid", "rho_grid"}
TRAP_BLOCK_OPTIONAL = {"n_env", "n_chain", "a_n", "c_n", "step_cap", "asl_alpha"}


def _run_model_block(block: dict, master_seed: int, threads: int, context: str):
    """Run one model block; returns (csv rows, failed env list)."""
    model = block.get("model")
    if model == "rem":
        _check_keys(block, REM_BLOCK_REQUIRED, REM_BLOCK_OPTIONAL, context)
        t_grid = _positive_grid(block, "t_grid", context)
        rho_grid = _positive_grid(block, "rho_grid", context)
        params = LandscapeParams(
            n=int(block["n"]), beta=float(block["beta"]),
            scale=_scale_spec(block, context), master_seed=master_seed,
        )
        cls = classify_scale(params)
        init = block.get("init", "uniform")
        mode = block.get("mode", "quenched")
        grid = estimate_correlation_grid(
            params, t_grid, rho_grid,
            a_n=block.get("a_n"), c_n=block.get("c_n"),
            n_env=int(block.get("n_env", 20)), n_chain=int(block.get("n_chain", 500)),
            mode=mode, init=init,
            step_cap=int(block.get("step_cap", 10 ** 9)), threads=threads,
        )
        asl_alpha = block.get("asl_alpha")
        if asl_alpha is None and cls.kind == "Intermediate":
            asl_alpha = cls.alpha_eps
        ident = {
            "model": "rem", "n": params.n, "beta": params.beta,
            "eps": cls.epsilon, "scale_kind": cls.kind,
        }
    elif model == "trap":
        _check_keys(block, TRAP_BLOCK_REQUIRED, TRAP_BLOCK_OPTIONAL, context)
        t_grid = _positive_grid(block, "t_grid", context)
        rho_grid = _positive_grid(block, "rho_grid", context)
        tparams = TrapParams(
            n_states=int(block["n_states"]), alpha=float(block["alpha"]),
            master_seed=master_seed,
            a_n=(float(block["a_n"]) if block.get("a_n") is not None else None),
        )
        grid = estimate_trap_correlation_grid(
            tparams, t_grid, rho_grid,
            c_n=block.get("c_n"),
            n_env=int(block.get("n_env", 20)), n_chain=int(block.get("n_chain", 500)),
            step_cap=int(block.get("step_cap", 10 ** 9)),
        )
        asl_alpha = block.get("asl_alpha", tparams.alpha)
        ident = {
            "model": "trap", "n": tparams.n_states, "beta": tparams.alpha,
            "eps": "", "scale_kind": "trap",
        }
    else:
        raise ConfigError(f"{context}: model must be 'rem' or 'trap'")

    rows = []
    estimates = []
    for i in range(grid.t_grid.size):
        for j in range(grid.rho_grid.size):
            est = grid.estimate(i, j)
            estimates.append(est)
            rho = float(grid.rho_grid[j])
            target = (asl_cdf(float(asl_alpha), 1.0 / (1.0 + rho))
                      if asl_alpha is not None else "")
            row = dict(ident)
            row.update({
                "t": est.t, "rho": rho, "mode": est.mode, "init": est.init,
                "n_env": est.n_env, "n_chain": est.n_chain,
                "p_hat": est.p_hat, "ci95": est.ci_half_width,
                "asl_target": target, "seed": master_seed,
            })
            rows.append(row)
    return rows, list(grid.failed_envs), estimates


def _resolve_threads(flag: Optional[int], cfg: dict) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("REMCLOCK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"REMCLOCK_THREADS is not an integer: {env!r}")
    return max(1, int(cfg.get("threads", 1)))


def _master_seed(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    if "master_seed" not in cfg:
        raise ConfigError("master_seed missing (config key or --seed)")
    return int(cfg["master_seed"])


def _out_path(args, cfg: dict, default: str) -> str:
    return args.out or cfg.get("out") or default


SIMULATE_TOP = {"model", "master_seed", "out", "threads"}


def _cmd_simulate(args) -> int:
    if not args.config:
        raise ConfigError("simulate needs --config")
    cfg = _load_json(args.config)
    block_keys = REM_BLOCK_REQUIRED | REM_BLOCK_OPTIONAL | TRAP_BLOCK_REQUIRED | TRAP_BLOCK_OPTIONAL
    _check_keys(cfg, {"model"}, block_keys | {"master_seed", "out", "threads"}, args.config)
    master = _master_seed(args, cfg)
    threads = _resolve_threads(args.threads, cfg)
    out = _out_path(args, cfg, "results.csv")
    t0 = time.time()
    block = {k: v for k, v in cfg.items()
             if k not in ("schema_version", "master_seed", "out", "threads")}
    try:
        rows, failed, _ = _run_model_block(block, master, threads, args.config)
    except ConfigError:
        raise
    except Exception as exc:
        _write_manifest(out, master, t0, cfg, failed=True, error=str(exc))
        print(f"run failed: {exc}", file=sys.stderr)
        return 3
    _write_rows(out, rows)
    _write_manifest(out, master, t0, cfg, failed_envs=failed,
                    n_env_failed=len(failed), rows=len(rows))
    print(f"wrote {len(rows)} rows to {out}"
          + (f" ({len(failed)} environments excluded)" if failed else ""))
    return 0


CONDITIONS_REQUIRED = {"model", "n", "beta", "t", "u_grid", "delta_grid", "master_seed"}
CONDITIONS_OPTIONAL = {"epsilon", "m_n", "log_rn", "n_env", "n_skeletons",
                       "tol_a0", "tol_a1", "tol_a2", "c0", "c", "rho_n",
                       "out", "threads"}


def _cmd_conditions(args) -> int:
    if not args.config:
        raise ConfigError("conditions needs --config")
    cfg = _load_json(args.config)
    _check_keys(cfg, CONDITIONS_REQUIRED, CONDITIONS_OPTIONAL, args.config)
    if cfg["model"] != "rem":
        raise ConfigError("conditions reports exist for the rem model only")
    master = _master_seed(args, cfg)
    out = _out_path(args, cfg, "conditions.json")
    t0 = time.time()
    params = LandscapeParams(
        n=int(cfg["n"]), beta=float(cfg["beta"]),
        scale=_scale_spec(cfg, args.config), master_seed=master,
    )
    u_grid = _positive_grid(cfg, "u_grid", args.config)
    delta_grid = _positive_grid(cfg, "delta_grid", args.config)
    kwargs = {}
    for key, arg in (("tol_a0", "tol_a0"), ("tol_a1", "tol_a1"),
                     ("tol_a2", "tol_a2"), ("c0", "c0"), ("c", "c_const"),
                     ("rho_n", "rho_n")):
        if key in cfg:
            kwargs[arg] = float(cfg[key])
    reports = []
    for env in range(int(cfg.get("n_env", 1))):
        rep = check_conditions(
            params, float(cfg["t"]), u_grid, delta_grid, env=env,
            n_skeletons=int(cfg.get("n_skeletons", 200)), **kwargs,
        )
        reports.append(rep)
    with open(out, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2)
        fh.write("\n")
    csv_out = os.path.splitext(out)[0] + ".csv"
    with open(csv_out, "w") as fh:
        fh.write("n,beta,eps,scale_kind,t,env,u,nu_avg,sigma2_avg,theta,"
                 "limit_target,nu_chain_median,sigma2_chain_median,a0,"
                 "flag_a0,flag_a1,flag_a2,flag_a3\n")
        cls = classify_scale(params)
        for env, rep in enumerate(reports):
            for i, u in enumerate(rep.u_grid):
                fh.write(",".join(_fmt(v) for v in (
                    rep.n, rep.beta, cls.epsilon, rep.scale_kind, rep.t, env,
                    float(u), float(rep.nu_avg[i]), float(rep.sigma2_avg[i]),
                    float(rep.theta[i]), float(rep.limit_target[i]),
                    float(rep.nu_chain_median[i]), float(rep.sigma2_chain_median[i]),
                    float(rep.a0_values[i]), rep.flags["A0'"], rep.flags["A1"],
                    rep.flags["A2"], rep.flags["A3"],
                )) + "\n")
    _write_manifest(out, master, t0, cfg,
                    flags=[r.flags for r in reports], csv=csv_out)
    ok = all(all(v is not False for v in r.flags.values()) for r in reports)
    print(f"wrote {len(reports)} condition reports to {out} (flags {'pass' if ok else 'FAIL'})")
    return 0


LIMITS_REQUIRED = {"task", "master_seed"}
LIMITS_OPTIONAL = {"alpha", "kind", "eps_prime", "marks_count", "t_grid",
                   "rho_grid", "replicas", "delta_cut", "u_grid", "out", "threads"}


def _cmd_limits(args) -> int:
    if not args.config:
        raise ConfigError("limits needs --config")
    cfg = _load_json(args.config)
    _check_keys(cfg, LIMITS_REQUIRED, LIMITS_OPTIONAL, args.config)
    master = _master_seed(args, cfg)
    task = cfg["task"]
    t0 = time.time()
    if task == "asl-table":
        out = _out_path(args, cfg, "asl.csv")
        alpha = float(cfg["alpha"])
        u_grid = cfg.get("u_grid") or [i / 100.0 for i in range(101)]
        table = asl_table(alpha, u_grid)
        with open(out, "w") as fh:
            fh.write("u,asl\n")
            for u, v in table:
                fh.write(f"{float(u)!r},{float(v)!r}\n")
        _write_manifest(out, master, t0, cfg, rows=len(u_grid))
        print(f"wrote arcsine table ({len(u_grid)} rows) to {out}")
        return 0
    if task == "marks":
        out = _out_path(args, cfg, "marks.csv")
        marks = sample_prm_marks(float(cfg["alpha"]), int(cfg.get("marks_count", 100_000)), master)
        marks.to_csv(out)
        _write_manifest(out, master, t0, cfg, count=marks.count,
                        Gamma_tail=marks.Gamma_tail)
        print(f"wrote {marks.count} marks to {out}")
        return 0
    if task != "overshoot":
        raise ConfigError(f"{args.config}: unknown task {task!r}")
    out = _out_path(args, cfg, "overshoot.csv")
    alpha = float(cfg["alpha"])
    kind = cfg.get("kind", "stable")
    if kind == "stable":
        spec = SubordinatorSpec.stable(alpha)
        eps_prime = ""
    elif kind == "extreme":
        eps_prime = float(cfg.get("eps_prime", 1.0))
        marks = sample_prm_marks(alpha, int(cfg.get("marks_count", 100_000)), master)
        spec = SubordinatorSpec.extreme(marks, eps_prime)
    else:
        raise ConfigError(f"{args.config}: kind must be 'stable' or 'extreme'")
    t_grid = _positive_grid(cfg, "t_grid", args.config)
    rho_grid = _positive_grid(cfg, "rho_grid", args.config)
    replicas = int(cfg.get("replicas", 100_000))
    rows = []
    for t in t_grid:
        for rho in rho_grid:
            est = overshoot_correlation(
                spec, t, rho, replicas, rng=master,
                delta_cut=cfg.get("delta_cut"),
            )
            rows.append({
                "model": kind, "n": "", "beta": alpha, "eps": eps_prime,
                "scale_kind": "subordinator", "t": t, "rho": rho,
                "mode": est.mode, "init": est.init, "n_env": 1,
                "n_chain": replicas, "p_hat": est.p_hat,
                "ci95": est.ci_half_width,
                "asl_target": asl_cdf(alpha, 1.0 / (1.0 + rho)),
                "seed": master,
            })
    _write_rows(out, rows)
    _write_manifest(out, master, t0, cfg, rows=len(rows))
    print(f"wrote {len(rows)} overshoot rows to {out}")
    return 0


COMPARE_REQUIRED = {"rem", "trap", "master_seed"}
COMPARE_OPTIONAL = {"se_multiplier", "out", "threads"}


def _cmd_compare(args) -> int:
    if not args.config:
        raise ConfigError("compare needs --config")
    cfg = _load_json(args.config)
    _check_keys(cfg, COMPARE_REQUIRED, COMPARE_OPTIONAL, args.config)
    master = _master_seed(args, cfg)
    threads = _resolve_threads(args.threads, cfg)
    out = _out_path(args, cfg, "compare.json")
    t0 = time.time()
    rem_rows, rem_failed, rem_est = _run_model_block(
        dict(cfg["rem"]), master, threads, "rem block")
    trap_rows, trap_failed, trap_est = _run_model_block(
        dict(cfg["trap"]), master, threads, "trap block")
    rem_params = LandscapeParams(
        n=int(cfg["rem"]["n"]), beta=float(cfg["rem"]["beta"]),
        scale=_scale_spec(cfg["rem"], "rem block"), master_seed=master,
    )
    alpha_rem = classify_scale(rem_params).alpha_eps
    report = compare_models(
        rem_est, trap_est,
        alpha_rem=alpha_rem, alpha_trap=float(cfg["trap"]["alpha"]),
        se_multiplier=float(cfg.get("se_multiplier", 3.0)),
    )
    with open(out, "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    csv_out = os.path.splitext(out)[0] + ".csv"
    _write_rows(csv_out, rem_rows + trap_rows)
    _write_manifest(out, master, t0, cfg, all_within=report.all_within,
                    failed_envs={"rem": rem_failed, "trap": trap_failed},
                    csv=csv_out)
    print(f"compare: all cells within band = {report.all_within} -> {out}")
    return 0


def _read_result_csv(path: str):
    with open(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ConfigError(
                f"{path}: column mismatch; expected {','.join(CSV_COLUMNS)}"
            )
        return list(reader)


def _cmd_summarize(args) -> int:
    paths = []
    for pattern in args.results:
        hits = sorted(globmod.glob(pattern))
        if not hits and os.path.exists(pattern):
            hits = [pattern]
        paths.extend(hits)
    if not paths:
        raise ConfigError("summarize: no result files matched")
    groups: dict = {}
    for path in paths:
        for row in _read_result_csv(path):
            key = tuple(row[c] for c in ("model", "n", "beta", "eps", "scale_kind",
                                         "t", "rho", "mode", "init", "seed"))
            groups.setdefault(key, []).append(row)

    out = args.out or "summary.csv"
    pooled_rows = []
    failures = 0
    lines = []
    for key in sorted(groups):
        members = groups[key]
        w = np.array([float(r["n_env"]) * float(r["n_chain"]) for r in members])
        p = np.array([float(r["p_hat"]) for r in members])
        se = np.array([float(r["ci95"]) for r in members]) / 1.96
        total_w = w.sum()
        p_pool = float((w * p).sum() / total_w)
        se_pool = float(np.sqrt(((w * se) ** 2).sum()) / total_w)
        ci_pool = 1.96 * se_pool
        n_env = int(sum(int(r["n_env"]) for r in members))
        n_chain = int(round(total_w / max(n_env, 1)))
        target_str = next((r["asl_target"] for r in members if r["asl_target"]), "")
        row = dict(zip(("model", "n", "beta", "eps", "scale_kind",
                        "t", "rho", "mode", "init", "seed"), key))
        row.update({"n_env": n_env, "n_chain": n_chain,
                    "p_hat": p_pool, "ci95": ci_pool,
                    "asl_target": float(target_str) if target_str else ""})
        pooled_rows.append(row)
        if target_str:
            target = float(target_str)
            dev = abs(p_pool - target)
            dev_se = dev / se_pool if se_pool > 0.0 else math.inf
            ok = dev <= max(0.05, 3.0 * ci_pool)
            if not ok:
                failures += 1
            lines.append(
                f"{row['model']:>5} t={row['t']:>6} rho={row['rho']:>5} "
                f"p_hat={p_pool:.4f} target={target:.4f} dev={dev:+.4f} "
                f"({dev_se:.1f} SE) {'ok' if ok else 'FAIL'}"
            )
        else:
            lines.append(
                f"{row['model']:>5} t={row['t']:>6} rho={row['rho']:>5} "
                f"p_hat={p_pool:.4f} ci95={ci_pool:.4f}"
            )
    _write_rows(out, pooled_rows)
    print("\n".join(lines))
    print(f"pooled {len(paths)} files, {len(pooled_rows)} cells -> {out}")
    if failures:
        print(f"{failures} arcsine-tagged cells out of tolerance", file=sys.stderr)
        return 1
    return 0


def _cmd_tabulate_walk(args) -> int:
    if args.n is None:
        raise ConfigError("tabulate-walk needs --n")
    n = args.n
    l_max = args.l_max
    out = args.out or f"walk_n{n}.csv"
    with open(out, "w") as fh:
        fh.write("n,l,d,probability\n")
        for l in range(1, l_max + 1):
            for d in range(0, n + 1):
                fh.write(f"{n},{l},{d},{transition_prob(n, d, l)!r}\n")
    theta = theta_n(n) if n >= 3 else None
    if theta is not None:
        print(f"n={n}: wrote l=1..{l_max} to {out}; "
              f"theta_n={theta}, tv_bound(theta/2)={tv_bound(n, theta // 2):.3e}")
    else:
        print(f"n={n}: wrote l=1..{l_max} to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="remclock",
        description="Clock-process experiments for hopping dynamics on the hypercube",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config path")
        p.add_argument("--seed", type=int, help="override master seed")
        p.add_argument("--threads", type=int,
                       help="worker threads (REMCLOCK_THREADS overrides config)")
        p.add_argument("--out", help="output path")

    for name, fn, desc in (
        ("simulate", _cmd_simulate, "run a correlation-estimate grid"),
        ("conditions", _cmd_conditions, "evaluate clock-convergence conditions"),
        ("limits", _cmd_limits, "limit-object tasks: overshoot, asl-table, marks"),
        ("compare", _cmd_compare, "REM vs trap model grid comparison"),
    ):
        p = sub.add_parser(name, help=desc)
        common(p)
        p.set_defaults(handler=fn)

    p = sub.add_parser("summarize", help="pool result CSVs and gate on targets")
    p.add_argument("results", nargs="+", help="result CSV paths or globs")
    p.add_argument("--out", help="pooled CSV path (default summary.csv)")
    p.set_defaults(handler=_cmd_summarize)

    p = sub.add_parser("tabulate-walk", help="exact walk transition probabilities")
    p.add_argument("--n", type=int, help="cube dimension")
    p.add_argument("--l-max", type=int, default=12, help="largest step count")
    p.add_argument("--out", help="CSV path")
    p.set_defaults(handler=_cmd_tabulate_walk)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
