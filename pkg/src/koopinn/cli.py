"""Command-line entry point.

Subcommands: train, bound, verify, correlate, reproduce-ns, reproduce-pma.
Every command is deterministic given (config, seeds), writes its outputs under
--out, and records a manifest listing every emitted file.  Failures exit
nonzero with a single `error: ...` line on stderr.

CSV schemas (stable, header row always present):
  train log        step, loss_total, loss_res, loss_bc, loss_p, loss_reg,
                   loss_test
  flow summary     mode, regularized, n_runs, mean_final_test_loss,
                   std_final_test_loss
  sweep runs       run_id, width, steps, seed, mode, factor_sum, test_error,
                   status
  sweep scatter    width, steps, factor_sum, test_error
  correlations     r, pearson
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .bounds import koopman_factor_sum, norm_proxy_from_params
from .config import config_to_ini, load_config, save_config
from .network import load_snapshot, save_snapshot
from .training import ExperimentLog, TrainConfig, build_operator, train
from .verify import default_audit_suite

SUMMARY_COLUMNS = ("mode", "regularized", "n_runs", "mean_final_test_loss",
                   "std_final_test_loss")
RUNS_COLUMNS = ("run_id", "width", "steps", "seed", "mode", "factor_sum",
                "test_error", "status")
SCATTER_COLUMNS = ("width", "steps", "factor_sum", "test_error")
CORRELATION_COLUMNS = ("r", "pearson")


def pearson(xs, ys) -> float:
    """Sample Pearson correlation; needs length >= 2 and spread in both."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2:
        raise ValueError("need two equal-length samples of size >= 2")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    vx = float(dx @ dx)
    vy = float(dy @ dy)
    if vx == 0.0 or vy == 0.0:
        raise ValueError("zero variance: correlation undefined")
    return float(dx @ dy / math.sqrt(vx * vy))


# ---------------------------------------------------------------------------
# manifests


def write_manifest(out_dir: str, command: str, cfg: TrainConfig | None,
                   seeds: list[int], files: list[str],
                   runs: list[dict] | None = None) -> str:
    doc = {
        "command": command,
        "toolkit_version": __version__,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seeds": seeds,
        "files": sorted(files),
    }
    if cfg is not None:
        doc["config"] = config_to_ini(cfg)
        doc["config_hash"] = cfg.hash()
    if runs is not None:
        doc["runs"] = runs
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
    return path


def validate_manifest(out_dir: str) -> dict:
    """Load a manifest and check every listed file exists next to it."""
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        doc = json.load(fh)
    missing = [f for f in doc["files"]
               if not os.path.exists(os.path.join(out_dir, f))]
    if missing:
        raise FileNotFoundError(f"manifest lists missing files: {missing}")
    return doc


def _ensure_out(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _config_from_args(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        overrides["mode"] = args.mode
    if getattr(args, "steps", None) is not None:
        overrides["steps"] = args.steps
    if getattr(args, "reg", None) is not None:
        overrides["regularize"] = args.reg == "on"
    if getattr(args, "width", None) is not None:
        overrides["width"] = args.width
    if getattr(args, "operator", None) is not None:
        overrides["operator"] = args.operator
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


# ---------------------------------------------------------------------------
# train


def _write_run_outputs(out: str, log: ExperimentLog, stem: str = "train"
                       ) -> list[str]:
    cfg = log.config
    op = build_operator(cfg)
    files = []
    log.to_csv(os.path.join(out, f"{stem}_log.csv"))
    files.append(f"{stem}_log.csv")
    save_config(cfg, os.path.join(out, "config.ini"))
    files.append("config.ini")
    if log.final_params is not None:
        save_snapshot(os.path.join(out, "snapshot.json"), log.final_params,
                      op.normalizer.lo, op.normalizer.hi)
        files.append("snapshot.json")
    if log.bound_report is not None:
        log.bound_report.save(os.path.join(out, "bound.json"))
        files.append("bound.json")
    return files


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    out = _ensure_out(args)
    log = train(cfg)
    files = _write_run_outputs(out, log)
    write_manifest(out, "train", cfg, [cfg.seed], files)
    print(f"status {log.status}  config {cfg.hash()}")
    print(f"final test loss {log.final_test_loss:.6e}")
    if log.bound_report is not None:
        print(f"assembled bound {log.bound_report.assembled_bound:.6e}")
    return 0 if log.status == "ok" else 3


# ---------------------------------------------------------------------------
# bound


def cmd_bound(args) -> int:
    if not args.snapshot:
        raise ValueError("bound needs --snapshot PATH")
    params, normalizer = load_snapshot(args.snapshot)
    u, log_u, v_norm, factors = norm_proxy_from_params(params)
    header = (f"{'layer':>5} {'act':>7} {'dim':>4} {'|W|_2':>12} "
              f"{'|b|_inf':>12} {'box a':>12} {'A':>12} {'A~':>12} "
              f"{'D':>12}")
    print(header)
    for f in factors:
        print(f"{f.index:>5} {f.activation:>7} {f.dim:>4} "
              f"{f.spectral_norm:>12.5g} {f.bias_max:>12.5g} "
              f"{f.box_halfwidth:>12.5g} {f.A:>12.5g} {f.A_tilde:>12.5g} "
              f"{f.D:>12.5g}")
    print(f"factor sum {koopman_factor_sum(params):.6g}")
    print(f"norm proxy {u:.6g}  (log {log_u:.6g})  |v| {v_norm:.6g}")
    if args.out:
        out = _ensure_out(args)
        doc = {
            "norm_proxy": u, "log_norm_proxy": log_u, "v_norm": v_norm,
            "factor_sum": koopman_factor_sum(params),
            "layers": [dataclasses.asdict(f) for f in factors],
        }
        with open(os.path.join(out, "factors.json"), "w") as fh:
            json.dump(doc, fh, indent=1)
        write_manifest(out, "bound", None, [], ["factors.json"])
    return 0


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 0
    report = default_audit_suite(seed=seed, draws=args.draws,
                                 family_size=args.family)
    for audit in report["rademacher"]:
        verdict = "PASS" if audit["passed"] else "FAIL"
        print(f"{verdict} {audit['name']}: estimate {audit['estimate']:.4e} "
              f"+- {audit['stderr']:.1e}, bound {audit['bound']:.4e}, "
              f"margin {audit['margin']:.4e}, seed {audit['seed']}")
    for chk in report["tanh_norm"]:
        verdict = "PASS" if chk["passed"] else "FAIL"
        print(f"{verdict} composition-norm a={chk['a']}: empirical "
              f"{chk['empirical_norm']:.6f} <= bound {chk['bound']:.6f}")
    print(f"adjoint identity max discrepancy "
          f"{report['adjoint_identity_max_discrepancy']:.3e}")
    print(f"cauchy-schwarz max violation "
          f"{report['cauchy_schwarz_max_violation']:.3e}")
    if args.out:
        out = _ensure_out(args)
        with open(os.path.join(out, "audit_report.json"), "w") as fh:
            json.dump(report, fh, indent=1)
        write_manifest(out, "verify", None, [seed], ["audit_report.json"])
    if not report["passed"]:
        raise RuntimeError("audit suite failed")
    print("all audits passed")
    return 0


# ---------------------------------------------------------------------------
# correlate


def read_scatter_csv(path) -> tuple[list[float], list[float]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"no data rows in {path}")
    for col in ("factor_sum", "test_error"):
        if col not in rows[0]:
            raise ValueError(f"{path} is missing column {col!r}")
    xs = [float(r["factor_sum"]) for r in rows]
    ys = [float(r["test_error"]) for r in rows]
    return xs, ys


def correlations_by_power(xs, ys, powers=(1, 2, 3)) -> list[tuple[int, float]]:
    return [(r, pearson([x ** r for x in xs], ys)) for r in powers]


def write_correlations(path, rows: list[tuple[int, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CORRELATION_COLUMNS)
        for r, rho in rows:
            w.writerow([r, repr(rho)])


def cmd_correlate(args) -> int:
    if not args.scatter:
        raise ValueError("correlate needs --scatter PATH")
    xs, ys = read_scatter_csv(args.scatter)
    rows = correlations_by_power(xs, ys)
    for r, rho in rows:
        print(f"r={r} pearson {rho:.6f}")
    if args.out:
        out = _ensure_out(args)
        write_correlations(os.path.join(out, "correlations.csv"), rows)
        write_manifest(out, "correlate", None, [], ["correlations.csv"])
    return 0


# ---------------------------------------------------------------------------
# reproductions


def reproduce_ns(base: TrainConfig, out: str, seeds=(0, 1, 2)) -> dict:
    """Flow study: {vpinn, pinn} x {reg on, off} x seeds, plus a summary.

    Returns {"files": [...], "summary": {(mode, reg): (mean, std)}}.
    """
    files = []
    runs = []
    summary = {}
    finals = {}
    for mode in ("vpinn", "pinn"):
        for reg in (True, False):
            vals = []
            for seed in seeds:
                cfg = dataclasses.replace(base, operator="navier-stokes",
                                          mode=mode, regularize=reg, seed=seed)
                log = train(cfg)
                tag = "regon" if reg else "regoff"
                name = f"ns_{mode}_{tag}_seed{seed}.csv"
                log.to_csv(os.path.join(out, name))
                files.append(name)
                runs.append({"file": name, "mode": mode, "regularized": reg,
                             "seed": seed, "config_hash": cfg.hash(),
                             "status": log.status})
                vals.append(log.final_test_loss)
            finals[(mode, reg)] = vals
            summary[(mode, reg)] = (float(np.mean(vals)),
                                    float(np.std(vals, ddof=1)))
    with open(os.path.join(out, "ns_summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for (mode, reg), (mean, std) in sorted(summary.items()):
            w.writerow([mode, "on" if reg else "off", len(seeds),
                        repr(mean), repr(std)])
    files.append("ns_summary.csv")
    write_manifest(out, "reproduce-ns", base, list(seeds), files, runs)
    return {"files": files, "summary": summary, "finals": finals}


def cmd_reproduce_ns(args) -> int:
    base = _config_from_args(args)
    out = _ensure_out(args)
    result = reproduce_ns(base, out)
    for (mode, reg), (mean, std) in sorted(result["summary"].items()):
        print(f"{mode} reg={'on' if reg else 'off'}: final test loss "
              f"{mean:.6e} +- {std:.6e}")
    for mode in ("vpinn", "pinn"):
        on, off = result["summary"][(mode, True)], result["summary"][(mode, False)]
        trend = "<" if on[0] < off[0] else ">="
        print(f"{mode}: reg-on mean {trend} reg-off mean")
    return 0


def reproduce_pma(base: TrainConfig, out: str, widths=(64,),
                  steps_list=(200, 400, 600, 800, 1000, 1200, 1400, 1600,
                              1800, 2000),
                  seeds=(0, 1, 2)) -> dict:
    """Log-det sweep: per-run factor sum vs final test error, scatter points
    averaged over seeds, correlations of error against factor_sum^r."""
    files = []
    run_rows = []
    scatter = {}
    run_id = 0
    for width in widths:
        for steps in steps_list:
            pts = []
            for seed in seeds:
                cfg = dataclasses.replace(base,
                                          operator="parabolic-monge-ampere",
                                          width=width, steps=steps, seed=seed)
                log = train(cfg)
                fac = koopman_factor_sum(log.final_params)
                err = log.final_test_loss
                run_rows.append([run_id, width, steps, seed, cfg.mode,
                                 fac, err, log.status])
                run_id += 1
                if log.status == "ok":
                    pts.append((fac, err))
            if pts:
                scatter[(width, steps)] = (
                    float(np.mean([p[0] for p in pts])),
                    float(np.mean([p[1] for p in pts])))
    with open(os.path.join(out, "pma_runs.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RUNS_COLUMNS)
        for row in run_rows:
            w.writerow(row[:5] + [repr(row[5]), repr(row[6]), row[7]])
    files.append("pma_runs.csv")
    with open(os.path.join(out, "pma_scatter.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SCATTER_COLUMNS)
        for (width, steps), (fac, err) in sorted(scatter.items()):
            w.writerow([width, steps, repr(fac), repr(err)])
    files.append("pma_scatter.csv")
    xs = [v[0] for v in scatter.values()]
    ys = [v[1] for v in scatter.values()]
    rows = correlations_by_power(xs, ys)
    write_correlations(os.path.join(out, "pma_correlations.csv"), rows)
    files.append("pma_correlations.csv")
    write_manifest(out, "reproduce-pma", base, list(seeds), files)
    return {"files": files, "scatter": scatter, "correlations": rows,
            "n_runs": run_id}


def cmd_reproduce_pma(args) -> int:
    base = _config_from_args(args)
    if args.config is None and args.mode is None:
        # strong-form sweep by default: the 3-d weak grid is desk-hostile
        base = dataclasses.replace(base, mode="pinn")
    out = _ensure_out(args)
    widths = _int_list(args.widths) if args.widths else (16, 32)
    steps_list = (_int_list(args.steps_list) if args.steps_list
                  else (300, 600, 900, 1200, 1500))
    result = reproduce_pma(base, out, widths=widths, steps_list=steps_list)
    print(f"{result['n_runs']} runs, {len(result['scatter'])} scatter points")
    for r, rho in result["correlations"]:
        print(f"r={r} pearson {rho:.6f}")
    return 0


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="koopinn",
        description="Train and audit physics-informed networks with "
                    "operator-norm generalization bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config path")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--mode", choices=("vpinn", "pinn"))
        p.add_argument("--reg", choices=("on", "off"))
        p.add_argument("--steps", type=int)

    p_train = sub.add_parser("train", help="run one training job")
    common(p_train)
    p_train.add_argument("--operator",
                         choices=("navier-stokes", "parabolic-monge-ampere",
                                  "gradient-sum"))
    p_train.add_argument("--width", type=int)
    p_train.set_defaults(func=cmd_train)

    p_bound = sub.add_parser("bound", help="per-layer factor table for a "
                                           "weight snapshot")
    common(p_bound)
    p_bound.add_argument("--snapshot", help="snapshot JSON path")
    p_bound.set_defaults(func=cmd_bound)

    p_verify = sub.add_parser("verify", help="run the Monte-Carlo audit suite")
    common(p_verify)
    p_verify.add_argument("--draws", type=int, default=4000)
    p_verify.add_argument("--family", type=int, default=50)
    p_verify.set_defaults(func=cmd_verify)

    p_corr = sub.add_parser("correlate", help="Pearson r=1,2,3 from a "
                                              "scatter CSV")
    common(p_corr)
    p_corr.add_argument("--scatter", help="scatter CSV path")
    p_corr.set_defaults(func=cmd_correlate)

    p_ns = sub.add_parser("reproduce-ns", help="flow study: 12 runs + summary")
    common(p_ns)
    p_ns.add_argument("--width", type=int)
    p_ns.set_defaults(func=cmd_reproduce_ns)

    p_pma = sub.add_parser("reproduce-pma", help="log-det sweep + scatter "
                                                 "+ correlations")
    common(p_pma)
    p_pma.add_argument("--widths", help="comma-separated width sweep")
    p_pma.add_argument("--steps-list", dest="steps_list",
                       help="comma-separated step-count sweep")
    p_pma.set_defaults(func=cmd_reproduce_pma)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
