"""Command-line front end: ``moments``, ``predict``, ``simulate``, ``compare``, ``oracle``.

Exit codes: 0 success, 2 validation error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .alternatives import Family, FamilyTag, strip_condition
from .config import SCHEMA_VERSION, ConfigError, ExperimentConfig, load_config, validate
from .errors import InstanceTooLargeError, OpenProblemError, UnclassifiedFamilyError, UnsupportedPredictionError
from .largedev import DEFAULT_THETA, EfficiencyMarker, lr_regime_margin, predict_alpha_slope, predict_efficiency
from .montecarlo import (
    TailEstimate,
    estimate_alpha_slope,
    estimate_beta_slope,
    exact_tail,
    power_at_critical,
)
from .poisson_moments import ORACLE_MAX_CELLS, ORACLE_MAX_N, moment_summary, null_moments
from .statistics import KERNELS, resolve_kernel

log = logging.getLogger("sparsegof")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3
SIM_FILE = "simulate.csv"
SIM_CONFIG_FILE = "simulate.config.json"
TIMINGS_FILE = "timings.json"
PREDICT_FILE = "predict.json"

ROW_COLUMNS = (
    "schema_version", "config_hash", "seed", "point_index", "n", "N", "lam", "delta", "family",
    "test", "quantity", "method", "c", "threshold_mode", "threshold",
    "p_hat", "log_p_hat", "ci_low", "ci_high", "upper_bound", "replicates",
    "slope_empirical", "slope_ci_low", "slope_ci_high", "slope_predicted", "regime", "normalized_empirical",
    "strip_lower_margin", "strip_upper_margin", "lr_margin", "status", "error",
)


class ValidationError(ValueError):
    """Bad command-line input; exit code 2."""


# ---------------------------------------------------------------------------
# helpers


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _json_default(o: Any):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _json_float(x: float | None):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf") if not math.isnan(x) else "nan"


def _dump_json(obj: Any, path: Path | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    if path is not None:
        path.write_text(text)
    return text


def _write_csv(path: Path, rows: Iterable[dict], columns: Sequence[str], append: bool = False) -> None:
    with path.open("a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not append:
            w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def _parse_list(text: str, cast=float) -> list:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ValidationError("empty list")
    try:
        return [cast(t) for t in items]
    except ValueError as exc:
        raise ValidationError(f"bad list {text!r}: {exc}") from None


def _global_overrides(args) -> dict:
    return {"seed": args.seed, "budget": args.budget, "out": args.out, "workers": args.workers}


# ---------------------------------------------------------------------------
# moments


MOMENT_COLUMNS = ("kernel", "lambda", "N", "Eh", "gamma_coef", "sigma2", "rho", "L3N", "var_h", "corr_h_xi",
                  "truncation_bound", "tail_mass_bound")


def cmd_moments(args) -> int:
    if args.kernel not in KERNELS:
        raise ValidationError(f"unknown kernel {args.kernel!r}; known: {sorted(KERNELS)}")
    lams = _parse_list(args.lam)
    if any(not lam > 0 for lam in lams):
        raise ValidationError("every lambda must be positive")
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(MOMENT_COLUMNS)
    for lam in lams:
        ms = moment_summary(args.kernel, lam, args.cells)
        w.writerow([args.kernel, _fmt(lam), args.cells] + [_fmt(getattr(ms, c)) for c in MOMENT_COLUMNS[3:]])
    sys.stdout.write(out.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict


def _refusal(exc: Exception) -> dict:
    status = "OPEN_PROBLEM" if isinstance(exc, OpenProblemError) else "UNSUPPORTED"
    return {"status": status, "message": str(exc)}


def _strip_fields(tag: FamilyTag, n: int, N: int) -> dict:
    if tag.kind is not Family.J_GAMMA:
        return {}
    r = strip_condition(tag.gamma, n, N)
    return {"strip": {"lower_margin": r.lower_margin, "upper_margin": r.upper_margin, "inside": r.inside,
                      "satisfied": r.satisfied, "slack": r.slack}}


def predict_point(cfg: ExperimentConfig, tag: FamilyTag, lam_eff: float, n: int, N: int) -> dict:
    spec = cfg.spec()
    delta = spec.delta(n, N)
    entry: dict[str, Any] = {"n": n, "N": N, "lam": n / N, "delta": delta, "family": str(tag)}
    entry.update(_strip_fields(tag, n, N))
    slopes = {}
    for test in dict.fromkeys(("np",) + cfg.tests):
        try:
            p = predict_alpha_slope(test, tag, n, N, delta)
            slopes[test] = {"status": "OK", "value": p.value, "normalized": p.normalized, "regime": p.regime.value}
        except UnsupportedPredictionError as exc:
            slopes[test] = _refusal(exc)
        if test not in ("np", "chi2"):
            slopes[test]["lr_margin"] = lr_regime_margin(n, N, delta, resolve_kernel(test))
    entry["slopes"] = slopes
    effs = {}
    strip_ok = entry.get("strip", {}).get("satisfied", True)
    for test in cfg.tests:
        if test == "chi2":
            continue
        lr_ok = lr_regime_margin(n, N, delta, resolve_kernel(test)) < DEFAULT_THETA
        for kind in ("ARE_ALPHA", "AIE"):
            key = f"{kind}(chi2,{test})"
            try:
                v = predict_efficiency(kind, ("chi2", test), tag, lam_eff, lr_regime=lr_ok, strip_ok=strip_ok)
                effs[key] = {"status": "OK", "value": v.value if isinstance(v, EfficiencyMarker) else v}
            except UnsupportedPredictionError as exc:
                effs[key] = _refusal(exc)
    entry["efficiencies"] = effs
    return entry


def cmd_predict(args) -> int:
    cfg = load_config(args.config, _global_overrides(args))
    try:
        tag = cfg.family_tag()
    except UnclassifiedFamilyError as exc:
        raise ConfigError(str(exc)) from None
    lam_eff = cfg.lambda_for_efficiency()
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_json(),
        "config_hash": cfg.config_hash(),
        "family": str(tag),
        "lambda_limit": _json_float(lam_eff),
        "points": [predict_point(cfg, tag, lam_eff, n, N) for n, N in cfg.points],
    }
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(report, out / PREDICT_FILE)
    sys.stdout.write(f"wrote {out / PREDICT_FILE}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _estimate_fields(est: TailEstimate) -> dict:
    return {"p_hat": est.p_hat, "log_p_hat": est.log_p_hat, "ci_low": est.ci_low, "ci_high": est.ci_high,
            "upper_bound": est.upper_bound, "replicates": est.replicates, "method": est.method.value}


def simulate_point(cfg_json: dict, index: int) -> list[dict]:
    """All rows of grid point ``index``; runs in worker processes."""
    cfg = validate(cfg_json)
    n, N = cfg.points[index]
    spec = cfg.spec()
    try:
        tag: FamilyTag | None = cfg.family_tag()
    except UnclassifiedFamilyError:
        tag = None
    delta = spec.delta(n, N)
    base = {"schema_version": SCHEMA_VERSION, "config_hash": cfg.config_hash(), "seed": cfg.seed,
            "point_index": index, "n": n, "N": N, "lam": n / N, "delta": delta,
            "family": None if tag is None else str(tag), "threshold_mode": cfg.threshold_mode}
    if tag is not None and tag.kind is Family.J_GAMMA:
        r = strip_condition(tag.gamma, n, N)
        base["strip_lower_margin"], base["strip_upper_margin"] = r.lower_margin, r.upper_margin
    scale = n * (n / N) * delta**4
    rows = []
    for ti, test in enumerate(cfg.tests):
        lr_margin = None if test == "chi2" else lr_regime_margin(n, N, delta, resolve_kernel(test))
        for qi, quantity in enumerate(cfg.quantities):
            cs = cfg.power_c if quantity == "power" else (None,)
            for mi, method in enumerate(cfg.methods):
                for ci, c in enumerate(cs):
                    keys = (index, ti, qi, mi, ci)
                    row = dict(base, test=test, quantity=quantity, method=method.upper(), c=c, lr_margin=lr_margin)
                    try:
                        if quantity == "power":
                            m = "naive" if method == "auto" else method
                            est = power_at_critical(n, N, test, spec, c, cfg.budget, cfg.seed, keys, m)
                            row.update(_estimate_fields(est))
                        else:
                            fn = estimate_alpha_slope if quantity == "alpha" else estimate_beta_slope
                            pt = fn(n, N, test, spec, cfg.budget, cfg.seed, keys, method, cfg.threshold_mode, tag)
                            row.update(_estimate_fields(pt.estimate))
                            row.update(threshold=pt.threshold, slope_empirical=pt.slope_empirical,
                                       slope_ci_low=pt.slope_ci_low, slope_ci_high=pt.slope_ci_high,
                                       slope_predicted=pt.slope_predicted, regime=pt.regime,
                                       normalized_empirical=pt.slope_empirical / scale if scale > 0 else None)
                        row["status"] = "ok"
                    except (ValueError, ArithmeticError) as exc:
                        row.update(status="error", error=f"{type(exc).__name__}: {exc}")
                    rows.append(row)
    return rows


def _completed_prefix(path: Path, cfg: ExperimentConfig) -> list[list[str]]:
    """Rows of the contiguous run of finished points in an earlier output file."""
    if not path.exists():
        return []
    with path.open(newline="") as fh:
        data = list(csv.reader(fh))
    if not data or tuple(data[0]) != ROW_COLUMNS:
        raise ConfigError(f"{path} exists with a different schema; remove it or choose another --out")
    h_idx, p_idx = ROW_COLUMNS.index("config_hash"), ROW_COLUMNS.index("point_index")
    rows = [r for r in data[1:] if len(r) == len(ROW_COLUMNS)]
    if any(r[h_idx] != cfg.config_hash() for r in rows):
        raise ConfigError(f"{path} was produced by a different config; remove it or choose another --out")
    per_point = _rows_per_point(cfg)
    kept, k = [], 0
    while True:
        block = [r for r in rows if r[p_idx] == str(k)]
        if len(block) != per_point:
            break
        kept.extend(block)
        k += 1
    return kept


def _rows_per_point(cfg: ExperimentConfig) -> int:
    total = 0
    for q in cfg.quantities:
        total += len(cfg.methods) * (len(cfg.power_c) if q == "power" else 1)
    return total * len(cfg.tests)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, _global_overrides(args))
    out = Path(cfg.out)
    path = out / SIM_FILE
    done_rows = _completed_prefix(path, cfg)
    n_done = len(done_rows) // _rows_per_point(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json({"schema_version": SCHEMA_VERSION, "config_hash": cfg.config_hash(), "config": cfg.to_json()},
               out / SIM_CONFIG_FILE)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        w.writerows(done_rows)
    if n_done:
        log.info("resuming after %d completed points", n_done)
    todo = list(range(n_done, len(cfg.points)))
    cfg_json = cfg.to_json()
    cfg_json["grid"] = {"points": cfg_json.pop("points")}
    timings: dict[str, float] = {}

    def emit(i: int, rows: list[dict], seconds: float) -> None:
        _write_csv(path, rows, ROW_COLUMNS, append=True)
        timings[str(i)] = seconds
        log.info("point %d (n=%d, N=%d) done in %.2fs", i, *cfg.points[i], seconds)

    if cfg.workers == 1 or len(todo) <= 1:
        for i in todo:
            t0 = time.perf_counter()
            emit(i, simulate_point(cfg_json, i), time.perf_counter() - t0)
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            t0 = time.perf_counter()
            futures = {i: pool.submit(simulate_point, cfg_json, i) for i in todo}
            for i in todo:  # emit strictly in point order
                emit(i, futures[i].result(), time.perf_counter() - t0)
    _dump_json(timings, out / TIMINGS_FILE)
    sys.stdout.write(f"wrote {path}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare


COMPARE_COLUMNS = ("n", "N", "lam", "test", "slope_empirical", "slope_ci_low", "slope_ci_high", "slope_predicted",
                   "ratio", "normalized_empirical", "status")


def _float_or_none(s: str) -> float | None:
    return float(s) if s not in ("", None) else None


def _trend_summary(ns: list[int], ratios: list[float | None]) -> dict:
    vals = [r for r in ratios if r is not None]
    if len(vals) != len(ratios) or not vals:
        return {"n": ns, "ratio": ratios, "toward_one": None, "final_ratio": None}
    dev = [abs(r - 1) for r in vals]
    return {"n": ns, "ratio": vals, "abs_dev": dev, "final_ratio": vals[-1],
            "toward_one": bool(dev[-1] < dev[0]),
            "monotone_toward_one": bool(all(b <= a for a, b in zip(dev, dev[1:])))}


def cmd_compare(args) -> int:
    if args.sim is None or args.pred is None:
        raise ValidationError("compare needs --sim <csv> and --pred <json>")
    try:
        with open(args.sim, newline="") as fh:
            sim = list(csv.DictReader(fh))
        pred = json.loads(Path(args.pred).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read inputs: {exc}") from None
    alpha = [r for r in sim if r.get("quantity") == "alpha" and r.get("status") == "ok"]
    sim_keys = {(int(r["n"]), int(r["N"])) for r in alpha}
    pred_points = {(int(p["n"]), int(p["N"])): p for p in pred.get("points", [])}
    missing_pred = sorted(sim_keys - set(pred_points))
    missing_sim = sorted(set(pred_points) - sim_keys)
    if missing_pred or missing_sim:
        sys.stderr.write(_dump_json({"error": "grid key mismatch", "only_in_simulation": missing_pred,
                                     "only_in_prediction": missing_sim}))
        return EXIT_VALIDATION
    rows, by_test = [], {}
    for r in alpha:
        key = (int(r["n"]), int(r["N"]))
        pe = pred_points[key]["slopes"].get(r["test"], {})
        sp = pe.get("value") if pe.get("status") == "OK" else None
        se = float(r["slope_empirical"])
        ratio = se / sp if sp else None
        rows.append({"n": key[0], "N": key[1], "lam": float(r["lam"]), "test": r["test"], "slope_empirical": se,
                     "slope_ci_low": float(r["slope_ci_low"]), "slope_ci_high": float(r["slope_ci_high"]),
                     "slope_predicted": sp, "ratio": ratio,
                     "normalized_empirical": _float_or_none(r["normalized_empirical"]),
                     "status": pe.get("status", "MISSING")})
        by_test.setdefault(r["test"], []).append(rows[-1])
    trends = {}
    for test, rs in by_test.items():
        rs = sorted(rs, key=lambda x: x["n"])
        trends[test] = _trend_summary([x["n"] for x in rs], [x["ratio"] for x in rs])
    are = []
    chi = {(x["n"], x["N"]): x for x in by_test.get("chi2", [])}
    for test, rs in by_test.items():
        if test == "chi2":
            continue
        for x in rs:
            c = chi.get((x["n"], x["N"]))
            if c is None:
                continue
            theo = pred_points[(x["n"], x["N"])]["efficiencies"].get(f"ARE_ALPHA(chi2,{test})", {})
            are.append({"n": x["n"], "N": x["N"], "pair": f"chi2/{test}",
                        "slope_ratio_empirical": c["slope_empirical"] / x["slope_empirical"],
                        "theoretical": theo.get("value"), "theoretical_status": theo.get("status")})
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    rows.sort(key=lambda x: (x["test"], x["n"], x["N"]))
    _write_csv(out / "compare.csv", rows, COMPARE_COLUMNS)
    summary = {"schema_version": SCHEMA_VERSION, "trends": trends, "slope_ratios": are}
    _dump_json(summary, out / "compare.json")
    sys.stdout.write(_dump_json(summary))
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle


def cmd_oracle(args) -> int:
    if args.n is None or args.cells is None:
        raise ValidationError("oracle needs --n and --N")
    if args.n < 1 or args.cells < 1:
        raise ValidationError("n and N must be positive")
    stat = args.stat
    if stat not in KERNELS:
        raise ValidationError(f"unknown statistic {stat!r}")
    p = np.full(args.cells, 1.0 / args.cells)
    report: dict[str, Any] = {"n": args.n, "N": args.cells, "stat": stat}
    if args.n <= ORACLE_MAX_N and args.cells <= ORACLE_MAX_CELLS:
        nm = null_moments(stat, args.n, args.cells, mode="enumerate")
    else:
        nm = null_moments(stat, args.n, args.cells, mode="marginal")
    report["null_mean"], report["null_var"], report["moments_method"] = nm.mean, nm.var, nm.method
    if args.threshold is not None:
        try:
            est = exact_tail(args.n, args.cells, p, stat, args.threshold, strict=args.strict)
        except InstanceTooLargeError as exc:
            raise ValidationError(str(exc)) from None
        report["threshold"], report["strict"] = args.threshold, args.strict
        report["tail_probability"] = est.p_hat
    sys.stdout.write(_dump_json(report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--budget", type=int, help="statistic evaluations per estimate")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="parallel worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sparsegof", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", parents=[common], help="Poisson moment summaries")
    p.add_argument("--kernel", default="chi2")
    p.add_argument("--lambda", dest="lam", required=True, help="comma-separated lambda values")
    p.add_argument("--N", dest="cells", type=int, default=1, help="cell count for L3N")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("predict", parents=[common], help="theoretical slopes and efficiencies")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", parents=[common], help="empirical slopes and power")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", parents=[common], help="join simulation with predictions")
    p.add_argument("--sim", help="simulate.csv")
    p.add_argument("--pred", help="predict.json")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", parents=[common], help="exact enumeration values")
    p.add_argument("--n", type=int)
    p.add_argument("--N", dest="cells", type=int)
    p.add_argument("--stat", default="chi2")
    p.add_argument("--threshold", type=float)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, ConfigError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - the CLI boundary maps failures to exit 3
        log.debug("runtime failure", exc_info=True)
        sys.stderr.write(f"runtime error: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
