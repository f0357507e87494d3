"""Summary metrics and pass/fail checks computed from the emitted CSV artifacts only."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .artifacts import CsvTable, read_csv

ES_PG_RATIO = 3.0
CURRICULUM_RATIO = 0.5
SLOT_RATIO = 0.85
VIOLATION_SHARE = 0.02
TAU_RATIO = 0.5
PAIRWISE_SPEEDUP = 4.0
SIGN_TEST_ALPHA = 0.05

REPORT_INPUTS = {
    "es_fixed": "es-fixed.trace.csv",
    "pg": "pg.trace.csv",
    "es_adaptive": "es-adaptive.trace.csv",
    "es_adaptive_timing": "es-adaptive.timing.csv",
    "es_linear": "es-linear.trace.csv",
    "es_linear_timing": "es-linear.timing.csv",
    "static": "static.csv",
    "static_timing": "static.timing.csv",
    "mobile": "mobile.csv",
    "dhf_grid": "dhf_grid.csv",
}


class MissingArtifacts(FileNotFoundError):
    def __init__(self, missing: list[str]):
        super().__init__("missing artifacts: " + ", ".join(missing))
        self.missing = missing


def mean_hit_rate(trace: CsvTable) -> float:
    return float(np.mean(trace.column("hit_rate")))


def es_vs_pg(es: CsvTable, pg: CsvTable) -> dict:
    es_omega, pg_omega = mean_hit_rate(es), mean_hit_rate(pg)
    ratio = es_omega / pg_omega if pg_omega > 0 else float("inf")
    return {"es_mean_hit_rate": es_omega, "pg_mean_hit_rate": pg_omega, "ratio": ratio,
            "pass": bool(ratio >= ES_PG_RATIO)}


def time_to_full_size(trace: CsvTable, timing: CsvTable, k_total: int,
                      threshold: float) -> float | None:
    """Wall time of the first step at K_total with hit rate >= threshold."""
    for row, t in zip(trace.rows, timing.rows):
        if int(row["batch_size"]) >= k_total and float(row["hit_rate"]) >= threshold:
            return float(t["wall_time"])
    return None


def curriculum(adaptive: CsvTable, adaptive_t: CsvTable, linear: CsvTable, linear_t: CsvTable,
               k_total: int, threshold: float) -> dict:
    ta = time_to_full_size(adaptive, adaptive_t, k_total, threshold)
    tl = time_to_full_size(linear, linear_t, k_total, threshold)
    ratio = ta / tl if ta is not None and tl is not None and tl > 0 else None
    return {"adaptive_seconds": ta, "linear_seconds": tl, "ratio": ratio,
            "adaptive_max_batch": max(adaptive.column("batch_size", int)),
            "linear_max_batch": max(linear.column("batch_size", int)),
            "pass": bool(ratio is not None and ratio <= CURRICULUM_RATIO)}


def slot_savings(static: CsvTable, num_stas: int) -> dict:
    by_scheme: dict[str, dict[str, list[float]]] = {}
    for row in static.rows:
        entry = by_scheme.setdefault(row["scheme"], {"slots": [], "violations": []})
        entry["slots"].append(float(row["slots"]))
        entry["violations"].append(float(row["violations"]))
    means = {s: {"slots": float(np.mean(v["slots"])),
                 "violation_share": float(np.mean(v["violations"])) / num_stas}
             for s, v in by_scheme.items()}
    ngm = means["NGM-B"]
    vs_chg = ngm["slots"] / means["CHG"]["slots"]
    vs_ifg = ngm["slots"] / means["IFG"]["slots"]
    ok = vs_chg <= SLOT_RATIO and vs_ifg <= SLOT_RATIO and ngm["violation_share"] <= VIOLATION_SHARE
    return {"schemes": means, "ngm_over_chg": vs_chg, "ngm_over_ifg": vs_ifg, "pass": bool(ok)}


def _sign_test_decreasing(values: np.ndarray) -> tuple[int, int, float]:
    """values (seeds, Ψ, Υ): count steps Ψ -> Ψ+1 that decrease vs increase; one-sided p."""
    diff = np.diff(values, axis=1)
    down, up = int((diff < 0).sum()), int((diff > 0).sum())
    if down + up == 0:
        return down, up, 1.0
    return down, up, float(binomtest(down, down + up, 0.5, alternative="greater").pvalue)


def dhf_grid(grid: CsvTable) -> dict:
    seeds = sorted({int(r["seed"]) for r in grid.rows})
    bits = sorted({int(r["query_bits"]) for r in grid.rows})
    tables = sorted({int(r["tables"]) for r in grid.rows})
    recall = np.zeros((len(seeds), len(bits), len(tables)))
    frac = np.zeros_like(recall)
    for r in grid.rows:
        idx = (seeds.index(int(r["seed"])), bits.index(int(r["query_bits"])),
               tables.index(int(r["tables"])))
        recall[idx] = float(r["recall"])
        frac[idx] = float(r["pair_fraction"])
    r_down, r_up, r_p = _sign_test_decreasing(recall)
    f_down, f_up, f_p = _sign_test_decreasing(frac)
    eff = (recall - frac).mean(axis=0)
    i, j = np.unravel_index(int(np.argmax(eff)), eff.shape)
    best_bits, best_tables = bits[i], tables[j]
    ok = r_p < SIGN_TEST_ALPHA and f_p < SIGN_TEST_ALPHA and best_bits >= 5 and best_tables >= 10
    return {"recall_decreases": r_down, "recall_increases": r_up, "recall_p": r_p,
            "fraction_decreases": f_down, "fraction_increases": f_up, "fraction_p": f_p,
            "best_query_bits": best_bits, "best_tables": best_tables,
            "best_efficiency": float(eff[i, j]), "pass": bool(ok)}


def bucketing_speedup(timing: CsvTable) -> dict:
    rows = [r for r in timing.rows if r["profile"] == "1"]
    out = {}
    for scheme in ("NGM-B", "NGM-A"):
        sel = [r for r in rows if r["scheme"] == scheme]
        out[scheme] = {"tau_ms": float(np.mean([float(r["tau_ms"]) for r in sel])),
                       "pairwise_ms": float(np.mean([float(r["Pre_ms"]) + float(r["EG_ms"])
                                                     for r in sel]))}
    tau_ratio = out["NGM-B"]["tau_ms"] / out["NGM-A"]["tau_ms"]
    speedup = out["NGM-A"]["pairwise_ms"] / out["NGM-B"]["pairwise_ms"]
    return {"schemes": out, "tau_ratio": tau_ratio, "pairwise_speedup": speedup,
            "num_stas": int(rows[0]["num_stas"]) if rows else None,
            "pass": bool(tau_ratio <= TAU_RATIO and speedup >= PAIRWISE_SPEEDUP)}


def mobility(mobile: CsvTable) -> dict:
    speeds = sorted({float(r["speed"]) for r in mobile.rows})
    loss: dict[str, dict[float, float]] = {}
    for scheme in ("NGM-B", "No-Comb", "NGM-A"):
        loss[scheme] = {}
        for v in speeds:
            sel = [float(r["loss_rate"]) for r in mobile.rows
                   if r["scheme"] == scheme and float(r["speed"]) == v]
            loss[scheme][v] = float(np.mean(sel))
    top = speeds[-1]
    b = np.array([loss["NGM-B"][v] for v in speeds])
    nc = np.array([loss["No-Comb"][v] for v in speeds])
    ok = bool(np.all(b <= nc) and loss["NGM-B"][top] <= loss["NGM-A"][top]
              and float(np.mean(nc - b)) > 0)
    return {"loss_rate": {s: {str(v): x for v, x in d.items()} for s, d in loss.items()},
            "pass": ok}


def build_report(out_dir, k_total: int, hit_threshold: float, num_stas: int) -> dict:
    out_dir = Path(out_dir)
    missing = [name for name in REPORT_INPUTS.values() if not (out_dir / name).exists()]
    if missing:
        raise MissingArtifacts(missing)
    t = {key: read_csv(out_dir / name) for key, name in REPORT_INPUTS.items()}
    return {
        "es_vs_pg": es_vs_pg(t["es_fixed"], t["pg"]),
        "curriculum": curriculum(t["es_adaptive"], t["es_adaptive_timing"], t["es_linear"],
                                 t["es_linear_timing"], k_total, hit_threshold),
        "slot_savings": slot_savings(t["static"], num_stas),
        "dhf_grid": dhf_grid(t["dhf_grid"]),
        "bucketing_speedup": bucketing_speedup(t["static_timing"]),
        "mobility": mobility(t["mobile"]),
    }
