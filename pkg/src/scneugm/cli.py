"""Command-line stages: network generation, training, evaluation and the summary report.

Artifacts land in the output directory. Checkpoints are named
``<stage>.<config-hash>.ckpt.json`` so a changed config never silently reuses
a stale model; every CSV starts with a ``# config=<hash> seed=<seed>`` line.
Wall-clock columns live in ``*.timing.csv`` sidecars so that the main CSVs
are byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from .artifacts import read_stamp, write_csv, write_json
from .config import ConfigError, ExperimentConfig, load_experiment_config, to_dict
from .embedding import SPECS as SENN_SPECS, SennParams, embed_states, pretrain_autoencoder
from .graph.coloring import chg_graph, greedy_color, ifg_graph
from .graph.egnn import SPEC as EGNN_SPEC, FeatureScaler, PretrainedModels, fit_feature_scaler
from .graph.es import TRACE_HEADER, train_es
from .graph.pg import train_pg
from .hashing import SPEC as DHF_SPEC, bucket_pairs, bucket_quality, hash_codes, train_dhf
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .online import PHASES, ROUND_HEADER, run_online, per_slot_histogram
from .predictors import PredictorParams, pretrain_predictors, predict_pairs, roc_auc
from .report import MissingArtifacts, build_report
from .rng import child_seed, stream, topology_seed
from .training import TrainingDiverged
from .wifi.csma import simulate_periods
from .wifi.network import generate_network, measure_states, pair_indicators

STAGES = ("gen-net", "pretrain-embed", "pretrain-pred", "train-dhf", "dhf-grid", "train-es",
          "train-pg", "eval-static", "eval-mobile", "report")
SCHEMES_MOBILE = ("NGM-B", "No-Comb", "NGM-A")
AUC_NETWORKS = 5


class UserError(Exception):
    """Bad input or missing prerequisite; exit code 1."""


def _hash(*parts) -> str:
    blob = json.dumps([to_dict(p) for p in parts], sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def stage_hashes(cfg: ExperimentConfig) -> dict[str, str]:
    """Content hash per artifact family, chained through each stage's prerequisites."""
    t = cfg.train
    h = {"net": _hash("net", cfg.radio, cfg.seed)}
    h["embed"] = _hash("embed", cfg.radio, cfg.seed, t.embed)
    h["predictors"] = _hash("predictors", h["embed"], t.predictors)
    h["dhf"] = _hash("dhf", h["embed"], t.dhf)
    h["es"] = _hash("es", h["predictors"], h["dhf"], t.es)
    h["pg"] = _hash("pg", h["predictors"], h["dhf"], t.pg)
    h["grid"] = _hash("grid", h["dhf"], cfg.dhf_grid_bits, cfg.dhf_grid_tables,
                      cfg.dhf_grid_seeds)
    h["static"] = _hash("static", h["es"], cfg.online, cfg.eval_topologies, cfg.timing_stas,
                        cfg.timing_rounds)
    h["mobile"] = _hash("mobile", h["es"], cfg.online, cfg.eval_topologies, cfg.mobile_speeds)
    return h


class Runner:
    def __init__(self, cfg: ExperimentConfig, out_dir: Path, force: bool = False):
        self.cfg = cfg
        self.out = out_dir
        self.force = force
        self.hashes = stage_hashes(cfg)
        self.out.mkdir(parents=True, exist_ok=True)

    # -- plumbing ---------------------------------------------------------

    def ckpt(self, stage: str) -> Path:
        return self.out / f"{stage}.{self.hashes[stage]}.ckpt.json"

    def require(self, stage: str, producer: str) -> Path:
        path = self.ckpt(stage)
        if not path.exists():
            raise UserError(f"missing prerequisite checkpoint {path.name} (run `{producer}` first)")
        return path

    def up_to_date(self, family: str, *paths: Path) -> bool:
        if self.force:
            return False
        for p in paths:
            if p.suffix == ".csv":
                stamp = read_stamp(p)
                if stamp is None or stamp.get("config") != self.hashes[family]:
                    return False
            elif not p.exists():
                return False
        return True

    def csv(self, name: str, family: str, header, rows) -> Path:
        path = self.out / name
        write_csv(path, header, rows, self.hashes[family], self.cfg.seed)
        return path

    def load_senn(self) -> SennParams:
        nets, _ = load_checkpoint(self.require("embed", "pretrain-embed"))
        return SennParams({name: nets[name][1] for name in SENN_SPECS})

    def load_predictors(self) -> PredictorParams:
        nets, _ = load_checkpoint(self.require("predictors", "pretrain-pred"))
        return PredictorParams(nets["PCNN"][1], nets["PHNN"][1])

    def load_dhf(self):
        nets, _ = load_checkpoint(self.require("dhf", "train-dhf"))
        return nets["DHF"][1]

    def load_egnn(self, stage: str = "es"):
        nets, meta = load_checkpoint(self.require(stage, "train-es" if stage == "es" else "train-pg"))
        return nets["EGNN"][1], FeatureScaler.from_dict(meta["scaler"])

    def pretrained(self, scaler: FeatureScaler | None = None) -> PretrainedModels:
        senn, preds, dhf = self.load_senn(), self.load_predictors(), self.load_dhf()
        if scaler is None:
            es = self.cfg.train.es
            scaler = fit_feature_scaler(self.cfg.radio, senn, preds, dhf,
                                        child_seed(self.cfg.seed, "scaler"),
                                        batch_size=es.k_start, query_bits=es.query_bits)
        return PretrainedModels(senn, preds, dhf, scaler)

    # -- stages -----------------------------------------------------------

    def gen_net(self) -> str:
        path = self.out / "network.csv"
        if self.up_to_date("net", path):
            return f"gen-net: up to date ({path.name})"
        net = generate_network(self.cfg.radio, self.cfg.seed)
        rows = [(k, float(x), float(y), int(a), float(s), float(d * 1e6))
                for k, ((x, y), a, s, d) in enumerate(zip(net.sta_positions, net.assoc_ap,
                                                          net.assoc_loss, net.packet_duration))]
        self.csv(path.name, "net", ("sta", "x_m", "y_m", "assoc_ap", "assoc_loss_db",
                                    "duration_us"), rows)
        return f"gen-net: {net.num_stas} STAs -> {path.name}"

    def _pretrain(self, stage: str, trace_name: str, train_fn, networks_fn) -> str:
        ckpt, trace_path = self.ckpt(stage), self.out / trace_name
        if self.up_to_date(stage, ckpt, trace_path):
            return f"{stage}: up to date ({ckpt.name})"
        params, trace = train_fn()
        self.csv(trace_name, stage, trace.header, trace.rows())
        smooth = trace.smoothed_normalized()
        meta = {"stage": stage, "config": self.hashes[stage], "seed": self.cfg.seed,
                "final_smoothed_normalized_loss": smooth[-1] if smooth else None}
        save_checkpoint(ckpt, networks_fn(params), meta)
        return f"{stage}: {len(trace.losses)} steps, smoothed normalized loss " \
               f"{meta['final_smoothed_normalized_loss']:.4f} -> {ckpt.name}"

    def pretrain_embed(self) -> str:
        cfg = self.cfg
        return self._pretrain("embed", "embed.trace.csv",
                              lambda: pretrain_autoencoder(cfg.train.embed, cfg.radio, cfg.seed),
                              lambda p: p.networks())

    def pretrain_pred(self) -> str:
        cfg = self.cfg
        senn = self.load_senn()
        msg = self._pretrain("predictors", "predictors.trace.csv",
                             lambda: pretrain_predictors(cfg.train.predictors, cfg.radio, senn,
                                                         cfg.seed),
                             lambda p: p.networks())
        preds = self.load_predictors()
        pc_s, ph_s, pc_y, ph_y = [], [], [], []
        for n in range(AUC_NETWORKS):
            net = generate_network(cfg.radio, topology_seed(cfg.seed, "eval", 10_000 + n))
            emb = embed_states(measure_states(net, cfg.radio), senn, cfg.radio)
            rows, cols = np.nonzero(~np.eye(net.num_stas, dtype=bool))
            pc, ph = predict_pairs(emb, rows, cols, preds)
            ind = pair_indicators(net, cfg.radio)
            pc_s.append(pc), ph_s.append(ph)
            pc_y.append(ind.contending[rows, cols]), ph_y.append(ind.hidden[rows, cols])
        auc_c = roc_auc(np.concatenate(pc_s), np.concatenate(pc_y))
        auc_h = roc_auc(np.concatenate(ph_s), np.concatenate(ph_y))
        return f"{msg}; held-out AUC contending {auc_c:.3f} hidden {auc_h:.3f}"

    def train_dhf(self) -> str:
        cfg = self.cfg
        senn = self.load_senn()
        return self._pretrain("dhf", "dhf.trace.csv",
                              lambda: train_dhf(cfg.train.dhf, cfg.radio, senn, cfg.seed),
                              lambda p: {"DHF": (DHF_SPEC, p)})

    def dhf_grid(self) -> str:
        cfg = self.cfg
        path = self.out / "dhf_grid.csv"
        if self.up_to_date("grid", path):
            return f"dhf-grid: up to date ({path.name})"
        senn, dhf = self.load_senn(), self.load_dhf()
        rows = []
        for s in range(cfg.dhf_grid_seeds):
            net = generate_network(cfg.radio, topology_seed(cfg.seed, "grid", s))
            codes = hash_codes(embed_states(measure_states(net, cfg.radio), senn, cfg.radio), dhf)
            ind = pair_indicators(net, cfg.radio)
            for psi in cfg.dhf_grid_bits:
                for ups in cfg.dhf_grid_tables:
                    pairs = bucket_pairs(codes, psi, ups, stream(cfg.seed, "bucket", s, psi, ups))
                    frac, recall = bucket_quality(pairs, ind)
                    rows.append((s, psi, ups, frac, recall, recall - frac))
        self.csv(path.name, "grid", ("seed", "query_bits", "tables", "pair_fraction", "recall",
                                     "efficiency"), rows)
        return f"dhf-grid: {len(rows)} cells -> {path.name}"

    def _train_egnn(self, stage: str) -> str:
        cfg = self.cfg
        es_cfg = cfg.train.es if stage == "es" else cfg.train.pg
        prefix = f"es-{es_cfg.schedule}" if stage == "es" else "pg"
        ckpt = self.ckpt(stage)
        trace_path = self.out / f"{prefix}.trace.csv"
        if self.up_to_date(stage, ckpt, trace_path):
            return f"{stage}: up to date ({ckpt.name})"
        models = self.pretrained()
        if stage == "es":
            result = train_es(es_cfg, cfg.radio, models, cfg.seed)
        else:
            result = train_pg(es_cfg, cfg.radio, models, cfg.seed)
        self.csv(trace_path.name, stage, TRACE_HEADER[:-1], [r[:-1] for r in result.rows])
        self.csv(f"{prefix}.timing.csv", stage, ("step", "wall_time"),
                 [(r[0], r[-1]) for r in result.rows])
        meta = {"stage": stage, "config": self.hashes[stage], "seed": cfg.seed,
                "schedule": es_cfg.schedule, "converged": result.converged,
                "steps": len(result.rows), "scaler": models.scaler.to_dict()}
        save_checkpoint(ckpt, {"EGNN": (EGNN_SPEC, result.params)}, meta)
        hits = np.mean([r[3] for r in result.rows]) if result.rows else 0.0
        return (f"{stage}: {len(result.rows)} steps, final K'={result.rows[-1][1]}, "
                f"mean hit rate {hits:.3f}, converged={result.converged} -> {ckpt.name}")

    def train_es(self) -> str:
        return self._train_egnn("es")

    def train_pg(self) -> str:
        return self._train_egnn("pg")

    def eval_static(self) -> str:
        cfg = self.cfg
        paths = [self.out / n for n in ("static.csv", "static_rounds.csv", "static_slots.csv")]
        if self.up_to_date("static", *paths):
            return "eval-static: up to date (static.csv)"
        egnn, scaler = self.load_egnn()
        models = self.pretrained(scaler)
        online = dataclasses.replace(cfg.online, mobility=False)
        target = cfg.radio.reliability_target
        rows, round_rows, slot_rows, timing_rows = [], [], [], []
        for t in range(cfg.eval_topologies):
            net = generate_network(cfg.radio, topology_seed(cfg.seed, "eval", t))
            res_b = run_online(net, models, egnn, online, cfg.radio, child_seed(cfg.seed, "static", t))
            res_a = run_online(net, models, egnn,
                               dataclasses.replace(online, pairs="all", history=0, rounds=1),
                               cfg.radio, child_seed(cfg.seed, "static", t))
            ind = pair_indicators(net, cfg.radio)
            schemes = {"NGM-B": res_b.assignment, "NGM-A": res_a.assignment,
                       "CHG": greedy_color(chg_graph(ind)),
                       "IFG": greedy_color(ifg_graph(measure_states(net, cfg.radio)))}
            sim_seed = child_seed(cfg.seed, "static-sim", t)
            for name, asg in schemes.items():
                rep = simulate_periods(net, asg, online.periods_per_round, sim_seed, cfg.radio)
                rows.append((t, name, asg.num_slots, rep.violations(target),
                             float(1.0 - rep.reliability.mean())))
                if name == "NGM-B":
                    slot_rows.extend((t, *h) for h in per_slot_histogram(asg, rep, target))
            for rec in res_b.records:
                round_rows.append((t, *rec.row()))
                timing_rows.append((0, t, "NGM-B", net.num_stas, *rec.timing_row()))
        # round-time profile on one larger network
        big = generate_network(cfg.radio.with_stas(cfg.timing_stas),
                               topology_seed(cfg.seed, "eval", 1_000_000))
        for name, variant in (("NGM-B", online),
                              ("NGM-A", dataclasses.replace(online, pairs="all", history=0))):
            res = run_online(big, models, egnn,
                             dataclasses.replace(variant, rounds=cfg.timing_rounds),
                             cfg.radio, child_seed(cfg.seed, "profile"))
            timing_rows.extend((1, 0, name, big.num_stas, *rec.timing_row()) for rec in res.records)
        self.csv("static.csv", "static", ("topology", "scheme", "slots", "violations",
                                          "loss_rate"), rows)
        self.csv("static_rounds.csv", "static", ("topology", *ROUND_HEADER), round_rows)
        self.csv("static_slots.csv", "static", ("topology", "slot", "sta_count", "violations"),
                 slot_rows)
        self.csv("static.timing.csv", "static",
                 ("profile", "topology", "scheme", "num_stas", "round", "tau_ms",
                  *(f"{p}_ms" for p in PHASES)), timing_rows)
        mean = {s: np.mean([r[2] for r in rows if r[1] == s]) for s in ("NGM-B", "CHG", "IFG")}
        return (f"eval-static: mean slots NGM-B {mean['NGM-B']:.2f} CHG {mean['CHG']:.2f} "
                f"IFG {mean['IFG']:.2f} -> static.csv")

    def eval_mobile(self) -> str:
        cfg = self.cfg
        paths = [self.out / "mobile.csv", self.out / "mobile_rounds.csv"]
        if self.up_to_date("mobile", *paths):
            return "eval-mobile: up to date (mobile.csv)"
        egnn, scaler = self.load_egnn()
        models = self.pretrained(scaler)
        base = dataclasses.replace(cfg.online, mobility=True)
        variants = {"NGM-B": base, "No-Comb": dataclasses.replace(base, history=0),
                    "NGM-A": dataclasses.replace(base, pairs="all", history=0)}
        rows, round_rows, timing_rows = [], [], []
        for speed in cfg.mobile_speeds:
            for name in SCHEMES_MOBILE:
                for t in range(cfg.eval_topologies):
                    net = generate_network(cfg.radio, topology_seed(cfg.seed, "eval", t))
                    res = run_online(net, models, egnn, variants[name], cfg.radio,
                                     child_seed(cfg.seed, "mobile", t), speed=speed)
                    s = res.summary()
                    rows.append((speed, name, t, s["loss_rate"], s["mean_slots"],
                                 s["mean_violations"]))
                    for rec in res.records:
                        round_rows.append((speed, name, t, *rec.row()))
                        timing_rows.append((speed, name, t, *rec.timing_row()))
        self.csv("mobile.csv", "mobile", ("speed", "scheme", "topology", "loss_rate",
                                          "mean_slots", "mean_violations"), rows)
        self.csv("mobile_rounds.csv", "mobile", ("speed", "scheme", "topology", *ROUND_HEADER),
                 round_rows)
        self.csv("mobile.timing.csv", "mobile",
                 ("speed", "scheme", "topology", "round", "tau_ms", *(f"{p}_ms" for p in PHASES)),
                 timing_rows)
        return f"eval-mobile: {len(rows)} runs -> mobile.csv"

    def report(self) -> str:
        es = self.cfg.train.es
        try:
            rep = build_report(self.out, es.k_total, es.hit_threshold, self.cfg.radio.num_stas)
        except MissingArtifacts as exc:
            raise UserError(str(exc)) from exc
        write_json(self.out / "report.json", rep)
        flags = " ".join(f"{k}={'pass' if v['pass'] else 'fail'}" for k, v in rep.items())
        return f"report: {flags} -> report.json"

    def run(self, stage: str) -> str:
        fn = getattr(self, stage.replace("-", "_"))
        return fn()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scneugm", description=__doc__.splitlines()[0])
    p.add_argument("stage", choices=STAGES)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field, e.g. train.es.max_steps=500 (repeatable)")
    p.add_argument("--output-dir", help="artifact directory (else config, else $SCNEUGM_OUTPUT_DIR)")
    p.add_argument("--force", action="store_true", help="rerun a stage even if up to date")
    p.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")
    return p


def _output_dir(args, cfg: ExperimentConfig) -> Path:
    chosen = args.output_dir or cfg.output_dir or os.environ.get("SCNEUGM_OUTPUT_DIR")
    if not chosen:
        raise UserError("no output directory: pass --output-dir, set output_dir in the config, "
                        "or export SCNEUGM_OUTPUT_DIR")
    return Path(chosen)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise UserError("--threads must be >= 1")
        cfg = load_experiment_config(args.config, args.overrides)
        runner = Runner(cfg, _output_dir(args, cfg), args.force)
        if args.threads is not None:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.threads):
                msg = runner.run(args.stage)
        else:
            msg = runner.run(args.stage)
    except (UserError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(msg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
