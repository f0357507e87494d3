"""Drive every CLI stage in order, as a user would from the shell."""

from pathlib import Path

from scneugm.cli import main

TINY = [
    "radio.num_stas=24",
    "train.embed.steps=6", "train.embed.num_stas=12",
    "train.predictors.steps=6", "train.predictors.num_stas=12",
    "train.dhf.steps=6", "train.dhf.num_stas=12",
    "train.es.max_steps=6", "train.es.k_start=6", "train.es.k_total=12",
    "train.es.batch_increment=3", "train.es.periods=20",
    "train.pg.max_steps=6", "train.pg.k_start=6", "train.pg.k_total=12", "train.pg.periods=20",
    "dhf_grid_seeds=2", "dhf_grid_bits=[1,2,3]", "dhf_grid_tables=[1,5]",
    "eval_topologies=1", "online.rounds=2", "online.periods_per_round=20",
    "mobile_speeds=[0,5]", "timing_stas=30", "timing_rounds=1",
]

# (stage, extra overrides); the ES stage runs once per batching schedule
STEPS = [
    ("gen-net", []), ("pretrain-embed", []), ("pretrain-pred", []), ("train-dhf", []),
    ("dhf-grid", []),
    ("train-es", ["train.es.schedule=fixed"]), ("train-pg", []),
    ("train-es", ["train.es.schedule=linear"]), ("train-es", []),
    ("eval-static", []), ("eval-mobile", []), ("report", []),
]


def run_stage(out: Path, stage: str, overrides, extra=(), force=False) -> int:
    argv = [stage, "--output-dir", str(out)]
    for item in list(overrides) + list(extra):
        argv += ["--set", item]
    if force:
        argv.append("--force")
    return main(argv)


def run_pipeline(out: Path, overrides, force=False) -> list[int]:
    return [run_stage(out, stage, overrides, extra, force) for stage, extra in STEPS]
