"""Command-line pipeline: synth, partition, train, select, evaluate,
inspect, sweep, report, and the chained ``all``.

Every stage reads and writes plain files under ``<out>/seed_<seed>/`` so
partial pipelines compose: running ``train`` then ``select`` against the
same directory produces exactly the files the corresponding stages of
``all`` would. Reports aggregate across seeds by mean and standard
deviation. No stage consults hidden state, so a fixed config + seed yields
bit-identical artifacts.

Worker count for party training comes from MODELMARKET_WORKERS (default:
logical cores).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import (
    ReportBundle,
    ReportRow,
    complete_inspection,
    emit_report,
    k_sweep,
    team_diversity,
)
from .config import (
    FUSION_METHODS,
    TEAM_METHODS,
    ExperimentConfig,
    load_config,
)
from .data import Dataset, PartitionPlan, label_distributions, load_csv, make_synthetic, partition
from .ensemble import evaluate_team, fuse
from .errors import ConfigError, InvalidInputError, ModelMarketError
from .market import MarketStore, ModelRecord
from .selection import EnsembleTeam, baseline_select, dedes_select_debug
from .training import accuracy, train_local, train_oracle

STAGES = ("synth", "partition", "train", "select", "evaluate",
          "inspect", "sweep", "report", "all")

_STAGE_TAGS = {"dataset": 0, "partition": 1, "train": 2,
               "selection": 3, "rs": 4, "oracle": 5}


def derive_seed(run_seed: int, stage: str, index: int | None = None) -> int:
    """Independent per-stage (and per-party) streams from one run seed."""
    entropy = [run_seed, _STAGE_TAGS[stage]]
    if index is not None:
        entropy.append(index)
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def seed_dir(cfg: ExperimentConfig, run_seed: int) -> Path:
    return Path(cfg.output_dir) / f"seed_{run_seed}"


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n",
                    encoding="utf-8")


def _read_json(path: Path) -> dict:
    if not path.exists():
        raise InvalidInputError(
            f"{path} is missing; run the earlier pipeline stages first"
        )
    return json.loads(path.read_text(encoding="utf-8"))


# -- stages ---------------------------------------------------------------


def stage_synth(cfg: ExperimentConfig, run_seed: int) -> Path:
    """Materialize the run's dataset as CSV (synthetic or ingested copy)."""
    if cfg.dataset.kind == "synthetic":
        ds = make_synthetic(cfg.dataset.classes, cfg.dataset.features,
                            cfg.dataset.samples, cfg.dataset.separation,
                            seed=derive_seed(run_seed, "dataset"))
    else:
        ds = load_csv(cfg.dataset.path, header=cfg.dataset.header)
    path = seed_dir(cfg, run_seed) / "dataset.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for i in range(ds.n):
            features = ",".join(repr(float(v)) for v in ds.X[i])
            handle.write(f"{features},{int(ds.y[i])}\n")
    return path


def _load_dataset(cfg: ExperimentConfig, run_seed: int) -> Dataset:
    return load_csv(seed_dir(cfg, run_seed) / "dataset.csv")


def stage_partition(cfg: ExperimentConfig, run_seed: int) -> Path:
    ds = _load_dataset(cfg, run_seed)
    plan = partition(ds, cfg.partition, cfg.m, split=cfg.split,
                     seed=derive_seed(run_seed, "partition"))
    path = seed_dir(cfg, run_seed) / "plan.json"
    _write_json(path, plan.to_json_dict())
    return path


def _load_plan(cfg: ExperimentConfig, run_seed: int) -> PartitionPlan:
    return PartitionPlan.from_json_dict(
        _read_json(seed_dir(cfg, run_seed) / "plan.json")
    )


def stage_train(cfg: ExperimentConfig, run_seed: int) -> Path:
    """Train every party (bounded worker pool) and fill the market store."""
    ds = _load_dataset(cfg, run_seed)
    plan = _load_plan(cfg, run_seed)

    def train_party(i: int):
        party_cfg = dataclasses.replace(
            cfg.train, seed=derive_seed(run_seed, "train", i)
        )
        result = train_local(ds.subset(plan.train[i]), ds.subset(plan.val[i]),
                             party_cfg)
        return ModelRecord(
            id=f"party_{i:03d}",
            params=result.params,
            n_train=len(plan.train[i]),
            score=result.score,
            party=i,
            partition=plan.strategy,
        )

    workers = int(os.environ.get("MODELMARKET_WORKERS", os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        records = list(pool.map(train_party, range(cfg.m)))

    store = MarketStore(seed_dir(cfg, run_seed) / "store")
    for record in records:
        store.save_record(record)
    return store.root


def _load_records(cfg: ExperimentConfig, run_seed: int) -> list[ModelRecord]:
    store = MarketStore(seed_dir(cfg, run_seed) / "store")
    records = store.load_records()
    if not records:
        raise InvalidInputError(
            f"{store.root} is empty; run the train stage first"
        )
    return records


def stage_select(cfg: ExperimentConfig, run_seed: int) -> Path:
    records = _load_records(cfg, run_seed)
    selection_cfg = dataclasses.replace(
        cfg.selection, seed=derive_seed(run_seed, "selection")
    )
    K = cfg.selection.K

    teams: dict[str, dict] = {}
    for method in cfg.methods:
        if method not in TEAM_METHODS:
            continue
        if method == "dedes":
            debug = dedes_select_debug(records, K, selection_cfg)
            team = debug.team
            debug_path = seed_dir(cfg, run_seed) / "selection_debug.json"
            debug_path.write_text(debug.to_json() + "\n", encoding="utf-8")
        elif method == "lds":
            ds = _load_dataset(cfg, run_seed)
            plan = _load_plan(cfg, run_seed)
            team = baseline_select(records, "lds", K,
                                   seed=derive_seed(run_seed, "selection"),
                                   label_dists=label_distributions(ds, plan),
                                   cfg=selection_cfg)
        else:
            team = baseline_select(records, method, K,
                                   seed=derive_seed(run_seed, "rs"))
        teams[method] = {
            "member_ids": list(team.member_ids),
            "weights": list(team.weights),
        }

    path = seed_dir(cfg, run_seed) / "teams.json"
    _write_json(path, {"K": K, "teams": teams})
    return path


def _load_teams(cfg: ExperimentConfig, run_seed: int) -> dict[str, EnsembleTeam]:
    doc = _read_json(seed_dir(cfg, run_seed) / "teams.json")
    return {
        method: EnsembleTeam(method, tuple(entry["member_ids"]),
                             tuple(entry["weights"]))
        for method, entry in doc["teams"].items()
    }


def stage_evaluate(cfg: ExperimentConfig, run_seed: int) -> Path:
    """Score every configured method on the global test set."""
    ds = _load_dataset(cfg, run_seed)
    plan = _load_plan(cfg, run_seed)
    records = _load_records(cfg, run_seed)
    teams = _load_teams(cfg, run_seed)
    testset = ds.subset(plan.global_test_indices())

    rows = []
    for method in cfg.methods:
        mean_bd = mean_ck = None
        if method in TEAM_METHODS:
            if method not in teams:
                raise InvalidInputError(
                    f"method {method!r} missing from teams.json; rerun select"
                )
            team = teams[method]
            acc = evaluate_team(team, records, testset)
            if len(team) >= 2:
                mean_bd, mean_ck = team_diversity(team, records, testset)
        elif method in FUSION_METHODS:
            acc = accuracy(fuse(records, method), testset)
        else:  # oracle
            oracle_cfg = dataclasses.replace(
                cfg.train, seed=derive_seed(run_seed, "oracle")
            )
            acc = accuracy(train_oracle(plan, ds, oracle_cfg).params, testset)
        rows.append(
            {
                "dataset": cfg.dataset.name,
                "partition": cfg.partition.strategy,
                "m": cfg.m,
                "K": cfg.selection.K,
                "method": method,
                "seed": run_seed,
                "accuracy": acc,
                "mean_bd": mean_bd,
                "mean_ck": mean_ck,
            }
        )

    path = seed_dir(cfg, run_seed) / "evaluation.json"
    _write_json(path, {"rows": rows})
    return path


def stage_inspect(cfg: ExperimentConfig, run_seed: int,
                  m_cap: int | None = None) -> Path:
    ds = _load_dataset(cfg, run_seed)
    plan = _load_plan(cfg, run_seed)
    records = _load_records(cfg, run_seed)
    teams = _load_teams(cfg, run_seed)
    testset = ds.subset(plan.global_test_indices())

    result = complete_inspection(records, testset,
                                 m_cap=m_cap if m_cap is not None else cfg.m_cap)
    ranks = {method: result.rank_of(team) for method, team in teams.items()}
    doc = {
        "total_teams": result.total,
        "ranks": ranks,
        "ranking": [
            {"mask": mask, "accuracy": acc} for mask, acc in result.ranked
        ],
        "ids": list(result.ids),
    }
    path = seed_dir(cfg, run_seed) / "inspection.json"
    _write_json(path, doc)
    return path


def stage_sweep(cfg: ExperimentConfig, run_seed: int) -> Path:
    ds = _load_dataset(cfg, run_seed)
    plan = _load_plan(cfg, run_seed)
    records = _load_records(cfg, run_seed)
    testset = ds.subset(plan.global_test_indices())
    selection_cfg = dataclasses.replace(
        cfg.selection, seed=derive_seed(run_seed, "selection")
    )
    Ks = cfg.sweep_Ks if cfg.sweep_Ks else range(1, cfg.m + 1)
    series = k_sweep(records, testset, selection_cfg, Ks)
    path = seed_dir(cfg, run_seed) / "sweep.json"
    _write_json(path, series.as_lists())
    return path


def stage_report(cfg: ExperimentConfig) -> tuple[Path, Path]:
    """Merge per-seed evaluations (plus ranks and sweeps) into one report."""
    rows = []
    sweeps = []
    for run_seed in cfg.seeds:
        evaluation = _read_json(seed_dir(cfg, run_seed) / "evaluation.json")
        inspection_path = seed_dir(cfg, run_seed) / "inspection.json"
        ranks, total = {}, None
        if inspection_path.exists():
            inspection = json.loads(inspection_path.read_text(encoding="utf-8"))
            ranks = inspection["ranks"]
            total = inspection["total_teams"]
        for entry in evaluation["rows"]:
            rows.append(
                ReportRow(
                    dataset=entry["dataset"],
                    partition=entry["partition"],
                    m=entry["m"],
                    K=entry["K"],
                    method=entry["method"],
                    seed=entry["seed"],
                    accuracy=entry["accuracy"],
                    mean_bd=entry["mean_bd"],
                    mean_ck=entry["mean_ck"],
                    rank=ranks.get(entry["method"]),
                    total_teams=total if entry["method"] in ranks else None,
                )
            )
        sweep_path = seed_dir(cfg, run_seed) / "sweep.json"
        if sweep_path.exists():
            doc = json.loads(sweep_path.read_text(encoding="utf-8"))
            doc["seed"] = run_seed
            sweeps.append(doc)

    aggregates = []
    for method in cfg.methods:
        accs = [r.accuracy for r in rows if r.method == method]
        if not accs:
            continue
        aggregates.append(
            {
                "method": method,
                "runs": len(accs),
                "accuracy_mean": float(np.mean(accs)),
                "accuracy_std": float(np.std(accs)),
            }
        )

    bundle = ReportBundle(tuple(rows), tuple(sweeps), tuple(aggregates))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "report.csv"
    json_path = out / "report.json"
    emit_report(bundle, csv_path, "csv")
    emit_report(bundle, json_path, "json")
    return csv_path, json_path


def stage_all(cfg: ExperimentConfig, m_cap: int | None = None) -> None:
    cap = m_cap if m_cap is not None else cfg.m_cap
    for run_seed in cfg.seeds:
        stage_synth(cfg, run_seed)
        stage_partition(cfg, run_seed)
        stage_train(cfg, run_seed)
        stage_select(cfg, run_seed)
        stage_evaluate(cfg, run_seed)
        if cfg.m <= cap:
            stage_inspect(cfg, run_seed, m_cap=cap)
        stage_sweep(cfg, run_seed)
    stage_report(cfg)


# -- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modelmarket",
        description="One-shot federated model-market simulator: train local "
                    "parties, select ensemble teams, evaluate and report.",
    )
    parser.add_argument("stage", choices=STAGES, help="pipeline stage to run")
    parser.add_argument("--config", required=True, help="experiment JSON config")
    parser.add_argument("--seed", type=int, default=None,
                        help="run only this seed (overrides the config list)")
    parser.add_argument("--out", default=None,
                        help="output directory (overrides the config)")
    parser.add_argument("--header", action="store_true",
                        help="treat the first CSV dataset line as a header")
    parser.add_argument("--m-cap", type=int, default=None,
                        help="subset cap for complete inspection")
    return parser


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed: must be >= 0")
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    if args.out is not None:
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    if args.header and cfg.dataset.kind == "csv":
        cfg = dataclasses.replace(
            cfg, dataset=dataclasses.replace(cfg.dataset, header=True)
        )
    return cfg


def run_stage(stage: str, cfg: ExperimentConfig, m_cap: int | None) -> None:
    if stage == "all":
        stage_all(cfg, m_cap=m_cap)
        return
    if stage == "report":
        stage_report(cfg)
        return
    per_seed = {
        "synth": stage_synth,
        "partition": stage_partition,
        "train": stage_train,
        "select": stage_select,
        "evaluate": stage_evaluate,
        "sweep": stage_sweep,
    }
    for run_seed in cfg.seeds:
        if stage == "inspect":
            stage_inspect(cfg, run_seed, m_cap=m_cap)
        else:
            per_seed[stage](cfg, run_seed)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        run_stage(args.stage, cfg, args.m_cap)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ModelMarketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
