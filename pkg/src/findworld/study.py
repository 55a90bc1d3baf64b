"""Simulation and HMDA studies: orchestration, persistence and aggregation."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .boost import BoostParams, train
from .dataset import Dataset, SplitSpec, save_csv, split_indices
from .errors import ConfigError, FindWorldError
from .metrics import PANEL_KEYS, base_rate_gap, fairness_panel
from .preprocess import AdjacencyInfo, adapt_apply, adapt_fit, warp_apply, warp_fit
from .scm import ScmSpec, default_spec, paired_worlds
from .tradeoff import (DEFAULT_GRID, find_lambda_star, relation_direction, tradeoff_curve,
                       write_curves_csv)
from .tuning import SearchSpace, tune

log = logging.getLogger(__name__)

SIM_WORLDS = ("real", "find", "adapted", "warped")
HMDA_WORLDS = ("real", "adapted", "warped")
STAT_KEYS = PANEL_KEYS + ("auc",)
TABLE_FIELDS = ("world",) + tuple(f"{k}_{s}" for k in STAT_KEYS for s in ("mean", "sd", "lo", "hi"))


@dataclass
class StudyConfig:
    out_dir: str = "study_out"
    scm: str | None = None
    hmda_csv: str | None = None
    dag: str | None = None
    n: int = 10_000
    iterations: int = 25
    train_fraction: float = 0.8
    seed: int = 0
    eps: float = 0.01
    steps: int = 9
    grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    refine_points: int = 15
    rounds: int = 200
    min_leaf_weight: float = 1.0
    depth: int | None = None
    eta: float | None = None
    tune_budget: int = 20
    tune_folds: int = 3
    search_space: dict = field(default_factory=dict)
    n_boot: int = 1000
    threshold: float = 0.5
    jobs: int = 1
    save_datasets: bool = False
    curves: bool = True
    plots: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1", field="iterations")
        if self.n < 10:
            raise ConfigError("n must be >= 10", field="n")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)", field="train_fraction")
        if self.eps <= 0:
            raise ConfigError("eps must be positive", field="eps")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1", field="steps")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1", field="jobs")
        if (self.depth is None) != (self.eta is None):
            raise ConfigError("depth and eta must be given together", field="depth")
        for name in ("scm", "hmda_csv", "dag"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"file not found: {path}", field=name)
        try:
            SearchSpace(**self.search_space)
        except TypeError as exc:
            raise ConfigError(str(exc), field="search_space") from exc

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}", field=unknown[0])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "StudyConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}", field="config") from exc
        return cls.from_dict(d)

    def to_dict(self):
        return asdict(self)


def derive_seeds(master: int, index: int) -> dict:
    """Independent integer seeds for every random step of one iteration."""
    names = ("simulate", "split", "warp", "adapt", "tune", "bootstrap")
    state = np.random.SeedSequence([master, index]).generate_state(len(names))
    return {k: int(s) for k, s in zip(names, state)}


def concat(parts) -> Dataset:
    first = parts[0]
    cols = {k: np.concatenate([p[k] for p in parts]) for k in first.names}
    return Dataset(cols, dict(first.kinds), first.pa_column, first.target_column)


def _params(cfg: StudyConfig, train_ds: Dataset, seed: int):
    base = BoostParams(rounds=cfg.rounds, min_leaf_weight=cfg.min_leaf_weight)
    if cfg.depth is not None:
        return base.replace(depth=cfg.depth, eta=cfg.eta), None
    result = tune(train_ds, SearchSpace(**cfg.search_space), budget=cfg.tune_budget,
                  folds=cfg.tune_folds, seed=seed, base=base)
    return base.replace(depth=result.depth, eta=result.eta), result.to_dict()


def _curves(cfg, real_train, test_worlds, params, seed):
    record = {}
    star = find_lambda_star(real_train, test_worlds["real"], params, eps=cfg.eps,
                            grid=cfg.grid, refine_points=cfg.refine_points)
    record["lambda_star"] = star.lambda_star
    record["lambda_star_disparity"] = star.disparity
    record["lambda_evaluated"] = [list(t) for t in star.evaluated]
    curves = tradeoff_curve(real_train, test_worlds, star.lambda_star, params, steps=cfg.steps,
                            n_boot=cfg.n_boot, seed=seed)
    record["relations"] = {}
    for c in curves:
        label, rho = relation_direction(c)
        record["relations"][c.world] = {"label": label, "rho": rho}
    return record, curves


def _try_curves(cfg, record, real_train, tests, params, seed):
    if not cfg.curves:
        return []
    try:
        extra, curves = _curves(cfg, real_train, tests, params, seed)
    except FindWorldError as exc:
        record["failures"].append({"iteration": record["iteration"], "stage": "tradeoff",
                                   **exc.to_dict()})
        return []
    record.update(extra)
    return curves


def _evaluate_worlds(cfg, trains, tests, params, seed):
    panels = {}
    for j, name in enumerate(trains):
        model = train(trains[name], params)
        probs = model.predict_proba(tests[name])
        panels[name] = fairness_panel(probs, tests[name].target, tests[name].pa,
                                      threshold=cfg.threshold, n_boot=cfg.n_boot,
                                      seed=seed + j).to_dict()
    return panels


def run_iteration(cfg: StudyConfig, index: int) -> dict:
    """One simulation iteration; failures are recorded rather than raised."""
    seeds = derive_seeds(cfg.seed, index)
    record = {"iteration": index, "seeds": seeds, "failures": []}
    out = Path(cfg.out_dir) / "iterations" / f"iter_{index:03d}"
    out.mkdir(parents=True, exist_ok=True)
    curves = []
    try:
        spec = ScmSpec.load(cfg.scm) if cfg.scm else default_spec()
        real, find = paired_worlds(spec, cfg.n, seeds["simulate"])
        tr_idx, te_idx = split_indices(cfg.n, SplitSpec(cfg.train_fraction, seeds["split"]))
        adj = AdjacencyInfo.from_scm(spec)
        real_tr, real_te = real.take(tr_idx), real.take(te_idx)
        warp = warp_fit(real_tr, adj, seed=seeds["warp"])
        adapt = adapt_fit(real_tr, adj, seed=seeds["adapt"])
        trains = {"real": real_tr, "find": find.take(tr_idx),
                  "adapted": adapt_apply(adapt, real_tr), "warped": warp_apply(warp, real_tr)}
        tests = {"real": real_te, "find": find.take(te_idx),
                 "adapted": adapt_apply(adapt, real_te), "warped": warp_apply(warp, real_te)}
        record["base_rate_gap"] = {w: base_rate_gap(concat([trains[w], tests[w]])) for w in SIM_WORLDS}
        if cfg.save_datasets:
            for w in SIM_WORLDS:
                save_csv(trains[w], out / f"{w}_train.csv")
                save_csv(tests[w], out / f"{w}_test.csv")
        params, tuned = _params(cfg, real_tr, seeds["tune"])
        record["params"] = asdict(params)
        record["tuning"] = tuned
        record["panels"] = _evaluate_worlds(cfg, trains, tests, params, seeds["bootstrap"])
        curves = _try_curves(cfg, record, real_tr, tests, params, seeds["bootstrap"])
    except FindWorldError as exc:
        record["failures"].append({"iteration": index, "stage": "iteration", **exc.to_dict()})
    if curves:
        write_curves_csv(curves, out / "curves.csv")
    (out / "metrics.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    log.info("iteration %d done (%d failures)", index, len(record["failures"]))
    return record


def _interval(values):
    lo, hi = np.percentile(values, [2.5, 97.5])
    m = float(np.mean(values))
    return float(min(lo, m)), float(max(hi, m))


def _stats(values) -> dict:
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return {"mean": None, "sd": None, "lo": None, "hi": None, "n": 0}
    lo, hi = _interval(v)
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return {"mean": float(np.mean(v)), "sd": sd, "lo": lo, "hi": hi, "n": int(v.size)}


def summarize(records, worlds, cfg: StudyConfig | None = None) -> dict:
    """Aggregate per-iteration records into a deterministic summary."""
    records = sorted(records, key=lambda r: r["iteration"])
    panel = {}
    for w in worlds:
        rows = [r["panels"][w] for r in records if "panels" in r]
        panel[w] = {k: _stats([p[k] for p in rows]) for k in STAT_KEYS}
    relations = {w: {"aligned": 0, "tradeoff": 0, "flat": 0} for w in worlds}
    rhos = {w: [] for w in worlds}
    for r in records:
        for w, rel in r.get("relations", {}).items():
            relations[w][rel["label"]] += 1
            rhos[w].append(rel["rho"])
    gaps = {w: _stats([r["base_rate_gap"][w] for r in records if "base_rate_gap" in r])
            for w in worlds}
    failures = [f for r in records for f in r.get("failures", [])]
    return {
        "config": cfg.to_dict() if cfg else None,
        "iterations": len(records),
        "worlds": list(worlds),
        "panel": panel,
        "relations": relations,
        "rho": {w: _stats(v) for w, v in rhos.items()},
        "base_rate_gap": gaps,
        "lambda_star": [r.get("lambda_star") for r in records],
        "failures": failures,
    }


def table_rows(summary: dict):
    for w in summary["worlds"]:
        row = {"world": w}
        for k in STAT_KEYS:
            for s in ("mean", "sd", "lo", "hi"):
                row[f"{k}_{s}"] = summary["panel"][w][k][s]
        yield row


def _write_outputs(out: Path, summary: dict, curve_files, plots: bool):
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with open(out / "table.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(table_rows(summary))
    with open(out / "curves.csv", "w", newline="") as fh:
        header_done = False
        for index, path in curve_files:
            if not path.exists():
                continue
            lines = path.read_text().splitlines()
            if not header_done:
                fh.write("iteration," + lines[0] + "\n")
                header_done = True
            for line in lines[1:]:
                fh.write(f"{index},{line}\n")
        if not header_done:
            fh.write("iteration,world,w,lambda,fairness,auc,ci_lo,ci_hi\n")
    if plots:
        from .plotting import plot_study

        plot_study(out, summary)


def run_simulation_study(cfg: StudyConfig) -> dict:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    indices = range(cfg.iterations)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            records = list(pool.map(run_iteration, [cfg] * cfg.iterations, indices))
    else:
        records = [run_iteration(cfg, i) for i in indices]
    summary = summarize(records, SIM_WORLDS, cfg)
    curve_files = [(i, out / "iterations" / f"iter_{i:03d}" / "curves.csv") for i in indices]
    _write_outputs(out, summary, curve_files, cfg.plots)
    return summary


def run_hmda_study(cfg: StudyConfig) -> dict:
    """Single-split study on an encoded HMDA CSV (real, adapted and warped worlds only)."""
    from .dataset import load_csv
    from .hmda import default_dag

    if cfg.hmda_csv is None:
        raise ConfigError("hmda_csv is required for the HMDA study", field="hmda_csv")
    out = Path(cfg.out_dir)
    it_dir = out / "iterations" / "iter_000"
    it_dir.mkdir(parents=True, exist_ok=True)
    seeds = derive_seeds(cfg.seed, 0)
    record = {"iteration": 0, "seeds": seeds, "failures": []}
    curves = []
    try:
        ds = load_csv(cfg.hmda_csv)
        adj = AdjacencyInfo.load(cfg.dag) if cfg.dag else AdjacencyInfo.from_dict(default_dag())
        tr_idx, te_idx = split_indices(ds.n_rows, SplitSpec(cfg.train_fraction, seeds["split"]))
        real_tr, real_te = ds.take(tr_idx), ds.take(te_idx)
        warp = warp_fit(real_tr, adj, seed=seeds["warp"])
        adapt = adapt_fit(real_tr, adj, seed=seeds["adapt"])
        trains = {"real": real_tr, "adapted": adapt_apply(adapt, real_tr),
                  "warped": warp_apply(warp, real_tr)}
        tests = {"real": real_te, "adapted": adapt_apply(adapt, real_te),
                 "warped": warp_apply(warp, real_te)}
        record["base_rate_gap"] = {w: base_rate_gap(concat([trains[w], tests[w]])) for w in HMDA_WORLDS}
        params, tuned = _params(cfg, real_tr, seeds["tune"])
        record["params"] = asdict(params)
        record["tuning"] = tuned
        record["panels"] = _evaluate_worlds(cfg, trains, tests, params, seeds["bootstrap"])
        curves = _try_curves(cfg, record, real_tr, tests, params, seeds["bootstrap"])
    except FindWorldError as exc:
        record["failures"].append({"iteration": 0, "stage": "hmda", **exc.to_dict()})
    if curves:
        write_curves_csv(curves, it_dir / "curves.csv")
    (it_dir / "metrics.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    summary = summarize([record], HMDA_WORLDS, cfg)
    _write_outputs(out, summary, [(0, it_dir / "curves.csv")], cfg.plots)
    return summary


def run_study(cfg: StudyConfig) -> dict:
    return run_hmda_study(cfg) if cfg.hmda_csv else run_simulation_study(cfg)
