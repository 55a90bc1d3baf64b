"""Command-line entry point: ``findworld <command> --config c.json``.

Every command reads a JSON config, writes its artifacts under the config's
``out_dir`` (overridable with ``--out``) and exits 0 on success. Failures
print a JSON error object on stderr and exit 2 (config), 3 (data) or 4
(numeric).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .boost import BoostModel, BoostParams, train
from .dataset import load_csv, save_csv
from .errors import ConfigError, DataError, FindWorldError
from .metrics import fairness_panel
from .preprocess import AdjacencyInfo, adapt_apply, adapt_fit, warp_apply, warp_fit
from .scm import ScmSpec, WorldKind, default_spec, paired_worlds, simulate
from .tradeoff import (DEFAULT_GRID, find_lambda_star, relation_direction, tradeoff_curve,
                       write_curves_csv, write_curves_json)

log = logging.getLogger("findworld")


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", field="config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}", field="config") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", field="config")
    return cfg


def _require(cfg, key, kind=None):
    if key not in cfg:
        raise ConfigError("required", field=key)
    value = cfg[key]
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"expected {kind.__name__}", field=key)
    return value


def _path(cfg, key):
    p = Path(_require(cfg, key, str))
    if not p.exists():
        raise ConfigError(f"file not found: {p}", field=key)
    return p


def _out_dir(cfg, args) -> Path:
    out = Path(args.out or cfg.get("out_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params(cfg, field="params") -> BoostParams:
    raw = cfg.get(field, {})
    if not isinstance(raw, dict):
        raise ConfigError("expected an object", field=field)
    try:
        return BoostParams(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc), field=field) from None
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], field=f"{field}.{exc.field}") from None


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_simulate(args, cfg):
    spec = ScmSpec.load(_path(cfg, "scm")) if "scm" in cfg else default_spec()
    n = int(cfg.get("n", 10_000))
    seed = int(cfg.get("seed", 0))
    world = args.world or cfg.get("world", "both")
    out = _out_dir(cfg, args)
    if world == "both":
        real, find = paired_worlds(spec, n, seed)
        written = {"real": save_csv(real, out / "real.csv"), "find": save_csv(find, out / "find.csv")}
    else:
        try:
            kind = WorldKind(world)
        except ValueError:
            raise ConfigError(f"unknown world {world!r}", field="world") from None
        written = {kind.value: save_csv(simulate(spec, kind, n, seed), out / f"{kind.value}.csv")}
    spec.save(out / "scm.json")
    return {k: str(v).removesuffix(".schema.json") for k, v in written.items()}


def _adjacency(cfg):
    if "dag" in cfg:
        return AdjacencyInfo.load(_path(cfg, "dag"))
    if "scm" in cfg:
        return AdjacencyInfo.from_scm(ScmSpec.load(_path(cfg, "scm")))
    return AdjacencyInfo.from_scm(default_spec())


def cmd_preprocess(args, cfg):
    train_ds = load_csv(_path(cfg, "train"))
    apply_to = cfg.get("apply", [cfg["train"]])
    if isinstance(apply_to, str):
        apply_to = [apply_to]
    method = cfg.get("method", "both")
    if method not in ("warp", "adapt", "both"):
        raise ConfigError("expected warp, adapt or both", field="method")
    adj = _adjacency(cfg)
    seed = int(cfg.get("seed", 0))
    out = _out_dir(cfg, args)
    fitted = {}
    if method in ("warp", "both"):
        fitted["warped"] = (warp_fit(train_ds, adj, reverse=bool(cfg.get("reverse", False)), seed=seed),
                            warp_apply)
    if method in ("adapt", "both"):
        fitted["adapted"] = (adapt_fit(train_ds, adj, seed=seed), adapt_apply)
    written = {}
    for label, (model, apply) in fitted.items():
        model.save(out / f"{label}_model.json")
        for i, src in enumerate(apply_to):
            src = Path(src)
            if not src.exists():
                raise ConfigError(f"file not found: {src}", field=f"apply[{i}]")
            dst = out / f"{src.stem}_{label}.csv"
            save_csv(apply(model, load_csv(src)), dst)
            written.setdefault(label, []).append(str(dst))
    return written


def cmd_train(args, cfg):
    train_ds = load_csv(_path(cfg, "train"))
    params = _params(cfg)
    out = _out_dir(cfg, args)
    result = {}
    if cfg.get("tune"):
        from .tuning import tune

        t = cfg["tune"] if isinstance(cfg["tune"], dict) else {}
        tuned = tune(train_ds, budget=int(t.get("budget", 20)), folds=int(t.get("folds", 3)),
                     seed=int(t.get("seed", params.seed)), base=params)
        params = params.replace(depth=tuned.depth, eta=tuned.eta)
        _write_json(out / "tuning.json", tuned.to_dict())
    model = train(train_ds, params)
    model.save(out / "model.json")
    result["model"] = str(out / "model.json")
    result["params"] = asdict(params)
    if "test" in cfg:
        test_ds = load_csv(_path(cfg, "test"))
        probs = model.predict_proba(test_ds)
        panel = fairness_panel(probs, test_ds.target, test_ds.pa,
                               threshold=float(cfg.get("threshold", 0.5)),
                               n_boot=int(cfg.get("n_boot", 1000)), seed=params.seed)
        _write_json(out / "panel.json", panel.to_dict())
        with open(out / "predictions.csv", "w") as fh:
            fh.write("prob\n")
            fh.writelines(f"{p!r}\n" for p in probs.tolist())
        result["panel"] = panel.to_dict()
    return result


def cmd_tradeoff(args, cfg):
    train_ds = load_csv(_path(cfg, "train"))
    worlds = _require(cfg, "test_worlds", dict)
    if "real" not in worlds and "lambda_star" not in cfg:
        raise ConfigError("a 'real' test world is needed to search lambda*", field="test_worlds")
    tests = {}
    for name, p in worlds.items():
        if not Path(p).exists():
            raise ConfigError(f"file not found: {p}", field=f"test_worlds.{name}")
        tests[name] = load_csv(p)
    params = _params(cfg)
    out = _out_dir(cfg, args)
    result = {}
    if "lambda_star" in cfg:
        lam = float(cfg["lambda_star"])
    else:
        star = find_lambda_star(train_ds, tests["real"], params, eps=float(cfg.get("eps", 0.01)),
                                grid=cfg.get("grid", DEFAULT_GRID),
                                refine_points=int(cfg.get("refine_points", 15)))
        _write_json(out / "lambda_star.json", star.to_dict())
        lam = star.lambda_star
    curves = tradeoff_curve(train_ds, tests, lam, params, steps=int(cfg.get("steps", 9)),
                            n_boot=int(cfg.get("n_boot", 1000)), seed=params.seed)
    write_curves_csv(curves, out / "curves.csv")
    write_curves_json(curves, out / "curves.json")
    if cfg.get("plots", True):
        from .plotting import plot_curves

        plot_curves(curves, out / "curves.png")
    result["lambda_star"] = lam
    result["relations"] = {c.world: dict(zip(("label", "rho"), relation_direction(c))) for c in curves}
    _write_json(out / "relations.json", result["relations"])
    return result


def cmd_study(args, cfg):
    from .study import StudyConfig, run_study

    if args.out:
        cfg = cfg | {"out_dir": args.out}
    if args.jobs:
        cfg = cfg | {"jobs": args.jobs}
    study_cfg = StudyConfig.from_dict(cfg)
    summary = run_study(study_cfg)
    return {"out_dir": study_cfg.out_dir, "relations": summary["relations"],
            "failures": len(summary["failures"])}


def cmd_hmda_prepare(args, cfg):
    from .hmda import HmdaEncodingRules, hmda_encode, read_raw, synthetic_fixture

    out = _out_dir(cfg, args)
    if cfg.get("synthetic") or args.synthetic:
        raw = synthetic_fixture(out / "hmda_raw_synthetic.csv", seed=int(cfg.get("seed", 0)))
    else:
        raw = _path(cfg, "raw")
    rules = HmdaEncodingRules.load(_path(cfg, "rules") if "rules" in cfg else None)
    ds, report = hmda_encode(read_raw(raw), rules)
    save_csv(ds, out / "hmda.csv")
    _write_json(out / "encode_report.json", report.to_dict())
    return {"csv": str(out / "hmda.csv"), **report.to_dict()}


def cmd_report(args, cfg):
    from .report import render

    src = Path(args.inp or cfg.get("in", ""))
    if not src.is_file():
        raise ConfigError(f"file not found: {src}", field="in")
    try:
        summary = json.loads(src.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{src} is not valid JSON: {exc}") from None
    fmt = args.format or cfg.get("format", "md")
    if fmt not in ("md", "csv"):
        raise ConfigError("expected md or csv", field="format")
    try:
        text = render(summary, fmt)
    except (KeyError, TypeError) as exc:
        raise DataError(f"{src} is not a study summary (missing {exc})") from None
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return None


COMMANDS = {
    "simulate": cmd_simulate,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "tradeoff": cmd_tradeoff,
    "study": cmd_study,
    "hmda-prepare": cmd_hmda_prepare,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="findworld", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (report: output file)")
        if name == "simulate":
            p.add_argument("--world", choices=["real", "find", "both"])
        if name == "study":
            p.add_argument("--jobs", type=int, help="parallel iterations")
        if name == "hmda-prepare":
            p.add_argument("--synthetic", action="store_true",
                           help="generate and encode the synthetic HMDA-like fixture")
        if name == "report":
            p.add_argument("--in", dest="inp", help="summary.json")
            p.add_argument("--format", choices=["md", "csv"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args.config)
        result = COMMANDS[args.command](args, cfg)
    except FindWorldError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return exc.exit_code
    except OSError as exc:
        err = DataError(f"{exc.filename}: {exc.strerror}" if exc.filename else str(exc))
        sys.stderr.write(json.dumps(err.to_dict()) + "\n")
        return err.exit_code
    if result is not None:
        sys.stdout.write(json.dumps(result, indent=2, sort_keys=True, default=str) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
