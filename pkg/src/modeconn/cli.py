"""Command-line entry point: ``modeconn <command> --config run.json [options]``.

Exit codes: 0 success, 1 invalid configuration or input, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import nn
from .curves import CurveSpec, point_at
from .data import (CheckpointError, DataError, gen_synthetic, load_checkpoint, load_csv,
                   load_curve, load_idx_pair, normalize_splits, save_checkpoint, save_curve,
                   write_json, write_report, write_table)
from .evaluation import (curve_report, ensemble_from_logits, ensemble_predict, fit_temperature,
                         model_logits, plane_grid)
from .experiments import (STREAM_CURVE, STREAM_FGE, STREAM_MODEL_A, connect, count_inversions,
                          derive_seed, width_sweep)
from .fge import (CyclicLRSchedule, FGERunConfig, ensemble_members, fge_chain_report,
                  fge_multi, pretrain)
from .trivial import trivial_check

log = logging.getLogger("modeconn")

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_POS = {"type": "number", "exclusiveMinimum": 0}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "seed": _INT,
    "threads": {"type": "integer", "minimum": 1},
    "net": _obj({
        "hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "batch_norm": {"type": "boolean"},
        "l2_coeff": {"type": "number", "minimum": 0},
        "activation": {"enum": ["relu"]},
    }),
    "data": _obj({
        "source": {"enum": ["synthetic", "csv", "idx"]},
        "kind": {"enum": ["two_spirals", "gaussian_blobs"]},
        "seed": _INT,
        "n_train": {"type": "integer", "minimum": 4},
        "n_test": {"type": "integer", "minimum": 4},
        "n_heldout": {"type": "integer", "minimum": 0},
        "noise": {"type": "number", "minimum": 0},
        "turns": _POS,
        "n_classes": {"type": "integer", "minimum": 2},
        "label_column": {"type": "string"},
        "train": {"type": "string"},
        "test": {"type": "string"},
        "heldout": {"type": "string"},
        "train_images": {"type": "string"},
        "train_labels": {"type": "string"},
        "test_images": {"type": "string"},
        "test_labels": {"type": "string"},
        "limit_train": {"type": "integer", "minimum": 1},
        "normalize": {"type": "boolean"},
    }),
    "train": _obj({
        "epochs": {"type": "integer", "minimum": 0},
        "batch_size": {"type": "integer", "minimum": 1},
        "lr": _POS,
        "momentum": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    }),
    "curve": _obj({
        "kind": {"enum": ["segment", "polychain", "bezier"]},
        "n_bends": {"type": "integer", "minimum": 1},
        "iterations": {"type": "integer", "minimum": 1},
        "batch_size": {"type": "integer", "minimum": 1},
        "lr": _POS,
        "momentum": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "grid_size": {"type": "integer", "minimum": 2},
        "jitter": {"type": "number", "minimum": 0},
        "weight_decay_on_bends": {"type": "boolean"},
    }),
    "fge": _obj({
        "budget_epochs": {"type": "integer", "minimum": 1},
        "pretrain_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "lr": _POS,
        "lr_high": _POS,
        "lr_low": _POS,
        "cycle": {"type": "integer", "minimum": 2},
        "n_cycles": {"type": "integer", "minimum": 1},
        "include_start": {"type": "boolean"},
        "extra_starts": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "points_per_segment": {"type": "integer", "minimum": 1},
        "batch_size": {"type": "integer", "minimum": 1},
        "momentum": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    }),
    "plane": _obj({
        "resolution": {"type": "integer", "minimum": 2},
        "margin": {"type": "number", "minimum": 0},
    }),
    "ensemble": _obj({
        "curve_points": {"type": "integer", "minimum": 1},
        "temperature_fit": {"type": "boolean"},
    }),
    "trivial": _obj({"t_grid": {"type": "array", "items": _NUM, "minItems": 1}}),
    "sweep": _obj({
        "factors": {"type": "array", "items": _POS, "minItems": 1},
        "pairs": {"type": "integer", "minimum": 1},
        "kind": {"enum": ["polychain", "bezier"]},
    }),
})

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "net": {"hidden": [32, 32], "batch_norm": False, "l2_coeff": 1e-4, "activation": "relu"},
    "data": {"source": "synthetic", "kind": "two_spirals", "seed": 1, "n_train": 2000,
             "n_test": 1000, "n_heldout": 500, "noise": 0.05, "turns": 1.0, "n_classes": 2,
             "label_column": "label", "normalize": True},
    "train": {"epochs": 100, "batch_size": 64, "lr": 0.05, "momentum": 0.9},
    "curve": {"kind": "polychain", "n_bends": 1, "iterations": 3000, "batch_size": 64,
              "lr": 0.05, "momentum": 0.9, "grid_size": 121, "jitter": 0.0,
              "weight_decay_on_bends": False},
    "fge": {"budget_epochs": 100, "pretrain_fraction": 0.8, "lr": 0.05, "lr_high": 0.05,
            "lr_low": 0.0005, "cycle": 64, "n_cycles": 6, "include_start": True,
            "extra_starts": [], "points_per_segment": 10, "batch_size": 64, "momentum": 0.9},
    "plane": {"resolution": 21, "margin": 0.2},
    "ensemble": {"curve_points": 50, "temperature_fit": False},
    "trivial": {"t_grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]},
    "sweep": {"factors": [0.3, 0.5, 0.8, 1.0], "pairs": 3, "kind": "bezier"},
}


class ConfigError(ValueError):
    pass


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _apply_override(cfg, assignment):
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key.path=value")
    path, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    keys = path.split(".")
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {path!r}: {k!r} is not a section")
    node[keys[-1]] = value


def load_config(path=None, overrides=(), seed=None) -> dict:
    user = {}
    if path:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for o in overrides:
        _apply_override(user, o)
    if seed is not None:
        user["seed"] = seed
    try:
        jsonschema.validate(user, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, user)
    check_semantics(cfg)
    return cfg


def check_semantics(cfg):
    f = cfg["fge"]
    if not f["lr_high"] > f["lr_low"]:
        raise ConfigError(f"fge.lr_high ({f['lr_high']}) must exceed fge.lr_low ({f['lr_low']})")
    if f["cycle"] % 2:
        raise ConfigError(f"fge.cycle must be even, got {f['cycle']}")
    for t in cfg["trivial"]["t_grid"]:
        if not 0.0 < t <= 1.0:
            raise ConfigError(f"trivial.t_grid value {t} outside (0, 1]")
    d = cfg["data"]
    if d["source"] == "csv" and not (d.get("train") and d.get("test")):
        raise ConfigError("data.source=csv needs data.train and data.test paths")
    if d["source"] == "idx" and not all(d.get(k) for k in
                                        ("train_images", "train_labels", "test_images",
                                         "test_labels")):
        raise ConfigError("data.source=idx needs train/test image and label paths")


def load_data(cfg):
    """Return ``(train, test, heldout_or_None)`` per the data section."""
    d = cfg["data"]
    heldout = None
    if d["source"] == "synthetic":
        s = d["seed"]
        kw = dict(noise=d["noise"], n_classes=d["n_classes"], turns=d["turns"])
        train = gen_synthetic(d["kind"], d["n_train"], seed=derive_seed(s, 0), split="train", **kw)
        test = gen_synthetic(d["kind"], d["n_test"], seed=derive_seed(s, 1), split="test", **kw)
        if d["n_heldout"] >= 4:
            heldout = gen_synthetic(d["kind"], d["n_heldout"], seed=derive_seed(s, 2),
                                    split="heldout", **kw)
        return train, test, heldout
    if d["source"] == "csv":
        train = load_csv(d["train"], d["label_column"], split="train")
        k = train.n_classes
        test = load_csv(d["test"], d["label_column"], n_classes=k, split="test")
        if d.get("heldout"):
            heldout = load_csv(d["heldout"], d["label_column"], n_classes=k, split="heldout")
    else:
        train = load_idx_pair(d["train_images"], d["train_labels"], "train")
        test = load_idx_pair(d["test_images"], d["test_labels"], "test")
        if d.get("limit_train"):
            train = train.subset(np.arange(min(d["limit_train"], len(train))))
    if d["normalize"]:
        splits = normalize_splits(train, test, *([heldout] if heldout is not None else []))
        train, test = splits[0], splits[1]
        heldout = splits[2] if heldout is not None else None
    return train, test, heldout


def net_config(cfg, train) -> nn.MLPConfig:
    n = cfg["net"]
    return nn.MLPConfig((train.features.shape[1], *n["hidden"], train.n_classes),
                        n["activation"], n["batch_norm"], n["l2_coeff"])


def _load_weights(path, config):
    ck = load_checkpoint(path)
    if ck.config.layer_sizes != config.layer_sizes or ck.config.batch_norm != config.batch_norm:
        raise ConfigError(f"{path}: architecture {ck.config.layer_sizes} does not match "
                          f"the configured network {config.layer_sizes}")
    return ck.weights


def _finite(report_values, what):
    arr = np.asarray(report_values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{what} contains non-finite values")


# --- commands ------------------------------------------------------------


def cmd_train(args, cfg):
    train, test, _ = load_data(cfg)
    config = net_config(cfg, train)
    t = cfg["train"]
    seed = derive_seed(cfg["seed"], STREAM_MODEL_A)
    w, _ = pretrain(config, train, t["epochs"], t["lr"], t["batch_size"], seed, t["momentum"])
    _finite(w, "trained weights")
    save_checkpoint(w, config, args.out, seed=cfg["seed"])
    stats = nn.eval_stats(w, config, train.features)
    tr = nn.predict_eval(w, config, train.features, train.labels, stats)
    te = nn.predict_eval(w, config, test.features, test.labels, stats)
    print(f"train error {tr[0]:.4f}  test error {te[0]:.4f}  -> {args.out}")


def cmd_connect(args, cfg):
    c = cfg["curve"]
    if c["kind"] == "segment":
        raise ConfigError("a segment has no bends to train; use `curve-eval --a A --b B` instead")
    train, _, _ = load_data(cfg)
    config = net_config(cfg, train)
    wa, wb = _load_weights(args.a, config), _load_weights(args.b, config)
    spec, hist = connect(wa, wb, config, train, c["kind"], c["n_bends"], c["iterations"],
                         c["batch_size"], c["lr"], c["momentum"],
                         derive_seed(cfg["seed"], STREAM_CURVE), c["jitter"],
                         c["weight_decay_on_bends"])
    for b in spec.bends:
        _finite(b, "curve bends")
    save_curve(spec, config, args.out, seed=cfg["seed"])
    if args.history:
        write_report(hist, args.history, "csv")
    print(f"trained {c['kind']} with {c['n_bends']} bend(s) -> {args.out}")


def _curve_from_args(args, config):
    if args.curve:
        spec, cconf, _ = load_curve(args.curve)
        if cconf.layer_sizes != config.layer_sizes:
            raise ConfigError(f"{args.curve}: curve architecture does not match the config")
        return spec
    if args.a and args.b:
        return CurveSpec("segment", _load_weights(args.a, config), _load_weights(args.b, config))
    raise ConfigError("give --curve FILE or both --a and --b")


def cmd_curve_eval(args, cfg):
    train, test, _ = load_data(cfg)
    config = net_config(cfg, train)
    spec = _curve_from_args(args, config)
    grid = args.grid_size or cfg["curve"]["grid_size"]
    rep = curve_report(spec, config, train, test, grid)
    for m in rep.metrics.values():
        _finite(m, "curve report")
    write_report(rep, args.out, args.format)
    a = rep.aggregates["train_loss"]
    print(f"{spec.kind}: train loss min {a['min']:.4f} max {a['max']:.4f} "
          f"int {a['int']:.4f}; test error max {rep.aggregates['test_error']['max']:.4f}")


def cmd_plane(args, cfg):
    train, _, _ = load_data(cfg)
    config = net_config(cfg, train)
    w1, w2, w3 = (_load_weights(p, config) for p in args.points)
    p = cfg["plane"]
    try:
        grid = plane_grid(w1, w2, w3, config, train, p["resolution"], p["margin"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_report(grid, args.out, args.format)
    print(f"{p['resolution']}x{p['resolution']} plane grid -> {args.out}")


def cmd_fge(args, cfg):
    train, test, _ = load_data(cfg)
    config = net_config(cfg, train)
    f = cfg["fge"]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    steps = -(-len(train) // f["batch_size"])
    pre_epochs = int(round(f["budget_epochs"] * f["pretrain_fraction"]))
    seed = derive_seed(cfg["seed"], STREAM_MODEL_A)
    extra = sorted(set(f["extra_starts"]))
    w_hat, hist = pretrain(config, train, pre_epochs, f["lr"], f["batch_size"], seed,
                           f["momentum"], snapshot_every=1 if extra else None)
    snaps = dict(hist["snapshots"])
    starts = [w_hat] + [snaps[e] for e in extra if e in snaps and e != pre_epochs]
    schedule = CyclicLRSchedule(f["lr_high"], f["lr_low"], f["cycle"])
    n_iter = f["n_cycles"] * f["cycle"]
    run = fge_multi(starts, config, train,
                    FGERunConfig(n_iter, schedule, f["batch_size"],
                                 derive_seed(cfg["seed"], STREAM_FGE), f["momentum"]))
    members = ensemble_members(run, w_hat, f["include_start"])
    for w in members:
        _finite(w, "FGE checkpoint")
    files = []
    save_checkpoint(w_hat, config, out / "pretrained.json", seed=cfg["seed"])
    for k, w in enumerate(run.checkpoints):
        name = f"fge_{k:03d}.json"
        save_checkpoint(w, config, out / name, seed=cfg["seed"],
                        extra={"iteration": run.collected_at[k]})
        files.append(name)
    bn = train if config.batch_norm else None
    single = ensemble_predict([w_hat], config, test, bn_data=bn)
    ens = ensemble_predict(members, config, test, bn_data=bn)
    manifest = {
        "seed": cfg["seed"],
        "schedule": {"lr_high": schedule.lr_high, "lr_low": schedule.lr_low,
                     "cycle": schedule.cycle},
        "pretrain_epochs": pre_epochs,
        "steps_per_epoch": steps,
        "n_iterations": n_iter,
        "starts": ["pretrained"] + [f"epoch {e}" for e in extra],
        "collected_at": run.collected_at,
        "checkpoints": files,
        "pretrained": "pretrained.json",
        "include_start": f["include_start"],
    }
    write_json(manifest, out / "manifest.json")
    report = {"pretrained_test_error": single[0], "pretrained_test_nll": single[1],
              "ensemble_test_error": ens[0], "ensemble_test_nll": ens[1],
              "ensemble_size": len(members)}
    if len(run.checkpoints) >= 2:
        chain = fge_chain_report(run.checkpoints, config, train, test, f["points_per_segment"])
        write_report(chain, out / "chain.csv", "csv")
    write_json(report, out / "report.json")
    print(f"pretrained test error {single[0]:.4f}; FGE ensemble of {len(members)} "
          f"-> {ens[0]:.4f}")


def cmd_ensemble(args, cfg):
    train, test, heldout = load_data(cfg)
    config = net_config(cfg, train)
    members = [_load_weights(p, config) for p in args.checkpoints]
    if args.curve:
        spec, _, _ = load_curve(args.curve)
        n = cfg["ensemble"]["curve_points"]
        members += [point_at(spec, t) for t in np.linspace(0.0, 1.0, n)]
    if not members:
        raise ConfigError("no ensemble members: give checkpoints and/or --curve")
    bn = train if config.batch_norm else None
    temperature = 1.0
    fit = None
    if args.temperature_fit or cfg["ensemble"]["temperature_fit"]:
        if heldout is None:
            raise ConfigError("temperature fitting needs a held-out split in the data section")
        fit = fit_temperature(model_logits(members, config, heldout.features, bn),
                              heldout.labels)
        temperature = fit.temperature
    logits = model_logits(members, config, test.features, bn)
    err, nll, _ = ensemble_from_logits(logits, test.labels, temperature)
    singles = [ensemble_from_logits([z], test.labels)[0] for z in logits]
    report = {"size": len(members), "temperature": temperature, "test_error": err,
              "test_nll": nll, "member_test_errors": singles}
    if fit is not None:
        report.update(heldout_nll=fit.nll, heldout_nll_at_one=fit.nll_at_one,
                      temperature_degenerate=fit.degenerate)
    write_json(report, args.out)
    print(f"ensemble of {len(members)}: test error {err:.4f}, NLL {nll:.4f} (T={temperature:.4g})")


def cmd_trivial(args, cfg):
    train, _, _ = load_data(cfg)
    config = net_config(cfg, train)
    if config.batch_norm:
        raise ConfigError("trivial curves require a network without batch normalization")
    w = _load_weights(args.checkpoint, config)
    rep = trivial_check(w, config, train.features, cfg["trivial"]["t_grid"], train.labels)
    write_json(rep, args.out)
    print(f"argmax invariant: {rep['argmax_invariant']}; "
          f"max logit ratio error {rep['logit_ratio_error']:.3g}")


def cmd_sweep(args, cfg):
    train, _, _ = load_data(cfg)
    s, t, c = cfg["sweep"], cfg["train"], cfg["curve"]
    table = width_sweep(train, cfg["net"]["hidden"], s["factors"], cfg["net"]["l2_coeff"],
                        s["pairs"], t["epochs"], t["lr"], t["batch_size"], c["iterations"],
                        c["lr"], s["kind"], c["grid_size"], cfg["seed"],
                        cfg["net"]["batch_norm"])
    write_table(table.columns(), args.out)
    cols = table.columns()
    print(f"sweep over K={s['factors']}: excess-loss inversions "
          f"{count_inversions(cols['excess_loss'])}, length-ratio inversions "
          f"{count_inversions(cols['length_ratio'])} -> {args.out}")


COMMANDS = {
    "train": cmd_train, "connect": cmd_connect, "curve-eval": cmd_curve_eval,
    "plane": cmd_plane, "fge": cmd_fge, "ensemble": cmd_ensemble,
    "trivial": cmd_trivial, "sweep": cmd_sweep,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. curve.iterations=5000")
    common.add_argument("--seed", type=int, help="global seed (overrides config)")
    common.add_argument("--threads", type=int, help="accepted for compatibility; "
                        "evaluation runs single-threaded")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="modeconn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", parents=[common], help="train one network")
    s.add_argument("--out", required=True)

    s = sub.add_parser("connect", parents=[common], help="train a curve between two networks")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--history", help="CSV of per-iteration curve-training loss")

    s = sub.add_parser("curve-eval", parents=[common], help="evaluate a curve on a t-grid")
    s.add_argument("--curve")
    s.add_argument("--a")
    s.add_argument("--b")
    s.add_argument("--grid-size", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=["csv", "json"], default="csv")

    s = sub.add_parser("plane", parents=[common], help="loss on the plane of three networks")
    s.add_argument("--points", nargs=3, required=True, metavar="CKPT")
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=["csv", "json"], default="csv")

    s = sub.add_parser("fge", parents=[common], help="pretrain and run FGE")
    s.add_argument("--out-dir", required=True)

    s = sub.add_parser("ensemble", parents=[common], help="evaluate an ensemble")
    s.add_argument("--checkpoints", nargs="*", default=[])
    s.add_argument("--curve", help="add equally spaced points of this curve")
    s.add_argument("--temperature-fit", action="store_true")
    s.add_argument("--out", required=True)

    s = sub.add_parser("trivial", parents=[common], help="check the rescaling path")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("sweep", parents=[common], help="width-scaling sweep")
    s.add_argument("--out", required=True)
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.set, args.seed)
        if args.threads:
            cfg["threads"] = args.threads
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            COMMANDS[args.command](args, cfg)
    except (ConfigError, CheckpointError, DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FloatingPointError, ValueError, ArithmeticError) as exc:
        print(f"runtime failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())
