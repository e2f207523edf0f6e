"""Command-line experiment runner: ``rulfp <command> --config run.yaml [--set key=value ...]``.

Commands and what they write under ``output_dir``::

    synth      synth/{devices,observations,truth}.csv, synth/summary.json
    prepare    prepared/{train,val,test}.csv, prepared/normalization.json, prepared/summary.json
    train      train/run_<i>/{params.npz,manifest.json,history.csv,history.png,metrics.json},
               train/summary.csv
    evaluate   eval/<run>/{report.json,roc.csv,pr.csv,confusion.csv,*.png}
    predict    predict/predictions.csv
    gradcheck  nothing (prints one line per checked expression)

Every command except gradcheck also writes ``resolved_config.yaml`` into its
directory. Exit codes: 0 success, 1 numeric or training failure, 2 bad
configuration or input.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from rulfp import __version__
from rulfp.config import (architecture, dump_config, load_config, synth_config, train_config,
                          windowing)
from rulfp.diffcore import load_params, save_params
from rulfp.errors import (ConfigurationError, DataError, DomainError, NumericalError,
                          TrainingDiverged)
from rulfp.models import build_model, evaluate, model_from_manifest, predict, train_any
from rulfp.models.checks import gradcheck_suite
from rulfp.pipeline import (apply_normalizer, balance_devices, build_windowset, fit_normalizer,
                            load_backblaze, load_cmapss, read_sequences, read_windows,
                            split_devices, synth_weibull, write_sequences, write_truth,
                            write_windows)
from rulfp.report import plot_history, write_history, write_json, write_predictions, write_report

log = logging.getLogger("rulfp")

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2
MODEL_FORMAT = "rulfp-model/1"
SUMMARY_METRICS = ("rmse", "auc_roc", "auc_pr", "spearman_consistency", "epochs")


# ------------------------------------------------------------------ helpers
def _outdir(cfg) -> Path:
    return Path(cfg["output_dir"])


def _replace_dir(tmp: Path, final: Path) -> None:
    if final.exists():
        shutil.rmtree(final)
    tmp.rename(final)


def _staging(final: Path) -> Path:
    final.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{final.name}.", dir=final.parent))


def _log_to(path: Path) -> logging.Handler:
    handler = logging.FileHandler(path, mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    logging.getLogger().addHandler(handler)
    return handler


def _say(msg: str) -> None:
    print(msg)
    log.info(msg)


def _load_devices(cfg):
    """Return ``(train_pool, test, reveal_test)`` device lists for the configured dataset."""
    ds = cfg["dataset"]
    if ds["path"] is None:
        raise ConfigurationError("dataset.path is not set")
    path = Path(ds["path"])
    if not path.exists():
        raise ConfigurationError(f"dataset.path {path} does not exist")
    if ds["kind"] == "cmapss":
        train, test, _ = load_cmapss(path, ds["subset"])
        return train, test, True
    if ds["kind"] == "backblaze":
        devices = load_backblaze(path, ds["drive_model"])
    else:
        devices = read_sequences(path)
    if not devices:
        raise DataError(f"no devices found under {path}")
    pool, test = split_devices(devices, float(ds["test_fraction"]), int(ds["split_seed"]))
    return pool, test, False


def _fraction(ws) -> float:
    return float(ws.positive_fraction()) if len(ws) else 0.0


# ----------------------------------------------------------------- commands
def cmd_synth(cfg) -> int:
    s = cfg["synth"]
    seqs, truth = synth_weibull(int(s["n_devices"]), int(s["d"]), synth_config(cfg), int(s["seed"]))
    final = _outdir(cfg) / "synth"
    tmp = _staging(final)
    write_sequences(tmp, seqs)
    write_truth(tmp / "truth.csv", truth)
    summary = {"n_devices": len(seqs), "n_censored": int(truth.censored.sum()),
               "censored_share": float(truth.censored.mean()), "n_features": int(s["d"])}
    write_json(tmp / "summary.json", summary)
    dump_config(cfg, tmp / "resolved_config.yaml")
    _replace_dir(tmp, final)
    _say(f"synth: {summary['n_devices']} devices, censored share {summary['censored_share']:.4f}"
         f" -> {final}")
    return EXIT_OK


def cmd_prepare(cfg) -> int:
    ds = cfg["dataset"]
    wc = windowing(cfg)
    pool, test, reveal = _load_devices(cfg)
    train, val = split_devices(pool, float(ds["validation_fraction"]), int(ds["split_seed"]))
    if ds["balance"]:
        train = balance_devices(train, int(ds["balance_seed"]))
    stats = fit_normalizer(train) if ds["normalize"] else None

    def windows(seqs, reveal_truth=False):
        if stats is not None:
            seqs = apply_normalizer(stats, seqs)
        d = stats.keep.size if stats is not None else (seqs[0].n_features if seqs else 0)
        return build_windowset(seqs, wc, reveal_truth, n_features=d)

    sets = {"train": windows(train), "val": windows(val), "test": windows(test, reveal)}
    summary = {"window": wc.to_dict(), "splits": {}}
    for name, seqs in (("train", train), ("val", val), ("test", test)):
        ws = sets[name]
        summary["splits"][name] = {
            "devices": len(seqs), "failed_devices": int(sum(s.failed for s in seqs)),
            "windows": len(ws), "positive_windows": int(ws.f.sum()) if len(ws) else 0,
            "positive_fraction": _fraction(ws)}
    if stats is not None:
        summary["features_kept"] = int(stats.keep.size)
        summary["features_dropped"] = [int(i) for i in stats.dropped]

    final = _outdir(cfg) / "prepared"
    tmp = _staging(final)
    try:
        for name, ws in sets.items():
            write_windows(tmp / f"{name}.csv", ws)
        write_json(tmp / "normalization.json", stats.to_dict() if stats is not None else None)
        write_json(tmp / "summary.json", summary)
        dump_config(cfg, tmp / "resolved_config.yaml")
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _replace_dir(tmp, final)
    handler = _log_to(final / "prepare.log")
    try:
        for name, s in summary["splits"].items():
            _say(f"prepare: {name}: {s['devices']} devices ({s['failed_devices']} failed), "
                 f"{s['windows']} windows, positive fraction {100 * s['positive_fraction']:.3f}%")
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()
    return EXIT_OK


def _prepared(cfg, name: str):
    path = _outdir(cfg) / "prepared" / f"{name}.csv"
    if not path.is_file():
        raise ConfigurationError(f"{path} not found; run 'rulfp prepare' first")
    return read_windows(path)


def save_model(directory: Path, model, cfg, seed: int, normalization) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    save_params(directory / "params.npz", model.params)
    manifest = {"format": MODEL_FORMAT, "version": __version__, "model": model.manifest(),
                "seed": seed, "config": cfg, "normalization": normalization}
    write_json(directory / "manifest.json", manifest)


def load_model(directory):
    directory = Path(directory)
    mpath, ppath = directory / "manifest.json", directory / "params.npz"
    if not (mpath.is_file() and ppath.is_file()):
        raise ConfigurationError(f"{directory} does not hold manifest.json and params.npz")
    with open(mpath) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != MODEL_FORMAT:
        raise ConfigurationError(f"{mpath}: not a {MODEL_FORMAT} manifest")
    params = load_params(ppath)
    model = model_from_manifest(manifest["model"], params)
    expected = build_model(model.kind, model.arch, model.n_features, 0, 1.0, 2.0).params
    if expected.names() != params.names() or any(
            expected[k].shape != params[k].shape for k in params):
        raise ConfigurationError(f"{directory}: parameters do not match the architecture")
    return model, manifest


def _check_width(model, ws, where) -> None:
    if len(ws) and ws.n_features != model.n_features:
        raise ConfigurationError(f"{where}: windows have {ws.n_features} features, "
                                 f"the model expects {model.n_features}")
    if len(ws) and ws.w != ws.X.shape[1]:
        raise ConfigurationError(f"{where}: inconsistent window length")


def cmd_train(cfg, repeat: int = 1) -> int:
    if repeat < 1:
        raise ConfigurationError("--repeat must be >= 1")
    wc = windowing(cfg)
    arch = architecture(cfg)
    base = train_config(cfg)
    kind = cfg["model"]["kind"]
    horizon = float(cfg["evaluation"]["horizon"])
    tr, va, te = _prepared(cfg, "train"), _prepared(cfg, "val"), _prepared(cfg, "test")
    with open(_outdir(cfg) / "prepared" / "normalization.json") as fh:
        normalization = json.load(fh)
    if len(tr) == 0:
        raise DataError("no training windows")
    root = _outdir(cfg) / "train"
    root.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, root / "resolved_config.yaml")
    handler = _log_to(root / "train.log")
    log.info("training %s: hinge=%s use_poly=%s", kind, base.hinge, base.use_poly)
    rows = []
    try:
        for i in range(repeat):
            seed = base.seed + i
            tcfg = type(base).from_dict({**base.to_dict(), "seed": seed})
            run_dir = root / f"run_{i}"
            if run_dir.exists():
                shutil.rmtree(run_dir)
            model = build_model(kind, arch, tr.n_features, seed, horizon, wc.max_rul_units)
            try:
                model, history = train_any(model, tr, va, tcfg)
            except TrainingDiverged as exc:
                model.params = exc.params
                save_model(run_dir, model, cfg, seed, normalization)
                write_history(run_dir / "history.csv", exc.history)
                print(f"train: run {i} diverged: {exc}; last good checkpoint kept in {run_dir}",
                      file=sys.stderr)
                return EXIT_NUMERIC
            save_model(run_dir, model, cfg, seed, normalization)
            write_history(run_dir / "history.csv", history)
            plot_history(run_dir / "history.png", history)
            eval_ws = te if len(te) else va
            report, _ = evaluate(model, eval_ws, wc.w, int(cfg["evaluation"]["bins"]), horizon)
            metrics = report.to_dict()
            metrics["epochs"] = len(history)
            metrics["evaluated_on"] = "test" if len(te) else "val"
            write_json(run_dir / "metrics.json", metrics)
            rows.append(metrics)
            _say(f"train: run {i} (seed {seed}): {len(history)} epochs; " + ", ".join(
                f"{k}={metrics[k]:.4f}" for k in SUMMARY_METRICS[:-1] if k in metrics))
        _write_summary(root / "summary.csv", rows)
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()
    return EXIT_OK


def _write_summary(path: Path, rows) -> None:
    lines = ["metric,mean,std,n"]
    for m in SUMMARY_METRICS:
        vals = np.array([r[m] for r in rows if m in r], dtype=float)
        if vals.size:
            lines.append(f"{m},{float(vals.mean())!r},{float(vals.std())!r},{vals.size}")
    path.write_text("\n".join(lines) + "\n")
    for line in lines[1:]:
        _say("summary: " + line)


def _default_checkpoint(cfg) -> Path:
    return _outdir(cfg) / "train" / "run_0"


def cmd_evaluate(cfg, checkpoint=None, windows=None, figures: bool = True) -> int:
    ckpt = Path(checkpoint) if checkpoint else _default_checkpoint(cfg)
    model, _ = load_model(ckpt)
    ws = read_windows(windows) if windows else _prepared(cfg, "test")
    _check_width(model, ws, "evaluate")
    wc = windowing(cfg)
    report, curves = evaluate(model, ws, wc.w, int(cfg["evaluation"]["bins"]),
                              float(cfg["evaluation"]["horizon"]))
    report.extra["checkpoint"] = str(ckpt)
    final = _outdir(cfg) / "eval" / ckpt.name
    tmp = _staging(final)
    write_report(tmp, report, curves, figures)
    dump_config(cfg, tmp / "resolved_config.yaml")
    _replace_dir(tmp, final)
    _say(f"evaluate: {model.kind} on {len(ws)} windows -> {final}")
    for key in ("rmse", "auc_roc", "auc_pr", "spearman_consistency"):
        value = getattr(report, key)
        if value is not None:
            _say(f"  {key} = {value:.4f}")
    return EXIT_OK


def cmd_predict(cfg, checkpoint=None, windows=None) -> int:
    ckpt = Path(checkpoint) if checkpoint else _default_checkpoint(cfg)
    model, _ = load_model(ckpt)
    ws = read_windows(windows) if windows else _prepared(cfg, "test")
    _check_width(model, ws, "predict")
    records = predict(model, ws, float(cfg["evaluation"]["horizon"]))
    final = _outdir(cfg) / "predict"
    tmp = _staging(final)
    write_predictions(tmp / "predictions.csv", records)
    dump_config(cfg, tmp / "resolved_config.yaml")
    _replace_dir(tmp, final)
    _say(f"predict: {len(records)} rows -> {final / 'predictions.csv'}")
    return EXIT_OK


def cmd_gradcheck(seed: int = 0, corrupt: float = 0.0) -> int:
    results = gradcheck_suite(seed=seed, corrupt=corrupt)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<20s} max rel error {r.max_rel_error:.3e}"
              f"  ({r.seconds:.2f}s)")
    failed = [r.name for r in results if not r.passed]
    print(f"gradcheck: {len(results) - len(failed)}/{len(results)} passed")
    return EXIT_NUMERIC if failed else EXIT_OK


# --------------------------------------------------------------------- main
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rulfp", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"rulfp {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--config", help="YAML run configuration")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config value, e.g. model.kind=dw")
        sp.add_argument("-o", "--output-dir", help="shortcut for --set output_dir=DIR")
        sp.add_argument("-v", "--verbose", action="store_true")
        return sp

    common(sub.add_parser("synth", help="generate a synthetic Weibull dataset"))
    common(sub.add_parser("prepare", help="load raw data and write prepared windows"))
    t = common(sub.add_parser("train", help="train a network on prepared windows"))
    t.add_argument("--repeat", type=int, default=1, help="independent runs with seeds base+i")
    for name in ("evaluate", "predict"):
        sp = common(sub.add_parser(name, help=f"{name} with a trained checkpoint"))
        sp.add_argument("--checkpoint", help="run directory (default: <output_dir>/train/run_0)")
        sp.add_argument("--windows", help="prepared-window CSV (default: prepared test split)")
        if name == "evaluate":
            sp.add_argument("--no-figures", action="store_true", help="skip PNG output")
    g = sub.add_parser("gradcheck", help="finite-difference check of every gradient")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--corrupt", type=float, default=0.0,
                   help="add this to every analytic gradient (exercises failure detection)")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    console = logging.StreamHandler()
    console.setLevel(logging.DEBUG if args.verbose else logging.WARNING)
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.getLogger().addHandler(console)
    logging.getLogger("rulfp").setLevel(logging.DEBUG if args.verbose else logging.INFO)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    try:
        return _dispatch(args)
    finally:
        logging.getLogger().removeHandler(console)


def _dispatch(args) -> int:
    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(args.seed, args.corrupt)
        overrides = list(args.overrides)
        if args.output_dir:
            overrides.append(f"output_dir={args.output_dir}")
        cfg = load_config(args.config, overrides)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "prepare":
            return cmd_prepare(cfg)
        if args.command == "train":
            return cmd_train(cfg, args.repeat)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint, args.windows, not args.no_figures)
        return cmd_predict(cfg, args.checkpoint, args.windows)
    except (ConfigurationError, DataError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, TrainingDiverged) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
