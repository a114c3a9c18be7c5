"""labnet command line: train, eval, dump-activations, gradcheck.

Exit codes: 0 success, 1 gradient check failure, 2 configuration error,
3 data error, 4 training diverged, 5 checkpoint/model mismatch or bad selector.
"""
import argparse
import datetime
import os
import sys

import numpy as np

from . import activation as lab
from . import backend
from . import classic_rbf as R
from . import data as D
from . import gradcheck as G
from .config import DATASETS, MODELS, ConfigError, TrainConfig, coerce, load_config
from .errors import FormatError, InvalidArgument, LabnetError
from .kernels import KernelSpec
from .manifest import RunManifest
from .nn import checkpoint as ckpt
from .train import Diverged, EpochRecord, Trainer, make_model

EXIT_GRADCHECK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED, EXIT_MISMATCH = 1, 2, 3, 4, 5


class DataError(LabnetError):
    pass


# flag name -> (config field, argparse kwargs)
CONFIG_FLAGS = {
    "--model": ("model", dict(choices=MODELS)),
    "--dataset": ("dataset", dict(choices=DATASETS)),
    "--activation": ("activation", dict(choices=("relu", "lab"))),
    "--kernel": ("kernel", dict(choices=("gaussian", "multiquadric", "spline"))),
    "--degree": ("degree", dict(type=int, metavar="K")),
    "--s": ("s", dict(type=int, metavar="N", help="control points per activation")),
    "--init": ("init", dict(choices=("linear", "random-y", "hockey-stick"))),
    "--sharing": ("sharing", dict(choices=("channel", "layer", "global"))),
    "--r": ("r", dict(type=float, metavar="R", help="control points span [-R, R]")),
    "--lambda-sum": ("lambda_sum", dict(type=float, metavar="V")),
    "--lr": ("lr", dict(type=float, metavar="V")),
    "--schedule": ("schedule", dict(metavar="E:RATE;...", help="learning-rate drops, e.g. '20:1e-4;25:1e-5'")),
    "--weight-decay": ("weight_decay", dict(type=float, metavar="V")),
    "--epochs": ("epochs", dict(type=int, metavar="N")),
    "--batch": ("batch", dict(type=int, metavar="N")),
    "--seed": ("seed", dict(type=int, metavar="N")),
    "--clip": ("clip", dict(type=float, metavar="V")),
    "--train-subset": ("train_subset", dict(type=int, metavar="N", help="use the first N training samples")),
    "--hidden": ("hidden", dict(type=int, metavar="H", help="hidden units of rbf-classic")),
}


def _config_parent():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration")
    for flag, (dest, kw) in CONFIG_FLAGS.items():
        g.add_argument(flag, dest=dest, default=None, **kw)
    g.add_argument("--flip", dest="flip", action="store_const", const=True, default=None,
                   help="random left-right flips (default: on for CIFAR, off for MNIST)")
    g.add_argument("--no-flip", dest="flip", action="store_const", const=False)
    g.add_argument("--no-augment", dest="augment", action="store_const", const=False, default=None)
    g.add_argument("--data-dir", metavar="PATH", help="dataset root (default $LABNET_DATA_DIR, then ./data)")
    return p


def build_parser():
    parent = _config_parent()
    ap = argparse.ArgumentParser(prog="labnet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[parent], help="train a model")
    p.add_argument("--config", metavar="FILE", help="key = value config file; flags take precedence")
    p.add_argument("--out", metavar="PATH", help="run directory (default runs/<timestamp>-<config hash>)")
    p.add_argument("--resume", metavar="CHECKPOINT", help="continue a run from its checkpoint")
    p.add_argument("--save-every", type=int, default=0, metavar="N",
                   help="also keep checkpoint-eNNN.npz every N epochs (and at epoch 0)")

    p = sub.add_parser("eval", parents=[parent], help="accuracy of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--out", metavar="PATH", help="write an eval manifest here")

    p = sub.add_parser("dump-activations", help="sample a learned activation curve as CSV")
    p.add_argument("checkpoint")
    p.add_argument("--block", metavar="SELECTOR", help="'layer' or 'layer:channel' (default: first block)")
    p.add_argument("--list", action="store_true", help="list block selectors and exit")
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"), help="default [-r, r]")
    p.add_argument("--samples", type=int, default=201, metavar="N")
    p.add_argument("--out", metavar="PATH", help="CSV path (default stdout)")

    p = sub.add_parser("gradcheck", help="finite-difference check of all derivatives")
    p.add_argument("scope_pos", nargs="?", choices=G.SCOPES, metavar="SCOPE")
    p.add_argument("--scope", choices=G.SCOPES)
    p.add_argument("--seed", type=int, default=0)
    return ap


def _overrides(args):
    keys = [dest for dest, _ in CONFIG_FLAGS.values()] + ["flip", "augment"]
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _now():
    return datetime.datetime.now().isoformat(timespec="seconds")


def _load(config, directory, split):
    try:
        return D.load_dataset(config.dataset, D.data_dir(directory), split)
    except (OSError, FormatError) as exc:
        raise DataError(f"cannot load {config.dataset} {split} data: {exc}") from None


def _write_text(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _metrics_text(records):
    rows = [EpochRecord(**r).csv_row() for r in records]
    return "\n".join([EpochRecord.CSV_HEADER] + rows) + "\n"


def _record_dict(rec):
    return {k: getattr(rec, k) for k in EpochRecord.CSV_HEADER.split(",")}


def _config_from_checkpoint(meta, overrides):
    values = dict(meta["config"])
    for k, v in overrides.items():
        values[k] = coerce(k, v)
    try:
        return TrainConfig(**values).resolved()
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


# ------------------------------------------------------------------ train

def cmd_train(args):
    overrides = _overrides(args)
    meta = None
    if args.resume:
        meta = ckpt.read(args.resume)[0]
        config = _config_from_checkpoint(meta, overrides)
    else:
        config = load_config(args.config, overrides).resolved()
    out = args.out or (os.path.dirname(os.path.abspath(args.resume)) if args.resume else
                       os.path.join("runs", datetime.datetime.now().strftime("%Y%m%d-%H%M%S")
                                    + "-" + config.digest()))
    train_set, test_set = _load(config, args.data_dir, "train"), _load(config, args.data_dir, "test")
    os.makedirs(out, exist_ok=True)
    manifest = RunManifest("train", config.to_dict(), config.seed, _now())
    if config.model == "rbf-classic":
        return _train_rbf(config, train_set, test_set, out, manifest)

    trainer = Trainer(config, train_set, test_set)
    extra = {"normalizer": {"mean": list(trainer.normalizer.mean), "std": list(trainer.normalizer.std)}}
    model = trainer.model

    def save(name):
        ckpt.save(os.path.join(out, name), model, config.to_dict(), trainer.epoch, trainer.adam, extra)

    def flush(status):
        manifest.finished = _now()
        manifest.result = {"status": status, "epochs_completed": trainer.epoch,
                           "val_acc": manifest.records[-1]["val_acc"] if manifest.records else None,
                           "parameter_count": model.parameter_count(), "backend": backend.name()}
        _write_text(os.path.join(out, "metrics.csv"), _metrics_text(manifest.records))
        _write_text(os.path.join(out, "manifest.json"), manifest.to_json())

    if meta is not None:
        ckpt.load_into(args.resume, model, trainer.adam)
        trainer.epoch = meta["epoch"]
        old = os.path.join(out, "manifest.json")
        if os.path.exists(old):
            prev = RunManifest.read(old)
            manifest.started = prev.started
            manifest.records = [r for r in prev.records if r["epoch"] <= trainer.epoch]
    else:
        manifest.add(_record_dict(trainer.init_record()))
        save("checkpoint.npz")
        if args.save_every:
            save("checkpoint-e000.npz")
    flush("running" if trainer.epoch < config.epochs else "completed")
    print(_progress(manifest.records[-1]) if manifest.records else f"resuming at epoch {trainer.epoch}",
          flush=True)

    def on_epoch(tr, rec):
        manifest.add(_record_dict(rec))
        save("checkpoint.npz")
        if args.save_every and tr.epoch % args.save_every == 0:
            save(f"checkpoint-e{tr.epoch:03d}.npz")
        flush("running")
        print(_progress(manifest.records[-1]), flush=True)

    try:
        trainer.fit(on_epoch=on_epoch)
    except Diverged as exc:
        save("diverged.npz")
        flush("diverged")
        print(f"error: training diverged: {exc}; diagnostic checkpoint {os.path.join(out, 'diverged.npz')}",
              file=sys.stderr)
        return EXIT_DIVERGED
    flush("completed")
    print(f"run directory: {out}")
    return 0


def _progress(r):
    return (f"epoch {r['epoch']:3d}  loss {r['train_loss']:.4f}  train_acc {r['train_acc']:.4f}  "
            f"val_acc {r['val_acc']:.4f}  lr {r['lr']:.3g}  mean|sum lambda| {r['mean_abs_lambda_sum']:.3e}")


def _flat(images):
    return images.reshape(len(images), -1).astype(np.float64) / 255.0


def _train_rbf(config, train_set, test_set, out, manifest):
    if config.train_subset:
        train_set = train_set.subset(config.train_subset)
    rng = np.random.default_rng(config.seed)
    x = _flat(train_set.images)
    net, scale = R.fit_classifier(x, train_set.labels, config.hidden, rng, train_set.n_classes)
    scores = R.predict(net, x / scale)
    mse = float(((scores - R.one_hot(train_set.labels, train_set.n_classes)) ** 2).mean())
    train_acc = float((scores.argmax(1) == train_set.labels).mean())
    val_acc = float((R.classify(net, _flat(test_set.images) / scale) == test_set.labels).mean())
    manifest.add({"epoch": 1, "train_loss": mse, "train_acc": train_acc, "val_acc": val_acc,
                  "lr": 0.0, "mean_abs_lambda_sum": 0.0})
    meta = {"config": config.to_dict(), "epoch": 1, "adam_t": 0, "model": "rbf-classic",
            "param_names": ["centroids", "output_weights", "output_bias"],
            "extra": {"input_scale": scale, "kernel": net.kernel.name}}
    ckpt.save_arrays(os.path.join(out, "checkpoint.npz"), meta, {"param": {
        "centroids": net.centroids, "output_weights": net.output_weights, "output_bias": net.output_bias}})
    manifest.finished = _now()
    manifest.result = {"status": "completed", "val_acc": val_acc, "parameter_count": net.n_params,
                       "input_scale": scale}
    _write_text(os.path.join(out, "metrics.csv"), _metrics_text(manifest.records))
    _write_text(os.path.join(out, "manifest.json"), manifest.to_json())
    print(_progress(manifest.records[-1]))
    print(f"run directory: {out}")
    return 0


# ------------------------------------------------------------------- eval

def _restore(path, overrides):
    """Rebuild the model stored in a checkpoint; returns (config, meta, model_or_rbf)."""
    meta, params = ckpt.read(path)[:2]
    config = _config_from_checkpoint(meta, overrides)
    if config.model == "rbf-classic" or meta["model"] == "rbf-classic":
        if config.model != meta["model"]:
            raise ckpt.CheckpointError(f"checkpoint holds {meta['model']}, asked for {config.model}")
        try:
            net = R.RbfNetwork(params["centroids"], KernelSpec.parse(meta["extra"]["kernel"]),
                               params["output_weights"], params["output_bias"])
        except (KeyError, LabnetError) as exc:
            raise ckpt.CheckpointError(f"bad rbf-classic checkpoint: {exc}") from None
        return config, meta, net
    try:
        model = make_model(config)
    except InvalidArgument as exc:
        raise ConfigError("model", str(exc)) from None
    ckpt.load_into(path, model)
    return config, meta, model


def cmd_eval(args):
    config, meta, model = _restore(args.checkpoint, _overrides(args))
    ds = _load(config, args.data_dir, args.split)
    if isinstance(model, R.RbfNetwork):
        x = _flat(ds.images)
        if x.shape[1] != model.centroids.shape[1]:
            raise ckpt.CheckpointError(f"data has {x.shape[1]} features, checkpoint expects "
                                       f"{model.centroids.shape[1]}")
        acc = float((R.classify(model, x / meta["extra"]["input_scale"]) == ds.labels).mean())
    else:
        if ds.images.shape[1:] != model.input_shape:
            raise ckpt.CheckpointError(f"data shape {ds.images.shape[1:]} does not match model input "
                                       f"{model.input_shape}")
        norm = meta["extra"]["normalizer"]
        x = D.Normalizer(tuple(norm["mean"]), tuple(norm["std"]))(ds.images)
        acc = float((model.predict(x).argmax(1) == ds.labels).mean())
    print(f"accuracy {acc:.6f} ({len(ds)} {config.dataset} {args.split} samples, epoch {meta['epoch']})")
    if args.out:
        m = RunManifest("eval", config.to_dict(), config.seed, _now(), _now(), [],
                        {"accuracy": acc, "checkpoint": os.path.abspath(args.checkpoint),
                         "split": args.split, "samples": len(ds), "epoch": meta["epoch"]})
        m.write(args.out)
    return 0


# ------------------------------------------------------- dump-activations

class SelectorError(LabnetError):
    pass


def cmd_dump(args):
    config, meta, model = _restore(args.checkpoint, {})
    blocks = [] if isinstance(model, R.RbfNetwork) else model.lab_blocks()
    if args.list:
        for sel, _, _ in blocks:
            print(sel)
        return 0
    if not blocks:
        raise SelectorError(f"checkpoint ({config.model}, {config.activation}) has no LAB activation blocks")
    found = {sel: (layer, row) for sel, layer, row in blocks}
    sel = args.block or blocks[0][0]
    if sel not in found:
        shown = ", ".join(list(found)[:8]) + (" ..." if len(found) > 8 else "")
        raise SelectorError(f"unknown block selector {sel!r}; available: {shown}")
    layer, row = found[sel]
    p = layer.params_for(model.params, row)
    lo, hi = args.range if args.range else (-config.r, config.r)
    if args.samples < 2 or not hi > lo:
        raise ConfigError("range", "need HI > LO and at least 2 samples")
    curve = lab.sample_curve(p, lo, hi, args.samples, config.clip)
    if args.out:
        with open(args.out, "w") as fh:
            lab.write_curve_csv(curve, fh)
    else:
        lab.write_curve_csv(curve, sys.stdout)
    return 0


# -------------------------------------------------------------- gradcheck

def cmd_gradcheck(args):
    scope = args.scope or args.scope_pos or "full-model"
    report = G.run(scope, seed=args.seed)
    for line in report.lines():
        print(line)
    if report.ok:
        print(f"gradcheck {scope}: all {len(report.groups)} groups within {report.tolerance:g}")
        return 0
    for name in report.failures:
        print(f"FAILED: {name} worst relative error {report.groups[name].worst:.3e}", file=sys.stderr)
    return EXIT_GRADCHECK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "dump-activations": cmd_dump, "gradcheck": cmd_gradcheck}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ckpt.CheckpointError, SelectorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except InvalidArgument as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
