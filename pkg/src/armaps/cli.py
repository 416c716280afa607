"""Command line entry point: ``armaps train|eval|visualize|inspect-misclassified|make-shapes``.

Options come from built-in defaults, then a JSON ``--config`` file, then flags.
Exit status: 0 success, 1 internal error, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import attentive, checkpoint, ingestion, render
from .augment import AugmentConfig
from .errors import ArmapsError, CheckpointError, ImageFormatError, ManifestError
from .network import NetworkSpec, preset
from .seeding import STREAMS, stream
from .training import TrainConfig, per_class_accuracy, predictions, train, write_metrics

log = logging.getLogger("armaps")

COMMANDS = ("train", "eval", "visualize", "inspect-misclassified", "make-shapes")


class ConfigError(ArmapsError):
    pass


@dataclass
class RunConfig:
    command: str = ""
    preset: str = "shallow"
    spec_file: str | None = None
    manifest: str | None = None
    image_root: str | None = None
    checkpoint: str | None = None
    image: str | None = None
    out: str | None = None
    seed: int = 0
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.01
    momentum: float = 0.9
    augment: bool = False
    input_size: int = ingestion.INPUT_SIZE
    width: int | None = None
    train_fraction: float = 0.9
    min_count: int = 50
    n: int = attentive.DEFAULT_TOP_N
    columns: int | None = None
    rectified: bool = False
    peak_only: bool = False
    score_metric: str = "max"
    alpha: float = 0.6
    count: int = 400  # make-shapes

    def validate(self):
        need = {
            "train": ("manifest", "out"),
            "eval": ("manifest", "checkpoint"),
            "visualize": ("checkpoint", "image", "out"),
            "inspect-misclassified": ("manifest", "checkpoint", "out"),
            "make-shapes": ("out",),
        }[self.command]
        missing = [k for k in need if getattr(self, k) in (None, "")]
        if missing:
            raise ConfigError(f"{self.command}: missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
        if self.n < 1:
            raise ConfigError(f"--n must be >= 1, got {self.n}")
        if self.score_metric not in attentive.METRICS:
            raise ConfigError(f"--score-metric must be one of {attentive.METRICS}")

    def network_spec(self, class_count) -> NetworkSpec:
        if self.spec_file:
            with open(self.spec_file, encoding="utf-8") as fh:
                return NetworkSpec.from_dict(json.load(fh))
        try:
            return preset(self.preset, class_count, self.input_size, self.width)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def train_config(self) -> TrainConfig:
        aug = AugmentConfig() if (self.augment or self.preset == "deeper+aug") else None
        return TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.momentum, self.seed, aug)


def build_parser():
    p = argparse.ArgumentParser(prog="armaps", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON file of option values")
        s.add_argument("--preset", choices=["shallow", "deeper", "deeper+aug"])
        s.add_argument("--spec-file", help="network spec JSON instead of a preset")
        s.add_argument("--manifest", help="CSV with header path,label")
        s.add_argument("--image-root")
        s.add_argument("--checkpoint")
        s.add_argument("--image")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int)
        s.add_argument("--epochs", type=int)
        s.add_argument("--batch-size", type=int)
        s.add_argument("--learning-rate", "--lr", type=float, dest="learning_rate")
        s.add_argument("--momentum", type=float)
        s.add_argument("--augment", action="store_true", default=None)
        s.add_argument("--input-size", type=int)
        s.add_argument("--width", type=int)
        s.add_argument("--train-fraction", type=float)
        s.add_argument("--min-count", type=int)
        s.add_argument("--n", type=int, help="number of top units")
        s.add_argument("--columns", type=int)
        s.add_argument("--rectified", action="store_true", default=None)
        s.add_argument("--peak-only", action="store_true", default=None)
        s.add_argument("--score-metric", choices=attentive.METRICS)
        s.add_argument("--alpha", type=float)
        s.add_argument("--count", type=int)
    return p


def resolve_config(args) -> RunConfig:
    values = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                values.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known - {"spec_hash", "seed_streams", "checkpoint_sha256"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values = {k: v for k, v in values.items() if k in known}
    for k in known:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    values["command"] = args.command
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _run_manifest(cfg: RunConfig, **extra):
    d = asdict(cfg)
    d["seed_streams"] = {name: [cfg.seed, k] for name, k in STREAMS.items()}
    d.update(extra)
    return d


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _splits(cfg: RunConfig):
    manifest = ingestion.load(cfg.manifest, cfg.image_root)
    manifest = ingestion.filter_min_count(manifest, cfg.min_count)
    return manifest, ingestion.split(manifest, cfg.train_fraction, stream(cfg.seed, "split"))


def cmd_train(cfg: RunConfig):
    manifest, (train_m, test_m) = _splits(cfg)
    spec = cfg.network_spec(len(manifest.classes))
    tcfg = cfg.train_config()
    size = spec.input_shape[1]
    train_d = ingestion.build_dataset(train_m, size, manifest.classes)
    test_d = ingestion.build_dataset(test_m, size, manifest.classes)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    model, metrics = train(spec, train_d, tcfg, test_d)
    ckpt = out / "checkpoint.armc"
    checkpoint.save(model, ckpt)
    write_metrics(metrics, out / "metrics.jsonl")
    _write_json(out / "run_manifest.json", _run_manifest(
        cfg, spec_hash=spec.spec_hash(), checkpoint_sha256=checkpoint.file_hash(ckpt)))
    print(json.dumps(metrics[-1], sort_keys=True))
    return 0


def cmd_eval(cfg: RunConfig):
    model = checkpoint.load(cfg.checkpoint)
    manifest, (_, test_m) = _splits(cfg)
    test_d = ingestion.build_dataset(test_m, model.spec.input_shape[1], model.class_names)
    pred = predictions(model, test_d)
    report = {
        "accuracy": float(np.mean(pred == test_d.labels)),
        "count": len(test_d),
        "per_class": per_class_accuracy(pred, test_d.labels, model.class_names),
    }
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        _write_json(Path(cfg.out) / "eval.json", report)
    print(json.dumps(report, sort_keys=True))
    return 0


def _columns(cfg, n):
    return cfg.columns or int(np.ceil(np.sqrt(n)))


def cmd_visualize(cfg: RunConfig):
    model = checkpoint.load(cfg.checkpoint)
    image = ingestion.decode_and_resize(cfg.image, model.spec.input_shape[1])
    mode = "rectified" if cfg.rectified else "linear"
    vis = attentive.visualize(model, image, cfg.n, mode, cfg.peak_only, cfg.score_metric)
    ocfg = render.OverlayConfig(alpha=cfg.alpha)
    out = Path(cfg.out)
    (out / "maps").mkdir(parents=True, exist_ok=True)
    dom = render.normalize_map(vis.dominant.value_map, ocfg.clamp_negative)
    render.write_image(render.overlay(image, dom, ocfg), out / "overlay.png")
    render.write_image(render.unit_panel(image, vis.maps, _columns(cfg, len(vis.maps)), ocfg), out / "panel.png")
    for m in vis.maps:
        attentive.write_float_map(out / "maps" / f"unit_{m.unit:04d}.armap", m)
    attentive.write_float_map(out / "maps" / "dominant.armap",
                              attentive.AttentiveResponseMap(-1, vis.dominant.value_map, 0.0))
    np.save(out / "maps" / "dominant_units.npy", vis.dominant.unit_index_map.astype("<i8"))
    pred = {
        "predicted_class": model.class_names[vis.predicted] if model.class_names else vis.predicted,
        "predicted_index": vis.predicted,
        "probability": float(vis.probs[vis.predicted]),
        "top_units": [{"unit": m.unit, "score": m.score} for m in vis.maps],
    }
    _write_json(out / "prediction.json", pred)
    _write_json(out / "run_manifest.json", _run_manifest(cfg, spec_hash=model.spec.spec_hash()))
    print(json.dumps(pred, sort_keys=True))
    return 0


def cmd_inspect_misclassified(cfg: RunConfig, n=9):
    model = checkpoint.load(cfg.checkpoint)
    manifest, (_, test_m) = _splits(cfg)
    test_d = ingestion.build_dataset(test_m, model.spec.input_shape[1], model.class_names)
    pred = predictions(model, test_d)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    mode = "rectified" if cfg.rectified else "linear"
    ocfg = render.OverlayConfig(alpha=cfg.alpha)
    errors = []
    for i in np.flatnonzero(pred != test_d.labels):
        image = test_d.images[i]
        k = min(n, model.spec.shapes()[model.spec.last_conv][0])
        vis = attentive.visualize(model, image, k, mode, cfg.peak_only, cfg.score_metric)
        stem = f"error_{int(i):05d}"
        render.write_image(render.unit_panel(image, vis.maps, 3, ocfg), out / f"{stem}.png")
        rec = {
            "path": test_m.paths[i],
            "true_label": model.class_names[test_d.labels[i]],
            "predicted_label": model.class_names[pred[i]],
            "top_units": [{"unit": m.unit, "score": m.score} for m in vis.maps],
        }
        _write_json(out / f"{stem}.json", rec)
        errors.append(stem)
    summary = {"test_count": len(test_d), "error_count": len(errors),
               "accuracy": float(np.mean(pred == test_d.labels)), "errors": errors}
    _write_json(out / "summary.json", summary)
    print(json.dumps({k: summary[k] for k in ("test_count", "error_count", "accuracy")}, sort_keys=True))
    return 0


def cmd_make_shapes(cfg: RunConfig):
    """Write a synthetic shapes dataset as PNGs plus ``manifest.csv``."""
    from .shapes import make_shapes

    data, _ = make_shapes(cfg.count, cfg.input_size if cfg.input_size != ingestion.INPUT_SIZE else 64, cfg.seed)
    out = Path(cfg.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    lines = ["path,label"]
    for i, (img, lab) in enumerate(zip(data.images, data.labels)):
        rel = f"images/{i:05d}.png"
        g = render.quantize(img[0])
        render.write_image(np.repeat(g[..., None], 3, axis=2), out / rel)
        lines.append(f"{rel},{data.class_names[lab]}")
    (out / "manifest.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(out / "manifest.csv")
    return 0


HANDLERS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "visualize": cmd_visualize,
    "inspect-misclassified": cmd_inspect_misclassified,
    "make-shapes": cmd_make_shapes,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        return HANDLERS[cfg.command](cfg)
    except (ConfigError, ManifestError, CheckpointError, ImageFormatError, FileNotFoundError, ValueError) as e:
        print(f"armaps {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        log.exception("internal error")
        print(f"armaps {args.command}: internal error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
