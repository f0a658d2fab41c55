"""Command-line interface: gen-data, train, eval, explain, dump-layer.

Every flag mirrors a config key (underscores become hyphens); precedence is
defaults < --config file < flags < the MORPHLENS_SEED environment variable
(seed only). All failures print one `error: ...` line to stderr and exit
nonzero; completed commands exit 0 with byte-deterministic outputs.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_params, save_params
from .config import CONFIG_KEYS, RunConfig, load_config, parse_value
from .data import build_corpus, load_corpus, preprocess, save_corpus, split
from .errors import CliError, MorphLensError
from .explain import (
    cam,
    encode_feature_vector,
    ensemble,
    gradcam,
    normalize_map,
    saliency_map,
    upsample,
    write_heatmap,
)
from .metrics import compute_metrics, confusion, format_report
from .model import (
    CnnModel,
    build_model,
    dump_layer_activations,
    load_plan_sidecar,
    plan_scaling,
    predict,
    save_plan_sidecar,
    train,
)
from .viz import RgbImage, colorize, decode_ppm, encode_pgm, encode_ppm, superimpose

ENV_SEED = "MORPHLENS_SEED"
SPLIT_RATIO = 0.8
OVERLAY_ALPHA = 0.4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morphlens", description="Morphed-face detection and explanation")
    commands = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("gen-data", "generate the synthetic corpus", []),
        ("train", "train a detector on the corpus train split", []),
        ("eval", "score a checkpoint on the corpus test split", []),
        ("explain", "write heatmaps and overlays for one image", ["image", "target_class"]),
        ("dump-layer", "write one layer's activation grid as PGM", ["image", "layer_index"]),
    ]
    for name, help_text, extras in specs:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", metavar="PATH", help="key=value config file")
        for key in CONFIG_KEYS:
            sub.add_argument(f"--{key.replace('_', '-')}", dest=f"opt_{key}", metavar="VALUE")
        if "image" in extras:
            sub.add_argument("--image", required=True, metavar="PATH", help="PPM image to explain")
        if "target_class" in extras:
            sub.add_argument("--target-class", type=int, default=1, choices=(0, 1))
        if "layer_index" in extras:
            sub.add_argument("--layer-index", required=True, type=int)
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    cfg = load_config(ns.config) if ns.config else RunConfig()
    for key in CONFIG_KEYS:
        raw = getattr(ns, f"opt_{key}", None)
        if raw is not None:
            setattr(cfg, key, parse_value(key, raw))
    env_seed = os.environ.get(ENV_SEED)
    if env_seed is not None:
        try:
            cfg.seed = int(env_seed)
        except ValueError:
            raise CliError(f"{ENV_SEED} must be an integer, got {env_seed!r}") from None
    return cfg


def _plan(cfg: RunConfig):
    return plan_scaling(
        cfg.phi,
        cfg.alpha,
        cfg.beta,
        cfg.gamma,
        cfg.base_depth,
        cfg.base_width,
        cfg.base_resolution,
        tau=cfg.tau,
    )


def _sidecar_path(checkpoint_path: str) -> Path:
    return Path(str(checkpoint_path) + ".plan")


def _load_model(cfg: RunConfig) -> tuple[CnnModel, int]:
    ckpt = Path(cfg.checkpoint)
    if not ckpt.is_file():
        raise CliError(f"checkpoint not found: {ckpt} (run `morphlens train` first)")
    plan, seed = load_plan_sidecar(_sidecar_path(cfg.checkpoint))
    model = build_model(plan, seed)
    model.load_parameters(load_params(ckpt))
    return model, seed


def _load_image(path: str) -> RgbImage:
    target = Path(path)
    if not target.is_file():
        raise CliError(f"image not found: {target}")
    return decode_ppm(target.read_bytes())


def _tensor_to_rgb(tensor: np.ndarray) -> RgbImage:
    pixels = np.floor(255.0 * tensor.transpose(1, 2, 0) + 0.5)
    return RgbImage(np.clip(pixels, 0.0, 255.0).astype(np.uint8))


def cmd_gen_data(cfg: RunConfig, ns: argparse.Namespace) -> int:
    corpus = build_corpus(cfg.n_bonafide, cfg.n_morphed, cfg.seed, cfg.base_resolution)
    save_corpus(cfg.corpus_dir, corpus)
    print(f"wrote {cfg.n_bonafide} bonafide + {cfg.n_morphed} morph images to {cfg.corpus_dir}")
    return 0


def cmd_train(cfg: RunConfig, ns: argparse.Namespace) -> int:
    corpus = load_corpus(cfg.corpus_dir)
    plan = _plan(cfg)
    model = build_model(plan, cfg.seed)
    part = split(corpus, SPLIT_RATIO, cfg.seed)
    report = train(model, part.train, cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.seed)
    ckpt = Path(cfg.checkpoint)
    if ckpt.parent != Path(""):
        ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_params(ckpt, [(name, tensor.data) for name, tensor in model.parameters()])
    save_plan_sidecar(_sidecar_path(cfg.checkpoint), plan, cfg.seed)
    for epoch, loss in enumerate(report.epoch_losses, 1):
        print(f"epoch {epoch} loss {loss!r}")
    print(f"train_accuracy={report.train_accuracy!r}")
    print(f"wrote checkpoint to {ckpt}")
    return 0


def cmd_eval(cfg: RunConfig, ns: argparse.Namespace) -> int:
    model, train_seed = _load_model(cfg)
    corpus = load_corpus(cfg.corpus_dir)
    # the sidecar seed reproduces the training partition exactly
    part = split(corpus, SPLIT_RATIO, train_seed)
    predictions = [
        predict(model, preprocess(sample.image, model.input_resolution)).predicted_class
        for sample in part.test
    ]
    labels = [sample.label for sample in part.test]
    text = format_report(compute_metrics(confusion(predictions, labels)))
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.txt").write_text(text, encoding="ascii")
    print(text, end="")
    return 0


def cmd_explain(cfg: RunConfig, ns: argparse.Namespace) -> int:
    model, _ = _load_model(cfg)
    image = _load_image(ns.image)
    tensor = preprocess(image, model.input_resolution)
    target = ns.target_class
    res = model.input_resolution

    raw_saliency = saliency_map(model, tensor, target)
    raw_cam = cam(model, tensor, target)
    raw_gradcam, _weights = gradcam(model, tensor, target)
    sal = normalize_map(upsample(raw_saliency, res, res))
    cam_n = normalize_map(upsample(raw_cam, res, res))
    gc_n = normalize_map(upsample(raw_gradcam, res, res))
    result = ensemble(sal, cam_n, gc_n, cfg.ensemble_weights)

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = _tensor_to_rgb(tensor)
    named = [("saliency", sal), ("cam", cam_n), ("gradcam", gc_n), ("ensemble", result.combined)]
    for name, heatmap in named:
        write_heatmap(out_dir / f"{name}.xhm", heatmap)
        overlay = superimpose(base, colorize(heatmap), OVERLAY_ALPHA)
        (out_dir / f"{name}.ppm").write_bytes(encode_ppm(overlay))
    (out_dir / "ensemble_vec.xhm").write_bytes(encode_feature_vector(result.feature_vector, res, res))
    print(f"wrote 4 overlays, 4 heatmaps, and the feature vector to {out_dir}")
    return 0


def cmd_dump_layer(cfg: RunConfig, ns: argparse.Namespace) -> int:
    model, _ = _load_model(cfg)
    image = _load_image(ns.image)
    tensor = preprocess(image, model.input_resolution)
    activation, grid = dump_layer_activations(model, tensor, ns.layer_index)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"layer_{ns.layer_index:02d}.pgm"
    path.write_bytes(encode_pgm(grid))
    print(f"layer {ns.layer_index} activation shape {tuple(activation.shape)} -> {path}")
    return 0


_DISPATCH = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "explain": cmd_explain,
    "dump-layer": cmd_dump_layer,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve_config(ns)
        return _DISPATCH[ns.command](cfg, ns)
    except MorphLensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
