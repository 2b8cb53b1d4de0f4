"""Command-line entry points.

    doodleseg synth      generate a synthetic dataset directory + manifest
    doodleseg preprocess apply the preprocessing pipeline to a raw dataset
    doodleseg train      run the training protocol (runs x folds)
    doodleseg eval       evaluate a checkpoint on a dataset split
    doodleseg predict    segment one (image, doodle) pair
    doodleseg serve      start the HTTP inference service
    doodleseg info       print a checkpoint's config and parameter count

Exit codes: 0 success, 1 runtime error (one-line diagnostic on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part != ""]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doodleseg",
                                     description="doodle-prompted segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic shape dataset")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--classes", type=int, default=3,
                   help="number of shape classes (max 3)")
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--no-oversample", action="store_true")

    p = sub.add_parser("preprocess", help="crop/resize/equalize a raw dataset")
    p.add_argument("--data", required=True, type=Path, help="raw dataset root")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--side", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--no-crop", action="store_true")
    p.add_argument("--no-oversample", action="store_true")
    p.add_argument("--ros-per-fold", action="store_true",
                   help="balance inside each fold's training split instead "
                        "of before folding")

    p = sub.add_parser("train", help="train the model per the protocol")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--manifest", type=Path, default=None,
                   help="defaults to <data>/manifest.json")
    p.add_argument("--side", type=int, default=64)
    p.add_argument("--filters", type=_parse_int_list, default=None,
                   help="five stage filter counts, e.g. 8,16,32,64,128")
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seeds", type=_parse_int_list, default=[101, 202, 303])
    p.add_argument("--folds", type=_parse_int_list, default=None,
                   help="subset of folds to train, e.g. 0 or 0,1,2")
    p.add_argument("--fusion", choices=["concat", "add"], default="concat")
    p.add_argument("--no-depthwise", action="store_true")
    p.add_argument("--no-se", action="store_true")
    p.add_argument("--no-residual", action="store_true")
    p.add_argument("--shared-encoders", action="store_true")
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--split", choices=["test", "trainval"], default="test")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", type=Path, default=None, help="write report JSON here")

    p = sub.add_parser("predict", help="segment one image with one doodle")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--image", required=True, type=Path)
    p.add_argument("--doodle", required=True, type=Path)
    p.add_argument("--class-id", required=True, type=int)
    p.add_argument("--out", required=True, type=Path, help="mask PNG path")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--prob-out", type=Path, default=None,
                   help="also write the full-precision probability map (.npy)")

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000,
                   help="overridden by the PORT environment variable")
    p.add_argument("--workers", type=int, default=2,
                   help="max concurrent inferences")
    p.add_argument("--no-demo-samples", action="store_true")
    p.add_argument("--ui", type=Path, default=None,
                   help="directory with the built doodle client; served "
                        "same-origin at /")

    p = sub.add_parser("info", help="describe a checkpoint")
    p.add_argument("--checkpoint", required=True, type=Path)

    return parser


def cmd_synth(args) -> int:
    from .data import generate_synthetic, save_manifest, write_dataset
    manifest, _ = generate_synthetic(args.per_class, side=args.side,
                                     seed=args.seed, n_folds=args.folds,
                                     oversample=not args.no_oversample,
                                     n_classes=args.classes)
    records = [e.record for e in manifest.entries]
    write_dataset(records, manifest.class_names, args.out)
    save_manifest(manifest, args.out / "manifest.json")
    print(f"wrote {len({r.id for r in records})} records "
          f"({len(manifest.entries)} manifest entries) to {args.out}")
    return 0


def cmd_preprocess(args) -> int:
    from .data import (load_dataset, preprocess_record, save_manifest,
                       split_and_fold, write_dataset)
    records, class_names = load_dataset(args.data)
    processed = [preprocess_record(r, side=args.side, crop=not args.no_crop)
                 for r in records]
    manifest = split_and_fold(processed, class_names, seed=args.seed,
                              n_folds=args.folds,
                              oversample=not args.no_oversample,
                              ros_per_fold=args.ros_per_fold)
    write_dataset(processed, class_names, args.out)
    save_manifest(manifest, args.out / "manifest.json")
    print(f"preprocessed {len(processed)} records into {args.out}")
    return 0


def _load_manifest(args):
    from .data import load_manifest
    manifest_path = args.manifest or (args.data / "manifest.json")
    return load_manifest(manifest_path, args.data)


def cmd_train(args) -> int:
    from .checkpoint import save_checkpoint
    from .model import ModelConfig
    from .training import TrainConfig, run_experiment

    manifest = _load_manifest(args)
    cfg = ModelConfig(
        input_side=args.side,
        stage_filters=tuple(args.filters) if args.filters else (8, 16, 32, 64, 128),
        use_depthwise=not args.no_depthwise,
        use_se=not args.no_se,
        use_residual=not args.no_residual,
        fusion_mode=args.fusion,
        shared_encoder_weights=args.shared_encoders,
    )
    tc = TrainConfig(lr0=args.lr, epochs_per_fold=args.epochs,
                     batch_size=args.batch_size, seeds=tuple(args.seeds),
                     optimizer=args.optimizer)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)

    def persist(seed, fold, model, best_state, log, report):
        tag = f"run{seed}_fold{fold}"
        save_checkpoint(model, out / f"{tag}.ckpt",
                        provenance={"seed": seed, "fold": fold,
                                    "best_val_dice": log.best_val_dice,
                                    "class_names": manifest.class_names})
        log.write_jsonl(out / f"{tag}.jsonl")
        report.save(out / f"{tag}_report.json")

    report = run_experiment(manifest, cfg, tc, folds=args.folds,
                            progress=not args.quiet, artifact_cb=persist)
    report.save(out / "report.json")
    print(report.to_text_table())
    print(f"artifacts in {out}")
    return 0


def cmd_eval(args) -> int:
    from .checkpoint import load_checkpoint
    from .metrics import evaluate

    model, header = load_checkpoint(args.checkpoint)
    manifest = _load_manifest(args)
    entries = manifest.test() if args.split == "test" else manifest.trainval()
    seen, records = set(), []
    for e in entries:
        if e.id not in seen:
            seen.add(e.id)
            records.append(e.record)
    report = evaluate(model, records, manifest.class_names,
                      threshold=args.threshold,
                      provenance={"checkpoint": str(args.checkpoint),
                                  "split": args.split})
    print(report.to_text_table())
    if args.out:
        report.save(args.out)
        print(f"report written to {args.out}")
    return 0


def cmd_predict(args) -> int:
    from PIL import Image

    from .autograd import Tensor, no_grad
    from .checkpoint import load_checkpoint
    from .data.preprocess import encode_arrays, resize_and_gray

    model, header = load_checkpoint(args.checkpoint)
    class_names = header.get("provenance", {}).get("class_names") or []
    num_classes = len(class_names) or 3
    if not 0 <= args.class_id < num_classes:
        raise ValueError(f"--class-id {args.class_id} out of range [0, {num_classes})")
    side = model.cfg.input_side

    image = np.asarray(Image.open(args.image).convert("L"), dtype=np.uint8)
    doodle = np.asarray(Image.open(args.doodle).convert("L"), dtype=np.uint8)
    if image.shape != doodle.shape:
        raise ValueError(f"image {image.shape} and doodle {doodle.shape} dims differ")
    img_f, doo_f = encode_arrays(resize_and_gray(image, side),
                                 resize_and_gray(doodle, side, labels=True),
                                 args.class_id, num_classes)
    with no_grad():
        probs = model.forward(Tensor(img_f[None, ..., None]),
                              Tensor(doo_f[None, ..., None])).data[0, ..., 0]
    if probs.shape != image.shape:
        probs = np.asarray(Image.fromarray(probs).resize(
            (image.shape[1], image.shape[0]), Image.BILINEAR))
    mask = np.where(probs >= args.threshold, 255, 0).astype(np.uint8)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask, mode="L").save(args.out)
    if args.prob_out:
        np.save(args.prob_out, probs.astype(np.float32))
    print(f"mask written to {args.out} "
          f"({int((mask > 0).sum())} positive pixels)")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    port = int(os.environ.get("PORT", args.port))
    if args.ui is not None and not args.ui.is_dir():
        raise ValueError(f"--ui {args.ui} is not a directory")
    app = create_app(checkpoint_path=args.checkpoint,
                     max_workers=args.workers,
                     demo_samples=not args.no_demo_samples,
                     ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def cmd_info(args) -> int:
    from .checkpoint import load_checkpoint
    from .model import count_buffers, count_parameters

    model, header = load_checkpoint(args.checkpoint)
    info = {
        "config": header["config"],
        "parameter_count": count_parameters(model),
        "buffer_count": count_buffers(model),
        "provenance": header.get("provenance", {}),
        "tensors": len(header["tensors"]),
    }
    print(json.dumps(info, indent=1))
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "serve": cmd_serve,
    "info": cmd_info,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"doodleseg {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
