"""Command line entry point.

    tryon gen-data   --out data --n 640 --seed 0
    tryon train-ae   --data data --run-dir runs
    tryon train-ac   --data data --run-dir runs
    tryon train-vton --data data --run-dir runs [--no-ac]
    tryon eval       --data data --run-dir runs [--checkpoint A --checkpoint B]
    tryon infer      --checkpoint runs/vton.pt --user u.png --cloth c.png --type t-shirt ...

Failures print one JSON line on stderr and exit with 2 (config),
3 (stage order) or 4 (data).  Relative artifact paths are placed under
``$TRYON_OUT_ROOT`` when that variable is set.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from tryon.config import PRESETS, PipelineConfig, load_config, resolve_output
from tryon.errors import StageOrderError, TryOnError

log = logging.getLogger("tryon")

CHECKPOINT_NAMES = {"ae": "ae.pt", "ac": "ac.pt", "vton": "vton.pt", "vton_noac": "vton_noac.pt"}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file (defaults to the built-in desk-scale settings)")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--seed", type=int, help="root seed; every stage seed is derived from it")
    p.add_argument("-v", "--verbose", action="store_true")


def _train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", default="data", help="dataset directory written by gen-data")
    p.add_argument("--run-dir", default="runs", help="where checkpoints are read and written")
    p.add_argument("--out", help="checkpoint path (default: <run-dir>/<stage>.pt)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--resolution", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tryon", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="render the procedural dataset")
    _common(p)
    p.add_argument("--out", default="data")
    p.add_argument("--n", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--val-fraction", type=float)

    for name, help_ in (("train-ae", "train the cloth auto-encoder"),
                        ("train-ac", "train the attribute classifier")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        _train_flags(p)

    p = sub.add_parser("train-vton", help="train the try-on generator (needs ae and ac checkpoints)")
    _common(p)
    _train_flags(p)
    p.add_argument("--ae", help="auto-encoder checkpoint (default: <run-dir>/ae.pt)")
    p.add_argument("--ac", help="classifier checkpoint (default: <run-dir>/ac.pt)")
    p.add_argument("--no-ac", action="store_true", help="ablation: drop the classifier loss terms")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--cloth-jitter", type=float, help="probability of showing the garment at other sizes (default 0.5)")

    p = sub.add_parser("eval", help="score checkpoints on a dataset split")
    _common(p)
    p.add_argument("--data", default="data")
    p.add_argument("--run-dir", default="runs")
    p.add_argument("--checkpoint", action="append", help="repeatable; default: vton.pt and vton_noac.pt if present")
    p.add_argument("--split", default="val")
    p.add_argument("--out", help="report path (default: report_<name>.json beside each checkpoint)")

    p = sub.add_parser("infer", help="run the try-on generator on one user/cloth pair")
    _common(p)
    p.add_argument("--checkpoint", default="runs/vton.pt")
    p.add_argument("--user", required=True, help="user silhouette PNG")
    p.add_argument("--cloth", required=True, help="cloth mask PNG")
    p.add_argument("--type", required=True, dest="cloth_type")
    p.add_argument("--chest", type=float, required=True)
    p.add_argument("--length", type=float, required=True)
    p.add_argument("--sleeve", type=float, required=True)
    p.add_argument("--height", type=float, required=True)
    p.add_argument("--weight", type=float, required=True)
    p.add_argument("--out", default="infer_out")
    return parser


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config, preset=args.preset)
    if args.seed is not None:
        cfg.seed = args.seed
    for stage in (cfg.ae, cfg.ac, cfg.vton):
        stage.seed = cfg.seed
        for flag in ("epochs", "batch_size", "lr", "resolution"):
            value = getattr(args, flag, None)
            if value is not None:
                setattr(stage, flag, value)
    cfg.validate()
    return cfg


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def cmd_gen_data(args) -> int:
    from tryon.synthgen import build_dataset

    cfg = _config(args)
    overrides = {"n": args.n, "resolution": args.resolution, "val_fraction": args.val_fraction}
    data_cfg = dataclasses.replace(cfg.data, **{k: v for k, v in overrides.items() if v is not None})
    data_cfg.validate()
    manifest = build_dataset(data_cfg, cfg.seed, resolve_output(args.out))
    _emit({"command": "gen-data", "out": str(manifest.root), "n": len(manifest.records),
           "manifest_sha256": manifest.digest()})
    return 0


def _save(ckpt, path: Path, command: str) -> int:
    ckpt.save(path)
    _emit({"command": command, "checkpoint": str(path), "epochs": ckpt.epochs,
           "final_loss": ckpt.history[-1]["loss"], "digest": ckpt.digest()})
    return 0


def cmd_train_ae(args) -> int:
    from tryon.cloth_ae import train_autoencoder

    cfg = _config(args)
    run_dir = resolve_output(args.run_dir)
    ckpt = train_autoencoder(resolve_output(args.data), cfg.ae)
    return _save(ckpt, resolve_output(args.out) if args.out else run_dir / CHECKPOINT_NAMES["ae"], "train-ae")


def cmd_train_ac(args) -> int:
    from tryon.attr_clf import train_classifier

    cfg = _config(args)
    run_dir = resolve_output(args.run_dir)
    ckpt = train_classifier(resolve_output(args.data), cfg.ac)
    return _save(ckpt, resolve_output(args.out) if args.out else run_dir / CHECKPOINT_NAMES["ac"], "train-ac")


def cmd_train_vton(args) -> int:
    from tryon.agvton import train_agvton

    cfg = _config(args)
    run_dir = resolve_output(args.run_dir)
    vcfg = cfg.vton
    vcfg.ae_checkpoint = str(resolve_output(args.ae) if args.ae else run_dir / CHECKPOINT_NAMES["ae"])
    vcfg.ac_checkpoint = str(resolve_output(args.ac) if args.ac else run_dir / CHECKPOINT_NAMES["ac"])
    for name in ("alpha", "beta", "gamma", "cloth_jitter"):
        if getattr(args, name) is not None:
            setattr(vcfg, name, getattr(args, name))
    if args.no_ac:
        vcfg.beta = vcfg.gamma = 0.0
    vcfg.validate()
    # refuse to start before doing any data loading if a prior stage is missing
    for stage, command in (("ae_checkpoint", "train-ae"), ("ac_checkpoint", "train-ac")):
        if not Path(getattr(vcfg, stage)).is_file():
            raise StageOrderError(command, f"missing {getattr(vcfg, stage)}; run `{command}` first")
    ckpt = train_agvton(resolve_output(args.data), vcfg)
    default = CHECKPOINT_NAMES["vton_noac" if args.no_ac else "vton"]
    return _save(ckpt, resolve_output(args.out) if args.out else run_dir / default, "train-vton")


def _label(ckpt) -> str:
    return "w/ AC" if ckpt.metadata.get("with_classifier") else "w/o AC"


def cmd_eval(args) -> int:
    from tryon.attr_clf import evaluate_classifier
    from tryon.checkpoint import Checkpoint
    from tryon.cloth_ae import evaluate_reconstruction
    from tryon.metrics import evaluate, format_table

    run_dir = resolve_output(args.run_dir)
    data = resolve_output(args.data)
    if args.checkpoint:
        paths = [resolve_output(p) for p in args.checkpoint]
    else:
        paths = [run_dir / CHECKPOINT_NAMES[k] for k in ("vton", "vton_noac") if (run_dir / CHECKPOINT_NAMES[k]).is_file()]
        if not paths:
            raise StageOrderError("train-vton", f"no vton checkpoint in {run_dir}; run `train-vton` first")
    reports = []
    for path in paths:
        ckpt = Checkpoint.load(path)
        out = Path(resolve_output(args.out)) if args.out and len(paths) == 1 else path.parent / f"report_{path.stem}.json"
        if ckpt.stage == "vton":
            report = evaluate(ckpt, data, args.split, label=_label(ckpt))
            report.extra.update(checkpoint=str(path), checkpoint_digest=ckpt.digest(), seed=ckpt.seed,
                                config=ckpt.config)
            report.save(out)
            reports.append(report)
            _emit({"command": "eval", "checkpoint": str(path), "report": str(out), "f1": report.f1,
                   "iou": report.iou, "avg_length_error_px": report.avg_length_error_px})
        else:
            result = (evaluate_reconstruction if ckpt.stage == "ae" else evaluate_classifier)(ckpt, data, args.split)
            result.update(checkpoint=str(path), checkpoint_digest=ckpt.digest(), seed=ckpt.seed, schema_version=1)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
            _emit({"command": "eval", "checkpoint": str(path), "report": str(out),
                   **{k: v for k, v in result.items() if k not in ("confusion", "checkpoint")}})
    if len(reports) >= 2:
        print(format_table(reports))
    return 0


def cmd_infer(args) -> int:
    import numpy as np

    from tryon.agvton import estimate_attributes, load_vton, synthesize
    from tryon.config import CLOTH_TYPE_NAMES, SIZE_NAMES
    from tryon.synthgen import ClothAttributes, ClothType, HumanAttributes, read_mask, write_mask
    import torch

    model = load_vton(resolve_output(args.checkpoint))
    cloth_attrs = ClothAttributes(ClothType.parse(args.cloth_type), args.chest, args.length, args.sleeve)
    human = HumanAttributes(args.height, args.weight)
    cloth_attrs.validate()
    human.validate(model.scaler.height_range, model.scaler.weight_range)
    result = synthesize(model, read_mask(args.user), read_mask(args.cloth), cloth_attrs, human)
    out = resolve_output(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_mask(out / "body.png", result.body)
    write_mask(out / "cloth.png", result.cloth)
    probs, sizes = estimate_attributes(model, torch.from_numpy(result.stack()[None].astype(np.float32)),
                                       torch.tensor([[human.height, human.weight]]))
    record = {
        "input": {"cloth": cloth_attrs.to_json(), "human": human.to_json()},
        "estimated": {
            "cloth_type": CLOTH_TYPE_NAMES[int(probs[0].argmax())],
            "type_probabilities": dict(zip(CLOTH_TYPE_NAMES, probs[0].tolist())),
            **dict(zip(SIZE_NAMES, sizes[0].tolist())),
        },
        "files": {"body": str(out / "body.png"), "cloth": str(out / "cloth.png")},
    }
    (out / "attributes.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    _emit(record)
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-ae": cmd_train_ae,
    "train-ac": cmd_train_ac,
    "train-vton": cmd_train_vton,
    "eval": cmd_eval,
    "infer": cmd_infer,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except TryOnError as exc:
        err = {"error": exc.kind, "exit_code": exc.exit_code, "command": args.command, "message": str(exc)}
        if isinstance(exc, StageOrderError):
            err["missing_stage"] = exc.missing_stage
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
