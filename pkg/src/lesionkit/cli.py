"""Command-line entry point: synth, preprocess, train, eval, ablate, simulate, serve.

Exit codes: 0 success, 1 domain error, 2 usage error. Config overrides are
dotted key=value pairs (e.g. model.use_synergy=false) applied on top of the
config file; unknown keys are rejected. Every run writes a resolved-config
snapshot next to its outputs. Output is plain text (NO_COLOR-compatible).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import (
    FAMILIES,
    DatasetSplit,
    crop_roi,
    generate_corpus,
    load_manifest_cases,
    normalize_intensity,
    save_case,
    split_dataset,
    write_manifest,
)
from .data.types import Case, Volume
from .errors import LesionKitError, NotFoundError, ParameterError, SchemaError
from .model import load_checkpoint
from .train import (
    TrainConfig,
    ablation_rows_to_csv,
    evaluate,
    run_ablation,
    train,
)


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _apply_overrides(config: dict, overrides: list[str]) -> dict:
    out = json.loads(json.dumps(config))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise SchemaError(f"override {item!r} must look like key=value")
        key, raw = item.split("=", 1)
        path = key.split(".")
        node = out
        for seg in path[:-1]:
            if not isinstance(node, dict) or seg not in node:
                raise SchemaError(f"unknown config key {key!r}")
            node = node[seg]
        if not isinstance(node, dict) or path[-1] not in node:
            raise SchemaError(f"unknown config key {key!r}")
        node[path[-1]] = _parse_value(raw)
    return out


def _write_snapshot(out_dir: Path, payload: dict) -> None:
    clean = {k: v for k, v in payload.items() if not callable(v)}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "resolved_config.json").write_text(json.dumps(clean, indent=2))


def _load_split(path: str) -> DatasetSplit:
    p = Path(path)
    if not p.exists():
        raise NotFoundError(f"split file not found: {p}")
    return DatasetSplit.from_dict(json.loads(p.read_text()))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    out_dir = Path(args.out)
    families = tuple(args.families.split(",")) if args.families else FAMILIES
    unknown = [f for f in families if f not in FAMILIES]
    if unknown:
        raise ParameterError(f"unknown families {unknown}; known: {list(FAMILIES)}")
    shape = (args.shape, args.shape, args.shape)
    cases = generate_corpus(args.n, seed=args.seed, families=families, volume_shape=shape)
    entries = [save_case(c, out_dir, fmt=args.format) for c in cases]
    write_manifest(out_dir / "manifest.json", entries)

    zero_shot = {args.zero_shot} if args.zero_shot else set()
    split = split_dataset(cases, ratios=(0.6, 0.2, 0.2), zero_shot_types=zero_shot, seed=args.seed)
    (out_dir / "split.json").write_text(json.dumps(split.as_dict(), indent=2))
    _write_snapshot(out_dir, {"command": "synth", **vars(args)})
    print(f"wrote {len(cases)} cases + manifest.json + split.json under {out_dir}")
    return 0


def _cmd_preprocess(args) -> int:
    cases = load_manifest_cases(args.manifest)
    out_dir = Path(args.out)
    lo, hi = args.window
    entries = []
    for case in cases:
        cropped = crop_roi(case, args.roi)
        normalized = Case(
            id=cropped.id,
            volume=normalize_intensity(Volume(cropped.volume.data, cropped.volume.spacing), lo, hi),
            mask=cropped.mask,
            report=cropped.report,
            lesion_type=cropped.lesion_type,
        )
        entries.append(save_case(normalized, out_dir, fmt=args.format))
    write_manifest(out_dir / "manifest.json", entries)
    _write_snapshot(out_dir, {"command": "preprocess", **vars(args)})
    print(f"preprocessed {len(entries)} cases -> {out_dir}")
    return 0


def _build_train_config(args) -> TrainConfig:
    base = TrainConfig().as_dict()
    if args.config:
        p = Path(args.config)
        if not p.exists():
            raise NotFoundError(f"config file not found: {p}")
        loaded = json.loads(p.read_text())
        base = _apply_overrides(base, [])  # fresh copy
        for key, value in loaded.items():
            if key not in base:
                raise SchemaError(f"unknown config key {key!r} in {p}")
            base[key] = value
    merged = _apply_overrides(base, args.overrides)
    if args.out:
        merged["out_dir"] = args.out
    if args.seed is not None:
        merged["seed"] = args.seed
    return TrainConfig.from_dict(merged)


def _cmd_train(args) -> int:
    config = _build_train_config(args)
    cases = load_manifest_cases(args.data)
    split = _load_split(args.split)
    _write_snapshot(Path(config.out_dir), {"command": "train", **config.as_dict()})
    result = train(config, cases, split)
    print(f"best checkpoint: {result.best_checkpoint} (val DSC {result.best_val_dsc:.4f})")
    print(f"training log:    {result.log_path}")
    return 0


def _cmd_eval(args) -> int:
    cases = load_manifest_cases(args.data)
    split = _load_split(args.split)
    ids = getattr(split, args.split_name)
    table = evaluate(args.checkpoint, cases, ids, n_clicks=args.clicks, seed=args.seed)
    out_dir = Path(args.out)
    table.to_csv(out_dir / f"metrics_{args.split_name}.csv")
    table.to_json(out_dir / f"metrics_{args.split_name}.json")
    _write_snapshot(out_dir, {"command": "eval", **vars(args)})
    agg = table.aggregate()
    print(f"split={args.split_name} n={int(agg['n_cases'])} clicks={args.clicks}")
    print(f"  mean DSC      {agg['dsc']:.4f}")
    print(f"  mean HD95(mm) {agg['hd95_mm']:.4f}  (undefined on {int(agg['hd95_undefined'])})")
    print(f"  attr accuracy {agg['attr_acc_avg']:.4f}")
    print("  per-click DSC " + " ".join(f"{v:.4f}" for v in table.per_click_dsc))
    return 0


def _cmd_ablate(args) -> int:
    config = _build_train_config(args)
    cases = load_manifest_cases(args.data)
    split = _load_split(args.split)
    variants = args.variants.split(",")
    seeds = [int(s) for s in args.seeds.split(",")]
    _write_snapshot(Path(config.out_dir), {"command": "ablate", "variants": variants,
                                           "seeds": seeds, **config.as_dict()})
    rows = run_ablation(config, cases, split, variants, seeds, n_clicks_eval=args.clicks)
    out_csv = ablation_rows_to_csv(rows, Path(config.out_dir) / "ablation.csv")
    header = f"{'variant':<18} {'DSC':>14} {'HD95':>8} {'attr acc':>14}"
    print(header)
    for r in rows:
        print(
            f"{r['variant']:<18} {r['dsc_mean']:.4f}±{r['dsc_sd']:.4f} "
            f"{r['hd95_mean']:8.3f} {r['attr_acc_mean']:.4f}±{r['attr_acc_sd']:.4f}"
        )
    print(f"table: {out_csv}")
    return 0


def _cmd_simulate(args) -> int:
    from .clicks import run_trajectory

    cases = load_manifest_cases(args.data)
    by_id = {c.id: c for c in cases}
    if args.case not in by_id:
        raise NotFoundError(f"case {args.case!r} not in manifest")
    model = load_checkpoint(args.checkpoint)
    traj = run_trajectory(model, by_id[args.case], n_clicks=args.clicks, seed=args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj.dump_jsonl(out_dir / f"trajectory_{args.case}.jsonl")
    _write_snapshot(out_dir, {"command": "simulate", **vars(args)})
    print(f"{'click':>5} {'label':>9} {'dsc':>8} {'attr_acc':>9} {'iou_pred':>9}")
    for i, (click, step) in enumerate(zip(traj.clicks, traj.per_step), start=1):
        print(f"{i:>5} {click.label:>9} {step.dsc:8.4f} {step.attr_acc:9.2f} {step.iou_pred:9.4f}")
    if traj.converged:
        print("converged: prediction matches ground truth, no further clicks")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import SessionService, create_app, served_cases_from

    model = load_checkpoint(args.checkpoint)
    served = []
    if args.data:
        served = served_cases_from(load_manifest_cases(args.data))
    service = SessionService(model, served, idle_ttl_seconds=args.ttl)
    app = create_app(service)
    print(f"serving on http://{args.host}:{args.port}/v1 with {len(served)} cases")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lesionkit",
        description="Interactive 3D lesion segmentation with structured reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic phantom corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shape", type=int, default=48)
    p.add_argument("--families", default="", help="comma list; default all four")
    p.add_argument("--zero-shot", default="", help="family held out as zero-shot")
    p.add_argument("--format", default="nii.gz", choices=["nii.gz", "nii", "raw"])
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("preprocess", help="crop to lesion ROI and normalize intensities")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--roi", type=int, default=48)
    p.add_argument("--window", type=float, nargs=2, default=(0.0, 1.0),
                   metavar=("LO", "HI"), help="intensity window; use -200 300 for CT")
    p.add_argument("--format", default="nii.gz", choices=["nii.gz", "nii", "raw"])
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("train", help="train the interactive model")
    p.add_argument("--data", required=True, help="dataset manifest JSON")
    p.add_argument("--split", required=True, help="split JSON")
    p.add_argument("--config", default="", help="TrainConfig JSON")
    p.add_argument("--out", default="", help="output directory (overrides config)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("overrides", nargs="*", help="dotted key=value overrides")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--split-name", default="test",
                   choices=["train", "val", "test", "zero_shot"])
    p.add_argument("--clicks", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="eval_out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="train and compare ablation variants")
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--config", default="")
    p.add_argument("--out", default="")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--variants", default="vanilla,full")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--clicks", type=int, default=3)
    p.add_argument("overrides", nargs="*")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("simulate", help="run a click trajectory on one case")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--clicks", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="simulate_out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="serve the interactive session API")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", default="", help="manifest of cases to serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--ttl", type=float, default=None, help="idle session TTL seconds")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LesionKitError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
