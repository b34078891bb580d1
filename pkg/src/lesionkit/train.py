"""Training, evaluation, and ablation orchestration for the interactive model.

Training mimics the interactive protocol: each sample gets a foreground click,
the model predicts, a corrective click is drawn from the error maps, and the
loop repeats for a per-sample random number of iterations. Gradients stop
between iterations (each iteration backpropagates through its own forward
only); the previous mask is fed back through the second input channel.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .clicks import PREDICTION_THRESHOLD, compute_error_maps, initial_click, run_trajectory, sample_click
from .data.types import Case, DatasetSplit, encode_report
from .errors import AlignmentError, NumericError, ParameterError, SchemaError
from .losses import attr_loss, dice_loss, iou_calibration_loss, lambda_schedule, total_loss
from .metrics import MetricsTable, dsc, hd95
from .model import InteractiveLesionNet, ModelConfig, load_checkpoint, save_checkpoint


@dataclass
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    epochs: int = 20
    batch_size: int = 2
    lr: float = 1e-3
    weight_decay: float = 1e-4
    schedule: str = "cosine"  # "cosine" | "constant"
    clicks_min: int = 1
    clicks_max: int = 5
    lambda_attr: float = 1.0
    lambda_warmup_epochs: int = 0
    iou_weight: float = 1.0
    seed: int = 0
    val_clicks: int = 3
    val_every: int = 1
    val_max_cases: int | None = None
    out_dir: str = "runs/default"

    def __post_init__(self) -> None:
        if isinstance(self.model, dict):
            self.model = ModelConfig.from_dict(self.model)
        if self.epochs < 1:
            raise SchemaError("epochs must be >= 1")
        if self.lr <= 0:
            raise SchemaError("learning rate must be positive")
        if not (1 <= self.clicks_min <= self.clicks_max <= 5):
            raise SchemaError("clicks range must satisfy 1 <= min <= max <= 5")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.as_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainResult:
    best_checkpoint: Path
    last_checkpoint: Path
    log_path: Path
    history: list[dict]
    best_val_dsc: float


def _select(cases: dict[str, Case], ids: list[str]) -> list[Case]:
    missing = [i for i in ids if i not in cases]
    if missing:
        raise AlignmentError(f"split references unknown case ids: {missing[:5]}")
    return [cases[i] for i in ids]


def _rollout_losses(
    model: InteractiveLesionNet,
    case: Case,
    n_clicks: int,
    seed: int,
    lambda_attr: float,
    iou_weight: float,
    scale: float,
) -> dict[str, float]:
    """Backpropagate each click iteration's loss immediately; returns sums."""
    volume = torch.as_tensor(case.volume.data, dtype=model.dtype)
    gt = torch.as_tensor((case.mask.data > 0).astype(np.float32), dtype=model.dtype)
    onehot = torch.as_tensor(encode_report(case.report), dtype=model.dtype)

    clicks = [initial_click(case.mask.data, seed)]
    prev_mask: torch.Tensor | None = None
    totals = {"seg": 0.0, "attr": 0.0, "iou": 0.0, "total": 0.0, "iters": 0}
    for it in range(n_clicks):
        out = model.forward(volume, clicks, prev_mask=prev_mask, seed=seed + it)
        probs = torch.sigmoid(out.mask_logits)
        seg = dice_loss(probs, gt)
        attr = attr_loss(out.attr_logits, onehot)
        iou = iou_calibration_loss(out.iou_pred, probs, gt)
        breakdown = total_loss(seg, attr, iou, lambda_attr=lambda_attr, iou_weight=iou_weight)
        if not torch.isfinite(breakdown.total):
            raise NumericError(
                f"non-finite loss on case {case.id} at click {it + 1}: {breakdown.detached()}"
            )
        (breakdown.total * (scale / n_clicks)).backward()

        for key in ("seg", "attr", "iou", "total"):
            totals[key] += float(getattr(breakdown, key).detach())
        totals["iters"] += 1

        if it + 1 >= n_clicks:
            break
        with torch.no_grad():
            pred_binary = (probs >= PREDICTION_THRESHOLD).cpu().numpy()
        maps = compute_error_maps(pred_binary, case.mask.data)
        nxt = sample_click(maps, seed + 1000 * (it + 1))
        if nxt is None:
            break
        clicks.append(nxt)
        prev_mask = probs.detach()
    return totals


def evaluate_model(
    model: InteractiveLesionNet,
    cases: list[Case],
    n_clicks: int,
    seed: int = 0,
) -> MetricsTable:
    """Run the interactive trajectory on every case; per-click and final metrics.

    When a case converges early its last DSC carries forward, so per-click
    means stay comparable across cases.
    """
    if not cases:
        raise AlignmentError("cannot evaluate an empty split")
    table = MetricsTable()
    per_click: list[list[float]] = [[] for _ in range(n_clicks)]
    for idx, case in enumerate(cases):
        traj = run_trajectory(model, case, n_clicks=n_clicks, seed=seed + 7919 * idx)
        step_dscs = [s.dsc for s in traj.per_step]
        for i in range(n_clicks):
            per_click[i].append(step_dscs[min(i, len(step_dscs) - 1)])
        final_binary = traj.final_mask_prob >= PREDICTION_THRESHOLD
        table.add_case(
            case.id,
            dsc(final_binary, case.mask.data),
            hd95(final_binary, case.mask.data, case.volume.spacing),
            traj.final_report,
            case.report,
        )
    table.per_click_dsc = [float(np.mean(v)) for v in per_click]
    return table


def train(config: TrainConfig, cases: list[Case], split: DatasetSplit) -> TrainResult:
    """Train on split.train, select by validation DSC, log per-epoch JSON lines."""
    if not split.train:
        raise AlignmentError("training split is empty")
    by_id = {c.id: c for c in cases}
    train_cases = _select(by_id, split.train)
    val_cases = _select(by_id, split.val) if split.val else []

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "train_config.json").write_text(json.dumps(config.as_dict(), indent=2))

    torch.manual_seed(config.seed)
    model = InteractiveLesionNet(config.model)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.lr, weight_decay=config.weight_decay
    )

    rng = np.random.default_rng(config.seed)
    best_val = -1.0
    best_path = out_dir / "best.ckpt"
    last_path = out_dir / "last.ckpt"
    log_path = out_dir / "train_log.jsonl"
    history: list[dict] = []

    with open(log_path, "w") as log_file:
        for epoch in range(config.epochs):
            t_start = time.time()
            if config.schedule == "cosine":
                lr = config.lr * 0.5 * (1.0 + math.cos(math.pi * epoch / max(1, config.epochs)))
            else:
                lr = config.lr
            for group in optimizer.param_groups:
                group["lr"] = lr
            lam = lambda_schedule(epoch, config.lambda_warmup_epochs, config.lambda_attr)

            model.train()
            order = rng.permutation(len(train_cases))
            epoch_totals = {"seg": 0.0, "attr": 0.0, "iou": 0.0, "total": 0.0, "iters": 0}
            for start in range(0, len(order), config.batch_size):
                batch_idx = order[start : start + config.batch_size]
                optimizer.zero_grad(set_to_none=True)
                for j in batch_idx:
                    case = train_cases[int(j)]
                    n_clicks = int(rng.integers(config.clicks_min, config.clicks_max + 1))
                    case_seed = int(rng.integers(2**31 - 1))
                    try:
                        totals = _rollout_losses(
                            model, case, n_clicks, case_seed, lam, config.iou_weight,
                            scale=1.0 / len(batch_idx),
                        )
                    except NumericError:
                        save_checkpoint(out_dir / "diagnostic_nan.ckpt", model)
                        raise
                    for key in epoch_totals:
                        epoch_totals[key] += totals[key]
                torch.nn.utils.clip_grad_norm_(model.parameters(), max_norm=1.0)
                optimizer.step()

            iters = max(epoch_totals.pop("iters"), 1)
            record = {
                "epoch": epoch + 1,
                "lr": lr,
                "lambda": lam,
                **{f"train_{k}": v / iters for k, v in epoch_totals.items()},
                "seconds": round(time.time() - t_start, 2),
            }

            if val_cases and ((epoch + 1) % config.val_every == 0 or epoch + 1 == config.epochs):
                subset = val_cases[: config.val_max_cases] if config.val_max_cases else val_cases
                val_table = evaluate_model(
                    model, subset, n_clicks=config.val_clicks, seed=config.seed
                )
                agg = val_table.aggregate()
                record["val_dsc"] = agg["dsc"]
                record["val_attr_acc"] = agg["attr_acc_avg"]
                if agg["dsc"] > best_val:
                    best_val = agg["dsc"]
                    save_checkpoint(best_path, model)

            history.append(record)
            log_file.write(json.dumps(record) + "\n")
            log_file.flush()

    save_checkpoint(last_path, model)
    if best_val < 0:  # no validation split: best = last
        save_checkpoint(best_path, model)
    return TrainResult(
        best_checkpoint=best_path,
        last_checkpoint=last_path,
        log_path=log_path,
        history=history,
        best_val_dsc=best_val,
    )


def evaluate(
    checkpoint: str | Path,
    cases: list[Case],
    split_ids: list[str],
    n_clicks: int = 3,
    seed: int = 0,
) -> MetricsTable:
    """Load a checkpoint and evaluate it over the given split ids."""
    model = load_checkpoint(checkpoint)
    by_id = {c.id: c for c in cases}
    return evaluate_model(model, _select(by_id, split_ids), n_clicks=n_clicks, seed=seed)


ABLATION_VARIANTS = {
    "vanilla": {"use_refinement": False, "use_synergy": False},
    "point_refinement": {"use_refinement": True, "use_synergy": False},
    "feature_synergy": {"use_refinement": False, "use_synergy": True},
    "full": {"use_refinement": True, "use_synergy": True},
}


def run_ablation(
    base: TrainConfig,
    cases: list[Case],
    split: DatasetSplit,
    variants: list[str],
    seeds: list[int],
    n_clicks_eval: int = 3,
) -> list[dict]:
    """Train/evaluate each (variant, seed); returns per-variant mean +/- sd rows."""
    if not variants or not seeds:
        raise ParameterError("need at least one variant and one seed")
    unknown = [v for v in variants if v not in ABLATION_VARIANTS]
    if unknown:
        raise ParameterError(f"unknown ablation variants: {unknown}; known: {list(ABLATION_VARIANTS)}")

    rows = []
    for variant in variants:
        toggles = ABLATION_VARIANTS[variant]
        dscs, attr_accs, hd95s = [], [], []
        for seed in seeds:
            model_cfg = ModelConfig.from_dict({**base.model.as_dict(), **toggles})
            cfg = TrainConfig.from_dict(
                {
                    **base.as_dict(),
                    "model": model_cfg.as_dict(),
                    "seed": int(seed),
                    "out_dir": str(Path(base.out_dir) / f"{variant}_seed{seed}"),
                }
            )
            result = train(cfg, cases, split)
            table = evaluate(
                result.best_checkpoint, cases, split.test, n_clicks=n_clicks_eval, seed=seed
            )
            agg = table.aggregate()
            dscs.append(agg["dsc"])
            attr_accs.append(agg["attr_acc_avg"])
            hd95s.append(agg["hd95_mm"])
        rows.append(
            {
                "variant": variant,
                "use_refinement": toggles["use_refinement"],
                "use_synergy": toggles["use_synergy"],
                "n_seeds": len(seeds),
                "dsc_mean": float(np.mean(dscs)),
                "dsc_sd": float(np.std(dscs)),
                "hd95_mean": float(np.nanmean(hd95s)),
                "attr_acc_mean": float(np.mean(attr_accs)),
                "attr_acc_sd": float(np.std(attr_accs)),
            }
        )
    return rows


def ablation_rows_to_csv(rows: list[dict], path: str | Path) -> Path:
    import csv

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return path
