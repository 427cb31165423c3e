"""Training loop with step-loss weighting and alpha grid selection.

Validation splits by question, never by path, so no question leaks paths
into both sides.  When a grid is given, one model is trained per alpha
and the winner is the one whose weighted voting picks the most correct
answers on the held-out questions (ties go to the smaller alpha).
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .data import TrainingExample
from .loss import composite_loss
from .model import ModelConfig, ScorerModel, collate, save_model

logger = logging.getLogger(__name__)


class TrainingDataError(ValueError):
    """The record set cannot supervise a classifier (a class is empty)."""


@dataclass
class TrainerConfig:
    alpha: float = 0.1
    learning_rate: float = 1e-5
    batch_size: int = 128
    epochs: int = 3
    alpha_grid: list[float] | None = None
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.alpha_grid is not None and any(a < 0 for a in self.alpha_grid):
            raise ValueError("alpha grid values must be >= 0")


@dataclass
class EpochMetrics:
    epoch: int
    path_loss: float
    step_loss: float
    val_accuracy: float


@dataclass
class TrainingResult:
    alpha: float
    epochs: list[EpochMetrics] = field(default_factory=list)

    @property
    def final_val_accuracy(self) -> float:
        return self.epochs[-1].val_accuracy if self.epochs else 0.0


def split_by_question(
    examples: list[TrainingExample], val_fraction: float, seed: int
) -> tuple[list[TrainingExample], list[TrainingExample]]:
    question_ids = sorted({e.question_id for e in examples})
    rng = random.Random(seed)
    rng.shuffle(question_ids)
    n_val = max(1, int(len(question_ids) * val_fraction)) if len(question_ids) > 1 else 0
    val_ids = set(question_ids[:n_val])
    train = [e for e in examples if e.question_id not in val_ids]
    val = [e for e in examples if e.question_id in val_ids]
    return train, val


def _check_classes(examples: list[TrainingExample]) -> None:
    labels = {e.path_label for e in examples}
    if 1.0 not in labels:
        raise TrainingDataError("no positive paths in the training data")
    if 0.0 not in labels:
        raise TrainingDataError("no negative paths in the training data")


def _batches(examples: list[TrainingExample], batch_size: int, rng: random.Random):
    order = list(range(len(examples)))
    rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        yield [examples[i] for i in order[start : start + batch_size]]


def _prepare(model: ScorerModel, batch: list[TrainingExample]):
    encoded = [
        model.encode(e.question_text, e.path_text, [s.span for s in e.steps]) for e in batch
    ]
    token_ids = collate(encoded)
    path_labels = torch.tensor([e.path_label for e in batch], dtype=torch.float32)
    step_positions = [e.step_positions for e in encoded]
    step_labels = [[s.label for s in e.steps] for e in batch]
    return token_ids, path_labels, step_positions, step_labels


def voting_accuracy(model: ScorerModel, examples: list[TrainingExample]) -> float:
    """Weighted-vote accuracy over questions whose gold answer is known.

    The gold answer of a question is the final answer of any of its
    positively labeled paths; questions with no positive path are skipped
    (their gold is not recoverable from the records).
    """
    by_question: dict[str, list[TrainingExample]] = {}
    for example in examples:
        by_question.setdefault(example.question_id, []).append(example)
    correct = 0
    total = 0
    model.eval()
    with torch.no_grad():
        for records in by_question.values():
            gold = next((r.final_answer for r in records if r.path_label == 1.0), None)
            if gold is None:
                continue
            weights: dict[str, float] = {}
            for record in records:
                if record.final_answer is None:
                    continue
                encoded = model.encode(record.question_text, record.path_text, [])
                token_ids = collate([encoded])
                path_logits, _ = model(token_ids)
                probability = torch.sigmoid(path_logits[0]).item()
                weights[record.final_answer] = weights.get(record.final_answer, 0.0) + probability
            if not weights:
                continue
            chosen = max(sorted(weights), key=lambda ans: weights[ans])
            total += 1
            correct += int(chosen == gold)
    model.train()
    return correct / total if total else 0.0


def _train_single(
    examples_train: list[TrainingExample],
    examples_val: list[TrainingExample],
    alpha: float,
    config: TrainerConfig,
    model_config: ModelConfig,
) -> tuple[ScorerModel, TrainingResult]:
    torch.manual_seed(config.seed)
    model = ScorerModel(model_config)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    rng = random.Random(config.seed)
    result = TrainingResult(alpha=alpha)
    model.train()
    for epoch in range(config.epochs):
        path_losses: list[float] = []
        step_losses: list[float] = []
        for batch in _batches(examples_train, config.batch_size, rng):
            token_ids, path_labels, step_positions, step_labels = _prepare(model, batch)
            optimizer.zero_grad()
            path_logits, token_logits = model(token_ids)
            parts = composite_loss(
                path_logits, path_labels, token_logits, step_positions, step_labels, alpha
            )
            parts.total.backward()
            optimizer.step()
            path_losses.append(parts.path_loss.item())
            step_losses.append(parts.step_loss.item())
        metrics = EpochMetrics(
            epoch=epoch,
            path_loss=sum(path_losses) / max(1, len(path_losses)),
            step_loss=sum(step_losses) / max(1, len(step_losses)),
            val_accuracy=voting_accuracy(model, examples_val) if examples_val else 0.0,
        )
        result.epochs.append(metrics)
        logger.info(
            "alpha=%.2f epoch=%d path_loss=%.4f step_loss=%.4f val_acc=%.4f",
            alpha, epoch, metrics.path_loss, metrics.step_loss, metrics.val_accuracy,
        )
    return model, result


def train(
    examples: list[TrainingExample],
    config: TrainerConfig,
    model_config: ModelConfig = ModelConfig(),
    out_dir: str | Path | None = None,
) -> tuple[ScorerModel, dict]:
    """Train (optionally over an alpha grid) and persist the best model."""
    if not examples:
        raise TrainingDataError("no training examples")
    _check_classes(examples)
    train_split, val_split = split_by_question(examples, config.val_fraction, config.seed)
    if not train_split:
        train_split, val_split = examples, []

    grid = config.alpha_grid if config.alpha_grid else [config.alpha]
    runs: list[tuple[ScorerModel, TrainingResult]] = []
    for alpha in grid:
        runs.append(_train_single(train_split, val_split, alpha, config, model_config))

    best_model, best_result = max(
        runs, key=lambda mr: (mr[1].final_val_accuracy, -mr[1].alpha)
    )
    metrics = {
        "alpha": best_result.alpha,
        "alpha_grid": grid,
        "epochs": [
            {
                "epoch": m.epoch,
                "path_loss": m.path_loss,
                "step_loss": m.step_loss,
                "val_accuracy": m.val_accuracy,
            }
            for m in best_result.epochs
        ],
        "grid_val_accuracy": {
            str(result.alpha): result.final_val_accuracy for _, result in runs
        },
        "n_train": len(train_split),
        "n_val": len(val_split),
    }
    if out_dir is not None:
        save_model(best_model, out_dir, extra={"alpha": best_result.alpha})
        (Path(out_dir) / "metrics.json").write_text(
            json.dumps(metrics, indent=2), encoding="utf-8"
        )
    best_model.eval()
    return best_model, metrics
