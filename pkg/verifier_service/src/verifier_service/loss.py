"""Composite training objective: path loss plus weighted step loss.

    total = path_bce + alpha * step_bce

Both terms are binary cross-entropy with mean reduction over their own
label counts in the batch, which keeps alpha meaningful independent of
batch size.  Unlabeled steps are masked out and contribute exactly zero
to the step term; a batch with no labeled steps has step loss 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch.nn import functional as F


@dataclass
class LossParts:
    total: torch.Tensor
    path_loss: torch.Tensor
    step_loss: torch.Tensor
    n_labeled_steps: int


def composite_loss(
    path_logits: torch.Tensor,
    path_labels: torch.Tensor,
    token_logits: torch.Tensor,
    step_positions: list[list[int | None]],
    step_labels: list[list[float | None]],
    alpha: float,
) -> LossParts:
    """total = path_bce + alpha * step_bce over one batch.

    `step_positions[i][j]` is the token index where example i's j-th step
    is read, or None when the step was truncated away; `step_labels[i][j]`
    is 1.0/0.0, or None for unlabeled steps.  Both None cases are masked.
    """
    if path_logits.shape != path_labels.shape:
        raise ValueError("path logits and labels must align")
    if len(step_positions) != path_logits.shape[0] or len(step_labels) != len(step_positions):
        raise ValueError("step annotations must align with the batch")

    path_loss = F.binary_cross_entropy_with_logits(path_logits, path_labels)

    picked_logits = []
    picked_labels = []
    for i, (positions, labels) in enumerate(zip(step_positions, step_labels)):
        if len(positions) != len(labels):
            raise ValueError(f"example {i}: positions and labels differ in length")
        for position, label in zip(positions, labels):
            if position is None or label is None:
                continue
            picked_logits.append(token_logits[i, position])
            picked_labels.append(label)

    if picked_logits:
        step_logits = torch.stack(picked_logits)
        step_targets = torch.tensor(
            picked_labels, dtype=step_logits.dtype, device=step_logits.device
        )
        step_loss = F.binary_cross_entropy_with_logits(step_logits, step_targets)
    else:
        step_loss = torch.zeros((), dtype=path_loss.dtype, device=path_loss.device)

    total = path_loss + alpha * step_loss
    return LossParts(
        total=total,
        path_loss=path_loss,
        step_loss=step_loss,
        n_labeled_steps=len(picked_logits),
    )
