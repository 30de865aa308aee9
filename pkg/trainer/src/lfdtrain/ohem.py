"""Online hard example mining over binary cross entropy, torch edition.

Pixels whose true-class probability already exceeds the keep threshold
contribute nothing; the sum of hard-pixel BCE is averaged over all pixels,
so the loss decays as the easy fraction grows."""

from __future__ import annotations

import torch
import torch.nn.functional as F

OHEM_LAMBDA = 0.7
PROB_FLOOR = 1e-7


def ohem_bce(logits: torch.Tensor, target: torch.Tensor, lam: float = OHEM_LAMBDA) -> torch.Tensor:
    """logits (N,2,H,W), target bool/long (N,H,W) with 1 = road."""
    prob_road = F.softmax(logits, dim=1)[:, 1]
    t = target.to(prob_road.dtype)
    p_true = prob_road * t + (1.0 - prob_road) * (1.0 - t)
    p_true = p_true.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
    hard = (p_true < lam).to(p_true.dtype)
    return (-torch.log(p_true) * hard).sum() / p_true.numel()
