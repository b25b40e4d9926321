import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Tuple

import numpy as np
import torch
from scipy.stats import entropy

from pg2.core.errors import MetricError
from pg2.metrics.oracles import ClassifierOracle
from pg2.metrics.ssim import apply_mask

logger = logging.getLogger(__name__)

ORACLE_BATCH = 64


def _predict(images: torch.Tensor, oracle: ClassifierOracle) -> np.ndarray:
    chunks = [images[i : i + ORACLE_BATCH] for i in range(0, images.shape[0], ORACLE_BATCH)]
    if getattr(oracle, "thread_safe", False) and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=4) as pool:
            parts = list(pool.map(oracle, chunks))
    else:
        parts = [oracle(chunk) for chunk in chunks]
    return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts], axis=0)


def check_probabilities(preds: np.ndarray, count: int) -> None:
    if preds.ndim != 2 or preds.shape[0] != count:
        raise MetricError(f"oracle returned {preds.shape}, expected ({count}, C)")
    if np.any(preds < 0) or not np.all(np.isfinite(preds)):
        raise MetricError("oracle returned negative or non-finite probabilities")
    sums = preds.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise MetricError(f"oracle probabilities sum to {sums.min():.8f}..{sums.max():.8f}, not 1")


def score_from_probabilities(preds: np.ndarray, splits: int = 10) -> Tuple[float, float]:
    """exp(mean KL(p(y|x) || p(y))) per split; mean and std across splits"""
    if preds.shape[0] == 0:
        raise MetricError("inception score of an empty batch")
    if not 1 <= splits <= preds.shape[0]:
        raise MetricError(f"splits must be in [1, {preds.shape[0]}], got {splits}")
    scores = []
    for part in np.array_split(preds, splits):
        marginal = part.mean(axis=0)
        kl = [entropy(p, marginal) for p in part]
        scores.append(np.exp(np.mean(kl)))
    return float(np.mean(scores)), float(np.std(scores))


def inception_score(images: torch.Tensor, oracle: ClassifierOracle, splits: int = 10) -> Tuple[float, float]:
    if images.shape[0] == 0:
        raise MetricError("inception score of an empty batch")
    if not 1 <= splits <= images.shape[0]:
        raise MetricError(f"splits must be in [1, {images.shape[0]}], got {splits}")
    preds = _predict(images, oracle)
    check_probabilities(preds, images.shape[0])
    return score_from_probabilities(preds, splits)


def mask_is(images: torch.Tensor, masks: torch.Tensor, oracle: ClassifierOracle, splits: int = 10) -> Tuple[float, float]:
    """Inception score of the images with background set to black"""
    if images.shape[0] != masks.shape[0]:
        raise MetricError(f"{images.shape[0]} images but {masks.shape[0]} masks")
    masked = apply_mask(images, masks).to(torch.float32)
    return inception_score(masked, oracle, splits)
