"""Classifier oracles for the Inception Score.

An oracle maps a (B, 3, H, W) batch in [-1, 1] to a (B, C) array of class
probabilities. thread_safe declares whether batches may be scored
concurrently.
"""
import logging
from typing import Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np
import torch
import torch.nn.functional as F

from pg2.core.errors import MetricError

logger = logging.getLogger(__name__)


@runtime_checkable
class ClassifierOracle(Protocol):
    num_classes: int
    thread_safe: bool

    def __call__(self, images: torch.Tensor) -> np.ndarray: ...


class UniformOracle:
    thread_safe = True

    def __init__(self, num_classes: int = 10):
        self.num_classes = num_classes

    def __call__(self, images: torch.Tensor) -> np.ndarray:
        return np.full((images.shape[0], self.num_classes), 1.0 / self.num_classes)


class ConstantOracle:
    """Same distribution for every image"""

    thread_safe = True

    def __init__(self, probabilities: Sequence[float]):
        p = np.asarray(probabilities, dtype=np.float64)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
            raise MetricError("constant oracle needs a probability vector")
        self.probabilities = p
        self.num_classes = len(p)

    def __call__(self, images: torch.Tensor) -> np.ndarray:
        return np.tile(self.probabilities, (images.shape[0], 1))


class PaletteOracle:
    """Soft nearest-colour classifier over a palette.

    Each pixel is softly assigned to the palette colours plus a set of
    ignored colours (background, skin); an image's class mass is the summed
    palette share. Crisp, well-coloured figures score confidently; blurred
    or washed-out ones spread their mass.
    """

    thread_safe = True

    def __init__(
        self,
        palette: Sequence[Tuple[int, int, int]],
        ignored: Sequence[Tuple[int, int, int]] = (),
        temperature: float = 0.005,
        smoothing: float = 1e-6,
    ):
        self.palette = torch.tensor(palette, dtype=torch.float64) / 255.0
        self.ignored = torch.tensor(list(ignored), dtype=torch.float64).reshape(-1, 3) / 255.0
        self.num_classes = len(palette)
        self.temperature = temperature
        self.smoothing = smoothing

    def __call__(self, images: torch.Tensor) -> np.ndarray:
        pixels = ((images.detach().to(torch.float64).cpu() + 1.0) / 2.0).flatten(2).transpose(1, 2)
        centres = torch.cat([self.palette, self.ignored], dim=0)
        d2 = ((pixels.unsqueeze(2) - centres) ** 2).sum(-1)
        weights = torch.softmax(-d2 / self.temperature, dim=-1)
        mass = weights[..., : self.num_classes].sum(dim=1) + self.smoothing
        return (mass / mass.sum(dim=1, keepdim=True)).numpy()


class InceptionOracle:
    """torchvision Inception-v3 posteriors; pretrained weights are downloaded on first use"""

    thread_safe = False
    num_classes = 1000

    def __init__(self, device: Optional[str] = None, batch_size: int = 32):
        self.device = torch.device(device or "cpu")
        self.batch_size = batch_size
        self._model = None

    def _load(self):
        from torchvision.models import Inception_V3_Weights, inception_v3

        logger.info("Loading Inception-v3 weights")
        model = inception_v3(weights=Inception_V3_Weights.DEFAULT, transform_input=False)
        return model.eval().to(self.device)

    @torch.no_grad()
    def __call__(self, images: torch.Tensor) -> np.ndarray:
        if self._model is None:
            self._model = self._load()
        preds = []
        for start in range(0, images.shape[0], self.batch_size):
            batch = images[start : start + self.batch_size].to(self.device, torch.float32)
            x = F.interpolate(batch, size=(299, 299), mode="bilinear", align_corners=False)
            preds.append(F.softmax(self._model(x), dim=1).cpu().numpy())
        return np.concatenate(preds, axis=0).astype(np.float64)


def build_oracle(name: str) -> ClassifierOracle:
    from pg2.data.toy import BACKGROUND, SKIN, TOY_PALETTE

    if name == "uniform":
        return UniformOracle()
    if name == "palette":
        return PaletteOracle(TOY_PALETTE, ignored=[BACKGROUND, SKIN, (0, 0, 0)])
    if name == "inception":
        return InceptionOracle()
    raise MetricError(f"unknown oracle '{name}' (uniform, palette, inception)")
