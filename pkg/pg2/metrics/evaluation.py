import logging
from typing import List, Optional

import torch
from pydantic import BaseModel
from torch.utils.data import DataLoader
from tqdm import tqdm

from pg2.core import settings
from pg2.core.errors import MetricError
from pg2.data.loader import PairDataset
from pg2.metrics.inception import inception_score, mask_is
from pg2.metrics.oracles import ClassifierOracle
from pg2.metrics.ssim import mask_ssim_per_image, ssim_per_image
from pg2.models.train_state import TrainState
from pg2.trainer.stages import pose_input

logger = logging.getLogger(__name__)


class PairScore(BaseModel):
    index: int
    identity: str
    ssim: float
    mask_ssim: float


class EvaluationReport(BaseModel):
    variant: str
    pairs: int
    ssim: float
    mask_ssim: float
    inception_score: float
    inception_std: float
    mask_inception_score: float
    mask_inception_std: float
    per_pair: List[PairScore] = []

    def row(self) -> dict:
        return self.model_dump(exclude={"per_pair"})


@torch.no_grad()
def generate_for_dataset(g1: TrainState, g2: Optional[TrainState], data: PairDataset, batch_size: int = 16):
    """Yields (batch, output) over the dataset in order; output is refined when g2 is given"""
    net_g1 = g1.networks["g1"].eval()
    net_g2 = g2.networks["g2"].eval() if g2 is not None else None
    device = next(net_g1.parameters()).device
    mode = g1.config.g1.embedding_mode
    loader = DataLoader(data, batch_size=batch_size, shuffle=False, num_workers=settings.NUM_WORKERS)
    for batch in tqdm(loader, disable=not settings.PROGRESS, desc="generate"):
        condition = batch["condition"].to(device)
        output = net_g1(condition, pose_input(batch, mode).to(device))
        if net_g2 is not None:
            _, output = net_g2(condition, output)
        yield batch, output.cpu()


def evaluate_model(
    g1: TrainState,
    g2: Optional[TrainState],
    data: PairDataset,
    oracle: ClassifierOracle,
    variant: str,
    splits: int = 10,
    batch_size: int = 16,
) -> EvaluationReport:
    """SSIM and mask-SSIM per pair against the target; IS and mask-IS over the generated set"""
    outputs, masks, per_pair = [], [], []
    for batch, output in generate_for_dataset(g1, g2, data, batch_size):
        scores = ssim_per_image(output, batch["target"])
        masked = mask_ssim_per_image(output, batch["target"], batch["mask"])
        for i in range(output.shape[0]):
            per_pair.append(
                PairScore(
                    index=int(batch["index"][i]),
                    identity=batch["identity"][i],
                    ssim=float(scores[i]),
                    mask_ssim=float(masked[i]),
                )
            )
        outputs.append(output)
        masks.append(batch["mask"])
    if not per_pair:
        raise MetricError("no pairs to evaluate")

    images = torch.cat(outputs)
    masks_t = torch.cat(masks)
    splits = min(splits, images.shape[0])
    is_mean, is_std = inception_score(images, oracle, splits)
    mis_mean, mis_std = mask_is(images, masks_t, oracle, splits)
    report = EvaluationReport(
        variant=variant,
        pairs=len(per_pair),
        ssim=sum(p.ssim for p in per_pair) / len(per_pair),
        mask_ssim=sum(p.mask_ssim for p in per_pair) / len(per_pair),
        inception_score=is_mean,
        inception_std=is_std,
        mask_inception_score=mis_mean,
        mask_inception_std=mis_std,
        per_pair=per_pair,
    )
    logger.info(f"{variant}: SSIM {report.ssim:.3f} mask-SSIM {report.mask_ssim:.3f} IS {is_mean:.3f} mask-IS {mis_mean:.3f}")
    return report
