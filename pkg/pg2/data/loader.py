"""Pair loading, augmentation and the deterministic batch schedule."""
import logging
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError
from torch.utils.data import Dataset, Sampler

from pg2.core import settings
from pg2.core.errors import DataError, RangeError, ShapeError
from pg2.data.index import DatasetIndex
from pg2.models.dataset import ImageRecord, PairRecord, PairSample
from pg2.models.pose import MorphologyParams
from pg2.pose_codec import (
    compute_pose_mask,
    encode_heatmaps,
    flip_image,
    flip_keypoints,
    heatmaps_to_tensor,
    mask_to_tensor,
)

logger = logging.getLogger(__name__)


def image_to_tensor(image: Image.Image) -> torch.Tensor:
    """8-bit RGB -> (3, H, W) float in [-1, 1]"""
    array = np.asarray(image.convert("RGB"), dtype=np.float32)
    return torch.from_numpy(array).permute(2, 0, 1) / 127.5 - 1.0


def tensor_to_image(tensor: torch.Tensor) -> Image.Image:
    array = ((tensor.detach().cpu().clamp(-1, 1) + 1.0) * 127.5).round().to(torch.uint8)
    return Image.fromarray(array.permute(1, 2, 0).numpy())


class PairLoader:
    """Reads a PairRecord from disk into a PairSample"""

    def __init__(
        self,
        index: DatasetIndex,
        image_size: Optional[Tuple[int, int]] = None,
        morphology: Optional[MorphologyParams] = None,
        radius: int = 4,
    ):
        self.index = index
        self.image_size = image_size
        self.morphology = morphology or MorphologyParams()
        self.radius = radius

    def _read_image(self, record: ImageRecord) -> torch.Tensor:
        path = self.index.image_file(record)
        try:
            with Image.open(path) as image:
                tensor = image_to_tensor(image)
        except (OSError, UnidentifiedImageError) as e:
            raise DataError(f"cannot decode {record.image_path}: {e}")
        if self.image_size is not None and tuple(tensor.shape[1:]) != tuple(self.image_size):
            raise DataError(
                f"{record.image_path} is {tensor.shape[1]}x{tensor.shape[2]}, expected "
                f"{self.image_size[0]}x{self.image_size[1]}"
            )
        return tensor

    def load_pair(
        self,
        record: PairRecord,
        augment: bool = False,
        rng: Optional[np.random.Generator] = None,
        flip: Optional[bool] = None,
    ) -> PairSample:
        """Decode both images, then derive heatmaps and mask from the target keypoints.

        A flip applies to both images and the target keypoints together, before
        the pose tensor and mask are computed. flip overrides the rng draw.
        """
        condition = self._read_image(record.condition)
        target = self._read_image(record.target)
        if condition.shape != target.shape:
            raise DataError(f"pair {record.condition.image_path} -> {record.target.image_path} mixes image sizes")
        height, width = target.shape[1:]

        kp = self.index.keypoints(record.target)
        try:
            kp.check_bounds(height, width)
        except DataError as e:
            raise DataError(f"{record.target.image_path}: {e.detail}")

        if flip is None:
            flip = bool(augment and rng is not None and rng.random() < 0.5)
        if flip:
            condition, target = flip_image(condition), flip_image(target)
            kp = flip_keypoints(kp, width)

        pose = encode_heatmaps(kp, height, width, self.radius)
        mask = compute_pose_mask(kp, height, width, self.morphology)
        if settings.DEBUG and kp.visible_count >= 2:
            if np.any(pose.channels.max(axis=0) > mask.mask):
                raise DataError(f"{record.target.image_path}: pose mask does not cover the heatmaps")

        return PairSample(
            condition_image=condition,
            target_image=target,
            target_keypoints=kp,
            identity=record.identity,
            pose=pose,
            mask=mask,
            flipped=flip,
        )


class PairDataset(Dataset):
    """Tensors for training; items are pair positions or (position, flip) tuples"""

    def __init__(self, pairs: Sequence[PairRecord], loader: PairLoader):
        if not pairs:
            raise DataError("dataset has no pairs")
        self.pairs = list(pairs)
        self.loader = loader

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, item: Union[int, Tuple[int, bool]]) -> Dict[str, object]:
        position, flip = item if isinstance(item, tuple) else (item, False)
        sample = self.loader.load_pair(self.pairs[position], flip=flip)
        return {
            "condition": sample.condition_image,
            "target": sample.target_image,
            "pose": heatmaps_to_tensor(sample.pose),
            "coords": torch.from_numpy(sample.target_keypoints.coordinate_vector()),
            "mask": mask_to_tensor(sample.mask),
            "index": position,
            "flipped": sample.flipped,
            "identity": sample.identity,
        }


class ScheduleBatchSampler(Sampler):
    """Batches as a pure function of (seed, iteration).

    Iteration t (1-based) covers schedule positions (t-1)*B .. t*B-1 of an
    endless sequence of seeded epoch permutations; flips come from a
    per-iteration generator. A resumed run therefore sees the same batches
    as an uninterrupted one.
    """

    def __init__(
        self,
        num_items: int,
        batch_size: int,
        seed: int,
        start_iteration: int = 1,
        num_iterations: int = 1,
        augment_flip: bool = False,
    ):
        if num_items < 1 or batch_size < 1:
            raise RangeError("sampler needs items and a positive batch size")
        if start_iteration < 1 or num_iterations < 0:
            raise RangeError(f"bad schedule window start={start_iteration} length={num_iterations}")
        self.num_items = num_items
        self.batch_size = batch_size
        self.seed = seed
        self.start_iteration = start_iteration
        self.num_iterations = num_iterations
        self.augment_flip = augment_flip
        self._epochs: Dict[int, np.ndarray] = {}

    def _permutation(self, epoch: int) -> np.ndarray:
        if epoch not in self._epochs:
            self._epochs = {epoch: np.random.default_rng([self.seed, 0, epoch]).permutation(self.num_items)}
        return self._epochs[epoch]

    def batch(self, iteration: int) -> List[Tuple[int, bool]]:
        start = (iteration - 1) * self.batch_size
        if self.augment_flip:
            flips = np.random.default_rng([self.seed, 1, iteration]).random(self.batch_size) < 0.5
        else:
            flips = np.zeros(self.batch_size, dtype=bool)
        items = []
        for slot in range(self.batch_size):
            epoch, offset = divmod(start + slot, self.num_items)
            items.append((int(self._permutation(epoch)[offset]), bool(flips[slot])))
        return items

    def __iter__(self) -> Iterator[List[Tuple[int, bool]]]:
        for iteration in range(self.start_iteration, self.start_iteration + self.num_iterations):
            yield self.batch(iteration)

    def __len__(self) -> int:
        return self.num_iterations
