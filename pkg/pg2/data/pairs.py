import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pg2.core.errors import RangeError
from pg2.data.index import DatasetIndex
from pg2.models.dataset import PairRecord

logger = logging.getLogger(__name__)


def build_pairs(index: DatasetIndex, cap_per_identity: Optional[int] = None, seed: int = 0) -> List[PairRecord]:
    """Every ordered pair of distinct images sharing an identity.

    An identity with k images gives k * (k - 1) pairs; with a cap, a seeded
    subset of at most cap pairs is kept per identity, in original order.
    """
    if cap_per_identity is not None and cap_per_identity < 1:
        raise RangeError(f"pair cap must be positive, got {cap_per_identity}")
    pairs: List[PairRecord] = []
    for n, (identity, records) in enumerate(index.by_identity().items()):
        ordered = [PairRecord(condition=a, target=b) for a in records for b in records if a.image_path != b.image_path]
        if cap_per_identity is not None and len(ordered) > cap_per_identity:
            rng = np.random.default_rng([seed, n])
            keep = np.sort(rng.choice(len(ordered), size=cap_per_identity, replace=False))
            ordered = [ordered[i] for i in keep]
        pairs.extend(ordered)
    logger.info(f"Built {len(pairs)} pairs over {len(index.by_identity())} identities")
    return pairs


def sample_test_pairs(pairs: Sequence[PairRecord], count: int, seed: int = 0) -> List[PairRecord]:
    if count < 1:
        raise RangeError(f"test pair count must be positive, got {count}")
    if count >= len(pairs):
        return list(pairs)
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(pairs), size=count, replace=False))
    return [pairs[i] for i in keep]


def split_by_identity(index: DatasetIndex, test_fraction: float, seed: int = 0) -> Tuple[DatasetIndex, DatasetIndex]:
    """Disjoint train/test indices; no identity appears in both"""
    if not 0.0 < test_fraction < 1.0:
        raise RangeError(f"test fraction must be in (0, 1), got {test_fraction}")
    identities = index.identities()
    if len(identities) < 2:
        raise RangeError("need at least two identities to split")
    n_test = min(len(identities) - 1, max(1, round(test_fraction * len(identities))))
    order = np.random.default_rng(seed).permutation(len(identities))
    test = sorted(identities[i] for i in order[:n_test])
    train = sorted(identities[i] for i in order[n_test:])
    return index.subset(train), index.subset(test)
