"""Dataset index and keypoint annotation files.

index CSV:        identity,image_path,annotation_row_id
annotations CSV:  image_id,x0,y0,...,x17,y17   (header optional; -1,-1 marks an invisible joint)

image_path is relative to the directory holding the index; annotation_row_id
is the 0-based data row of the annotations file.
"""
import csv
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

from pydantic import ValidationError

from pg2.core.errors import DataError
from pg2.models.dataset import ImageRecord
from pg2.models.pose import NUM_KEYPOINTS, KeypointSet

logger = logging.getLogger(__name__)

INDEX_HEADER = ["identity", "image_path", "annotation_row_id"]
ANNOTATION_HEADER = ["image_id"] + [f"{axis}{k}" for k in range(NUM_KEYPOINTS) for axis in ("x", "y")]
ANNOTATIONS_FILE = "annotations.csv"


@dataclass
class DatasetIndex:
    root: Path
    records: List[ImageRecord]
    annotations_path: Optional[Path] = None
    _annotations: Optional[List[KeypointSet]] = field(default=None, repr=False)

    def __post_init__(self):
        self.root = Path(self.root)
        if self.annotations_path is None:
            self.annotations_path = self.root / ANNOTATIONS_FILE

    def __len__(self) -> int:
        return len(self.records)

    def by_identity(self) -> "OrderedDict[str, List[ImageRecord]]":
        groups: "OrderedDict[str, List[ImageRecord]]" = OrderedDict()
        for record in sorted(self.records, key=lambda r: (r.identity, r.image_path)):
            groups.setdefault(record.identity, []).append(record)
        return groups

    def identities(self) -> List[str]:
        return list(self.by_identity().keys())

    def subset(self, identities: Sequence[str]) -> "DatasetIndex":
        keep = set(identities)
        return DatasetIndex(
            root=self.root,
            records=[r for r in self.records if r.identity in keep],
            annotations_path=self.annotations_path,
            _annotations=self._annotations,
        )

    def image_file(self, record: ImageRecord) -> Path:
        return self.root / record.image_path

    def keypoints(self, record: ImageRecord) -> KeypointSet:
        if self._annotations is None:
            self._annotations = read_annotations(self.annotations_path)
        if record.annotation_row_id >= len(self._annotations):
            raise DataError(
                f"record {record.image_path} points at annotation row {record.annotation_row_id}, "
                f"file has {len(self._annotations)}"
            )
        return self._annotations[record.annotation_row_id]


def read_annotations(path: Union[str, Path]) -> List[KeypointSet]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"annotation file not found: {path}")
    keypoints = []
    with path.open(newline="") as f:
        for line, row in enumerate(csv.reader(f), start=1):
            # The header row is optional
            if not row or (line == 1 and row == ANNOTATION_HEADER):
                continue
            image_id, values = row[0], row[1:]
            if len(values) != 2 * NUM_KEYPOINTS:
                raise DataError(
                    f"record '{image_id}' has {len(values) / 2:g} keypoints, expected {NUM_KEYPOINTS}"
                )
            try:
                coords = [(int(values[2 * k]), int(values[2 * k + 1])) for k in range(NUM_KEYPOINTS)]
                keypoints.append(KeypointSet.from_coordinates(coords))
            except (ValueError, ValidationError) as e:
                raise DataError(f"record '{image_id}' has malformed keypoints: {e}")
    return keypoints


def write_annotations(path: Union[str, Path], rows: Sequence[tuple]) -> None:
    """rows of (image_id, KeypointSet)"""
    with Path(path).open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(ANNOTATION_HEADER)
        for image_id, kp in rows:
            writer.writerow([image_id] + [int(v) for v in kp.to_array().reshape(-1)])


def read_index(path: Union[str, Path], annotations_path: Optional[Path] = None) -> DatasetIndex:
    path = Path(path)
    if not path.exists():
        raise DataError(f"index file not found: {path}")
    records = []
    with path.open(newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != INDEX_HEADER:
            raise DataError(f"{path.name}: expected columns {','.join(INDEX_HEADER)}")
        for line, row in enumerate(reader, start=2):
            try:
                records.append(ImageRecord(**row))
            except ValidationError as e:
                raise DataError(f"{path.name}:{line}: {e.errors()[0]['msg']}")
    logger.debug(f"Read {len(records)} records from {path}")
    return DatasetIndex(root=path.parent, records=records, annotations_path=annotations_path)


def write_index(path: Union[str, Path], records: Sequence[ImageRecord]) -> None:
    with Path(path).open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(INDEX_HEADER)
        for r in records:
            writer.writerow([r.identity, r.image_path, r.annotation_row_id])
