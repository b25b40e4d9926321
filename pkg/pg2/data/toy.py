"""Synthetic stick-figure dataset.

Each identity wears a shirt and trousers drawn from TOY_PALETTE and has its
own build (stroke widths, shoulder span, leg length); each image poses that
figure at random on a flat background. Everything is a pure
function of the ToySpec, so two runs with one spec write identical files.
Figures are painted only along skeleton edges, which keeps every painted
pixel inside the pose mask derived from the annotations.
"""
import logging
import math
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw

from pg2.core.errors import DataError
from pg2.core.manifest import RunManifest
from pg2.data.index import DatasetIndex, write_annotations, write_index
from pg2.data.pairs import split_by_identity
from pg2.models.dataset import Appearance, ImageRecord, ToySpec
from pg2.models.pose import Joint, KeypointSet

logger = logging.getLogger(__name__)

TOY_PALETTE: List[Tuple[int, int, int]] = [
    (220, 30, 30),
    (30, 160, 40),
    (30, 60, 220),
    (230, 200, 20),
    (160, 40, 200),
    (20, 190, 200),
    (240, 120, 20),
    (120, 70, 30),
    (0, 100, 100),
    (240, 110, 180),
]
BACKGROUND = (205, 205, 205)
SKIN = (235, 190, 150)


def sample_appearance(rng: np.random.Generator) -> Appearance:
    shirt, pants = rng.choice(len(TOY_PALETTE), size=2, replace=False)
    return Appearance(
        shirt=TOY_PALETTE[shirt],
        pants=TOY_PALETTE[pants],
        skin=SKIN,
        shirt_class=int(shirt),
        pants_class=int(pants),
        background=BACKGROUND,
        torso_width=int(rng.integers(3, 6)),
        limb_width=int(rng.integers(2, 4)),
        shoulder_span=float(rng.uniform(4.0, 6.0)),
        leg_length=float(rng.uniform(9.0, 11.0)),
    )


def _limb(origin: Tuple[float, float], length: float, angle: float) -> Tuple[float, float]:
    # angle in radians from straight down, positive towards +x
    return origin[0] + length * math.sin(angle), origin[1] + length * math.cos(angle)


def sample_pose(
    rng: np.random.Generator, height: int, width: int, shoulder_span: float = 5.0, leg_length: float = 11.0
) -> KeypointSet:
    """All 18 joints visible, clipped one pixel inside the frame; lengths are in 64-pixel units"""
    s = min(height, 2 * width) / 64.0
    neck = (width / 2 + rng.uniform(-2, 2) * s, 0.22 * height)
    pts = {Joint.NECK: neck}

    pts[Joint.NOSE] = (neck[0] + rng.uniform(-1, 1) * s, neck[1] - 5 * s)
    nose = pts[Joint.NOSE]
    pts[Joint.R_EYE] = (nose[0] - 1.5 * s, nose[1] - 1.5 * s)
    pts[Joint.L_EYE] = (nose[0] + 1.5 * s, nose[1] - 1.5 * s)
    pts[Joint.R_EAR] = (nose[0] - 3 * s, nose[1] - 0.5 * s)
    pts[Joint.L_EAR] = (nose[0] + 3 * s, nose[1] - 0.5 * s)

    # Right joints sit on the image left: the figure faces the camera
    for side, shoulder, elbow, wrist in (
        (-1, Joint.R_SHOULDER, Joint.R_ELBOW, Joint.R_WRIST),
        (1, Joint.L_SHOULDER, Joint.L_ELBOW, Joint.L_WRIST),
    ):
        pts[shoulder] = (neck[0] + side * shoulder_span * s, neck[1])
        upper = side * rng.uniform(0, math.radians(60))
        lower = upper + side * rng.uniform(math.radians(-60), math.radians(45))
        pts[elbow] = _limb(pts[shoulder], 8 * s, upper)
        pts[wrist] = _limb(pts[elbow], 7 * s, lower)

    for side, hip, knee, ankle in (
        (-1, Joint.R_HIP, Joint.R_KNEE, Joint.R_ANKLE),
        (1, Joint.L_HIP, Joint.L_KNEE, Joint.L_ANKLE),
    ):
        pts[hip] = (neck[0] + side * 3 * s, neck[1] + 18 * s)
        thigh = side * rng.uniform(math.radians(-10), math.radians(30))
        shin = thigh + rng.uniform(math.radians(-20), math.radians(20))
        pts[knee] = _limb(pts[hip], leg_length * s, thigh)
        pts[ankle] = _limb(pts[knee], leg_length * s, shin)

    coords = []
    for joint in Joint:
        x, y = pts[joint]
        coords.append((int(np.clip(round(x), 1, width - 2)), int(np.clip(round(y), 1, height - 2))))
    return KeypointSet.from_coordinates(coords)


_TORSO = [(Joint.NECK, Joint.R_HIP), (Joint.NECK, Joint.L_HIP), (Joint.R_SHOULDER, Joint.L_SHOULDER), (Joint.R_HIP, Joint.L_HIP)]
_ARMS = [
    (Joint.R_SHOULDER, Joint.R_ELBOW), (Joint.R_ELBOW, Joint.R_WRIST),
    (Joint.L_SHOULDER, Joint.L_ELBOW), (Joint.L_ELBOW, Joint.L_WRIST),
]
_LEGS = [
    (Joint.R_HIP, Joint.R_KNEE), (Joint.R_KNEE, Joint.R_ANKLE),
    (Joint.L_HIP, Joint.L_KNEE), (Joint.L_KNEE, Joint.L_ANKLE),
]
_HEAD = [(Joint.NECK, Joint.NOSE), (Joint.NOSE, Joint.R_EYE), (Joint.NOSE, Joint.L_EYE), (Joint.R_EYE, Joint.R_EAR), (Joint.L_EYE, Joint.L_EAR)]


def render_figure(kp: KeypointSet, appearance: Appearance, height: int, width: int) -> Image.Image:
    scale = max(1, round(min(height, 2 * width) / 64))
    image = Image.new("RGB", (width, height), appearance.background or BACKGROUND)
    draw = ImageDraw.Draw(image)
    xy = {Joint(k): (p.x, p.y) for k, p in enumerate(kp.points)}

    def paint(edges, colour, line_width):
        for a, b in edges:
            draw.line([xy[a], xy[b]], fill=colour, width=line_width)

    paint(_LEGS, appearance.pants, appearance.limb_width * scale)
    paint(_TORSO, appearance.shirt, appearance.torso_width * scale)
    paint(_ARMS, appearance.shirt, appearance.limb_width * scale)
    paint(_HEAD, appearance.skin, 2 * scale)
    nx, ny = xy[Joint.NOSE]
    r = 2 * scale
    draw.ellipse([nx - r, ny - r, nx + r, ny + r], fill=appearance.skin)
    return image


def make_toy_dataset(spec: ToySpec, out_dir: Union[str, Path]) -> DatasetIndex:
    """Write images, annotations, index files and a manifest under out_dir"""
    out_dir = Path(out_dir)
    try:
        (out_dir / "images").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"cannot create {out_dir}: {e}")

    records: List[ImageRecord] = []
    annotations = []
    appearances = {}
    for i, identity in enumerate(spec.identity_names()):
        appearance = sample_appearance(np.random.default_rng([spec.seed, i]))
        appearances[identity] = appearance
        for j in range(spec.images_per_identity):
            rng = np.random.default_rng([spec.seed, i, j + 1])
            kp = sample_pose(rng, spec.image_height, spec.image_width, appearance.shoulder_span, appearance.leg_length)
            image_path = f"images/{identity}_{j:02d}.png"
            try:
                render_figure(kp, appearance, spec.image_height, spec.image_width).save(out_dir / image_path)
            except OSError as e:
                raise DataError(f"cannot write {image_path}: {e}")
            records.append(ImageRecord(identity=identity, image_path=image_path, annotation_row_id=len(annotations)))
            annotations.append((f"{identity}_{j:02d}", kp))

    index = DatasetIndex(root=out_dir, records=records)
    if spec.test_identities:
        train, test = split_by_identity(index, spec.test_identities / spec.num_identities, spec.seed)
    else:
        train, test = index, index.subset([])
    write_annotations(out_dir / "annotations.csv", annotations)
    write_index(out_dir / "index.csv", records)
    write_index(out_dir / "train_index.csv", train.records)
    write_index(out_dir / "test_index.csv", test.records)

    manifest = RunManifest(
        kind="toy-dataset",
        status="complete",
        seed=spec.seed,
        outputs=["annotations.csv", "images", "index.csv", "test_index.csv", "train_index.csv"],
        extra={
            "spec": spec.model_dump(),
            "test_identities": test.identities(),
            "appearances": {k: v.model_dump() for k, v in appearances.items()},
            "palette": TOY_PALETTE,
        },
    )
    # Reproducible fields only
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(manifest.model_dump_json(indent=2, exclude={"command", "created_at", "updated_at", "duration_s", "git_commit"}))

    logger.info(f"Toy dataset: {len(records)} images of {spec.num_identities} identities in {out_dir}")
    return index
