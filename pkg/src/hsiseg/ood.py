"""Out-of-context dataset synthesis: class isolation and class removal.

``isolate`` keeps exactly one class and replaces everything else; ``remove``
replaces exactly one class and keeps everything else. The replacement is
either zeros (labels become invalid — zeroed pixels carry no class) or a
context cube with its background class label. Dataset jobs apply one of the
four scenario variants to every class present in every source image.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cube import INVALID_LABEL, HsiCube, LabelMap, SegmentationMask
from .errors import ConfigurationError, StructuralError, SynthesisError
from .io import load_cube, load_mask, save_cube, save_mask
from .manifest import DatasetManifest, ImageRecord

FILL_MODES = ("zero", "background")

#: scenario tag -> (operation, fill mode)
SCENARIO_OPS = {
    "isolation_zero": ("isolate", "zero"),
    "isolation_bgr": ("isolate", "background"),
    "removal_zero": ("remove", "zero"),
    "removal_bgr": ("remove", "background"),
}


def _check_fill(
    cube: HsiCube,
    fill: str,
    background: HsiCube | None,
) -> None:
    if fill not in FILL_MODES:
        raise ConfigurationError(f"unknown fill mode {fill!r} (expected one of {FILL_MODES})")
    if fill == "background":
        if background is None:
            raise ConfigurationError("fill mode 'background' requires a background cube")
        if background.data.shape != cube.data.shape:
            raise StructuralError(
                f"background cube shape {background.data.shape} != source {cube.data.shape}"
            )
        if not np.array_equal(background.wavelengths, cube.wavelengths):
            raise StructuralError("background cube wavelength grid differs from source")


def _class_selection(mask: SegmentationMask, class_index: int) -> np.ndarray:
    if not 0 <= class_index < INVALID_LABEL:
        raise ConfigurationError(f"class index {class_index} out of range 0..{INVALID_LABEL - 1}")
    selection = mask.labels == class_index
    if not selection.any():
        raise StructuralError(f"class {class_index} has no pixel in the mask")
    return selection


def isolate(
    cube: HsiCube,
    mask: SegmentationMask,
    class_index: int,
    fill: str = "zero",
    *,
    background: HsiCube | None = None,
    background_class: int = 0,
) -> tuple[HsiCube, SegmentationMask]:
    """Keep only class ``class_index``; replace every other pixel."""
    _check_fill(cube, fill, background)
    selection = _class_selection(mask, class_index)
    if fill == "zero":
        data = np.zeros_like(cube.data)
        labels = np.full(mask.spatial_shape, INVALID_LABEL, dtype=np.uint8)
    else:
        data = background.data.copy()
        labels = np.full(mask.spatial_shape, background_class, dtype=np.uint8)
    data[selection] = cube.data[selection]
    labels[selection] = class_index
    return HsiCube(data, cube.wavelengths), SegmentationMask(labels)


def remove(
    cube: HsiCube,
    mask: SegmentationMask,
    class_index: int,
    fill: str = "zero",
    *,
    background: HsiCube | None = None,
    background_class: int = 0,
) -> tuple[HsiCube, SegmentationMask]:
    """Replace class ``class_index``; keep every other pixel."""
    _check_fill(cube, fill, background)
    selection = _class_selection(mask, class_index)
    data = cube.data.copy()
    labels = mask.labels.copy()
    if fill == "zero":
        data[selection] = 0.0
        labels[selection] = INVALID_LABEL
    else:
        data[selection] = background.data[selection]
        labels[selection] = background_class
    return HsiCube(data, cube.wavelengths), SegmentationMask(labels)


def synthesized_image_id(source_id: str, scenario: str, class_name: str) -> str:
    """``<source>@<scenario>@<class>`` — parseable because '@' is reserved."""
    if "@" in source_id:
        raise ConfigurationError(f"source image_id {source_id!r} must not contain '@'")
    return f"{source_id}@{scenario}@{class_name}"


def parse_synthesized_id(image_id: str) -> tuple[str, str, str] | None:
    """Inverse of :func:`synthesized_image_id`; None for unsynthesized ids."""
    parts = image_id.split("@")
    if len(parts) != 3:
        return None
    return parts[0], parts[1], parts[2]


@dataclass
class ManipulationJob:
    """One synthesis run: which source images, which scenario, where to write.

    ``include_background_class``: whether the background class itself gets an
    isolated/removed variant; defaults to True for isolation (a background-
    only image is a valid context probe) and False for removal (removing the
    background empties most of the scene).
    """

    source: DatasetManifest
    scenario: str
    output_root: str | Path
    background: HsiCube | None = None
    include_background_class: bool | None = None

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIO_OPS:
            raise ConfigurationError(
                f"unknown synthesis scenario {self.scenario!r} "
                f"(expected one of {sorted(SCENARIO_OPS)})"
            )
        op, fill = SCENARIO_OPS[self.scenario]
        if fill == "background" and self.background is None:
            raise ConfigurationError(f"scenario {self.scenario!r} requires a background cube")
        if self.include_background_class is None:
            self.include_background_class = op == "isolate"


def synthesize_dataset(
    job: ManipulationJob,
    labelmap: LabelMap,
    *,
    workers: int = 1,
) -> DatasetManifest:
    """Write one variant per (source image, present class); return the manifest.

    Output records inherit subject/split/occlusion from their source, so
    split integrity carries over. The manifest is ordered by source then
    class regardless of worker scheduling. Any I/O failure aborts with a
    partial-output report.
    """
    op_name, fill = SCENARIO_OPS[job.scenario]
    operation = isolate if op_name == "isolate" else remove
    root = Path(job.output_root)
    root.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def _one_image(source: ImageRecord) -> list[ImageRecord]:
        cube = load_cube(source.cube_path)
        mask = load_mask(source.mask_path)
        present = [int(c) for c in mask.present_classes()]
        unknown = [c for c in present if c >= len(labelmap)]
        if unknown:
            raise StructuralError(
                f"image {source.image_id!r}: labels {unknown} not in the label map"
            )
        if not job.include_background_class:
            present = [c for c in present if c != labelmap.background_index]
        records = []
        for class_index in present:
            out_cube, out_mask = operation(
                cube,
                mask,
                class_index,
                fill,
                background=job.background,
                background_class=labelmap.background_index,
            )
            image_id = synthesized_image_id(
                source.image_id, job.scenario, labelmap.name_of(class_index)
            )
            cube_path = root / f"{image_id}.cube"
            mask_path = root / f"{image_id}.mask"
            save_cube(out_cube, cube_path)
            written.append(str(cube_path))
            save_mask(out_mask, mask_path)
            written.append(str(mask_path))
            records.append(
                ImageRecord(
                    image_id=image_id,
                    subject_id=source.subject_id,
                    split=source.split,
                    occlusion=source.occlusion,
                    scenario=job.scenario,
                    cube_path=str(cube_path),
                    mask_path=str(mask_path),
                )
            )
        return records

    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                per_image = list(pool.map(_one_image, job.source.images))
        else:
            per_image = [_one_image(r) for r in job.source.images]
    except OSError as e:
        raise SynthesisError(f"synthesis aborted: {e}", written=sorted(written)) from e
    return DatasetManifest([r for image_records in per_image for r in image_records])
