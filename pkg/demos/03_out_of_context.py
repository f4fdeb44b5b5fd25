#!/usr/bin/env python3
"""Build the four out-of-context test sets from a tiny source dataset.

Isolation keeps one class and wipes the rest; removal wipes one class and
keeps the rest. Both come in a zero-fill variant (wiped pixels become
invalid) and a background-fill variant (wiped pixels show a context scene
and are labeled background). Everything is written to a temp directory and
accounted for through the manifest validator.
"""

import tempfile
from pathlib import Path

import numpy as np

from hsiseg import (
    DatasetManifest,
    HsiCube,
    ImageRecord,
    LabelMap,
    ManipulationJob,
    SegmentationMask,
    default_wavelengths,
    load_mask,
    parse_synthesized_id,
    save_cube,
    save_mask,
    synthesize_dataset,
    validate_manifest,
)

H, W, C = 32, 40, 6
labelmap = LabelMap.from_names(["background", "liver", "spleen", "bowel"])
rng = np.random.default_rng(21)
root = Path(tempfile.mkdtemp(prefix="ooc_"))
print(f"working under {root}\n")

# Three source scenes, each with all four classes present.
records = []
for k in range(3):
    labels = np.zeros((H, W), dtype=np.uint8)
    yy, xx = np.mgrid[0:H, 0:W]
    for organ in (1, 2, 3):
        cy, cx = rng.integers(6, H - 6), rng.integers(6, W - 6)
        labels[(yy - cy) ** 2 + (xx - cx) ** 2 <= 36] = organ
    cube = HsiCube((rng.random((H, W, C)) + 0.1).astype(np.float32), default_wavelengths(C))
    save_cube(cube, root / f"scene{k}.cube")
    save_mask(SegmentationMask(labels), root / f"scene{k}.mask")
    records.append(
        ImageRecord(
            image_id=f"scene{k}",
            subject_id=f"pig{k % 2}",
            split="test",
            occlusion=False,
            scenario="original",
            cube_path=str(root / f"scene{k}.cube"),
            mask_path=str(root / f"scene{k}.mask"),
        )
    )
source = DatasetManifest(records)

# A plain background recording serves as the fill context.
context = HsiCube((rng.random((H, W, C)) * 0.2 + 0.4).astype(np.float32), default_wavelengths(C))

for scenario in ("isolation_zero", "isolation_bgr", "removal_zero", "removal_bgr"):
    background = context if scenario.endswith("_bgr") else None
    job = ManipulationJob(source, scenario, root / scenario, background=background)
    result = synthesize_dataset(job, labelmap)
    kept = sorted({parse_synthesized_id(r.image_id)[2] for r in result.images})
    print(f"{scenario}: {len(result.images)} image(s); classes covered: {', '.join(kept)}")

# Removal skips the background class by default (an image minus its
# background is mostly empty); isolation includes it.
iso = synthesize_dataset(
    ManipulationJob(source, "isolation_zero", root / "iso_all"), labelmap
)
rem = synthesize_dataset(
    ManipulationJob(source, "removal_zero", root / "rem_default"), labelmap
)
print(f"\nper source image: isolation {len(iso.images) // 3} variants, "
      f"removal {len(rem.images) // 3} (background excluded)")

# Synthesized records inherit subject and split, so accounting still works.
report = validate_manifest(iso)
for line in report.format_lines():
    print(f"  {line}")

# Zero-filled pixels are invalid (class 255): excluded from every metric.
sample = iso.images[0]
mask = load_mask(sample.mask_path)
invalid = int((mask.labels == 255).sum())
print(f"\n{sample.image_id}: {invalid}/{H * W} pixels invalid after isolation")
