"""Shared builders for synthetic cubes, masks, batches, and manifests."""

from __future__ import annotations

import numpy as np
import pytest

from hsiseg import (
    Batch,
    DatasetManifest,
    HsiCube,
    ImageRecord,
    LabelMap,
    SegmentationMask,
    default_wavelengths,
)

_INVALID = 255


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    outcomes: dict[str, str] = {}
    for bucket, status in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(bucket, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid or "::" not in nodeid:
                continue
            name = nodeid.split("::")[-1].removeprefix("test_")
            if status == "FAIL" or name not in outcomes:
                outcomes[name] = status
    if outcomes:
        terminalreporter.section("acceptance criteria")
        for name, status in outcomes.items():
            terminalreporter.write_line(f"{name}: {status}")


def make_cube(g: np.random.Generator, h: int = 24, w: int = 32, c: int = 6) -> HsiCube:
    data = (g.random((h, w, c)) + 0.01).astype(np.float32)
    return HsiCube(data, default_wavelengths(c))


def make_mask(
    g: np.random.Generator,
    h: int = 24,
    w: int = 32,
    classes: int = 5,
    invalid_fraction: float = 0.0,
) -> SegmentationMask:
    labels = g.integers(0, classes, size=(h, w)).astype(np.uint8)
    if invalid_fraction > 0:
        labels[g.random((h, w)) < invalid_fraction] = _INVALID
    return SegmentationMask(labels)


def make_blob_mask(
    g: np.random.Generator, h: int, w: int, classes: int
) -> SegmentationMask:
    """Organ-like layout: background 0 plus one random disk per other class."""
    labels = np.zeros((h, w), dtype=np.uint8)
    yy, xx = np.mgrid[0:h, 0:w]
    for label in range(1, classes):
        cy = int(g.integers(0, h))
        cx = int(g.integers(0, w))
        radius = int(g.integers(2, max(3, min(h, w) // 3)))
        labels[(yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius] = label
    return SegmentationMask(labels)


def make_batch(
    g: np.random.Generator,
    n: int = 3,
    h: int = 24,
    w: int = 32,
    c: int = 6,
    classes: int = 5,
    blobs: bool = False,
) -> Batch:
    items = []
    for _ in range(n):
        mask = make_blob_mask(g, h, w, classes) if blobs else make_mask(g, h, w, classes)
        items.append((make_cube(g, h, w, c), mask))
    return Batch(items)


@pytest.fixture
def labelmap5() -> LabelMap:
    return LabelMap.from_names(["background", "liver", "spleen", "bowel", "omentum"])


def full_study_manifest() -> DatasetManifest:
    """Synthetic manifest with a full study's accounting shape.

    Original scenario: 506 images of 20 subjects (train 340/15, test 166/5),
    142 of them occlusion-flagged. isolation_real: 94 extra images over 25
    subjects (12 overlap the main 20 and keep their split; 13 are new
    test-only subjects), for 600 images of 33 subjects overall.
    """
    train_subjects = [f"P{i:02d}" for i in range(1, 16)]  # P01..P15
    test_subjects = [f"P{i:02d}" for i in range(16, 21)]  # P16..P20
    extra_subjects = [f"P{i:02d}" for i in range(21, 34)]  # P21..P33

    # (subject, split) for each of the 506 original images:
    # 340 train over 15 subjects (10*23 + 5*22), 166 test over 5 (34 + 4*33).
    plan: list[tuple[str, str]] = []
    for k, subject in enumerate(train_subjects):
        plan += [(subject, "train")] * (23 if k < 10 else 22)
    for k, subject in enumerate(test_subjects):
        plan += [(subject, "test")] * (34 if k == 0 else 33)
    assert len(plan) == 506

    # 142 occlusion images spread over all 20 main subjects: the first 7 of
    # each subject's images, plus one extra for the first two subjects.
    occlusion_quota = {s: 7 for s in train_subjects + test_subjects}
    occlusion_quota["P01"] += 1
    occlusion_quota["P02"] += 1
    assert sum(occlusion_quota.values()) == 142

    records = []
    seen: dict[str, int] = {}
    for counter, (subject, split) in enumerate(plan):
        seen[subject] = seen.get(subject, 0) + 1
        image_id = f"img{counter:04d}"
        records.append(
            ImageRecord(
                image_id=image_id,
                subject_id=subject,
                split=split,
                occlusion=seen[subject] <= occlusion_quota[subject],
                scenario="original",
                cube_path=f"{image_id}.cube",
                mask_path=f"{image_id}.mask",
            )
        )

    # 94 isolation_real images over 25 subjects: 12 overlap subjects
    # (P09..P20, keeping their split) + 13 fresh test-only subjects.
    iso_subjects = [f"P{i:02d}" for i in range(9, 21)] + extra_subjects
    assert len(iso_subjects) == 25
    for k in range(94):
        subject = iso_subjects[k % 25]
        records.append(
            ImageRecord(
                image_id=f"iso{k:03d}",
                subject_id=subject,
                split="train" if subject in train_subjects else "test",
                occlusion=False,
                scenario="isolation_real",
                cube_path=f"iso{k:03d}.cube",
                mask_path=f"iso{k:03d}.mask",
            )
        )
    return DatasetManifest(records)
