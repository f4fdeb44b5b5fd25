"""Dataset manifests: image records, split integrity, accounting."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ValidationError

SPLITS = ("train", "test")

#: Scenario tags: acquisition subsets and synthesized out-of-context variants.
SCENARIOS = (
    "original",
    "no-occlusion",
    "occlusion",
    "isolation_real",
    "isolation_zero",
    "isolation_bgr",
    "removal_zero",
    "removal_bgr",
)


@dataclass(frozen=True)
class ImageRecord:
    """One annotated image: identity, grouping, and where its files live."""

    image_id: str
    subject_id: str
    split: str
    occlusion: bool
    scenario: str
    cube_path: str
    mask_path: str

    def __post_init__(self) -> None:
        if not self.image_id:
            raise ValidationError("image_id must be non-empty")
        if not self.subject_id:
            raise ValidationError(f"image {self.image_id!r}: subject_id must be non-empty")
        if self.split not in SPLITS:
            raise ValidationError(
                f"image {self.image_id!r}: unknown split {self.split!r} (expected one of {SPLITS})"
            )
        if self.scenario not in SCENARIOS:
            raise ValidationError(
                f"image {self.image_id!r}: unknown scenario {self.scenario!r}"
            )


@dataclass
class DatasetManifest:
    images: list[ImageRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for r in self.images:
            if r.image_id in seen:
                raise ValidationError(f"duplicate image_id {r.image_id!r}")
            seen.add(r.image_id)

    def __len__(self) -> int:
        return len(self.images)

    def scenario(self, tag: str) -> "DatasetManifest":
        """Sub-manifest of one scenario."""
        return DatasetManifest([r for r in self.images if r.scenario == tag])

    def split(self, name: str) -> "DatasetManifest":
        return DatasetManifest([r for r in self.images if r.split == name])

    def subjects(self) -> list[str]:
        return sorted({r.subject_id for r in self.images})

    def validate(self) -> None:
        """Raise ValidationError if any consistency rule is broken."""
        report = validate_manifest(self)
        if report.violations:
            raise ValidationError("; ".join(report.violations))


@dataclass(frozen=True)
class SubsetCount:
    images: int
    subjects: int


@dataclass
class ValidationReport:
    """Accounting summary plus any integrity violations.

    A subject must belong to exactly one split across the WHOLE manifest
    (synthesized scenarios inherit the source image's subject, so a leak in
    any scenario is a leak, full stop).
    """

    total: SubsetCount
    per_split: dict[str, SubsetCount]
    per_scenario: dict[str, SubsetCount]
    per_scenario_split: dict[tuple[str, str], SubsetCount]
    occlusion_images: int
    no_occlusion_images: int
    violations: list[str]

    def format_lines(self) -> list[str]:
        lines = [f"images {self.total.images}, subjects {self.total.subjects}"]
        for split_name in sorted(self.per_split):
            c = self.per_split[split_name]
            lines.append(f"split {split_name}: {c.images} images, {c.subjects} subjects")
        for tag in sorted(self.per_scenario):
            c = self.per_scenario[tag]
            lines.append(f"scenario {tag}: {c.images} images, {c.subjects} subjects")
        for tag, split_name in sorted(self.per_scenario_split):
            c = self.per_scenario_split[(tag, split_name)]
            lines.append(
                f"scenario {tag} / {split_name}: {c.images} images, {c.subjects} subjects"
            )
        lines.append(
            f"occlusion flag (original scenario): {self.occlusion_images} with, "
            f"{self.no_occlusion_images} without"
        )
        for v in self.violations:
            lines.append(f"VIOLATION: {v}")
        return lines


def _count(records: list[ImageRecord]) -> SubsetCount:
    return SubsetCount(len(records), len({r.subject_id for r in records}))


def validate_manifest(manifest: DatasetManifest) -> ValidationReport:
    """Count images/subjects overall, per split, per scenario; find violations."""
    records = manifest.images
    violations: list[str] = []

    seen_ids: set[str] = set()
    for r in records:
        if r.image_id in seen_ids:
            violations.append(f"duplicate image_id {r.image_id!r}")
        seen_ids.add(r.image_id)

    subject_splits: dict[str, set[str]] = {}
    for r in records:
        subject_splits.setdefault(r.subject_id, set()).add(r.split)
    for subject in sorted(subject_splits):
        splits = subject_splits[subject]
        if len(splits) > 1:
            violations.append(
                f"subject {subject!r} appears in splits {', '.join(sorted(splits))}"
            )

    per_split = {
        s: _count([r for r in records if r.split == s])
        for s in SPLITS
        if any(r.split == s for r in records)
    }
    scenarios_present = sorted({r.scenario for r in records})
    per_scenario = {
        tag: _count([r for r in records if r.scenario == tag]) for tag in scenarios_present
    }
    per_scenario_split = {}
    for tag in scenarios_present:
        for s in SPLITS:
            subset = [r for r in records if r.scenario == tag and r.split == s]
            if subset:
                per_scenario_split[(tag, s)] = _count(subset)

    original = [r for r in records if r.scenario == "original"]
    return ValidationReport(
        total=_count(records),
        per_split=per_split,
        per_scenario=per_scenario,
        per_scenario_split=per_scenario_split,
        occlusion_images=sum(1 for r in original if r.occlusion),
        no_occlusion_images=sum(1 for r in original if not r.occlusion),
        violations=violations,
    )


def filter_occlusion(manifest: DatasetManifest, *, occlusion: bool) -> DatasetManifest:
    """Original-scenario images with (or without) the occlusion flag."""
    return DatasetManifest(
        [r for r in manifest.images if r.scenario == "original" and r.occlusion == occlusion]
    )
