"""Overlap and boundary-distance scores for segmentation masks.

Scores are per (image, class). Pixels that are invalid in the REFERENCE mask
are excluded from both the prediction and the reference set before anything
else, including boundary extraction. A class absent from both gated masks
produces no record at all — absence is not a zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from .cube import INVALID_LABEL, LabelMap, SegmentationMask
from .errors import ConfigurationError, StructuralError

_FOUR_CONN = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class MetricRecord:
    """One score: which image/subject/scenario/class/metric, value, support.

    ``support`` is the number of valid reference pixels of the class.
    """

    image_id: str
    subject_id: str
    scenario: str
    class_name: str
    metric: str
    value: float
    support: int


def class_boundary(member: NDArray[np.bool_]) -> NDArray[np.bool_]:
    """Pixels of the set with a 4-neighbor outside it, or on the image edge."""
    member = np.asarray(member, dtype=bool)
    if member.ndim != 2:
        raise StructuralError(f"boundary expects a 2-d set, got shape {member.shape}")
    interior = ndimage.binary_erosion(member, structure=_FOUR_CONN, border_value=0)
    return member & ~interior


def _gated_sets(
    pred: SegmentationMask, ref: SegmentationMask, class_index: int
) -> tuple[NDArray[np.bool_], NDArray[np.bool_]]:
    if pred.spatial_shape != ref.spatial_shape:
        raise StructuralError(
            f"prediction shape {pred.spatial_shape} != reference shape {ref.spatial_shape}"
        )
    if not 0 <= class_index < INVALID_LABEL:
        raise ConfigurationError(f"class index {class_index} out of range 0..{INVALID_LABEL - 1}")
    gate = ref.valid
    p = (pred.labels == class_index) & gate
    r = (ref.labels == class_index) & gate
    return p, r


def dsc(pred: SegmentationMask, ref: SegmentationMask, class_index: int) -> float | None:
    """Dice overlap 2|P∩R| / (|P|+|R|); None when the class is absent from both."""
    p, r = _gated_sets(pred, ref, class_index)
    denom = int(p.sum()) + int(r.sum())
    if denom == 0:
        return None
    return 2.0 * int((p & r).sum()) / denom


def _boundary_hits(src: NDArray[np.bool_], dst: NDArray[np.bool_], threshold: float) -> int:
    """How many boundary pixels of ``src`` lie within ``threshold`` px of ``dst``.

    Distances come from the feature transform: the nearest dst pixel's integer
    coordinates give an exact integer squared distance, compared against
    threshold**2 with no rounding anywhere.
    """
    ys, xs = np.nonzero(src)
    if ys.size == 0:
        return 0
    if not dst.any():
        return 0
    iy, ix = ndimage.distance_transform_edt(~dst, return_distances=False, return_indices=True)
    d2 = (ys.astype(np.int64) - iy[ys, xs]) ** 2 + (xs.astype(np.int64) - ix[ys, xs]) ** 2
    return int((d2 <= threshold * threshold).sum())


def nsd(
    pred: SegmentationMask,
    ref: SegmentationMask,
    class_index: int,
    threshold: float = 3.0,
) -> float | None:
    """Symmetric share of boundary pixels within ``threshold`` px of the other
    mask's boundary; None when the class is absent from both."""
    if not threshold > 0:
        raise ConfigurationError(f"threshold must be > 0, got {threshold}")
    p, r = _gated_sets(pred, ref, class_index)
    if not p.any() and not r.any():
        return None
    bp = class_boundary(p)
    br = class_boundary(r)
    # A nonempty finite set always has boundary pixels, so the denominator is
    # zero only when both sets are empty — excluded above.
    denom = int(bp.sum()) + int(br.sum())
    hits = _boundary_hits(bp, br, threshold) + _boundary_hits(br, bp, threshold)
    return hits / denom


def evaluate_image(
    pred: SegmentationMask,
    ref: SegmentationMask,
    labelmap: LabelMap,
    *,
    image_id: str = "",
    subject_id: str = "",
    scenario: str = "",
) -> list[MetricRecord]:
    """DSC and NSD records for every class present in either gated mask.

    NSD uses each class's own tolerance from the label map. Labels outside
    the label map are a structural error.
    """
    if pred.spatial_shape != ref.spatial_shape:
        raise StructuralError(
            f"prediction shape {pred.spatial_shape} != reference shape {ref.spatial_shape}"
        )
    p_gate = ref.valid
    present = np.union1d(np.unique(pred.labels[p_gate]), np.unique(ref.labels[p_gate]))
    present = present[present != INVALID_LABEL]
    unknown = [int(c) for c in present if int(c) >= len(labelmap)]
    if unknown:
        raise StructuralError(
            f"image {image_id!r}: labels {unknown} not in the {len(labelmap)}-class label map"
        )
    records = []
    for class_index in (int(c) for c in present):
        support = int(((ref.labels == class_index) & p_gate).sum())
        name = labelmap.name_of(class_index)
        for metric_name, value in (
            ("DSC", dsc(pred, ref, class_index)),
            ("NSD", nsd(pred, ref, class_index, labelmap.threshold_of(class_index))),
        ):
            if value is None:
                continue
            records.append(
                MetricRecord(
                    image_id=image_id,
                    subject_id=subject_id,
                    scenario=scenario,
                    class_name=name,
                    metric=metric_name,
                    value=value,
                    support=support,
                )
            )
    return records
