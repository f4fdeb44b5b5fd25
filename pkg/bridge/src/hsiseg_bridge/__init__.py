"""Zero-copy bindings between host training loops and the hsiseg toolkit.

The host owns every pixel buffer. A :class:`BridgeBatchView` wraps the
arrays a training loop already holds — no copies on the way in — and each
operation hands results back in caller-owned buffers (yours via ``out=``,
or freshly allocated and returned). Nothing here keeps a reference to your
arrays past the call.

Only batch-level operations are exposed; per-pixel round trips across the
binding boundary would cost more than they compute. Calls are reentrant,
but the host must not mutate viewed buffers while a call is running.

Numerical contract: every operation produces results element-wise
identical to the `hsiseg` command line run on a serialized copy of the
same inputs.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

import hsiseg
from hsiseg import (
    AugmentationSpec,
    Batch,
    HsiCube,
    LabelMap,
    RngStream,
    SegmentationMask,
    calibrate,
    compose,
    default_wavelengths,
    evaluate_image,
    load_labelmap,
    load_pipeline,
)

__version__ = "0.1.0"

__all__ = [
    "BridgeBatchView",
    "BridgeError",
    "augment",
    "evaluate",
    "preprocess",
    "view",
]


class BridgeError(ValueError):
    """A caller-supplied array does not meet the binding contract."""


def _check_cube(arr: object, name: str) -> np.ndarray:
    if not isinstance(arr, np.ndarray):
        raise BridgeError(f"{name}: expected a numpy array, got {type(arr).__name__}")
    if arr.ndim != 3:
        raise BridgeError(f"{name}: cube must be 3-D (H, W, C), got shape {arr.shape}")
    if arr.dtype != np.float32:
        raise BridgeError(f"{name}: cube dtype must be float32, got {arr.dtype}")
    if not arr.flags.c_contiguous:
        raise BridgeError(f"{name}: cube must be C-contiguous (zero-copy contract)")
    return arr


def _check_mask(arr: object, name: str) -> np.ndarray:
    if not isinstance(arr, np.ndarray):
        raise BridgeError(f"{name}: expected a numpy array, got {type(arr).__name__}")
    if arr.ndim != 2:
        raise BridgeError(f"{name}: mask must be 2-D (H, W), got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise BridgeError(f"{name}: mask dtype must be uint8, got {arr.dtype}")
    if not arr.flags.c_contiguous:
        raise BridgeError(f"{name}: mask must be C-contiguous (zero-copy contract)")
    return arr


@dataclass(frozen=True)
class BridgeBatchView:
    """Borrowed references to host-owned batch arrays.

    Construction validates shapes, dtypes, and contiguity but copies
    nothing; the view stays valid only as long as the host keeps the
    arrays alive and unmutated.
    """

    cubes: tuple[np.ndarray, ...]
    masks: tuple[np.ndarray, ...]
    wavelengths: np.ndarray

    def __post_init__(self) -> None:
        if len(self.cubes) != len(self.masks):
            raise BridgeError(
                f"{len(self.cubes)} cube(s) but {len(self.masks)} mask(s)"
            )
        wl = np.asarray(self.wavelengths, dtype=np.float64)
        if wl.ndim != 1:
            raise BridgeError(f"wavelengths must be 1-D, got shape {wl.shape}")
        object.__setattr__(self, "wavelengths", wl)
        for i, (cube, mask) in enumerate(zip(self.cubes, self.masks)):
            _check_cube(cube, f"cubes[{i}]")
            _check_mask(mask, f"masks[{i}]")
            if cube.shape[:2] != mask.shape:
                raise BridgeError(
                    f"item {i}: cube is {cube.shape[:2]} but mask is {mask.shape}"
                )
            if cube.shape[2] != wl.size:
                raise BridgeError(
                    f"item {i}: cube has {cube.shape[2]} channel(s) but "
                    f"{wl.size} wavelength(s) declared"
                )

    def __len__(self) -> int:
        return len(self.cubes)


def view(
    cubes: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    wavelengths: Sequence[float] | np.ndarray | None = None,
) -> BridgeBatchView:
    """Wrap host arrays in a validated :class:`BridgeBatchView` (no copies)."""
    if wavelengths is None:
        if not cubes:
            raise BridgeError("wavelengths are required for an empty batch")
        channels = _check_cube(cubes[0], "cubes[0]").shape[2]
        wavelengths = default_wavelengths(channels)
    return BridgeBatchView(tuple(cubes), tuple(masks), np.asarray(wavelengths))


def _as_view(batch: object) -> BridgeBatchView:
    if isinstance(batch, BridgeBatchView):
        return batch
    if isinstance(batch, Sequence) and len(batch) == 3:
        return view(batch[0], batch[1], batch[2])
    raise BridgeError(
        "batch must be a BridgeBatchView or a (cubes, masks, wavelengths) triple"
    )


def _pipeline_steps(config: object) -> list[AugmentationSpec]:
    """Accept a pipeline as a JSON path, a parsed document, or spec objects."""
    if isinstance(config, (str, Path)):
        return load_pipeline(config)
    if isinstance(config, Mapping):
        config = config.get("steps")
        if not isinstance(config, Sequence):
            raise BridgeError("pipeline document needs a 'steps' list")
    if not isinstance(config, Sequence) or isinstance(config, (bytes, str)):
        raise BridgeError(
            "pipeline config must be a path, a {'steps': [...]} document, "
            "or a sequence of steps"
        )
    steps = []
    for i, item in enumerate(config):
        if isinstance(item, AugmentationSpec):
            steps.append(item)
        elif isinstance(item, Mapping):
            steps.append(
                AugmentationSpec(
                    kind=item.get("kind", ""),
                    p=float(item.get("p", 1.0)),
                    params=dict(item.get("params", {})),
                )
            )
        else:
            raise BridgeError(f"steps[{i}]: expected a mapping or AugmentationSpec")
    return steps


def augment(
    batch: BridgeBatchView | tuple,
    config: object,
    seed: int,
    *,
    out: tuple[Sequence[np.ndarray], Sequence[np.ndarray]] | None = None,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Run an augmentation pipeline over a viewed batch.

    Returns ``(cubes, masks)`` in caller-owned buffers: pass ``out`` as a
    ``(cubes, masks)`` pair of preallocated arrays to reuse memory across
    steps of a training loop, or omit it to get fresh arrays. Input buffers
    are never written, and results never alias them.
    """
    src = _as_view(batch)
    steps = _pipeline_steps(config)
    items = [
        (HsiCube(cube, src.wavelengths), SegmentationMask(mask))
        for cube, mask in zip(src.cubes, src.masks)
    ]
    result = compose(steps, Batch(items), RngStream(int(seed)))

    if out is None:
        out_cubes = [np.empty_like(c) for c in src.cubes]
        out_masks = [np.empty_like(m) for m in src.masks]
    else:
        if not isinstance(out, Sequence) or len(out) != 2:
            raise BridgeError("out must be a (cubes, masks) pair")
        out_cubes, out_masks = list(out[0]), list(out[1])
        if len(out_cubes) != len(src) or len(out_masks) != len(src):
            raise BridgeError(
                f"out holds {len(out_cubes)}/{len(out_masks)} buffer(s) "
                f"for a batch of {len(src)}"
            )
        for i, (cube, mask) in enumerate(zip(out_cubes, out_masks)):
            _check_cube(cube, f"out cubes[{i}]")
            _check_mask(mask, f"out masks[{i}]")
            if cube.shape != src.cubes[i].shape or mask.shape != src.masks[i].shape:
                raise BridgeError(f"out item {i} does not match the input shape")
            if not cube.flags.writeable or not mask.flags.writeable:
                raise BridgeError(f"out item {i} is read-only")

    for i, (cube, mask) in enumerate(result.items):
        np.copyto(out_cubes[i], cube.data)
        np.copyto(out_masks[i], mask.labels)
    return out_cubes, out_masks


def _as_labelmap(labelmap: object) -> LabelMap:
    if isinstance(labelmap, LabelMap):
        return labelmap
    if isinstance(labelmap, (str, Path)):
        return load_labelmap(labelmap)
    if isinstance(labelmap, Sequence) and all(isinstance(n, str) for n in labelmap):
        return LabelMap.from_names(list(labelmap))
    raise BridgeError("labelmap must be a LabelMap, a JSON path, or class names")


def evaluate(
    pred: np.ndarray,
    ref: np.ndarray,
    labelmap: LabelMap | str | Path | Sequence[str],
) -> list[dict]:
    """Score one predicted mask against its reference.

    Returns plain dicts (``class_name``, ``metric``, ``value``,
    ``support``), one row per class and metric, matching the records the
    command line writes for the same pair. Classes absent from both masks
    produce no row; 255 marks invalid reference pixels, excluded
    everywhere.
    """
    p = _check_mask(pred, "pred")
    r = _check_mask(ref, "ref")
    if p.shape != r.shape:
        raise BridgeError(f"pred is {p.shape} but ref is {r.shape}")
    records = evaluate_image(
        SegmentationMask(p), SegmentationMask(r), _as_labelmap(labelmap)
    )
    return [
        {
            "class_name": rec.class_name,
            "metric": rec.metric,
            "value": rec.value,
            "support": rec.support,
        }
        for rec in records
    ]


def preprocess(
    raw: np.ndarray,
    white: np.ndarray,
    dark: np.ndarray,
    *,
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Reflectance-calibrate a raw cube against white/dark references.

    All three arrays must share one (H, W, C) float32 contiguous shape.
    Returns the calibrated cube in a caller-owned buffer.
    """
    arrays = [
        _check_cube(raw, "raw"),
        _check_cube(white, "white"),
        _check_cube(dark, "dark"),
    ]
    if not (arrays[0].shape == arrays[1].shape == arrays[2].shape):
        raise BridgeError(
            f"shape mismatch: raw {arrays[0].shape}, white {arrays[1].shape}, "
            f"dark {arrays[2].shape}"
        )
    wavelengths = default_wavelengths(arrays[0].shape[2])
    result = calibrate(
        HsiCube(arrays[0], wavelengths),
        HsiCube(arrays[1], wavelengths),
        HsiCube(arrays[2], wavelengths),
    )
    if out is None:
        return result.cube.data
    _check_cube(out, "out")
    if out.shape != arrays[0].shape:
        raise BridgeError(f"out is {out.shape}, expected {arrays[0].shape}")
    if not out.flags.writeable:
        raise BridgeError("out is read-only")
    np.copyto(out, result.cube.data)
    return out


if __version__ != hsiseg.__version__:  # pragma: no cover
    raise ImportError(
        f"hsiseg-bridge {__version__} requires hsiseg {__version__}, "
        f"found {hsiseg.__version__}"
    )
