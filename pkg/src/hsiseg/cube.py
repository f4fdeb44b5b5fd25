"""Core value types: hyperspectral cubes, segmentation masks, label maps.

Cubes and masks are treated as immutable values by every operation in this
package: ops never write into their inputs, they allocate (or are handed)
fresh arrays. Nothing enforces that at the numpy level, so keep the
convention when extending.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigurationError, StructuralError

#: Sentinel stored in mask arrays for pixels with no annotation. In-band in
#: uint8, which caps label maps at 255 real classes.
INVALID_LABEL = 255

#: Reference acquisition grid: 480x640 px, 100 channels, 500-1000 nm at 5 nm.
REFERENCE_HEIGHT = 480
REFERENCE_WIDTH = 640
REFERENCE_CHANNELS = 100
WAVELENGTH_START_NM = 500.0
WAVELENGTH_STEP_NM = 5.0


def default_wavelengths(channels: int = REFERENCE_CHANNELS) -> NDArray[np.float64]:
    """Wavelength grid of the reference sensor: 500 + 5*k nm."""
    if channels < 1:
        raise ConfigurationError(f"channels must be >= 1, got {channels}")
    return WAVELENGTH_START_NM + WAVELENGTH_STEP_NM * np.arange(channels, dtype=np.float64)


@dataclass
class HsiCube:
    """A reflectance cube of shape (H, W, C) with its wavelength grid.

    ``data`` is float32, all values finite and >= 0; ``wavelengths`` is a
    strictly increasing float64 vector of length C (nanometers). Construction
    checks structure only — value-domain checks cost a full 30M-element scan
    on reference-sized cubes, so they run at the I/O and calibration
    boundaries (and on demand via :meth:`validate_values`).
    """

    data: NDArray[np.float32]
    wavelengths: NDArray[np.float64]

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise StructuralError(f"cube data must be (H, W, C), got shape {self.data.shape}")
        self.wavelengths = np.asarray(self.wavelengths, dtype=np.float64)
        if self.wavelengths.ndim != 1 or self.wavelengths.shape[0] != self.data.shape[2]:
            raise StructuralError(
                f"wavelengths must be a length-{self.data.shape[2]} vector, "
                f"got shape {self.wavelengths.shape}"
            )
        if self.wavelengths.shape[0] > 1 and not np.all(np.diff(self.wavelengths) > 0):
            raise StructuralError("wavelengths must be strictly increasing")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.data.shape[0], self.data.shape[1]

    def validate_values(self) -> None:
        """Full scan: raise if any value is non-finite or negative."""
        if not np.isfinite(self.data).all():
            raise StructuralError("cube contains non-finite values")
        if self.data.size and float(self.data.min()) < 0.0:
            raise StructuralError("cube contains negative values")


@dataclass
class SegmentationMask:
    """Per-pixel class labels, uint8, with 255 marking unannotated pixels."""

    labels: NDArray[np.uint8]

    def __post_init__(self) -> None:
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise StructuralError(f"mask labels must be (H, W), got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise StructuralError(f"mask labels must be integers, got dtype {arr.dtype}")
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise StructuralError("mask labels must fit in uint8 (0..255)")
            arr = arr.astype(np.uint8)
        self.labels = arr

    @property
    def spatial_shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def valid(self) -> NDArray[np.bool_]:
        """Boolean map of annotated pixels."""
        return self.labels != INVALID_LABEL

    def present_classes(self) -> NDArray[np.uint8]:
        """Sorted class indices present among valid pixels."""
        present = np.unique(self.labels)
        return present[present != INVALID_LABEL]


@dataclass(frozen=True)
class LabelClass:
    """One entry of a label map.

    ``nsd_threshold`` is the class's boundary tolerance in pixels for
    surface-distance scoring; 3 px unless a tighter inter-rater figure is
    available for the class.
    """

    index: int
    name: str
    is_background: bool = False
    nsd_threshold: float = 3.0


@dataclass
class LabelMap:
    """Ordered set of classes with dense indices 0..K-1 and exactly one background."""

    classes: list[LabelClass] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.classes = sorted(self.classes, key=lambda c: c.index)
        indices = [c.index for c in self.classes]
        if indices != list(range(len(self.classes))):
            raise ConfigurationError(f"class indices must be dense 0..K-1, got {indices}")
        if len(self.classes) > INVALID_LABEL:
            raise ConfigurationError(
                f"at most {INVALID_LABEL} classes supported (255 is the invalid sentinel)"
            )
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise ConfigurationError("class names must be unique")
        for c in self.classes:
            if not c.name or "@" in c.name:
                raise ConfigurationError(f"invalid class name {c.name!r} ('@' is reserved)")
            if not (c.nsd_threshold > 0):
                raise ConfigurationError(
                    f"class {c.name!r}: nsd_threshold must be > 0, got {c.nsd_threshold}"
                )
        background = [c.index for c in self.classes if c.is_background]
        if len(background) != 1:
            raise ConfigurationError(
                f"label map must flag exactly one background class, got {len(background)}"
            )
        self._background_index = background[0]
        self._by_name = {c.name: c for c in self.classes}

    @classmethod
    def from_names(
        cls,
        names: list[str],
        *,
        background: str | None = None,
        nsd_threshold: float = 3.0,
    ) -> "LabelMap":
        """Build a map from an ordered name list; background defaults to names[0]."""
        if not names:
            raise ConfigurationError("label map needs at least one class")
        bg = background if background is not None else names[0]
        if bg not in names:
            raise ConfigurationError(f"background {bg!r} not in class names")
        return cls(
            [
                LabelClass(i, n, is_background=(n == bg), nsd_threshold=nsd_threshold)
                for i, n in enumerate(names)
            ]
        )

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    @property
    def background_index(self) -> int:
        return self._background_index

    def name_of(self, index: int) -> str:
        if not 0 <= index < len(self.classes):
            raise ConfigurationError(f"class index {index} out of range 0..{len(self.classes) - 1}")
        return self.classes[index].name

    def index_of(self, name: str) -> int:
        try:
            return self._by_name[name].index
        except KeyError:
            raise ConfigurationError(f"unknown class name {name!r}") from None

    def threshold_of(self, index: int) -> float:
        if not 0 <= index < len(self.classes):
            raise ConfigurationError(f"class index {index} out of range 0..{len(self.classes) - 1}")
        return self.classes[index].nsd_threshold

    def organ_indices(self) -> list[int]:
        """All class indices except the background."""
        return [c.index for c in self.classes if not c.is_background]
