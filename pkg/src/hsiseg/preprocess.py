"""Reflectance calibration, spectrum normalization, RGB reconstruction.

All three are pure functions of their inputs. Arithmetic runs in float64 and
results are stored as float32, which keeps e.g. normalized spectrum sums
within ~1e-7 of 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .cube import HsiCube
from .errors import ConfigurationError, StructuralError

#: |white - dark| below this is treated as a dead calibration element.
CALIBRATION_EPSILON = 1e-6


class CalibrationResult(NamedTuple):
    cube: HsiCube
    degenerate_elements: int


class NormalizationResult(NamedTuple):
    cube: HsiCube
    zero_spectra: int


def _require_aligned(a: HsiCube, b: HsiCube, what: str) -> None:
    if a.data.shape != b.data.shape:
        raise StructuralError(f"{what}: shape {b.data.shape} != {a.data.shape}")
    if not np.array_equal(a.wavelengths, b.wavelengths):
        raise StructuralError(f"{what}: wavelength grids differ")


def calibrate(raw: HsiCube, white: HsiCube, dark: HsiCube) -> CalibrationResult:
    """Per-element reflectance (raw - dark) / (white - dark), clamped at 0.

    Elements where |white - dark| < CALIBRATION_EPSILON carry no signal range;
    they calibrate to 0 and are counted in the result.
    """
    _require_aligned(raw, white, "white reference")
    _require_aligned(raw, dark, "dark reference")
    raw64 = raw.data.astype(np.float64)
    denom = white.data.astype(np.float64) - dark.data.astype(np.float64)
    live = np.abs(denom) >= CALIBRATION_EPSILON
    out = np.zeros_like(raw64)
    np.divide(raw64 - dark.data.astype(np.float64), denom, out=out, where=live)
    np.maximum(out, 0.0, out=out)
    cube = HsiCube(out.astype(np.float32), raw.wavelengths.copy())
    return CalibrationResult(cube, int(live.size - live.sum()))


def l1_normalize(cube: HsiCube) -> NormalizationResult:
    """Scale each pixel spectrum to unit L1 mass.

    Pixels whose spectrum sums to 0 stay all-zero and are counted; they carry
    no spectral information to scale.
    """
    data64 = cube.data.astype(np.float64)
    sums = np.abs(data64).sum(axis=2)
    live = sums > 0.0
    out = np.zeros_like(data64)
    np.divide(data64, sums[:, :, None], out=out, where=live[:, :, None])
    normalized = HsiCube(out.astype(np.float32), cube.wavelengths.copy())
    return NormalizationResult(normalized, int(live.size - live.sum()))


@dataclass(frozen=True)
class RgbBands:
    """Half-open wavelength windows [low, high) in nm averaged per channel."""

    red: tuple[float, float] = (620.0, 750.0)
    green: tuple[float, float] = (520.0, 600.0)
    blue: tuple[float, float] = (450.0, 520.0)

    def __post_init__(self) -> None:
        for name in ("red", "green", "blue"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigurationError(f"{name} band [{lo}, {hi}) is empty")


DEFAULT_RGB_BANDS = RgbBands()


def rgb_reconstruct(cube: HsiCube, bands: RgbBands = DEFAULT_RGB_BANDS) -> NDArray[np.float64]:
    """Collapse a cube to an (H, W, 3) RGB image in [0, 1].

    Each output channel is the mean over its wavelength window, then min-max
    scaled per channel over this image. A flat channel maps to 0.
    """
    out = np.zeros((cube.height, cube.width, 3), dtype=np.float64)
    for i, (lo, hi) in enumerate((bands.red, bands.green, bands.blue)):
        sel = (cube.wavelengths >= lo) & (cube.wavelengths < hi)
        if not sel.any():
            raise ConfigurationError(
                f"band [{lo}, {hi}) nm selects no channel of the cube's wavelength grid"
            )
        channel = cube.data[:, :, sel].mean(axis=2, dtype=np.float64)
        lo_v, hi_v = float(channel.min()), float(channel.max())
        if hi_v > lo_v:
            out[:, :, i] = (channel - lo_v) / (hi_v - lo_v)
    return out
