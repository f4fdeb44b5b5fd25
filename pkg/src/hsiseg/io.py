"""File formats and (de)serialization.

Binary payloads (cubes, masks) pair with a textual ``.hdr`` sidecar of
``key = value`` lines; structured documents (manifest, label map, pipeline,
metric records) are JSON. Every format carries an integer ``format_version``
and readers reject versions they don't know. Writers emit fixed key order and
fixed float formatting, so load -> save round-trips byte-identically.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .augment import AugmentationSpec
from .cube import HsiCube, LabelClass, LabelMap, SegmentationMask
from .errors import ParseError
from .manifest import DatasetManifest, ImageRecord
from .metrics import MetricRecord

FORMAT_VERSIONS = {
    "cube": 1,
    "mask": 1,
    "manifest": 1,
    "labelmap": 1,
    "pipeline": 1,
    "records": 1,
}

_RECORD_FIELDS = ("image_id", "subject_id", "scenario", "class", "metric", "value", "support")


def header_path(payload_path: str | Path) -> Path:
    return Path(str(payload_path) + ".hdr")


# --- textual sidecar headers -------------------------------------------------


def _write_header(path: Path, kind: str, fields: dict[str, str]) -> None:
    lines = [f"format_version = {FORMAT_VERSIONS[kind]}", f"kind = {kind}"]
    lines += [f"{k} = {v}" for k, v in fields.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_header(path: Path, kind: str) -> dict[str, tuple[str, int]]:
    """Parse a sidecar into {key: (value, line_number)}; check kind/version."""
    if not path.exists():
        raise ParseError("header sidecar missing", path=str(path))
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError("expected 'key = value'", path=str(path), line=lineno)
        entries[key.strip()] = (value.strip(), lineno)
    for required in ("format_version", "kind"):
        if required not in entries:
            raise ParseError(f"missing {required!r}", path=str(path))
    version_text, version_line = entries["format_version"]
    try:
        version = int(version_text)
    except ValueError:
        raise ParseError("format_version is not an integer", path=str(path), line=version_line) from None
    if version != FORMAT_VERSIONS[kind]:
        raise ParseError(
            f"unsupported {kind} format_version {version} (supported: {FORMAT_VERSIONS[kind]})",
            path=str(path),
            line=version_line,
        )
    found_kind, kind_line = entries["kind"]
    if found_kind != kind:
        raise ParseError(f"expected kind {kind!r}, found {found_kind!r}", path=str(path), line=kind_line)
    return entries


def _header_int(entries: dict[str, tuple[str, int]], path: Path, key: str) -> int:
    if key not in entries:
        raise ParseError(f"missing {key!r}", path=str(path))
    text, lineno = entries[key]
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"{key} is not an integer", path=str(path), line=lineno) from None
    if value < 1:
        raise ParseError(f"{key} must be >= 1, got {value}", path=str(path), line=lineno)
    return value


# --- cubes -------------------------------------------------------------------


def save_cube(cube: HsiCube, path: str | Path) -> None:
    """Write payload (little-endian float32, row-major y,x,channel) + sidecar."""
    path = Path(path)
    payload = np.ascontiguousarray(cube.data, dtype="<f4")
    path.write_bytes(payload.tobytes())
    _write_header(
        header_path(path),
        "cube",
        {
            "height": str(cube.height),
            "width": str(cube.width),
            "channels": str(cube.channels),
            "dtype": "float32le",
            "wavelengths_nm": ",".join(repr(float(w)) for w in cube.wavelengths),
        },
    )


def load_cube(path: str | Path) -> HsiCube:
    path = Path(path)
    hdr = header_path(path)
    entries = _read_header(hdr, "cube")
    height = _header_int(entries, hdr, "height")
    width = _header_int(entries, hdr, "width")
    channels = _header_int(entries, hdr, "channels")
    if "dtype" not in entries or entries["dtype"][0] != "float32le":
        raise ParseError("cube dtype must be float32le", path=str(hdr))
    if "wavelengths_nm" not in entries:
        raise ParseError("missing 'wavelengths_nm'", path=str(hdr))
    wl_text, wl_line = entries["wavelengths_nm"]
    try:
        wavelengths = np.array([float(t) for t in wl_text.split(",")], dtype=np.float64)
    except ValueError:
        raise ParseError("wavelengths_nm must be comma-separated floats", path=str(hdr), line=wl_line) from None
    if wavelengths.shape[0] != channels:
        raise ParseError(
            f"wavelengths_nm lists {wavelengths.shape[0]} values for {channels} channels",
            path=str(hdr),
            line=wl_line,
        )
    if not path.exists():
        raise ParseError("payload file missing", path=str(path))
    blob = path.read_bytes()
    expected = height * width * channels * 4
    if len(blob) != expected:
        raise ParseError(
            f"payload is {len(blob)} bytes, header implies {expected}",
            path=str(path),
            offset=min(len(blob), expected),
        )
    data = np.frombuffer(blob, dtype="<f4").reshape(height, width, channels)
    if not np.isfinite(data).all():
        raise ParseError("payload contains non-finite values", path=str(path))
    if data.size and float(data.min()) < 0.0:
        raise ParseError("payload contains negative reflectance values", path=str(path))
    return HsiCube(data.copy(), wavelengths)


# --- masks -------------------------------------------------------------------


def save_mask(mask: SegmentationMask, path: str | Path) -> None:
    """Write payload (uint8, row-major) + sidecar."""
    path = Path(path)
    height, width = mask.spatial_shape
    path.write_bytes(np.ascontiguousarray(mask.labels).tobytes())
    _write_header(
        header_path(path),
        "mask",
        {"height": str(height), "width": str(width), "dtype": "uint8"},
    )


def load_mask(path: str | Path) -> SegmentationMask:
    path = Path(path)
    hdr = header_path(path)
    entries = _read_header(hdr, "mask")
    height = _header_int(entries, hdr, "height")
    width = _header_int(entries, hdr, "width")
    if "dtype" not in entries or entries["dtype"][0] != "uint8":
        raise ParseError("mask dtype must be uint8", path=str(hdr))
    if not path.exists():
        raise ParseError("payload file missing", path=str(path))
    blob = path.read_bytes()
    expected = height * width
    if len(blob) != expected:
        raise ParseError(
            f"payload is {len(blob)} bytes, header implies {expected}",
            path=str(path),
            offset=min(len(blob), expected),
        )
    labels = np.frombuffer(blob, dtype=np.uint8).reshape(height, width)
    return SegmentationMask(labels.copy())


# --- JSON documents ----------------------------------------------------------


def _load_json(path: Path, kind: str) -> dict:
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", path=str(path), line=e.lineno) from None
    if not isinstance(document, dict):
        raise ParseError("top level must be a JSON object", path=str(path))
    version = document.get("format_version")
    if not isinstance(version, int):
        raise ParseError("missing integer 'format_version'", path=str(path))
    if version != FORMAT_VERSIONS[kind]:
        raise ParseError(
            f"unsupported {kind} format_version {version} (supported: {FORMAT_VERSIONS[kind]})",
            path=str(path),
        )
    return document


def _dump_json(document: dict, path: Path) -> None:
    path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def _field(item: dict, key: str, types, path: Path, where: str):
    if key not in item:
        raise ParseError(f"{where}: missing {key!r}", path=str(path))
    value = item[key]
    if not isinstance(value, types) or isinstance(value, bool) and types is not bool:
        raise ParseError(f"{where}: {key!r} has wrong type", path=str(path))
    return value


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    document = {
        "format_version": FORMAT_VERSIONS["manifest"],
        "images": [
            {
                "image_id": r.image_id,
                "subject_id": r.subject_id,
                "split": r.split,
                "occlusion": r.occlusion,
                "scenario": r.scenario,
                "cube_path": r.cube_path,
                "mask_path": r.mask_path,
            }
            for r in manifest.images
        ],
    }
    _dump_json(document, Path(path))


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest; split-integrity violations raise ValidationError."""
    path = Path(path)
    document = _load_json(path, "manifest")
    items = document.get("images")
    if not isinstance(items, list):
        raise ParseError("missing 'images' list", path=str(path))
    records = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ParseError(f"images[{i}]: not an object", path=str(path))
        where = f"images[{i}]"
        records.append(
            ImageRecord(
                image_id=_field(item, "image_id", str, path, where),
                subject_id=_field(item, "subject_id", str, path, where),
                split=_field(item, "split", str, path, where),
                occlusion=_field(item, "occlusion", bool, path, where),
                scenario=_field(item, "scenario", str, path, where),
                cube_path=_field(item, "cube_path", str, path, where),
                mask_path=_field(item, "mask_path", str, path, where),
            )
        )
    manifest = DatasetManifest(records)
    manifest.validate()
    return manifest


def save_labelmap(labelmap: LabelMap, path: str | Path) -> None:
    document = {
        "format_version": FORMAT_VERSIONS["labelmap"],
        "classes": [
            {
                "index": c.index,
                "name": c.name,
                "is_background": c.is_background,
                "nsd_threshold": c.nsd_threshold,
            }
            for c in labelmap.classes
        ],
    }
    _dump_json(document, Path(path))


def load_labelmap(path: str | Path) -> LabelMap:
    path = Path(path)
    document = _load_json(path, "labelmap")
    items = document.get("classes")
    if not isinstance(items, list):
        raise ParseError("missing 'classes' list", path=str(path))
    classes = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ParseError(f"classes[{i}]: not an object", path=str(path))
        where = f"classes[{i}]"
        classes.append(
            LabelClass(
                index=_field(item, "index", int, path, where),
                name=_field(item, "name", str, path, where),
                is_background=_field(item, "is_background", bool, path, where),
                nsd_threshold=float(_field(item, "nsd_threshold", (int, float), path, where)),
            )
        )
    return LabelMap(classes)


def save_pipeline(pipeline: Sequence[AugmentationSpec], path: str | Path) -> None:
    document = {
        "format_version": FORMAT_VERSIONS["pipeline"],
        "steps": [
            {"kind": s.kind, "p": s.p, "params": {k: list(v) if isinstance(v, tuple) else v for k, v in s.params.items()}}
            for s in pipeline
        ],
    }
    _dump_json(document, Path(path))


def load_pipeline(path: str | Path) -> list[AugmentationSpec]:
    path = Path(path)
    document = _load_json(path, "pipeline")
    items = document.get("steps")
    if not isinstance(items, list):
        raise ParseError("missing 'steps' list", path=str(path))
    steps = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ParseError(f"steps[{i}]: not an object", path=str(path))
        where = f"steps[{i}]"
        kind = _field(item, "kind", str, path, where)
        p = float(_field(item, "p", (int, float), path, where))
        params = item.get("params", {})
        if not isinstance(params, dict):
            raise ParseError(f"{where}: 'params' must be an object", path=str(path))
        steps.append(AugmentationSpec(kind=kind, p=p, params=params))
    return steps


# --- metric record tables ----------------------------------------------------


def save_records_csv(records: Iterable[MetricRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_RECORD_FIELDS)
        for r in records:
            writer.writerow(
                [r.image_id, r.subject_id, r.scenario, r.class_name, r.metric, repr(r.value), r.support]
            )


def load_records_csv(path: str | Path) -> list[MetricRecord]:
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(_RECORD_FIELDS):
            raise ParseError(
                f"expected header {','.join(_RECORD_FIELDS)}", path=str(path), line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(_RECORD_FIELDS):
                raise ParseError(f"expected {len(_RECORD_FIELDS)} columns", path=str(path), line=lineno)
            try:
                value = float(row[5])
                support = int(row[6])
            except ValueError:
                raise ParseError("bad numeric field", path=str(path), line=lineno) from None
            records.append(
                MetricRecord(
                    image_id=row[0],
                    subject_id=row[1],
                    scenario=row[2],
                    class_name=row[3],
                    metric=row[4],
                    value=value,
                    support=support,
                )
            )
    return records


def save_records_json(records: Iterable[MetricRecord], path: str | Path) -> None:
    document = {
        "format_version": FORMAT_VERSIONS["records"],
        "records": [
            {
                "image_id": r.image_id,
                "subject_id": r.subject_id,
                "scenario": r.scenario,
                "class": r.class_name,
                "metric": r.metric,
                "value": r.value,
                "support": r.support,
            }
            for r in records
        ],
    }
    _dump_json(document, Path(path))
