"""Command-line interface.

Subcommands: synthesize, augment, evaluate, aggregate, rank, neighbors.

Every option resolves as: explicit flag > --config JSON entry (keyed by the
option's underscored long name) > environment variable (path options only,
``HSISEG_<NAME>``) > built-in default. The resolved configuration is echoed
as one JSON line before any work happens, and every run that writes outputs
also writes a provenance JSON (command, seed, config hash, sorted output
names) next to them.

Exit status: 0 on success, 2 on any structural/configuration/parse/validation
error (one-line message on stderr).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import io
from .analysis import (
    aggregate_hierarchical,
    aggregate_removal,
    bootstrap_ranking,
    neighborhood_matrix,
)
from .augment import AugmentationEvent, Batch, compose
from .cube import HsiCube, SegmentationMask
from .errors import ConfigurationError, HsisegError
from .manifest import SCENARIOS, DatasetManifest, ImageRecord, validate_manifest
from .metrics import MetricRecord, evaluate_image
from .ood import ManipulationJob, synthesize_dataset
from .preprocess import rgb_reconstruct
from .rng import RngStream

log = logging.getLogger("hsiseg")

METRIC_NAMES = ("DSC", "NSD")


@dataclass(frozen=True)
class _Option:
    name: str  # long flag without leading dashes
    default: Any = None
    type: Callable[[str], Any] | None = str
    flag: bool = False
    repeat: bool = False
    required: bool = False
    path: bool = False  # path options may default from HSISEG_<NAME>
    choices: tuple[str, ...] | None = None
    help: str = ""

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")

    @property
    def env_var(self) -> str:
        return f"HSISEG_{self.dest.upper()}"


_CONFIG_OPTION = _Option("config", help="JSON file of option defaults (underscored keys)")


def _add_options(parser: argparse.ArgumentParser, options: Sequence[_Option]) -> None:
    for option in (*options, _CONFIG_OPTION):
        kwargs: dict[str, Any] = {"dest": option.dest, "default": None, "help": option.help}
        if option.flag:
            kwargs.update(action="store_const", const=True)
        elif option.repeat:
            kwargs.update(action="append", type=option.type)
        else:
            kwargs.update(type=option.type)
            if option.choices:
                kwargs.update(choices=option.choices)
        parser.add_argument(f"--{option.name}", **kwargs)


def _resolve(ns: argparse.Namespace, options: Sequence[_Option]) -> dict[str, Any]:
    """Merge flags, config file, environment paths, and defaults.

    Unknown config keys are rejected; environment variables supply defaults
    for path options only and never override a flag or config entry.
    """
    config_path = ns.config if ns.config is not None else os.environ.get(_CONFIG_OPTION.env_var)
    config: dict[str, Any] = {}
    if config_path is not None:
        try:
            config = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{config_path}: invalid JSON: {e.msg} (line {e.lineno})") from None
        if not isinstance(config, dict):
            raise ConfigurationError(f"{config_path}: config must be a JSON object")
        known = {o.dest for o in options}
        unknown = set(config) - known
        if unknown:
            raise ConfigurationError(f"{config_path}: unknown option(s) {sorted(unknown)}")
    resolved: dict[str, Any] = {}
    for option in options:
        value = getattr(ns, option.dest)
        if value is None:
            value = config.get(option.dest)
        if value is None and option.path:
            value = os.environ.get(option.env_var)
        if value is None:
            value = option.default
        if value is None and option.required:
            raise ConfigurationError(f"--{option.name} is required")
        if value is not None and option.choices and value not in option.choices:
            raise ConfigurationError(
                f"--{option.name}: {value!r} not one of {list(option.choices)}"
            )
        resolved[option.dest] = value
    return resolved


def _echo(command: str, resolved: dict[str, Any]) -> None:
    print(f"resolved config: {json.dumps({'command': command, **resolved}, sort_keys=True)}")


def _write_provenance(
    directory: Path, command: str, resolved: dict[str, Any], outputs: list[str]
) -> None:
    blob = json.dumps(resolved, sort_keys=True).encode()
    document = {
        "format_version": 1,
        "command": command,
        "seed": resolved.get("seed"),
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "outputs": sorted(outputs),
    }
    (directory / "provenance.json").write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def _load_background(path: str | None) -> HsiCube | None:
    return io.load_cube(path) if path else None


def _filter_scenario(manifest: DatasetManifest, scenario: str | None) -> DatasetManifest:
    if scenario is None:
        return manifest
    subset = manifest.scenario(scenario)
    if not subset.images:
        raise ConfigurationError(f"manifest has no images with scenario {scenario!r}")
    return subset


# --- synthesize ---------------------------------------------------------------

_SYNTHESIZE_OPTIONS = (
    _Option("manifest", required=True, path=True, help="source dataset manifest (JSON)"),
    _Option("labelmap", required=True, path=True, help="label map (JSON)"),
    _Option(
        "scenario",
        required=True,
        choices=("isolation_zero", "isolation_bgr", "removal_zero", "removal_bgr"),
        help="which out-of-context variant to synthesize",
    ),
    _Option("output", required=True, path=True, help="output directory"),
    _Option("background", path=True, help="context cube for *_bgr scenarios"),
    _Option("workers", default=1, type=int, help="parallel image workers"),
)


def _cmd_synthesize(ns: argparse.Namespace) -> int:
    resolved = _resolve(ns, _SYNTHESIZE_OPTIONS)
    _echo("synthesize", resolved)
    manifest = io.load_manifest(resolved["manifest"])
    labelmap = io.load_labelmap(resolved["labelmap"])
    job = ManipulationJob(
        source=manifest,
        scenario=resolved["scenario"],
        output_root=resolved["output"],
        background=_load_background(resolved["background"]),
    )
    out_manifest = synthesize_dataset(job, labelmap, workers=int(resolved["workers"]))
    root = Path(resolved["output"])
    io.save_manifest(out_manifest, root / "manifest.json")
    outputs = [Path(r.cube_path).name for r in out_manifest.images]
    outputs += [Path(r.mask_path).name for r in out_manifest.images]
    outputs.append("manifest.json")
    _write_provenance(root, "synthesize", resolved, outputs)
    for line in validate_manifest(out_manifest).format_lines():
        print(line)
    return 0


# --- augment ------------------------------------------------------------------

_AUGMENT_OPTIONS = (
    _Option("manifest", required=True, path=True, help="batch manifest: all images, in order"),
    _Option("pipeline", required=True, path=True, help="augmentation pipeline (JSON)"),
    _Option("seed", default=0, type=int, help="root seed for the run"),
    _Option("output", required=True, path=True, help="output directory"),
    _Option("workers", default=1, type=int, help="parallel load workers"),
    _Option("preview", flag=True, default=False, help="also write RGB preview PNGs"),
)


def _cmd_augment(ns: argparse.Namespace) -> int:
    resolved = _resolve(ns, _AUGMENT_OPTIONS)
    _echo("augment", resolved)
    manifest = io.load_manifest(resolved["manifest"])
    pipeline = io.load_pipeline(resolved["pipeline"])
    workers = int(resolved["workers"])

    def _load_pair(record: ImageRecord) -> tuple[HsiCube, SegmentationMask]:
        return io.load_cube(record.cube_path), io.load_mask(record.mask_path)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            items = list(pool.map(_load_pair, manifest.images))
    else:
        items = [_load_pair(r) for r in manifest.images]
    batch = Batch(items)

    events: list[AugmentationEvent] = []
    result = compose(pipeline, batch, RngStream(int(resolved["seed"])), events=events)
    skipped = sum(1 for e in events if not e.applied)
    if skipped:
        log.warning("%d augmentation application(s) skipped (probability gate or no-fit)", skipped)

    root = Path(resolved["output"])
    root.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []
    out_records = []
    for record, (cube, mask) in zip(manifest.images, result.items):
        cube_path = root / f"{record.image_id}.cube"
        mask_path = root / f"{record.image_id}.mask"
        io.save_cube(cube, cube_path)
        io.save_mask(mask, mask_path)
        outputs += [cube_path.name, mask_path.name]
        out_records.append(
            ImageRecord(
                image_id=record.image_id,
                subject_id=record.subject_id,
                split=record.split,
                occlusion=record.occlusion,
                scenario=record.scenario,
                cube_path=str(cube_path),
                mask_path=str(mask_path),
            )
        )
        if resolved["preview"]:
            outputs.append(_write_preview(cube, root / f"{record.image_id}.png"))
    io.save_manifest(DatasetManifest(out_records), root / "manifest.json")
    events_doc = {
        "format_version": 1,
        "events": [
            {
                "step": e.step,
                "kind": e.kind,
                "image_index": e.image_index,
                "applied": e.applied,
                "details": e.details,
            }
            for e in events
        ],
    }
    (root / "events.json").write_text(json.dumps(events_doc, indent=2) + "\n", encoding="utf-8")
    outputs += ["manifest.json", "events.json"]
    _write_provenance(root, "augment", resolved, outputs)
    print(f"augmented {len(result)} image(s) through {len(pipeline)} step(s); {len(events)} events")
    return 0


def _write_preview(cube: HsiCube, path: Path) -> str:
    try:
        from PIL import Image
    except ImportError:
        raise ConfigurationError(
            "--preview needs Pillow (install the 'preview' extra)"
        ) from None
    rgb = rgb_reconstruct(cube)
    Image.fromarray((rgb * 255.0 + 0.5).astype(np.uint8), mode="RGB").save(path)
    return path.name


# --- evaluate -----------------------------------------------------------------

_EVALUATE_OPTIONS = (
    _Option("manifest", required=True, path=True, help="reference manifest (masks + grouping)"),
    _Option("pred", required=True, path=True, help="directory of predicted masks, one <image_id>.mask each"),
    _Option("labelmap", required=True, path=True, help="label map (JSON)"),
    _Option("output", required=True, path=True, help="output records CSV path"),
    _Option("scenario", choices=SCENARIOS, help="only evaluate this scenario"),
    _Option("metric", choices=METRIC_NAMES, help="only emit this metric"),
    _Option("workers", default=1, type=int, help="parallel image workers"),
)


def _cmd_evaluate(ns: argparse.Namespace) -> int:
    resolved = _resolve(ns, _EVALUATE_OPTIONS)
    _echo("evaluate", resolved)
    manifest = _filter_scenario(io.load_manifest(resolved["manifest"]), resolved["scenario"])
    labelmap = io.load_labelmap(resolved["labelmap"])
    pred_root = Path(resolved["pred"])

    def _one(record: ImageRecord) -> list[MetricRecord]:
        reference = io.load_mask(record.mask_path)
        predicted = io.load_mask(pred_root / f"{record.image_id}.mask")
        return evaluate_image(
            predicted,
            reference,
            labelmap,
            image_id=record.image_id,
            subject_id=record.subject_id,
            scenario=record.scenario,
        )

    workers = int(resolved["workers"])
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_image = list(pool.map(_one, manifest.images))
    else:
        per_image = [_one(r) for r in manifest.images]
    records = [r for image_records in per_image for r in image_records]
    if resolved["metric"]:
        records = [r for r in records if r.metric == resolved["metric"]]

    out_path = Path(resolved["output"])
    io.save_records_csv(records, out_path)
    io.save_records_json(records, out_path.with_suffix(".json"))
    _write_provenance(
        out_path.parent, "evaluate", resolved, [out_path.name, out_path.with_suffix(".json").name]
    )
    print(f"wrote {len(records)} record(s) for {len(manifest.images)} image(s)")
    return 0


# --- aggregate ------------------------------------------------------------------

_AGGREGATE_OPTIONS = (
    _Option("records", required=True, path=True, help="metric records CSV"),
    _Option("output", required=True, path=True, help="output CSV path"),
    _Option("metric", choices=METRIC_NAMES, help="only aggregate this metric"),
    _Option(
        "removal-min",
        flag=True,
        default=False,
        help="collapse removal-scenario records to per-image minima first",
    ),
)


def _cmd_aggregate(ns: argparse.Namespace) -> int:
    resolved = _resolve(ns, _AGGREGATE_OPTIONS)
    _echo("aggregate", resolved)
    records = io.load_records_csv(resolved["records"])
    if resolved["removal_min"]:
        records = aggregate_removal(records)
    if resolved["metric"]:
        records = [r for r in records if r.metric == resolved["metric"]]
    result = aggregate_hierarchical(records)

    out_path = Path(resolved["output"])
    with out_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "metric", "class", "subject", "value", "sd", "n"])
        for s in result.per_subject:
            writer.writerow(["subject", s.metric, s.class_name, s.subject_id, repr(s.value), "", s.images])
        for c in result.per_class:
            writer.writerow(["class", c.metric, c.class_name, "", repr(c.value), "", c.subjects])
        for o in result.overall:
            writer.writerow(["overall", o.metric, "", "", repr(o.mean), repr(o.sd), o.classes])
    document = {
        "format_version": 1,
        "per_subject": [vars(s) for s in result.per_subject],
        "per_class": [vars(c) for c in result.per_class],
        "overall": [vars(o) for o in result.overall],
    }
    out_path.with_suffix(".json").write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    _write_provenance(
        out_path.parent, "aggregate", resolved, [out_path.name, out_path.with_suffix(".json").name]
    )
    for o in result.overall:
        print(f"{o.metric}: mean {o.mean:.4f} (SD {o.sd:.4f}) over {o.classes} class(es)")
    return 0


# --- rank -----------------------------------------------------------------------

_RANK_OPTIONS = (
    _Option(
        "method",
        repeat=True,
        required=True,
        help="NAME=RECORDS.csv, repeatable; order fixes the output order",
    ),
    _Option("metric", required=True, choices=METRIC_NAMES, help="which metric to rank on"),
    _Option("bootstrap-samples", default=1000, type=int, help="number of bootstrap samples"),
    _Option("seed", default=0, type=int, help="resampling seed"),
    _Option("output", required=True, path=True, help="output CSV path"),
    _Option(
        "no-replacement",
        flag=True,
        default=False,
        help="resample without replacement (degenerates to the point estimate)",
    ),
)


def _cmd_rank(ns: argparse.Namespace) -> int:
    resolved = _resolve(ns, _RANK_OPTIONS)
    _echo("rank", resolved)
    per_method: dict[str, list[tuple[str, str, float]]] = {}
    for item in resolved["method"]:
        name, sep, path = str(item).partition("=")
        if not sep or not name or not path:
            raise ConfigurationError(f"--method expects NAME=RECORDS.csv, got {item!r}")
        if name in per_method:
            raise ConfigurationError(f"duplicate method name {name!r}")
        records = [r for r in io.load_records_csv(path) if r.metric == resolved["metric"]]
        if not records:
            raise ConfigurationError(f"method {name!r}: no {resolved['metric']} records in {path}")
        per_method[name] = aggregate_hierarchical(records).subject_values(resolved["metric"])

    ranking = bootstrap_ranking(
        per_method,
        samples=int(resolved["bootstrap_samples"]),
        seed=int(resolved["seed"]),
        with_replacement=not resolved["no_replacement"],
    )

    out_path = Path(resolved["output"])
    with out_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "mean_rank", "median_rank", "ci_low", "ci_high"])
        for m in ranking.per_method:
            writer.writerow([m.method, repr(m.mean_rank), repr(m.median_rank), repr(m.ci_low), repr(m.ci_high)])
    document = {
        "format_version": 1,
        "samples": ranking.samples,
        "with_replacement": ranking.with_replacement,
        "methods": [
            {
                "method": m.method,
                "mean_rank": m.mean_rank,
                "median_rank": m.median_rank,
                "ci_low": m.ci_low,
                "ci_high": m.ci_high,
                "rank_frequencies": {str(k): v for k, v in sorted(m.rank_frequencies.items())},
            }
            for m in ranking.per_method
        ],
    }
    out_path.with_suffix(".json").write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    _write_provenance(
        out_path.parent, "rank", resolved, [out_path.name, out_path.with_suffix(".json").name]
    )
    for m in sorted(ranking.per_method, key=lambda m: m.mean_rank):
        print(
            f"{m.method}: mean rank {m.mean_rank:.3f}, median {m.median_rank:.1f}, "
            f"95% interval [{m.ci_low:.1f}, {m.ci_high:.1f}]"
        )
    return 0


# --- neighbors --------------------------------------------------------------------

_NEIGHBORS_OPTIONS = (
    _Option("manifest", required=True, path=True, help="manifest of masks to analyze"),
    _Option("labelmap", required=True, path=True, help="label map (JSON)"),
    _Option("output", required=True, path=True, help="output CSV path"),
    _Option("scenario", choices=SCENARIOS, help="only use this scenario"),
)


def _cmd_neighbors(ns: argparse.Namespace) -> int:
    resolved = _resolve(ns, _NEIGHBORS_OPTIONS)
    _echo("neighbors", resolved)
    manifest = _filter_scenario(io.load_manifest(resolved["manifest"]), resolved["scenario"])
    labelmap = io.load_labelmap(resolved["labelmap"])
    matrix = neighborhood_matrix(
        ((io.load_mask(r.mask_path), r.subject_id) for r in manifest.images), labelmap
    )

    out_path = Path(resolved["output"])
    with out_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", *matrix.class_names])
        for i, name in enumerate(matrix.class_names):
            writer.writerow([name, *(repr(v) for v in matrix.values[i])])
    document = {
        "format_version": 1,
        "class_names": matrix.class_names,
        "values": matrix.values.tolist(),
        "column_support": matrix.column_support.tolist(),
    }
    out_path.with_suffix(".json").write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    _write_provenance(
        out_path.parent, "neighbors", resolved, [out_path.name, out_path.with_suffix(".json").name]
    )
    for line in matrix.format_lines():
        print(line)
    return 0


# --- entry point --------------------------------------------------------------------

_COMMANDS = {
    "synthesize": (_cmd_synthesize, _SYNTHESIZE_OPTIONS, "write an out-of-context dataset variant"),
    "augment": (_cmd_augment, _AUGMENT_OPTIONS, "run an augmentation pipeline over a batch"),
    "evaluate": (_cmd_evaluate, _EVALUATE_OPTIONS, "score predicted masks against references"),
    "aggregate": (_cmd_aggregate, _AGGREGATE_OPTIONS, "hierarchically aggregate metric records"),
    "rank": (_cmd_rank, _RANK_OPTIONS, "bootstrap-rank methods from their records"),
    "neighbors": (_cmd_neighbors, _NEIGHBORS_OPTIONS, "class adjacency structure of a dataset"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsiseg",
        description="Spectral segmentation toolkit: synthesis, augmentation, scoring.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (_, options, help_text) in _COMMANDS.items():
        _add_options(subparsers.add_parser(name, help=help_text), options)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    ns = build_parser().parse_args(argv)
    handler = _COMMANDS[ns.command][0]
    try:
        return handler(ns)
    except HsisegError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
