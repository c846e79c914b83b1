"""Multi-cell coherent radar datasets: JSON manifest plus raw I/Q binary.

On disk a dataset is two files. The manifest is UTF-8 JSON::

    {
      "dataset_id": "135603",
      "collection_year": "1993-style",
      "num_cells": 14,
      "samples_per_cell": 131072,
      "polarization": "HH",
      "primary_cell": 8,
      "secondary_cells": [7, 9, 10],
      "sample_encoding": "float32-interleaved-IQ",
      "sample_file": "samples.bin",
      "notes": ""
    }

The sample file holds the cells concatenated in index order, each sample
stored as little-endian float32 I followed by float32 Q. ``sample_file`` is
resolved relative to the manifest and defaults to ``samples.bin``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ManifestParseError, NonFiniteSample, SizeMismatch, TooFewCells

log = logging.getLogger(__name__)

COLLECTION_YEARS = ("1993-style", "1998-style", "custom")
POLARIZATIONS = ("HH", "HV", "VH", "VV")
SAMPLE_ENCODINGS = ("float32-interleaved-IQ",)
ROLES = ("primary", "secondary", "clutter_only")
DEFAULT_SAMPLE_FILE = "samples.bin"

_IQ_DTYPE = np.dtype("<f4")


@dataclass(frozen=True)
class DatasetManifest:
    dataset_id: str
    num_cells: int
    samples_per_cell: int
    polarization: str = "HH"
    collection_year: str = "custom"
    primary_cell: int | None = None
    secondary_cells: tuple[int, ...] = ()
    sample_encoding: str = "float32-interleaved-IQ"
    sample_file: str = DEFAULT_SAMPLE_FILE
    notes: str = ""

    def __post_init__(self):
        object.__setattr__(self, "secondary_cells", tuple(int(c) for c in self.secondary_cells))
        problems = self.problems()
        if problems:
            raise ManifestParseError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not isinstance(self.dataset_id, str) or not self.dataset_id:
            out.append("dataset_id must be a non-empty string")
        for name in ("num_cells", "samples_per_cell"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                out.append(f"{name} must be a positive integer")
        if self.collection_year not in COLLECTION_YEARS:
            out.append(f"collection_year must be one of {COLLECTION_YEARS}")
        if self.polarization not in POLARIZATIONS:
            out.append(f"polarization must be one of {POLARIZATIONS}")
        if self.sample_encoding not in SAMPLE_ENCODINGS:
            out.append(f"sample_encoding must be one of {SAMPLE_ENCODINGS}")
        if out:
            return out
        if self.primary_cell is not None:
            if isinstance(self.primary_cell, bool) or not isinstance(self.primary_cell, int):
                out.append("primary_cell must be an integer or null")
            elif not 0 <= self.primary_cell < self.num_cells:
                out.append(f"primary_cell {self.primary_cell} outside [0, {self.num_cells})")
            elif self.primary_cell in self.secondary_cells:
                out.append("primary_cell also listed as secondary")
        if len(set(self.secondary_cells)) != len(self.secondary_cells):
            out.append("secondary_cells are not unique")
        bad = [c for c in self.secondary_cells if not 0 <= c < self.num_cells]
        if bad:
            out.append(f"secondary_cells out of range: {bad}")
        return out

    def role_of(self, cell_index: int) -> str:
        if cell_index == self.primary_cell:
            return "primary"
        if cell_index in self.secondary_cells:
            return "secondary"
        return "clutter_only"

    @property
    def expected_bytes(self) -> int:
        return self.num_cells * self.samples_per_cell * 2 * _IQ_DTYPE.itemsize

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "collection_year": self.collection_year,
            "num_cells": self.num_cells,
            "samples_per_cell": self.samples_per_cell,
            "polarization": self.polarization,
            "primary_cell": self.primary_cell,
            "secondary_cells": list(self.secondary_cells),
            "sample_encoding": self.sample_encoding,
            "sample_file": self.sample_file,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetManifest":
        if not isinstance(data, dict):
            raise ManifestParseError("manifest must be a JSON object")
        known = {"dataset_id", "collection_year", "num_cells", "samples_per_cell", "polarization",
                 "primary_cell", "secondary_cells", "sample_encoding", "sample_file", "notes"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ManifestParseError(f"unknown manifest fields: {unknown}")
        missing = [k for k in ("dataset_id", "num_cells", "samples_per_cell", "polarization") if k not in data]
        if missing:
            raise ManifestParseError(f"missing manifest fields: {missing}")
        secondary = data.get("secondary_cells", [])
        if not isinstance(secondary, list) or not all(
            isinstance(c, int) and not isinstance(c, bool) for c in secondary
        ):
            raise ManifestParseError("secondary_cells must be a list of integers")
        try:
            return cls(
                dataset_id=data["dataset_id"],
                collection_year=data.get("collection_year", "custom"),
                num_cells=data["num_cells"],
                samples_per_cell=data["samples_per_cell"],
                polarization=data["polarization"],
                primary_cell=data.get("primary_cell"),
                secondary_cells=tuple(secondary),
                sample_encoding=data.get("sample_encoding", "float32-interleaved-IQ"),
                sample_file=data.get("sample_file", DEFAULT_SAMPLE_FILE),
                notes=data.get("notes", ""),
            )
        except TypeError as exc:
            raise ManifestParseError(str(exc)) from exc


@dataclass(frozen=True)
class RangeCellSeries:
    """One range cell's complex return sequence (I real, Q imaginary)."""

    cell_index: int
    samples: np.ndarray = field(repr=False)
    role: str = "clutter_only"

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        samples = samples.astype(np.complex128, copy=True)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc
    return DatasetManifest.from_dict(data)


def load_dataset(manifest_path) -> tuple[list[RangeCellSeries], DatasetManifest]:
    """Load every cell declared by a manifest, ordered by cell index."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    sample_path = manifest_path.parent / manifest.sample_file
    size = sample_path.stat().st_size
    if size != manifest.expected_bytes:
        raise SizeMismatch(
            f"{sample_path}: {size} bytes, manifest declares {manifest.num_cells} x "
            f"{manifest.samples_per_cell} samples = {manifest.expected_bytes} bytes"
        )
    raw = np.fromfile(sample_path, dtype=_IQ_DTYPE)
    raw = raw.reshape(manifest.num_cells, manifest.samples_per_cell, 2)

    bad = ~np.isfinite(raw).all(axis=2)
    if bad.any():
        cell, offset = np.argwhere(bad)[0]
        raise NonFiniteSample(int(cell), int(offset))

    iq = raw[..., 0].astype(np.float64) + 1j * raw[..., 1].astype(np.float64)
    cells = [
        RangeCellSeries(cell_index=i, samples=iq[i], role=manifest.role_of(i))
        for i in range(manifest.num_cells)
    ]
    return cells, manifest


def write_dataset(manifest: DatasetManifest, cells, manifest_path) -> Path:
    """Write ``cells`` (index order) and the manifest; returns the sample file path."""
    manifest_path = Path(manifest_path)
    cells = sorted(cells, key=lambda c: c.cell_index)
    if [c.cell_index for c in cells] != list(range(manifest.num_cells)):
        raise ValueError("cells must cover indices 0..num_cells-1 exactly once")
    raw = np.empty((manifest.num_cells, manifest.samples_per_cell, 2), dtype=_IQ_DTYPE)
    for c in cells:
        if len(c) != manifest.samples_per_cell:
            raise SizeMismatch(f"cell {c.cell_index} has {len(c)} samples, manifest says {manifest.samples_per_cell}")
        raw[c.cell_index, :, 0] = c.samples.real
        raw[c.cell_index, :, 1] = c.samples.imag
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    sample_path = manifest_path.parent / manifest.sample_file
    raw.tofile(sample_path)
    manifest_path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    return sample_path


class ValidatedCells(list):
    """List of kept cells; ``dropped`` holds the excluded cell indices."""

    def __init__(self, cells, dropped=()):
        super().__init__(cells)
        self.dropped = tuple(dropped)


def validate_for_detection(cells, exclude_secondary: bool = True, min_cells: int = 3) -> ValidatedCells:
    """Drop secondary cells (when asked) and check enough cells remain.

    Returns the kept cells in their original order together with the indices
    that were dropped.
    """
    kept, dropped = [], []
    for c in cells:
        if exclude_secondary and c.role == "secondary":
            dropped.append(c.cell_index)
        else:
            kept.append(c)
    if len(kept) < min_cells:
        raise TooFewCells(f"{len(kept)} usable cells after exclusion, need at least {min_cells}")
    if dropped:
        log.debug("excluded secondary cells %s", dropped)
    return ValidatedCells(kept, tuple(dropped))
