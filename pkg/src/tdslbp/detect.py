"""End-to-end detection on one dataset and detection-rate evaluation on a corpus.

Per dataset: build one TDS image per cell, take its LBP histogram, train
the ball on every histogram (the target cell included, since labels are
unknown at detection time) and report the cell with the smallest margin.
Role labels are read only to score the verdict.
"""

from __future__ import annotations

import json
import logging
import math
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyCorpus, InputTooShort, TdsLbpError
from .ingest import load_dataset, validate_for_detection
from .lbp import LbpParams, lbp_histogram, tcr
from .ocsvm import KernelSpec, QpSettings, train
from .tds import TdsParams, build_tds

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
LOW_CONFIDENCE = "LOW_CONFIDENCE"


@dataclass(frozen=True)
class DetectionConfig:
    """Every knob of the pipeline. ``None`` means derive from the data."""

    segment_length: int | None = None
    height: int = 64
    window: str = "hamming"
    magnitude_scale: str = "db"
    nu: float = 0.4
    bandwidth: float | None = None
    exclude_secondary: bool = True
    low_confidence_db: float = 5.0
    max_iters: int = 20000
    tolerance: float = 1e-8
    rng_seed: int = 0
    threads: int = 1

    def tds_params(self, samples_per_cell: int) -> TdsParams:
        kw = dict(height=self.height, window=self.window, magnitude_scale=self.magnitude_scale)
        if self.segment_length is not None:
            kw["segment_length"] = self.segment_length
        return TdsParams.for_samples(samples_per_cell, **kw)

    def qp_settings(self) -> QpSettings:
        return QpSettings(nu=self.nu, max_iters=self.max_iters, tolerance=self.tolerance, rng_seed=self.rng_seed)

    def kernel(self, m: int) -> KernelSpec:
        return KernelSpec.auto(m) if self.bandwidth is None else KernelSpec(self.bandwidth)


def _encode_float(v):
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _decode_float(v):
    if v is None:
        return None
    return float(v)


@dataclass(frozen=True)
class CellScore:
    cell_index: int
    margin: float
    distance_sq: float
    role: str
    rank: int
    histogram: tuple[float, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class DetectionReport:
    dataset_id: str
    polarization: str | None
    collection_year: str
    per_cell: tuple[CellScore, ...]
    verdict_cell: int
    primary_cell: int | None
    correct: bool | None
    tcr_db: float
    label_tcr_db: float | None
    flags: tuple[str, ...]
    dropped_cells: tuple[int, ...]
    radius_sq: float
    kkt_residual: float
    converged: bool
    params_echo: dict = field(repr=False, default_factory=dict)

    @property
    def low_confidence(self) -> bool:
        return LOW_CONFIDENCE in self.flags

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "dataset_id": self.dataset_id,
            "polarization": self.polarization,
            "collection_year": self.collection_year,
            "verdict_cell": self.verdict_cell,
            "primary_cell": self.primary_cell,
            "correct": self.correct,
            "tcr_db": _encode_float(self.tcr_db),
            "label_tcr_db": _encode_float(self.label_tcr_db),
            "flags": list(self.flags),
            "dropped_cells": list(self.dropped_cells),
            "radius_sq": self.radius_sq,
            "kkt_residual": self.kkt_residual,
            "converged": self.converged,
            "per_cell": [
                {
                    "cell_index": c.cell_index,
                    "rank": c.rank,
                    "margin": c.margin,
                    "distance_sq": c.distance_sq,
                    "role": c.role,
                    "histogram": list(c.histogram),
                }
                for c in self.per_cell
            ],
            "params": self.params_echo,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectionReport":
        if data.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        return cls(
            dataset_id=data["dataset_id"],
            polarization=data["polarization"],
            collection_year=data["collection_year"],
            per_cell=tuple(
                CellScore(
                    cell_index=c["cell_index"],
                    margin=c["margin"],
                    distance_sq=c["distance_sq"],
                    role=c["role"],
                    rank=c["rank"],
                    histogram=tuple(c["histogram"]),
                )
                for c in data["per_cell"]
            ),
            verdict_cell=data["verdict_cell"],
            primary_cell=data["primary_cell"],
            correct=data["correct"],
            tcr_db=_decode_float(data["tcr_db"]),
            label_tcr_db=_decode_float(data["label_tcr_db"]),
            flags=tuple(data["flags"]),
            dropped_cells=tuple(data["dropped_cells"]),
            radius_sq=data["radius_sq"],
            kkt_residual=data["kkt_residual"],
            converged=data["converged"],
            params_echo=data["params"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [
            f"dataset {self.dataset_id}  pol {self.polarization or '-'}  cells {len(self.per_cell)}"
            + (f"  dropped {list(self.dropped_cells)}" if self.dropped_cells else ""),
            f"{'rank':>4}  {'cell':>4}  {'margin':>13}  {'distance_sq':>13}  role",
        ]
        for c in self.per_cell:
            lines.append(f"{c.rank:>4}  {c.cell_index:>4}  {c.margin:>13.6e}  {c.distance_sq:>13.6e}  {c.role}")
        verdict = f"verdict: cell {self.verdict_cell}  TCR {self.tcr_db:.2f} dB"
        if self.correct is not None:
            verdict += f"  ({'correct' if self.correct else 'WRONG'}, primary {self.primary_cell}"
            verdict += f", label TCR {self.label_tcr_db:.2f} dB)"
        if self.flags:
            verdict += "  [" + ",".join(self.flags) + "]"
        lines.append(verdict)
        return "\n".join(lines)


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _histogram_for(cell, tds_params, lbp_params):
    return lbp_histogram(build_tds(cell, tds_params), lbp_params)


def detect_dataset(cells, config: DetectionConfig | None = None, *, manifest=None, dropped=()) -> DetectionReport:
    """Run the four-step procedure on already validated cells."""
    config = config or DetectionConfig()
    cells = list(cells)
    n = len(cells[0].samples)
    tds_params = config.tds_params(n)
    if n < 2 * tds_params.segment_length:
        raise InputTooShort(f"{n} samples per cell; need at least 2 x {tds_params.segment_length}")
    lbp_params = LbpParams()
    settings = config.qp_settings()
    m = len(cells)
    kernel = config.kernel(m)

    hists = _map(lambda c: _histogram_for(c, tds_params, lbp_params), cells, config.threads)
    model = train(hists, settings, kernel)
    dist = model.distances_sq(hists)
    margins = model.radius_sq - dist

    order = sorted(range(m), key=lambda i: (margins[i], cells[i].cell_index))
    rank_of = {i: r for r, i in enumerate(order, start=1)}
    per_cell = tuple(
        CellScore(
            cell_index=cells[i].cell_index,
            margin=float(margins[i]),
            distance_sq=float(dist[i]),
            role=cells[i].role,
            rank=rank_of[i],
            histogram=tuple(float(v) for v in hists[i].bins),
        )
        for i in order
    )
    verdict_pos = order[0]
    verdict = cells[verdict_pos].cell_index
    verdict_tcr = tcr(hists[verdict_pos], [h for i, h in enumerate(hists) if i != verdict_pos])

    primary_pos = next((i for i, c in enumerate(cells) if c.role == "primary"), None)
    if primary_pos is None:
        correct, label_tcr, primary = None, None, None
    else:
        primary = cells[primary_pos].cell_index
        correct = verdict == primary
        label_tcr = tcr(hists[primary_pos], [h for i, h in enumerate(hists) if i != primary_pos])

    flags = (LOW_CONFIDENCE,) if verdict_tcr < config.low_confidence_db else ()
    params_echo = {
        "tds": tds_params.to_dict(),
        "lbp": lbp_params.to_dict(),
        "qp": settings.to_dict(),
        "kernel": {"kind": kernel.kind, "bandwidth": kernel.bandwidth},
        "exclude_secondary": config.exclude_secondary,
        "low_confidence_db": config.low_confidence_db,
        "num_training_cells": m,
    }
    return DetectionReport(
        dataset_id=manifest.dataset_id if manifest else "",
        polarization=manifest.polarization if manifest else None,
        collection_year=manifest.collection_year if manifest else "custom",
        per_cell=per_cell,
        verdict_cell=verdict,
        primary_cell=primary,
        correct=correct,
        tcr_db=float(verdict_tcr),
        label_tcr_db=None if label_tcr is None else float(label_tcr),
        flags=flags,
        dropped_cells=tuple(dropped),
        radius_sq=model.radius_sq,
        kkt_residual=model.kkt_residual,
        converged=model.converged,
        params_echo=params_echo,
    )


def detect_loaded(cells, manifest, config: DetectionConfig | None = None) -> DetectionReport:
    """Validate (secondary exclusion) then detect."""
    config = config or DetectionConfig()
    kept = validate_for_detection(cells, exclude_secondary=config.exclude_secondary)
    return detect_dataset(kept, config, manifest=manifest, dropped=kept.dropped)


def detect_manifest(manifest_path, config: DetectionConfig | None = None) -> DetectionReport:
    cells, manifest = load_dataset(manifest_path)
    return detect_loaded(cells, manifest, config)


@dataclass(frozen=True)
class FileFailure:
    source: str
    error: str
    collection_year: str = "custom"
    polarization: str | None = None


@dataclass(frozen=True)
class CorpusResult:
    per_file: tuple[DetectionReport, ...]
    failures: tuple[FileFailure, ...] = ()

    def _groups(self):
        """(collection_year, polarization) -> [correct flags]; failures count as wrong."""
        groups = defaultdict(list)
        for r in self.per_file:
            if r.correct is not None:
                groups[(r.collection_year, r.polarization)].append(bool(r.correct))
        for f in self.failures:
            groups[(f.collection_year, f.polarization)].append(False)
        return groups

    @property
    def detection_rate_by_pol(self) -> dict[str, float]:
        by_pol = defaultdict(list)
        for (_, pol), flags in self._groups().items():
            by_pol[pol].extend(flags)
        return {pol: sum(v) / len(v) for pol, v in sorted(by_pol.items(), key=lambda kv: str(kv[0]))}

    @property
    def detection_rate_by_group(self) -> dict[str, dict[str, float]]:
        out = defaultdict(dict)
        for (year, pol), flags in sorted(self._groups().items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
            out[year][pol] = sum(flags) / len(flags)
        return dict(out)

    @property
    def overall_rate(self) -> float | None:
        flags = [f for v in self._groups().values() for f in v]
        return sum(flags) / len(flags) if flags else None

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "files": [r.to_dict() for r in self.per_file],
            "failures": [vars(f) for f in self.failures],
            "detection_rate_by_group": {
                year: {str(p): v for p, v in pols.items()} for year, pols in self.detection_rate_by_group.items()
            },
            "detection_rate_by_pol": {str(p): v for p, v in self.detection_rate_by_pol.items()},
            "overall_rate": self.overall_rate,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusResult":
        if data.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported corpus schema {data.get('schema')!r}")
        return cls(
            per_file=tuple(DetectionReport.from_dict(r) for r in data["files"]),
            failures=tuple(FileFailure(**f) for f in data["failures"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        """Aligned text: one block per collection group, then a total block."""
        groups = self._groups()
        lines = []

        def block(title, rows):
            lines.append(f"{title:<12}{'rate':>8}{'correct':>10}")
            for pol, flags in rows:
                lines.append(f"{str(pol):<12}{sum(flags) / len(flags):>8.2f}{f'{sum(flags)}/{len(flags)}':>10}")

        for year in sorted({y for y, _ in groups}):
            block(year, [(p, groups[(y, p)]) for (y, p) in sorted(groups, key=lambda k: str(k[1])) if y == year])
        total = defaultdict(list)
        for (_, pol), flags in groups.items():
            total[pol].extend(flags)
        block("Total", sorted(total.items(), key=lambda kv: str(kv[0])))
        return "\n".join(lines)


def evaluate_datasets(loaders, config: DetectionConfig | None = None, threads: int | None = None) -> CorpusResult:
    """Evaluate datasets given as zero-argument callables returning ``(cells, manifest)``.

    ``loaders`` may also hold ``(label, callable)`` pairs; the label names
    the dataset in failure records. A dataset without a primary cell, or one
    whose detection raises, is recorded as a failure and counts as wrong.
    """
    config = config or DetectionConfig()
    items = [it if isinstance(it, tuple) else (f"dataset-{i}", it) for i, it in enumerate(loaders)]
    if not items:
        raise EmptyCorpus("no datasets to evaluate")
    threads = config.threads if threads is None else threads

    def one(item):
        label, loader = item
        year, pol = "custom", None
        try:
            cells, manifest = loader()
            year, pol = manifest.collection_year, manifest.polarization
            if manifest.primary_cell is None:
                return FileFailure(label, "manifest declares no primary cell", year, pol)
            return detect_loaded(cells, manifest, config)
        except (TdsLbpError, OSError, ValueError) as exc:
            log.warning("%s failed: %s", label, exc)
            return FileFailure(label, f"{type(exc).__name__}: {exc}", year, pol)

    results = _map(one, items, threads)
    return CorpusResult(
        per_file=tuple(r for r in results if isinstance(r, DetectionReport)),
        failures=tuple(r for r in results if isinstance(r, FileFailure)),
    )


def evaluate_corpus(manifest_paths, config: DetectionConfig | None = None, threads: int | None = None) -> CorpusResult:
    """Detect on every manifest and aggregate detection rates."""
    paths = [Path(p) for p in manifest_paths]
    if not paths:
        raise EmptyCorpus("no manifests given")
    return evaluate_datasets([(str(p), lambda p=p: load_dataset(p)) for p in paths], config, threads)


def default_threads() -> int:
    return os.cpu_count() or 1
