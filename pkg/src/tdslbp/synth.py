"""Labeled synthetic multi-cell I/Q datasets with sea-clutter-like TDS texture.

Every cell is a handful of narrowband clutter components whose Doppler
centers swing slowly inside ``+-clutter_band_halfwidth`` (one swing every
``clutter_drift_period`` seconds), each with a slow Rayleigh fading envelope,
plus circular white noise. The target cell also carries short tone bursts
arriving as a Poisson process; burst tones are drawn from
``+-target_speckle_band`` and light up the mid/high Doppler band of the TDS.

Cells draw from independent child streams of ``rng_seed``; the target bursts
use their own stream so that with ``target_speckle_rate=0`` the target cell
is statistically identical to any other cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidConfig
from .ingest import POLARIZATIONS, DatasetManifest, RangeCellSeries


@dataclass(frozen=True)
class SynthConfig:
    rng_seed: int
    num_cells: int = 11
    samples_per_cell: int = 2**17
    prf: float = 1000.0
    clutter_band_halfwidth: float = 100.0
    clutter_drift_period: float = 10.0
    target_cell: int = 5
    target_speckle_rate: float = 2.0
    # burst tones are drawn from [lo, hi] Hz with a random sign
    target_speckle_band: tuple[float, float] = (150.0, 450.0)
    noise_floor: float = 10.0 ** (-30.0 / 20.0)
    clutter_components: int = 6
    clutter_coherence_time: float = 0.5
    target_speckle_amplitude: float = 1.0
    target_burst_duration: tuple[float, float] = (0.1, 0.5)
    polarization: str = "HH"
    collection_year: str = "custom"
    dataset_id: str | None = None
    secondary_cells: tuple[int, ...] = field(default=())

    def __post_init__(self):
        problems = []
        if self.num_cells < 1 or self.samples_per_cell < 1:
            problems.append("num_cells and samples_per_cell must be positive")
        if not 0 <= self.target_cell < self.num_cells:
            problems.append(f"target_cell {self.target_cell} outside [0, {self.num_cells})")
        nyquist = self.prf / 2
        if not 0 < self.clutter_band_halfwidth < nyquist:
            problems.append("clutter_band_halfwidth must lie in (0, prf/2)")
        lo, hi = self.target_speckle_band
        if not 0 <= lo < hi < nyquist:
            problems.append("target_speckle_band must satisfy 0 <= lo < hi < prf/2")
        dlo, dhi = self.target_burst_duration
        if not 0 < dlo <= dhi:
            problems.append("target_burst_duration must satisfy 0 < lo <= hi")
        if self.target_speckle_rate < 0 or self.noise_floor < 0 or self.target_speckle_amplitude < 0:
            problems.append("rates and amplitudes must be non-negative")
        if self.clutter_drift_period <= 0 or self.clutter_coherence_time <= 0:
            problems.append("clutter_drift_period and clutter_coherence_time must be positive")
        if self.clutter_components < 1:
            problems.append("clutter_components must be >= 1")
        if self.polarization not in POLARIZATIONS:
            problems.append(f"polarization must be one of {POLARIZATIONS}")
        if self.target_cell in self.secondary_cells:
            problems.append("target_cell cannot also be secondary")
        if any(not 0 <= c < self.num_cells for c in self.secondary_cells):
            problems.append("secondary_cells out of range")
        if problems:
            raise InvalidConfig("; ".join(problems))

    @classmethod
    def style_1993(cls, rng_seed: int, **overrides) -> "SynthConfig":
        """11 cells of 2**17 samples, target in cell 5."""
        overrides.setdefault("collection_year", "1993-style")
        return cls(rng_seed=rng_seed, **overrides)

    @classmethod
    def style_1998(cls, rng_seed: int, **overrides) -> "SynthConfig":
        """28 cells of 60000 samples, target in cell 13."""
        kw = dict(num_cells=28, samples_per_cell=60000, target_cell=13, collection_year="1998-style")
        kw.update(overrides)
        return cls(rng_seed=rng_seed, **kw)

    def with_seed(self, rng_seed: int) -> "SynthConfig":
        return replace(self, rng_seed=rng_seed)


def _fading(rng: np.random.Generator, n: int, fs: float, coherence: float) -> np.ndarray:
    """Unit-power complex Gaussian process with ~``coherence`` seconds correlation."""
    # draw on a coarse grid, smooth with a Gaussian kernel, interpolate up
    step = max(1, int(coherence * fs / 20))
    coarse_n = n // step + 2
    sigma = coherence * fs / step / 2
    half = int(np.ceil(4 * sigma))
    white = rng.standard_normal((2, coarse_n + 2 * half))
    taps = np.exp(-0.5 * (np.arange(-half, half + 1) / sigma) ** 2)
    smooth = np.array([np.convolve(w, taps, mode="valid") for w in white])
    z = smooth[0] + 1j * smooth[1]
    t_coarse = np.arange(coarse_n) * step
    t = np.arange(n)
    env = np.interp(t, t_coarse, z.real) + 1j * np.interp(t, t_coarse, z.imag)
    return env / np.sqrt(np.mean(np.abs(env) ** 2))


def _clutter(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    n, fs, hw = cfg.samples_per_cell, cfg.prf, cfg.clutter_band_halfwidth
    t = np.arange(n) / fs
    omega = 2 * np.pi / cfg.clutter_drift_period
    weights = rng.exponential(size=cfg.clutter_components)
    weights /= weights.sum()
    x = np.zeros(n, dtype=np.complex128)
    for k in range(cfg.clutter_components):
        center = rng.uniform(-0.4, 0.4) * hw
        depth = rng.uniform(0.3, 0.9) * (hw - abs(center))
        drift_phase = rng.uniform(0, 2 * np.pi)
        # instantaneous Doppler: center + depth * sin(omega t + drift_phase)
        phase = 2 * np.pi * (center * t - depth / omega * np.cos(omega * t + drift_phase))
        phase += rng.uniform(0, 2 * np.pi)
        x += np.sqrt(weights[k]) * _fading(rng, n, fs, cfg.clutter_coherence_time) * np.exp(1j * phase)
    noise = rng.standard_normal((2, n))
    x += cfg.noise_floor * (noise[0] + 1j * noise[1]) / np.sqrt(2)
    return x


def _bursts(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    n, fs = cfg.samples_per_cell, cfg.prf
    x = np.zeros(n, dtype=np.complex128)
    duration = n / fs
    count = rng.poisson(cfg.target_speckle_rate * duration)
    lo, hi = cfg.target_speckle_band
    dlo, dhi = cfg.target_burst_duration
    for _ in range(count):
        start = int(rng.uniform(0, duration) * fs)
        length = max(2, int(rng.uniform(dlo, dhi) * fs))
        freq = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
        phase0 = rng.uniform(0, 2 * np.pi)
        stop = min(n, start + length)
        k = np.arange(stop - start)
        env = np.hanning(length)[: stop - start]
        x[start:stop] += cfg.target_speckle_amplitude * env * np.exp(1j * (2 * np.pi * freq * k / fs + phase0))
    return x


def generate(config: SynthConfig) -> tuple[list[RangeCellSeries], DatasetManifest]:
    """Generate all cells and the matching manifest; deterministic in ``rng_seed``."""
    root = np.random.SeedSequence(config.rng_seed)
    cell_seqs = root.spawn(config.num_cells)
    target_rng = np.random.default_rng(root.spawn(1)[0])

    manifest = DatasetManifest(
        dataset_id=config.dataset_id or f"synth-{config.rng_seed}",
        collection_year=config.collection_year,
        num_cells=config.num_cells,
        samples_per_cell=config.samples_per_cell,
        polarization=config.polarization,
        primary_cell=config.target_cell,
        secondary_cells=tuple(config.secondary_cells),
        notes=f"synthetic; prf={config.prf:g} Hz; seed={config.rng_seed}",
    )
    cells = []
    for i, seq in enumerate(cell_seqs):
        x = _clutter(config, np.random.default_rng(seq))
        if i == config.target_cell:
            x = x + _bursts(config, target_rng)
        cells.append(RangeCellSeries(cell_index=i, samples=x, role=manifest.role_of(i)))
    return cells, manifest
