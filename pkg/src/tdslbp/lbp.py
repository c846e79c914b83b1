"""Uniform local binary patterns (P=8, R=1) and their 9-bin histograms.

A neighbor contributes a 1 when its intensity is >= the center. Patterns
with at most two 0/1 transitions around the circle are uniform and coded by
their number of ones (0..8); every other pattern is dropped from the
histogram, which is normalized over the uniform pixels only.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AllNonUniform, ImageTooSmall, InvalidConfig, TooFew, ZeroClutterDeviation

NUM_BINS = 9
NON_UNIFORM = 9

# (row, col) offsets of the 8 neighbors at R=1: east first, then
# counter-clockwise with row 0 at the top.
NEIGHBOR_OFFSETS = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class LbpParams:
    P: int = 8
    R: int = 1
    mapping: str = "uniform_riu"

    def __post_init__(self):
        if self.P != 8 or self.R != 1:
            raise InvalidConfig(f"only P=8, R=1 is supported, got P={self.P}, R={self.R}")
        if self.mapping != "uniform_riu":
            raise InvalidConfig(f"unknown LBP mapping {self.mapping!r}")

    def to_dict(self) -> dict:
        return {"P": self.P, "R": self.R, "mapping": self.mapping}


@dataclass(frozen=True)
class LbpHistogram:
    bins: np.ndarray = field(repr=False)
    pixel_count: int
    cell_index: int = -1

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.float64).copy()
        if bins.shape != (NUM_BINS,):
            raise ValueError(f"histogram needs {NUM_BINS} bins, got shape {bins.shape}")
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)


def lbp_code(patch) -> int:
    """Uniform LBP code of a 3x3 patch; returns ``NON_UNIFORM`` (9) otherwise."""
    patch = np.asarray(patch)
    if patch.shape != (3, 3):
        raise ValueError("patch must be 3x3")
    center = patch[1, 1]
    bits = [int(patch[1 + dr, 1 + dc] >= center) for dr, dc in NEIGHBOR_OFFSETS]
    transitions = sum(bits[p] != bits[p - 1] for p in range(8))
    return sum(bits) if transitions <= 2 else NON_UNIFORM


def lbp_codes(pixels) -> np.ndarray:
    """Codes for every interior pixel, shape (H-2, W-2); border pixels are skipped."""
    g = np.asarray(pixels)
    if g.ndim != 2 or g.shape[0] < 3 or g.shape[1] < 3:
        raise ImageTooSmall(f"LBP needs an image of at least 3x3, got {g.shape}")
    rows, cols = g.shape
    center = g[1:-1, 1:-1]
    bits = np.stack(
        [g[1 + dr : rows - 1 + dr, 1 + dc : cols - 1 + dc] >= center for dr, dc in NEIGHBOR_OFFSETS]
    )
    ones = bits.sum(axis=0)
    transitions = (bits != np.roll(bits, 1, axis=0)).sum(axis=0)
    return np.where(transitions <= 2, ones, NON_UNIFORM)


def lbp_histogram(img, params: LbpParams | None = None) -> LbpHistogram:
    """Normalized 9-bin uniform-LBP histogram of a TDS image (or bare 2-D array)."""
    pixels = getattr(img, "pixels", img)
    cell_index = getattr(img, "cell_index", -1)
    counts = np.bincount(lbp_codes(pixels).ravel(), minlength=NUM_BINS + 1)[:NUM_BINS]
    n = int(counts.sum())
    if n == 0:
        raise AllNonUniform(f"no uniform LBP patterns in image of cell {cell_index}", cell_index)
    return LbpHistogram(bins=counts / n, pixel_count=n, cell_index=cell_index)


def _as_matrix(histograms) -> np.ndarray:
    return np.array([getattr(h, "bins", h) for h in histograms], dtype=np.float64)


def mean_and_std(histograms) -> tuple[np.ndarray, np.ndarray]:
    """Component-wise mean and population standard deviation."""
    x = _as_matrix(histograms)
    if x.shape[0] < 2:
        raise TooFew("need at least two histograms")
    return x.mean(axis=0), x.std(axis=0)


def tcr(outlier, clutter) -> float:
    """Target-to-clutter deviation ratio in dB.

    Squared norm of the outlier's deviation from the clutter mean over the
    squared norm of the clutter standard deviation. Returns ``-inf`` when the
    outlier equals the clutter mean and ``+inf`` (with a
    :class:`ZeroClutterDeviation` warning) when the clutter has no spread.
    """
    mean, std = mean_and_std(clutter)
    x0 = np.asarray(getattr(outlier, "bins", outlier), dtype=np.float64)
    dev = np.abs(x0 - mean)
    num, den = float(dev @ dev), float(std @ std)
    if den == 0.0:
        warnings.warn("clutter histograms have zero deviation; TCR is +inf", ZeroClutterDeviation, stacklevel=2)
        return float("inf")
    if num == 0.0:
        return float("-inf")
    return 10.0 * np.log10(num / den)


def histograms_to_csv(histograms) -> str:
    """CSV text with header ``cell,code0..code8,pixels`` and 12 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["cell"] + [f"code{k}" for k in range(NUM_BINS)] + ["pixels"])
    for h in histograms:
        writer.writerow([h.cell_index] + [f"{v:.12g}" for v in h.bins] + [h.pixel_count])
    return buf.getvalue()
