"""Time-Doppler spectra (TDS) images from one range cell.

The sequence is cut into non-overlapping segments of ``segment_length``
samples; each segment's windowed spectrum becomes one image column. Columns
are pooled down to ``height`` Doppler bins, stacked left to right in time and
quantized to 8 bits.

Row 0 of :attr:`TdsImage.pixels` is the most negative Doppler bin and zero
Doppler sits at row ``height // 2``; :func:`export_image` flips the raster so
that the written file shows high Doppler at the top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateImage, ImageWriteError, InputTooShort, InvalidConfig

WINDOWS = ("hamming", "rectangular")
SCALES = ("db", "linear")

# dB floor, relative to the image peak so positive rescaling of the input
# only shifts the log image by a constant.
DB_FLOOR = -120.0


@dataclass(frozen=True)
class TdsParams:
    segment_length: int = 512
    height: int = 64
    window: str = "hamming"
    magnitude_scale: str = "db"
    shift_zero_center: bool = True

    def __post_init__(self):
        l, h = self.segment_length, self.height
        if isinstance(l, bool) or not isinstance(l, (int, np.integer)) or l < 1 or l & (l - 1):
            raise InvalidConfig(f"segment_length must be a power of two, got {l}")
        if isinstance(h, bool) or not isinstance(h, (int, np.integer)) or h < 8 or l % h:
            raise InvalidConfig(f"height must be >= 8 and divide segment_length {l}, got {h}")
        if self.window not in WINDOWS:
            raise InvalidConfig(f"window must be one of {WINDOWS}")
        if self.magnitude_scale not in SCALES:
            raise InvalidConfig(f"magnitude_scale must be one of {SCALES}")

    @classmethod
    def for_samples(cls, samples_per_cell: int, **overrides) -> "TdsParams":
        """Defaults keyed on record length: 512-sample segments for 2**17-long records, 256 below that."""
        overrides.setdefault("segment_length", 512 if samples_per_cell >= 2**17 else 256)
        return cls(**overrides)

    def to_dict(self) -> dict:
        return {
            "segment_length": self.segment_length,
            "height": self.height,
            "window": self.window,
            "magnitude_scale": self.magnitude_scale,
            "shift_zero_center": self.shift_zero_center,
        }


@dataclass(frozen=True)
class TdsImage:
    pixels: np.ndarray = field(repr=False)
    cell_index: int
    params: TdsParams

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


def doppler_spectra(samples, params: TdsParams) -> np.ndarray:
    """Pooled per-segment spectra before normalization, shape (height, width).

    Values are magnitudes (or dB magnitudes) averaged over each block of
    ``segment_length // height`` adjacent Doppler bins.
    """
    x = np.asarray(samples)
    n, l, h = x.shape[0], params.segment_length, params.height
    if n < l:
        raise InputTooShort(f"{n} samples is shorter than one segment of {l}")
    w = n // l
    segments = x[: w * l].reshape(w, l)
    if params.window == "hamming":
        segments = segments * np.hamming(l)
    mag = np.abs(np.fft.fft(segments, axis=1))

    peak = mag.max()
    if not peak > 0:
        raise DegenerateImage("all spectra are zero")
    if params.magnitude_scale == "db":
        mag = 20.0 * np.log10(np.maximum(mag, peak * 10.0 ** (DB_FLOOR / 20.0)))
    if params.shift_zero_center:
        mag = np.fft.fftshift(mag, axes=1)
    pooled = mag.reshape(w, h, l // h).mean(axis=2)
    return pooled.T


def quantize(values: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 255] and round half up to uint8."""
    lo, hi = values.min(), values.max()
    if not hi > lo:
        raise DegenerateImage("image is constant before normalization")
    scaled = 255.0 * (values - lo) / (hi - lo)
    return np.floor(scaled + 0.5).astype(np.uint8)


def build_tds(cell, params: TdsParams | None = None) -> TdsImage:
    """Build the 8-bit TDS image of one :class:`~tdslbp.ingest.RangeCellSeries`."""
    if params is None:
        params = TdsParams.for_samples(len(cell.samples))
    pixels = quantize(doppler_spectra(cell.samples, params))
    pixels.setflags(write=False)
    return TdsImage(pixels=pixels, cell_index=cell.cell_index, params=params)


def doppler_row(f0: float, prf: float, height: int) -> int:
    """Row of a centered TDS image that holds Doppler frequency ``f0``."""
    return int(np.floor(((f0 / prf + 0.5) % 1.0) * height))


def encode_pgm(raster) -> bytes:
    """Binary P5 encoding of an 8-bit raster, rows written in array order."""
    raster = np.ascontiguousarray(raster, dtype=np.uint8)
    if raster.ndim != 2:
        raise ValueError("raster must be two-dimensional")
    rows, cols = raster.shape
    return b"P5\n%d %d\n255\n" % (cols, rows) + raster.tobytes()


def export_image(img: TdsImage, path, format: str | None = None) -> Path:
    """Write ``img`` as binary PGM or grayscale PNG, high Doppler at the top.

    ``format`` defaults to the file extension (``.pgm`` or ``.png``).
    """
    path = Path(path)
    if format is None:
        format = path.suffix.lower().lstrip(".") or "pgm"
    if format not in ("pgm", "png"):
        raise ValueError(f"unsupported image format {format!r}")
    raster = np.ascontiguousarray(img.pixels[::-1])
    try:
        if format == "pgm":
            path.write_bytes(encode_pgm(raster))
        else:
            from PIL import Image

            Image.fromarray(raster).save(path, format="PNG")
    except OSError as exc:
        raise ImageWriteError(f"cannot write {path}: {exc}") from exc
    return path
