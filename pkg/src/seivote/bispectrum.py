"""Bispectrum estimation and conversion to color feature images.

The bispectrum of a discretely sampled complex signal is the 2-D Fourier
transform over circular lags of the third-order cumulant
c(t1, t2) = mean_t[x*(t) x(t + t1) x(t + t2)] of the mean-removed signal.
Being third order it responds to skewed, nonlinear structure and averages
out Gaussian noise, which is what makes it a transmitter fingerprint.

The feature pipeline mirrors a fixed recipe: N x N complex grid ->
block-summed power -> per-image 0..255 quantization -> jet colorization,
giving an (N/block) x (N/block) x 3 8-bit image.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_ORACLE_MAX_POINTS = 32
_FEATURE_MAGIC = b"BSP1"


@dataclass(frozen=True)
class BispectrumGrid:
    """Full complex N x N bispectrum indexed by discrete frequency pair."""

    values: np.ndarray
    n_points: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"bispectrum grid must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("bispectrum grid contains non-finite entries")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class BispectrumImage:
    """Downsampled, quantized, colorized bispectrum (H x W x 3, uint8)."""

    pixels: np.ndarray
    source_emitter: int | None = None

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise ValueError(f"expected H x W x 3 uint8 pixels, got {p.shape} {p.dtype}")
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def _as_samples(sample) -> np.ndarray:
    x = getattr(sample, "samples", sample)
    return np.asarray(x, dtype=np.complex128)


def bispectrum_fft(sample) -> BispectrumGrid:
    """Estimate the bispectrum of one sample via the frequency domain.

    The sample mean is removed, then B(k1, k2) =
    X(k1) X(k2) conj(X((k1 + k2) mod N)) / N with X the length-N DFT.
    This equals the 2-D DFT over circular lags of the single-realization
    third-order cumulant (see ``bispectrum_lag_oracle``) but costs O(N^2)
    after the transform.
    """
    x = _as_samples(sample)
    n = x.size
    if n < 4:
        raise ValueError(f"need at least 4 points for a bispectrum, got {n}")
    x = x - x.mean()
    spec = np.fft.fft(x)
    k = np.arange(n)
    sum_idx = (k[:, None] + k[None, :]) % n
    values = np.outer(spec, spec) * np.conj(spec[sum_idx]) / n
    return BispectrumGrid(values=values, n_points=n)


def bispectrum_lag_oracle(sample) -> BispectrumGrid:
    """Direct lag-domain transcription of the bispectrum definition.

    Computes c(t1, t2) = (1/N) sum_t x*(t) x(t + t1) x(t + t2) with
    circular indexing on mean-removed data, then the explicit 2-D DFT
    over the lags. O(N^4)-ish; a test oracle only, refused for N > 32.
    """
    x = _as_samples(sample)
    n = x.size
    if n < 4:
        raise ValueError(f"need at least 4 points for a bispectrum, got {n}")
    if n > _ORACLE_MAX_POINTS:
        raise ValueError(
            f"lag-domain oracle is limited to N <= {_ORACLE_MAX_POINTS}, got {n}"
        )
    x = x - x.mean()
    cum = np.zeros((n, n), dtype=np.complex128)
    for t1 in range(n):
        for t2 in range(n):
            acc = 0.0 + 0.0j
            for t in range(n):
                acc += np.conj(x[t]) * x[(t + t1) % n] * x[(t + t2) % n]
            cum[t1, t2] = acc / n
    # Explicit DFT matrices over the two lag axes.
    k = np.arange(n)
    dft = np.exp(-2j * np.pi * np.outer(k, k) / n)
    values = dft @ cum @ dft.T
    return BispectrumGrid(values=values, n_points=n)


def downsample_power(grid: BispectrumGrid, block: int = 5) -> np.ndarray:
    """Sum |B|^2 over non-overlapping block x block tiles.

    A 1120-side grid with block 5 becomes the 224 x 224 power image; total
    power is conserved exactly (the tiles partition the grid).
    """
    n = grid.values.shape[0]
    if block < 1 or n % block != 0:
        raise ValueError(f"grid side {n} is not divisible by block {block}")
    side = n // block
    power = grid.values.real**2 + grid.values.imag**2
    return power.reshape(side, block, side, block).sum(axis=(1, 3))


def quantize_rescale(power: np.ndarray) -> np.ndarray:
    """Per-image min-max map of a power grid to integers 0..255.

    q = round(255 (v - min) / (max - min)) with rounding half away from
    zero; a constant grid maps to all zeros.
    """
    p = np.asarray(power, dtype=np.float64)
    if np.any(np.isnan(p)):
        raise ValueError("power grid contains NaN")
    lo = p.min()
    hi = p.max()
    if hi == lo:
        return np.zeros(p.shape, dtype=np.uint8)
    scaled = 255.0 * (p - lo) / (hi - lo)
    return np.floor(scaled + 0.5).astype(np.uint8)


# Jet colormap segment offsets (low, high) per channel; each channel is
# clamp(min(4v + lo, -4v + hi), 0, 1) for v in [0, 1].
_JET_SEGMENTS = ((-1.5, 4.5), (-0.5, 3.5), (0.5, 2.5))


def apply_colormap(quantized: np.ndarray, source_emitter: int | None = None) -> BispectrumImage:
    """Colorize an 8-bit intensity grid with the jet colormap.

    Red, green and blue pick out high, medium and low intensity bands
    respectively; output channels are 8-bit with half-away-from-zero
    rounding.
    """
    q = np.asarray(quantized)
    if q.min() < 0 or q.max() > 255:
        raise ValueError("quantized values must lie in [0, 255]")
    v = q.astype(np.float64) / 255.0
    channels = []
    for lo, hi in _JET_SEGMENTS:
        c = np.clip(np.minimum(4.0 * v + lo, -4.0 * v + hi), 0.0, 1.0)
        channels.append(np.floor(255.0 * c + 0.5).astype(np.uint8))
    pixels = np.stack(channels, axis=-1)
    return BispectrumImage(pixels=pixels, source_emitter=source_emitter)


def featurize(sample, block: int = 5, log_power: bool = False) -> BispectrumImage:
    """Full pipeline: bispectrum -> block power -> quantize -> colorize.

    ``log_power`` switches the quantizer input to log1p of the power, a
    variant kept alongside the plain linear rescale.
    """
    grid = bispectrum_fft(sample)
    power = downsample_power(grid, block=block)
    if log_power:
        power = np.log1p(power)
    quantized = quantize_rescale(power)
    emitter = getattr(sample, "emitter_id", None)
    return apply_colormap(quantized, source_emitter=emitter)


def write_feature(image: BispectrumImage, path: str | Path) -> None:
    """Write the 12-byte BSP1 header plus row-major interleaved pixels."""
    header = _FEATURE_MAGIC + struct.pack(
        "<4H", image.width, image.height, 3, 0
    )
    Path(path).write_bytes(header + image.pixels.tobytes())


def read_feature(path: str | Path) -> BispectrumImage:
    """Read a BSP1 feature file written by ``write_feature``."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != _FEATURE_MAGIC:
        raise ValueError(f"{path}: not a BSP1 feature file")
    width, height, channels, _ = struct.unpack("<4H", raw[4:12])
    if channels != 3:
        raise ValueError(f"{path}: expected 3 channels, got {channels}")
    expected = width * height * channels
    payload = raw[12:]
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return BispectrumImage(pixels=pixels.copy())


def export_png(image: BispectrumImage, path: str | Path) -> None:
    """Write the same pixels as a PNG for human inspection."""
    from PIL import Image

    Image.fromarray(image.pixels, mode="RGB").save(Path(path))
