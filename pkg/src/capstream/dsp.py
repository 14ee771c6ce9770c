"""Signal conditioning and frequency analysis for raw sensor streams.

Three conditioning routes are available: the weighted sequential difference
(the default feeding the detector), pairwise channel differences, and a
spectral low-pass path. FFT-domain helpers back the band statistics.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, InvalidParameterError
from .signals import NUM_SENSORS, ProcessedStream, RawStream, validate_sensor_id

SCHEMES = ("weighted-diff", "literal-sum", "pairwise-diff", "low-pass")

# The five analysis bands used for the idle/gesture spectral comparison.
DEFAULT_BANDS: tuple[tuple[float, float], ...] = (
    (1.0, 100.0),
    (100.0, 200.0),
    (200.0, 300.0),
    (300.0, 400.0),
    (400.0, 500.0),
)


@dataclass
class DspConfig:
    """Conditioning parameters.

    sensitivity weighs the current sample against the previous one per
    sensor; 0.5 everywhere reduces the weighted difference to the plain
    sequential difference. smooth_window is deliberately small (latency in
    samples); offset_period is the detector's update period and must not be
    shorter than the smoothing window.
    """

    sensitivity: tuple[float, float, float, float] = (0.5, 0.5, 0.5, 0.5)
    smooth_window: int = 5
    offset_period: int = 318
    lpf_cutoff: float = 50.0
    scheme: str = "weighted-diff"

    def __post_init__(self) -> None:
        if len(self.sensitivity) != NUM_SENSORS:
            raise InvalidParameterError("sensitivity needs one value per sensor")
        for tau in self.sensitivity:
            if not 0.0 <= tau <= 1.0:
                raise InvalidParameterError(f"sensitivity must lie in [0, 1], got {tau}")
        if self.smooth_window < 1:
            raise InvalidParameterError("smooth_window must be >= 1")
        if self.offset_period < self.smooth_window:
            raise InvalidParameterError("offset_period must be >= smooth_window")
        if self.scheme not in SCHEMES:
            raise InvalidParameterError(f"scheme must be one of {SCHEMES}")


@dataclass
class Spectrum:
    """One-sided magnitude spectrum; bin k sits at frequencies[k] Hz."""

    frequencies: np.ndarray
    magnitudes: np.ndarray


@dataclass
class BandStats:
    """Mean/stddev of the band-passed signal magnitude for one band."""

    band: tuple[float, float]
    mean: float
    std: float


def sequential_difference(stream: RawStream | np.ndarray) -> np.ndarray:
    """Absolute difference of consecutive samples per sensor, shape (4, n-1).

    Constant channels map to zeros, which is what zero-centres the idle
    signal without an explicit offset pass.
    """
    values = stream.values if isinstance(stream, RawStream) else np.asarray(stream)
    if values.ndim == 1:
        values = values[None, :]
    if values.shape[-1] < 2:
        raise InsufficientDataError("need at least 2 samples to difference")
    return np.abs(np.diff(values.astype(np.float64), axis=-1))


def weighted_smoothed_difference(
    stream: RawStream, cfg: DspConfig | None = None
) -> ProcessedStream:
    """Moving average of the sensitivity-weighted absolute difference.

    Output column m corresponds to raw index m + smooth_window; the factor 2
    restores the plain-difference magnitude at sensitivity 0.5, so window 1
    with sensitivity 0.5 reproduces sequential_difference exactly.
    """
    cfg = cfg or DspConfig()
    w = cfg.smooth_window
    if len(stream) < w + 1:
        raise InsufficientDataError(f"need at least {w + 1} samples, got {len(stream)}")
    x = stream.values
    tau = np.asarray(cfg.sensitivity, dtype=np.float64)[:, None]
    diffs = np.abs(tau * x[:, 1:] - (1.0 - tau) * x[:, :-1]) * 2.0
    if w == 1:
        smoothed = diffs
    else:
        windows = np.lib.stride_tricks.sliding_window_view(diffs, w, axis=1)
        smoothed = windows.sum(axis=-1) / w
    return ProcessedStream(
        sampling_rate=stream.sampling_rate, start_index=w, values=smoothed
    )


def literal_weighted_sum(stream: RawStream, cfg: DspConfig | None = None) -> ProcessedStream:
    """Comparison variant: weighted *sum* of consecutive samples, smoothed.

    Kept for side-by-side inspection; it does not zero-centre idle input, so
    the detector path never uses it.
    """
    cfg = cfg or DspConfig()
    w = cfg.smooth_window
    if len(stream) < w + 1:
        raise InsufficientDataError(f"need at least {w + 1} samples, got {len(stream)}")
    x = stream.values
    tau = np.asarray(cfg.sensitivity, dtype=np.float64)[:, None]
    mixed = tau * x[:, 1:] + (1.0 - tau) * x[:, :-1]
    if w == 1:
        smoothed = mixed
    else:
        windows = np.lib.stride_tricks.sliding_window_view(mixed, w, axis=1)
        smoothed = windows.sum(axis=-1) / w
    return ProcessedStream(
        sampling_rate=stream.sampling_rate, start_index=w, values=smoothed
    )


def pairwise_sensor_difference(
    stream: RawStream, sensor_a: int, sensor_b: int
) -> np.ndarray:
    """Absolute difference between two sensor channels, |x_a - x_b| per index."""
    validate_sensor_id(sensor_a)
    validate_sensor_id(sensor_b)
    if sensor_a == sensor_b:
        raise InvalidParameterError("pairwise difference needs two distinct sensors")
    return np.abs(stream.values[sensor_a - 1] - stream.values[sensor_b - 1])


def sensor_pairs() -> tuple[tuple[int, int], ...]:
    """The six unordered sensor pairs."""
    return ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def fft(signal: Sequence[float] | np.ndarray, sampling_rate: float) -> Spectrum:
    """One-sided magnitude spectrum of the signal zero-padded to a power of two."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise InsufficientDataError("fft needs a non-empty 1-D signal")
    if sampling_rate <= 0:
        raise InvalidParameterError("sampling_rate must be > 0")
    n = _next_pow2(max(x.size, 2))
    padded = np.zeros(n)
    padded[: x.size] = x
    spec = np.fft.rfft(padded)
    freqs = np.arange(spec.size) * sampling_rate / n
    return Spectrum(frequencies=freqs, magnitudes=np.abs(spec))


def low_pass(
    signal: Sequence[float] | np.ndarray,
    cutoff: float,
    sampling_rate: float,
    window: int = 1,
) -> np.ndarray:
    """Spectral-mask low-pass filter keeping bins at or below cutoff Hz.

    window > 1 additionally applies the magnitude moving average of that
    length, the source of the filter path's latency (window samples).
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise InsufficientDataError("low_pass needs a non-empty 1-D signal")
    if cutoff >= sampling_rate / 2:
        raise InvalidParameterError(
            f"cutoff {cutoff} Hz must be below Nyquist {sampling_rate / 2} Hz"
        )
    if window < 1:
        raise InvalidParameterError("window must be >= 1")
    n = _next_pow2(max(x.size, 2))
    padded = np.zeros(n)
    padded[: x.size] = x
    spec = np.fft.rfft(padded)
    freqs = np.arange(spec.size) * sampling_rate / n
    spec[freqs > cutoff] = 0.0
    out = np.fft.irfft(spec, n)[: x.size]
    if window > 1:
        kernel = np.ones(window) / window
        out = np.convolve(np.abs(out), kernel, mode="full")[: x.size]
    return out


def band_pass(
    signal: Sequence[float] | np.ndarray,
    band: tuple[float, float],
    sampling_rate: float,
) -> np.ndarray:
    """Spectral-mask band-pass keeping bins inside [band[0], band[1]] Hz."""
    x = np.asarray(signal, dtype=np.float64)
    lo, hi = band
    if not 0 <= lo < hi:
        raise InvalidParameterError(f"band bounds must satisfy 0 <= lo < hi, got {band}")
    if hi > sampling_rate / 2:
        raise InvalidParameterError(
            f"band {band} exceeds Nyquist {sampling_rate / 2} Hz"
        )
    n = _next_pow2(max(x.size, 2))
    padded = np.zeros(n)
    padded[: x.size] = x
    spec = np.fft.rfft(padded)
    freqs = np.arange(spec.size) * sampling_rate / n
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    return np.fft.irfft(spec, n)[: x.size]


def band_statistics(
    signal: Sequence[float] | np.ndarray,
    bands: Sequence[tuple[float, float]],
    sampling_rate: float,
) -> list[BandStats]:
    """Mean and stddev of |band-passed signal| for each requested band."""
    out = []
    for band in bands:
        filtered = np.abs(band_pass(signal, tuple(band), sampling_rate))
        out.append(
            BandStats(band=(float(band[0]), float(band[1])),
                      mean=float(filtered.mean()),
                      std=float(filtered.std()))
        )
    return out


class StreamingConditioner:
    """Streaming counterpart of weighted_smoothed_difference.

    Keeps a per-sensor ring of the last smooth_window weighted differences;
    one writer per instance. First output appears once smooth_window + 1 raw
    rows were pushed and carries the raw index of its newest sample.
    """

    def __init__(self, cfg: DspConfig | None = None) -> None:
        self.cfg = cfg or DspConfig()
        self._tau = tuple(float(t) for t in self.cfg.sensitivity)
        self._w = self.cfg.smooth_window
        self._prev: list[float] | None = None
        self._rings: list[list[float]] = [[] for _ in range(NUM_SENSORS)]
        self._count = 0

    def push(self, row: Sequence[float]) -> tuple[float, ...] | None:
        """Feed one raw row (v1..v4); returns the processed row or None while priming."""
        if self._prev is None:
            self._prev = [float(v) for v in row]
            self._count = 1
            return None
        w = self._w
        out = []
        ready = True
        for s in range(NUM_SENSORS):
            tau = self._tau[s]
            d = abs(tau * row[s] - (1.0 - tau) * self._prev[s]) * 2.0
            ring = self._rings[s]
            ring.append(d)
            if len(ring) > w:
                ring.pop(0)
            if len(ring) < w:
                ready = False
            else:
                out.append(sum(ring) / w)
            self._prev[s] = float(row[s])
        self._count += 1
        return tuple(out) if ready else None
