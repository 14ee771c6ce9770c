"""Per-sensor adaptive-threshold detection and gesture frame extraction.

Each sensor runs an independent state machine over the conditioned signal:
a running offset keeps the signal zero-centred, a threshold updated every
update_period samples gates detections, and threshold crossings open/close
per-sensor frame candidates that are merged across sensors into the emitted
multi-channel frame.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dsp import DspConfig, weighted_smoothed_difference
from .errors import (
    CapacityError,
    InsufficientDataError,
    InvalidParameterError,
    OrderingError,
)
from .signals import NUM_SENSORS, ProcessedStream, RawStream

log = logging.getLogger(__name__)

MERGE_POLICIES = ("union", "paper-literal")


@dataclass
class DetectorConfig:
    """Detection parameters; defaults are the reference values at 53 Hz.

    All periods are sample counts. phi is the threshold floor in volts.
    pre_pad/post_pad widen each detection to cover signal ramps on both
    sides. safety_period bounds how long a sensor may sit above threshold
    before the reading is treated as a malfunction (e.g. direct contact).
    """

    phi: float = 20.0
    update_period: int = 318      # offset/threshold refresh (6 s at 53 Hz)
    pre_pad: int = 70             # samples added before the upward crossing
    post_pad: int = 70            # samples added after the downward crossing
    safety_period: int = 159      # 3 s at 53 Hz
    init_period: int = 530        # offset initialization span (10 s)
    warmup_period: int = 424      # no emissions before this index (8 s)
    max_crossing_window: int = 50 # dwell above threshold considered a crisp crossing pair
    merge_policy: str = "union"
    safety_adds_phi: bool = False # restore the +phi term in the safety recompute
    history_capacity: int | None = None

    def __post_init__(self) -> None:
        for name in (
            "update_period",
            "pre_pad",
            "post_pad",
            "safety_period",
            "init_period",
            "warmup_period",
            "max_crossing_window",
        ):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be > 0")
        if self.phi <= 0:
            raise InvalidParameterError("phi must be > 0")
        if self.merge_policy not in MERGE_POLICIES:
            raise InvalidParameterError(f"merge_policy must be one of {MERGE_POLICIES}")
        if self.history_capacity is not None and self.history_capacity < self.update_period:
            raise InvalidParameterError("history_capacity must cover update_period")

    @property
    def capacity(self) -> int:
        """Ring size per sensor; bounds memory yet always covers a legal frame."""
        if self.history_capacity is not None:
            return self.history_capacity
        return 2 * (self.pre_pad + self.post_pad + self.safety_period + self.update_period)

    @classmethod
    def from_rate(
        cls,
        sampling_rate: float,
        phi: float = 20.0,
        init_seconds: float = 10.0,
        warmup_seconds: float = 8.0,
        safety_seconds: float = 3.0,
        update_seconds: float = 6.0,
        pre_pad: int = 70,
        post_pad: int = 70,
        **kwargs,
    ) -> "DetectorConfig":
        """Derive the sample-count periods from a sampling rate."""
        return cls(
            phi=phi,
            update_period=int(round(update_seconds * sampling_rate)),
            pre_pad=pre_pad,
            post_pad=post_pad,
            safety_period=int(round(safety_seconds * sampling_rate)),
            init_period=int(round(init_seconds * sampling_rate)),
            warmup_period=int(round(warmup_seconds * sampling_rate)),
            **kwargs,
        )


@dataclass
class GestureFrame:
    """Offset-subtracted multi-channel window covering one detected gesture."""

    k: int
    start: int
    end: int
    channels: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.start >= self.end:
            raise InvalidParameterError("frame start must precede end")
        if self.channels is not None:
            self.channels = np.asarray(self.channels, dtype=np.float64)
            expected = self.end - self.start + 1
            if self.channels.shape != (NUM_SENSORS, expected):
                raise InvalidParameterError(
                    f"channels must have shape (4, {expected}), got {self.channels.shape}"
                )

    def __len__(self) -> int:
        return self.end - self.start + 1


@dataclass
class SensorDetectorState:
    """Snapshot of one sensor's machine, for introspection and tests."""

    offset: float
    threshold: float
    start: int
    end: int
    count: int
    init_sum: float
    init_count: int
    recovering: bool
    frames: list[tuple[int, int]] = field(default_factory=list)


def initialize_offsets(
    processed: ProcessedStream | np.ndarray,
    init_period: int,
    phi: float,
) -> list[SensorDetectorState]:
    """Estimate per-sensor offsets from the first init_period conditioned samples.

    Returns fresh states with the threshold at its floor and no open frame.
    """
    values = processed.values if isinstance(processed, ProcessedStream) else np.asarray(processed)
    if values.ndim != 2 or values.shape[0] != NUM_SENSORS:
        raise InvalidParameterError("processed prefix must have shape (4, n)")
    if values.shape[1] < init_period:
        raise InsufficientDataError(
            f"need {init_period} samples for offset initialization, got {values.shape[1]}"
        )
    offsets = values[:, :init_period].mean(axis=1)
    return [
        SensorDetectorState(
            offset=float(offsets[s]),
            threshold=float(phi),
            start=0,
            end=0,
            count=0,
            init_sum=0.0,
            init_count=0,
            recovering=False,
        )
        for s in range(NUM_SENSORS)
    ]


def update_threshold(
    window: np.ndarray, offset: float, phi: float, update_period: int
) -> float:
    """Threshold rule: mean of the offset-subtracted window plus the floor phi."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 1 or window.size != update_period:
        raise InvalidParameterError(
            f"threshold window must hold exactly {update_period} samples, got {window.size}"
        )
    return float((window - offset).mean() + phi)


def extract_frame(
    history: ProcessedStream,
    start: int,
    end: int,
    offsets: np.ndarray,
) -> GestureFrame:
    """Slice [start, end] out of the conditioned history, minus current offsets."""
    if start >= end:
        raise InvalidParameterError("start must precede end")
    lo = start - history.start_index
    hi = end - history.start_index
    if lo < 0 or hi >= len(history):
        raise CapacityError(
            f"history covers [{history.start_index}, {history.start_index + len(history) - 1}], "
            f"requested [{start}, {end}]"
        )
    channels = history.values[:, lo : hi + 1] - np.asarray(offsets, dtype=np.float64)[:, None]
    return GestureFrame(k=0, start=start, end=end, channels=channels)


class AdaptiveThresholdDetector:
    """Streaming detector over conditioned samples.

    Feed strictly consecutive indices through step(); a GestureFrame is
    returned on the sample that closes a merged detection. Not safe for
    concurrent feeds; run one instance per stream.
    """

    def __init__(self, cfg: DetectorConfig | None = None) -> None:
        self.cfg = cfg or DetectorConfig()
        c = self.cfg
        self._cap = c.capacity
        self._buf = [[0.0] * self._cap for _ in range(NUM_SENSORS)]
        self._j: int | None = None
        self._first_j: int | None = None
        self._seen = 0
        self._initialized = False
        self._init_sums = [0.0] * NUM_SENSORS

        self._lam = [0.0] * NUM_SENSORS
        self._delta = [c.phi] * NUM_SENSORS
        self._start = [0] * NUM_SENSORS
        self._end = [0] * NUM_SENSORS
        self._upcross = [0] * NUM_SENSORS
        self._cnt = [0] * NUM_SENSORS
        self._isum = [0.0] * NUM_SENSORS
        self._icount = [0] * NUM_SENSORS
        self._prev = [0.0] * NUM_SENSORS
        self._recovering = [False] * NUM_SENSORS
        self._frames: list[list[tuple[int, int]]] = [[] for _ in range(NUM_SENSORS)]

        self._k = 0
        self.diagnostics = {
            "clamped_starts": 0,
            "orphan_down_crossings": 0,
            "long_dwells": 0,
            "safety_recomputes": 0,
        }

    @property
    def frames_emitted(self) -> int:
        return self._k

    @property
    def initialized(self) -> bool:
        return self._initialized

    def sensor_state(self, sensor: int) -> SensorDetectorState:
        s = sensor - 1
        if not 0 <= s < NUM_SENSORS:
            raise InvalidParameterError(f"sensor must be in [1, 4], got {sensor}")
        return SensorDetectorState(
            offset=self._lam[s],
            threshold=self._delta[s],
            start=self._start[s],
            end=self._end[s],
            count=self._cnt[s],
            init_sum=self._isum[s],
            init_count=self._icount[s],
            recovering=self._recovering[s],
            frames=list(self._frames[s]),
        )

    def offsets(self) -> np.ndarray:
        return np.asarray(self._lam, dtype=np.float64)

    def thresholds(self) -> np.ndarray:
        return np.asarray(self._delta, dtype=np.float64)

    def _window_lo(self, j: int, length: int) -> int | None:
        """First index of the trailing window (j-length, j], or None if evicted."""
        first_valid = j - self._cap + 1
        if self._first_j is not None:
            first_valid = max(first_valid, self._first_j)
        lo = j - length + 1
        if lo < first_valid:
            return None
        return lo

    def _range_sum(self, s: int, lo: int, hi: int) -> float:
        buf = self._buf[s]
        cap = self._cap
        total = 0.0
        for i in range(lo, hi + 1):
            total += buf[i % cap]
        return total

    def _periodic_update(self, s: int, j: int) -> None:
        c = self.cfg
        if self._icount[s] > 0:
            self._lam[s] = self._isum[s] / self._icount[s]
        lo = self._window_lo(j, c.update_period)
        if lo is not None:
            mean = self._range_sum(s, lo, j) / c.update_period
            self._delta[s] = mean - self._lam[s] + c.phi
        else:
            log.debug("sensor %d: update at %d skipped, window not buffered", s + 1, j)
        self._isum[s] = 0.0
        self._icount[s] = 0

    def step(self, j: int, values) -> GestureFrame | None:
        """Consume one conditioned row (index j, one value per sensor)."""
        if self._j is None:
            self._first_j = j
        elif j != self._j + 1:
            raise OrderingError(f"expected index {self._j + 1}, got {j}")
        self._j = j

        cap = self._cap
        pos = j % cap
        c = self.cfg

        if not self._initialized:
            for s in range(NUM_SENSORS):
                x = float(values[s])
                self._buf[s][pos] = x
                self._init_sums[s] += x
                self._prev[s] = x
            self._seen += 1
            if self._seen >= c.init_period:
                for s in range(NUM_SENSORS):
                    self._lam[s] = self._init_sums[s] / c.init_period
                    self._delta[s] = c.phi
                self._initialized = True
            return None

        p1 = c.update_period
        for s in range(NUM_SENSORS):
            x = float(values[s])
            self._buf[s][pos] = x
            lam = self._lam[s]
            cur = x - lam
            prev = self._prev[s] - lam
            self._prev[s] = x
            delta = self._delta[s]
            frame_open = self._start[s] != 0 or self._end[s] != 0

            if not frame_open:
                self._isum[s] += x
                self._icount[s] += 1

            if self._recovering[s]:
                if not frame_open and j % p1 == 0:
                    self._periodic_update(s, j)
                    self._recovering[s] = False
            elif cur > delta and prev < delta:
                start = j - c.pre_pad
                if start < 1:
                    self.diagnostics["clamped_starts"] += 1
                    log.debug("sensor %d: start underflow at %d, clamped", s + 1, j)
                    start = 1
                self._start[s] = start
                self._upcross[s] = j
            elif cur > delta:
                self._cnt[s] += 1
                if self._cnt[s] > c.safety_period:
                    # Malfunction guard: drop the pending detection and hold
                    # off until offset/threshold re-stabilize.
                    lo = self._window_lo(j, p1)
                    if lo is not None:
                        mean = self._range_sum(s, lo, j) / p1
                        self._delta[s] = mean - lam + (c.phi if c.safety_adds_phi else 0.0)
                    self._cnt[s] = 0
                    self._start[s] = 0
                    self._end[s] = 0
                    self._upcross[s] = 0
                    self._recovering[s] = True
                    self.diagnostics["safety_recomputes"] += 1
            elif cur < delta and prev > delta:
                if self._upcross[s] == 0:
                    self.diagnostics["orphan_down_crossings"] += 1
                    log.debug("sensor %d: downward crossing without start at %d", s + 1, j)
                else:
                    if j - self._upcross[s] > c.max_crossing_window:
                        self.diagnostics["long_dwells"] += 1
                        log.debug(
                            "sensor %d: dwell %d above threshold exceeds %d",
                            s + 1,
                            j - self._upcross[s],
                            c.max_crossing_window,
                        )
                    self._end[s] = j + c.post_pad
                    self._cnt[s] = 0
            elif not frame_open and j % p1 == 0:
                self._periodic_update(s, j)

            if self._end[s] == j:
                # Commit only after warm-up; always clear so a detection
                # closing during warm-up cannot wedge the sensor open.
                if j > c.warmup_period and self._start[s] != 0:
                    self._frames[s].append((self._start[s], self._end[s]))
                self._start[s] = 0
                self._end[s] = 0
                self._upcross[s] = 0

        if j <= c.warmup_period:
            return None
        return self._merge_and_emit(j)

    def _merge_and_emit(self, j: int) -> GestureFrame | None:
        frames = self._frames
        if not (frames[0] or frames[1] or frames[2] or frames[3]):
            return None
        # Hold the merge while any sensor still has an open detection, so one
        # gesture yields one frame even though the channels close in sequence.
        for s in range(NUM_SENSORS):
            if self._start[s] != 0 or self._end[s] != 0:
                return None
        if self.cfg.merge_policy == "union":
            start = min(f[0] for fs in frames for f in fs)
            end = max(f[1] for fs in frames for f in fs)
        else:
            # Literal merge: the last-iterated sensor with frames wins.
            start = end = 0
            for fs in frames:
                if fs:
                    start, end = fs[-1]
        if end > j or start == 0 or end == 0:
            return None
        frame = GestureFrame(
            k=self._k + 1, start=start, end=end, channels=self._slice(start, end)
        )
        self._k += 1
        for fs in frames:
            fs.clear()
        return frame

    def _slice(self, start: int, end: int) -> np.ndarray:
        first_valid = (self._j or 0) - self._cap + 1
        if self._first_j is not None:
            first_valid = max(first_valid, self._first_j)
        if start < first_valid:
            raise CapacityError(
                f"frame [{start}, {end}] no longer buffered (history starts at {first_valid})"
            )
        cap = self._cap
        out = np.empty((NUM_SENSORS, end - start + 1))
        for s in range(NUM_SENSORS):
            buf = self._buf[s]
            lam = self._lam[s]
            row = out[s]
            for i, idx in enumerate(range(start, end + 1)):
                row[i] = buf[idx % cap] - lam
        return out


def detect_frames(
    processed: ProcessedStream, cfg: DetectorConfig | None = None
) -> list[GestureFrame]:
    """Run the streaming detector over a full conditioned stream."""
    det = AdaptiveThresholdDetector(cfg)
    out: list[GestureFrame] = []
    base = processed.start_index
    vals = processed.values
    cols = [vals[s].tolist() for s in range(NUM_SENSORS)]
    c0, c1, c2, c3 = cols
    step = det.step
    for m in range(vals.shape[1]):
        frame = step(base + m, (c0[m], c1[m], c2[m], c3[m]))
        if frame is not None:
            out.append(frame)
    return out


def run_detector(
    stream: RawStream,
    dsp_cfg: DspConfig | None = None,
    det_cfg: DetectorConfig | None = None,
) -> list[GestureFrame]:
    """Condition a raw stream and detect frames in one pass."""
    processed = weighted_smoothed_difference(stream, dsp_cfg or DspConfig())
    return detect_frames(processed, det_cfg)
