"""Streaming orchestration: sources, the background pipeline, and the consumer.

The pipeline runs three workers connected by bounded queues: conditioning +
detection, classification, and emission. The emitter writes NDJSON command
messages to a TCP peer (with bounded reconnect backoff) and always appends
them to the log sink, so classification results survive peer loss.
"""
from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, IO, Iterator

from .classifier import ClassifierModel, frame_to_tensor
from .detector import AdaptiveThresholdDetector, DetectorConfig
from .dsp import DspConfig, StreamingConditioner
from .errors import InvalidParameterError
from .protocol import CommandMessage, decode_message, encode_message, map_class_to_command
from .signals import NUM_SENSORS, RawStream
from .storage import load_recording

log = logging.getLogger(__name__)

PACING_MODES = ("unpaced", "realtime")

__all__ = [
    "FileReplaySource",
    "LiveByteSource",
    "PipelineConfig",
    "PipelineResult",
    "consume",
    "map_class_to_command",
    "run_pipeline",
]


class FileReplaySource:
    """Replays a recording CSV; realtime pacing sleeps to the sampling rate."""

    def __init__(
        self,
        path: str | Path,
        sampling_rate: float | None = None,
        pacing: str = "unpaced",
    ) -> None:
        if pacing not in PACING_MODES:
            raise InvalidParameterError(f"pacing must be one of {PACING_MODES}")
        self.stream = load_recording(path, sampling_rate=sampling_rate)
        self.pacing = pacing

    @classmethod
    def from_stream(cls, stream: RawStream, pacing: str = "unpaced") -> "FileReplaySource":
        src = cls.__new__(cls)
        if pacing not in PACING_MODES:
            raise InvalidParameterError(f"pacing must be one of {PACING_MODES}")
        src.stream = stream
        src.pacing = pacing
        return src

    @property
    def sampling_rate(self) -> float:
        return self.stream.sampling_rate

    def rows(self) -> Iterator[tuple[int, tuple[float, float, float, float]]]:
        if self.pacing == "unpaced":
            yield from self.stream.rows()
            return
        period = 1.0 / self.stream.sampling_rate
        start = time.monotonic()
        for i, row in self.stream.rows():
            # Deadline schedule: sleep toward start + i*period so drift does
            # not accumulate across samples.
            target = start + i * period
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            yield i, row


class LiveByteSource:
    """Parses ASCII lines ``index,v1,v2,v3,v4`` from a byte stream.

    This is the wire shape a microcontroller bridge writes; blank lines are
    skipped, malformed lines are logged and dropped.
    """

    def __init__(self, reader: IO[bytes], sampling_rate: float = 53.0) -> None:
        self.reader = reader
        self.sampling_rate = sampling_rate

    def rows(self) -> Iterator[tuple[int, tuple[float, float, float, float]]]:
        for raw in self.reader:
            line = raw.strip()
            if not line:
                continue
            parts = line.split(b",")
            if len(parts) != 1 + NUM_SENSORS:
                log.warning("live source: dropped malformed line %r", raw[:60])
                continue
            try:
                idx = int(parts[0])
                vals = tuple(float(p) for p in parts[1:])
            except ValueError:
                log.warning("live source: dropped unparsable line %r", raw[:60])
                continue
            yield idx, vals


@dataclass
class PipelineConfig:
    dsp: DspConfig = field(default_factory=DspConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    socket_addr: tuple[str, int] | None = None
    log_path: str | Path | None = None
    queue_capacity: int | None = None
    connect_attempts: int = 5
    connect_backoff_s: float = 0.1

    def capacity_for(self, sampling_rate: float) -> int:
        if self.queue_capacity is not None:
            return self.queue_capacity
        return max(16, int(4 * sampling_rate))


@dataclass
class PipelineResult:
    messages: list[CommandMessage]
    frames: int
    samples: int
    wall_seconds: float
    max_latency_ms: float
    socket_delivered: int


class _Emitter:
    """Socket writer with bounded reconnect backoff plus an always-on log sink."""

    def __init__(self, cfg: PipelineConfig) -> None:
        self.cfg = cfg
        self.sock: socket.socket | None = None
        self.delivered = 0
        self._log_fh = open(cfg.log_path, "a") if cfg.log_path else None

    def _connect(self) -> socket.socket | None:
        assert self.cfg.socket_addr is not None
        delay = self.cfg.connect_backoff_s
        for attempt in range(self.cfg.connect_attempts):
            try:
                return socket.create_connection(self.cfg.socket_addr, timeout=5.0)
            except OSError as exc:
                log.warning(
                    "emitter: connect attempt %d/%d failed: %s",
                    attempt + 1,
                    self.cfg.connect_attempts,
                    exc,
                )
                time.sleep(delay)
                delay = min(delay * 2, 2.0)
        return None

    def emit(self, msg: CommandMessage) -> None:
        line = encode_message(msg)
        if self._log_fh is not None:
            self._log_fh.write(line)
            self._log_fh.flush()
        if self.cfg.socket_addr is None:
            return
        for _ in range(2):  # current connection, then one reconnect cycle
            if self.sock is None:
                self.sock = self._connect()
                if self.sock is None:
                    log.error("emitter: giving up on socket for this message")
                    return
            try:
                self.sock.sendall(line.encode("utf-8"))
                self.delivered += 1
                return
            except OSError as exc:
                log.warning("emitter: peer lost (%s), reconnecting", exc)
                try:
                    self.sock.close()
                finally:
                    self.sock = None

    def close(self) -> None:
        if self.sock is not None:
            try:
                self.sock.close()
            finally:
                self.sock = None
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None


def run_pipeline(
    source: FileReplaySource | LiveByteSource,
    cfg: PipelineConfig,
    model: ClassifierModel,
) -> PipelineResult:
    """Drive source -> conditioning+detection -> classification -> emission.

    Stages run as independent workers over bounded FIFO queues; a full queue
    throttles the upstream stage rather than dropping samples. Returns once
    the source ends and the emitter has flushed.
    """
    rate = source.sampling_rate
    capacity = cfg.capacity_for(rate)
    frame_q: queue.Queue = queue.Queue(maxsize=capacity)
    msg_q: queue.Queue = queue.Queue(maxsize=capacity)
    t_start = time.monotonic()
    samples = 0
    frames = 0
    max_latency = 0.0
    messages: list[CommandMessage] = []
    errors: list[BaseException] = []

    def detect_worker() -> None:
        nonlocal samples
        conditioner = StreamingConditioner(cfg.dsp)
        detector = AdaptiveThresholdDetector(cfg.detector)
        try:
            for idx, row in source.rows():
                samples += 1
                processed = conditioner.push(row)
                if processed is None:
                    continue
                frame = detector.step(idx, processed)
                if frame is not None:
                    frame_q.put((frame, time.monotonic()))
        except BaseException as exc:  # propagate to the main thread
            errors.append(exc)
        finally:
            frame_q.put(None)

    def classify_worker() -> None:
        try:
            while True:
                item = frame_q.get()
                if item is None:
                    break
                frame, t_emit = item
                pred = model.predict(frame_to_tensor(frame))
                timestamp_ms = int(round(frame.end / rate * 1000.0))
                msg = CommandMessage.for_class(
                    class_id=pred.class_id,
                    frame_index=frame.k,
                    timestamp_ms=timestamp_ms,
                    probability=float(pred.probabilities.max()),
                )
                msg_q.put((msg, t_emit))
        except BaseException as exc:
            errors.append(exc)
        finally:
            msg_q.put(None)

    def emit_worker() -> None:
        nonlocal frames, max_latency
        emitter = _Emitter(cfg)
        try:
            while True:
                item = msg_q.get()
                if item is None:
                    break
                msg, t_emit = item
                emitter.emit(msg)
                frames += 1
                messages.append(msg)
                max_latency = max(max_latency, (time.monotonic() - t_emit) * 1000.0)
        except BaseException as exc:
            errors.append(exc)
        finally:
            emitter.close()

    workers = [
        threading.Thread(target=detect_worker, name="capstream-detect"),
        threading.Thread(target=classify_worker, name="capstream-classify"),
        threading.Thread(target=emit_worker, name="capstream-emit"),
    ]
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    if errors:
        raise errors[0]
    wall = time.monotonic() - t_start
    delivered = 0 if cfg.socket_addr is None else frames
    log.info(
        "pipeline done: %d samples, %d frames, %.2fs wall, max latency %.1f ms",
        samples,
        frames,
        wall,
        max_latency,
    )
    return PipelineResult(
        messages=messages,
        frames=frames,
        samples=samples,
        wall_seconds=wall,
        max_latency_ms=max_latency,
        socket_delivered=delivered,
    )


def consume(
    host: str,
    port: int,
    max_messages: int | None = None,
    print_fn: Callable[[str], None] | None = print,
    ready: threading.Event | None = None,
    bound_port: list[int] | None = None,
    timeout: float | None = None,
) -> list[CommandMessage]:
    """Listen for one producer connection and print each command message.

    Malformed lines are logged and skipped; the loop ends on stream end or
    after max_messages. Returns everything that parsed.
    """
    received: list[CommandMessage] = []
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, port))
        server.listen(1)
        if timeout is not None:
            server.settimeout(timeout)
        if bound_port is not None:
            bound_port.append(server.getsockname()[1])
        if ready is not None:
            ready.set()
        conn, peer = server.accept()
        log.info("consume: producer connected from %s", peer)
        with conn, conn.makefile("rb") as fh:
            for raw in fh:
                if not raw.strip():
                    continue
                try:
                    msg = decode_message(raw)
                except Exception as exc:
                    log.error("consume: dropped malformed message: %s", exc)
                    continue
                received.append(msg)
                if print_fn is not None:
                    print_fn(f"{msg.label} -> {msg.command}")
                if max_messages is not None and len(received) >= max_messages:
                    break
    return received
