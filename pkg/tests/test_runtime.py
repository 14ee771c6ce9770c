from __future__ import annotations

import io
import threading
import time

import numpy as np
import pytest

from capstream.classifier import ClassifierModel
from capstream.errors import InvalidParameterError
from capstream.protocol import COMMANDS
from capstream.runtime import (
    FileReplaySource,
    LiveByteSource,
    PipelineConfig,
    consume,
    run_pipeline,
)
from capstream.signals import RawStream
from capstream.simulate import generate_idle, generate_session


@pytest.fixture(scope="module")
def plumbing_model():
    # Pipeline plumbing does not need a converged model.
    return ClassifierModel.initialize("gru", seed=0)


@pytest.fixture(scope="module")
def short_session(params):
    return generate_session(seed=19, n_per_class=1, params=params, sampling_rate=53.0,
                            classes=(1, 2, 3))


def _consume_in_thread(max_messages=None, timeout=20.0):
    ports: list[int] = []
    ready = threading.Event()
    out: dict = {}

    def worker():
        out["messages"] = consume(
            "127.0.0.1", 0, max_messages=max_messages, print_fn=None,
            ready=ready, bound_port=ports, timeout=timeout,
        )

    thread = threading.Thread(target=worker)
    thread.start()
    assert ready.wait(5.0)
    return thread, ports[0], out


class TestSources:
    def test_unpaced_replay_order(self, short_session, tmp_path):
        src = FileReplaySource.from_stream(short_session.stream, pacing="unpaced")
        rows = list(src.rows())
        assert [r[0] for r in rows[:4]] == [0, 1, 2, 3]
        assert len(rows) == len(short_session.stream)

    def test_realtime_pacing_duration(self):
        stream = RawStream(sampling_rate=200.0, values=np.zeros((4, 100)))
        src = FileReplaySource.from_stream(stream, pacing="realtime")
        t0 = time.monotonic()
        n = sum(1 for _ in src.rows())
        elapsed = time.monotonic() - t0
        assert n == 100
        expected = 100 / 200.0
        assert abs(elapsed - expected) <= 0.05 * expected + 0.02

    def test_invalid_pacing(self):
        stream = RawStream(sampling_rate=10.0, values=np.zeros((4, 5)))
        with pytest.raises(InvalidParameterError):
            FileReplaySource.from_stream(stream, pacing="warp")

    def test_live_byte_source_parses_and_skips_garbage(self):
        payload = b"0,1.0,2.0,3.0,4.0\n\nnot,a,row\n1,5,6,7,8\n2,9,10,11,oops\n"
        src = LiveByteSource(io.BytesIO(payload))
        rows = list(src.rows())
        assert rows == [(0, (1.0, 2.0, 3.0, 4.0)), (1, (5.0, 6.0, 7.0, 8.0))]


class TestPipeline:
    def test_idle_replay_emits_nothing(self, params, plumbing_model):
        model = plumbing_model
        idle = generate_idle(23, 53 * 60, params, 53.0)
        src = FileReplaySource.from_stream(idle, pacing="unpaced")
        cfg = PipelineConfig(socket_addr=None)
        result = run_pipeline(src, cfg, model)
        assert result.frames == 0
        assert result.messages == []

    def test_one_message_per_frame_in_order(self, short_session, plumbing_model):
        src = FileReplaySource.from_stream(short_session.stream, pacing="unpaced")
        result = run_pipeline(src, PipelineConfig(socket_addr=None), plumbing_model)
        assert result.frames == len(short_session.events)
        assert len(result.messages) == result.frames
        indices = [m.frame_index for m in result.messages]
        assert indices == sorted(indices)
        assert len(set(indices)) == len(indices)
        for msg in result.messages:
            assert msg.command == COMMANDS[msg.class_id]

    def test_messages_logged_even_without_socket_peer(self, short_session, plumbing_model, tmp_path):
        log_path = tmp_path / "messages.ndjson"
        src = FileReplaySource.from_stream(short_session.stream, pacing="unpaced")
        # Nothing listens on this port: connects fail, log still fills up.
        cfg = PipelineConfig(
            socket_addr=("127.0.0.1", 1),  # reserved port, connection refused
            log_path=log_path,
            connect_attempts=1,
            connect_backoff_s=0.01,
        )
        result = run_pipeline(src, cfg, plumbing_model)
        lines = [l for l in log_path.read_text().splitlines() if l.strip()]
        assert len(lines) == result.frames > 0

    def test_socket_delivery_to_consumer(self, short_session, plumbing_model):
        thread, port, out = _consume_in_thread(max_messages=len(short_session.events))
        src = FileReplaySource.from_stream(short_session.stream, pacing="unpaced")
        cfg = PipelineConfig(socket_addr=("127.0.0.1", port))
        result = run_pipeline(src, cfg, plumbing_model)
        thread.join(timeout=20)
        assert not thread.is_alive()
        received = out["messages"]
        assert [m.frame_index for m in received] == [m.frame_index for m in result.messages]
        assert all(m.command == COMMANDS[m.class_id] for m in received)

    def test_consume_prints_label_and_command(self, short_session, plumbing_model):
        printed: list[str] = []
        ports: list[int] = []
        ready = threading.Event()

        def worker():
            consume("127.0.0.1", 0, max_messages=len(short_session.events),
                    print_fn=printed.append, ready=ready, bound_port=ports, timeout=20)

        thread = threading.Thread(target=worker)
        thread.start()
        assert ready.wait(5)
        src = FileReplaySource.from_stream(short_session.stream, pacing="unpaced")
        run_pipeline(src, PipelineConfig(socket_addr=("127.0.0.1", ports[0])), plumbing_model)
        thread.join(timeout=20)
        assert len(printed) == len(short_session.events)
        for line in printed:
            label, _, command = line.partition(" -> ")
            assert command in COMMANDS.values()

    def test_consume_survives_malformed_lines(self):
        ports: list[int] = []
        ready = threading.Event()
        out: dict = {}

        def worker():
            out["messages"] = consume("127.0.0.1", 0, max_messages=1, print_fn=None,
                                      ready=ready, bound_port=ports, timeout=10)

        thread = threading.Thread(target=worker)
        thread.start()
        assert ready.wait(5)
        import socket as socket_module

        from capstream.protocol import CommandMessage, encode_message

        with socket_module.create_connection(("127.0.0.1", ports[0])) as sock:
            sock.sendall(b"this is not json\n")
            sock.sendall(encode_message(CommandMessage.for_class(3, 1, 5, 0.7)).encode())
        thread.join(timeout=10)
        assert len(out["messages"]) == 1
        assert out["messages"][0].class_id == 3
