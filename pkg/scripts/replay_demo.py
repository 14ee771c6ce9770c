#!/usr/bin/env python3
"""End-to-end demo: replay a synthetic session through the socket pipeline.

Spins up the consumer in a thread, replays a 10-gesture session through
detection + classification, and prints each received command next to the
ground-truth gesture.

Usage:
    python scripts/replay_demo.py --model models/gru.bin [--paced]
"""
from __future__ import annotations

import argparse
import threading

from capstream.classifier import load_model
from capstream.runtime import FileReplaySource, PipelineConfig, consume, run_pipeline
from capstream.simulate import PhysicsParams, generate_session


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", required=True)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--rate", type=float, default=53.0)
    ap.add_argument("--paced", action="store_true",
                    help="replay in real time (several minutes) instead of full speed")
    args = ap.parse_args()

    model = load_model(args.model)
    rec = generate_session(args.seed, 1, PhysicsParams(), args.rate)
    truth = {i + 1: ev.class_id for i, ev in enumerate(rec.events)}
    print(f"session: {len(rec.events)} gestures, {len(rec.stream)} samples")

    ports: list[int] = []
    ready = threading.Event()
    received: list = []

    def sink() -> None:
        received.extend(
            consume("127.0.0.1", 0, max_messages=len(rec.events), print_fn=None,
                    ready=ready, bound_port=ports, timeout=600)
        )

    thread = threading.Thread(target=sink)
    thread.start()
    ready.wait(5)

    source = FileReplaySource.from_stream(
        rec.stream, pacing="realtime" if args.paced else "unpaced"
    )
    result = run_pipeline(
        source, PipelineConfig(socket_addr=("127.0.0.1", ports[0])), model
    )
    thread.join(timeout=30)

    print(f"pipeline: {result.frames} frames, max added latency "
          f"{result.max_latency_ms:.1f} ms")
    correct = 0
    for msg in received:
        want = truth.get(msg.frame_index)
        mark = "ok " if want == msg.class_id else "MISS"
        correct += want == msg.class_id
        print(f"  [{mark}] frame {msg.frame_index}: {msg.label!r} -> {msg.command!r} "
              f"(p={msg.probability:.2f})")
    print(f"{correct}/{len(received)} classified correctly")


if __name__ == "__main__":
    main()
