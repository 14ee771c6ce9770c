#!/usr/bin/env python3
"""Detection/extraction benchmark on a seeded synthetic session.

300 gestures (30 per class) at 53 Hz with phi=20 and 70-sample pads,
scored by interval intersection (detection rate) and containment-or-IoU
(frame extraction rate).

Usage:
    python scripts/run_detection_benchmark.py [--seed 2024] [--per-class 30]
"""
from __future__ import annotations

import argparse
import time

from capstream.detector import DetectorConfig, run_detector
from capstream.dsp import DspConfig
from capstream.metrics import detection_rate, extraction_rate
from capstream.simulate import PhysicsParams, generate_session


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--per-class", type=int, default=30)
    ap.add_argument("--rate", type=float, default=53.0)
    ap.add_argument("--iou-min", type=float, default=0.8)
    args = ap.parse_args()

    params = PhysicsParams()
    print(f"generating session: {10 * args.per_class} gestures at {args.rate} Hz ...")
    rec = generate_session(args.seed, args.per_class, params, args.rate)
    print(f"  {len(rec.stream)} samples, {len(rec.events)} events")

    t0 = time.monotonic()
    frames = run_detector(rec.stream, DspConfig(), DetectorConfig())
    elapsed = time.monotonic() - t0
    print(f"detector: {len(frames)} frames in {elapsed:.2f}s "
          f"({len(rec.stream) / elapsed:,.0f} samples/s/sensor)")

    det = detection_rate(frames, rec.events)
    ext = extraction_rate(frames, rec.events, iou_min=args.iou_min)
    print(f"detection rate:  {det.detection_rate:.4f} ({det.detected_events}/{det.total_events})")
    print(f"extraction rate: {ext.extraction_rate:.4f} "
          f"(containment {ext.containment_count}, iou>={args.iou_min} {ext.iou_pass_count})")
    if ext.iou_values:
        import numpy as np

        ious = np.asarray(ext.iou_values)
        print(f"IoU distribution: min {ious.min():.3f}  median {np.median(ious):.3f}  "
              f"max {ious.max():.3f}")


if __name__ == "__main__":
    main()
