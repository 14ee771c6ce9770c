#!/usr/bin/env python3
"""Train the GRU and LSTM classifiers on the seeded 1000-frame dataset.

Reference hyperparameters: hidden 20, dense 32-64-32, 60 epochs, batch 10,
learning rate 0.005, plain gradient descent. Prints per-model validation
accuracy and writes model files next to --out-dir.

Usage:
    python scripts/train_classifiers.py --out-dir models/ [--per-class 100]
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from capstream.classifier import TrainConfig, evaluate, save_model, train
from capstream.dataset import dataset_tensors
from capstream.simulate import PhysicsParams, generate_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--per-class", type=int, default=100)
    ap.add_argument("--rate", type=float, default=53.0)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--out-dir", default="models")
    args = ap.parse_args()

    print(f"building dataset: {10 * args.per_class} recordings ...")
    recs = generate_dataset(args.seed, args.per_class, PhysicsParams(), args.rate)
    tensors, labels = dataset_tensors(recs)
    print(f"  tensors {tensors.shape}")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for cell in ("gru", "lstm"):
        cfg = TrainConfig(epochs=args.epochs, seed=0)
        t0 = time.monotonic()
        model, history = train(tensors, labels, cfg, cell_type=cell)
        elapsed = time.monotonic() - t0
        path = out_dir / f"{cell}.bin"
        save_model(model, path)
        report = evaluate(model, tensors, labels)
        print(f"{cell}: val_acc={history.val_acc[-1]:.4f} "
              f"train_acc={history.train_acc[-1]:.4f} "
              f"full-set macro-F1={report.macro_f1:.4f} "
              f"({elapsed:.0f}s) -> {path}")


if __name__ == "__main__":
    main()
