#!/usr/bin/env python3
"""Regenerates the MLP fixture used by the network harness tests.

Three Gaussian blobs in 16 dimensions, 600 samples, features quantized to
4-bit unsigned. A 16-8-3 MLP is trained in float with plain gradient
descent, then its weights are quantized to 4-bit signed and the hidden
layer shift is chosen so activations fill the 4-bit range. The integer
accuracy printed at the end is what the Rust inference must reproduce.

    python3 gen_mlp_fixture.py   # writes mlp_16_8_3.json and blobs_600.csv
"""

import json
from pathlib import Path

import numpy as np

SEED = 20240611
FEATURES, HIDDEN, CLASSES, SAMPLES = 16, 8, 3, 600
BITS = 4
OUT = Path(__file__).resolve().parent


def make_data(rng):
    centers = rng.uniform(4.0, 11.0, size=(CLASSES, FEATURES))
    labels = np.arange(SAMPLES) % CLASSES
    rng.shuffle(labels)
    x = centers[labels] + rng.normal(0.0, 2.6, size=(SAMPLES, FEATURES))
    x = np.clip(np.rint(x), 0, 2**BITS - 1).astype(np.int64)
    return x, labels


def train(x, y, rng, epochs=3000, lr=0.05):
    xf = x / (2**BITS - 1)
    w1 = rng.normal(0, 0.5, size=(FEATURES, HIDDEN))
    w2 = rng.normal(0, 0.5, size=(HIDDEN, CLASSES))
    onehot = np.eye(CLASSES)[y]
    for _ in range(epochs):
        h = np.maximum(xf @ w1, 0.0)
        logits = h @ w2
        p = np.exp(logits - logits.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        g = (p - onehot) / len(y)
        gw2 = h.T @ g
        gh = g @ w2.T * (h > 0)
        gw1 = xf.T @ gh
        w1 -= lr * 20 * gw1
        w2 -= lr * 20 * gw2
    return w1, w2


def quantize(w):
    top = 2 ** (BITS - 1) - 1
    scale = top / np.abs(w).max()
    return np.clip(np.rint(w * scale), -top, top).astype(np.int64)


def shift_round_half_even(a, s):
    if s == 0:
        return a
    q = a >> s
    r = a - (q << s)
    half = 1 << (s - 1)
    return np.where(r < half, q, np.where(r > half, q + 1, q + (q & 1)))


def infer(x, q1, s1, q2, s2):
    h = np.clip(shift_round_half_even(x @ q1, s1), 0, 2**BITS - 1)
    return shift_round_half_even(h @ q2, s2)


def main():
    rng = np.random.default_rng(SEED)
    x, y = make_data(rng)
    w1, w2 = train(x, y, rng)
    q1, q2 = quantize(w1), quantize(w2)
    acc1 = x @ q1
    # Smallest shift that keeps the 99th percentile of positive
    # pre-activations inside the activation range.
    p99 = np.percentile(acc1[acc1 > 0], 99)
    s1 = int(max(0, np.ceil(np.log2(p99 / (2**BITS - 1)))))
    s2 = 0
    logits = infer(x, q1, s1, q2, s2)
    pred = np.argmax(logits, axis=1)
    acc = float((pred == y).mean())

    layers = [
        dict(rows=FEATURES, cols=HIDDEN, bits=BITS, signed=True, scale_shift=s1,
             activation="relu", weights=q1.tolist()),
        dict(rows=HIDDEN, cols=CLASSES, bits=BITS, signed=True, scale_shift=s2,
             activation="none", weights=q2.tolist()),
    ]
    model = dict(schema_version=1, input_bits=BITS, layers=layers)
    (OUT / "mlp_16_8_3.json").write_text(json.dumps(model, indent=1) + "\n")

    with open(OUT / "blobs_600.csv", "w", newline="\n") as f:
        f.write("# schema_version: 1\n")
        f.write(",".join([f"f{i}" for i in range(FEATURES)] + ["label"]) + "\n")
        for row, label in zip(x, y):
            f.write(",".join(str(v) for v in row) + f",{label}\n")

    identity = dict(schema_version=1, input_bits=BITS, layers=[
        dict(rows=2, cols=2, bits=BITS, signed=True, scale_shift=0,
             activation="none", weights=[[1, 0], [0, 1]]),
    ])
    (OUT / "identity_2.json").write_text(json.dumps(identity, indent=1) + "\n")

    print(f"hidden shift {s1}, integer accuracy {acc:.4f}")


if __name__ == "__main__":
    main()
