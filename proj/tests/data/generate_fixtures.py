#!/usr/bin/env python3
"""Regenerates the JSON fixtures in this directory.

moons16_mlp.json  2-moons classifier embedded in 16-D (dense ReLU, 2 classes)
moons16_pairs.json  correctly classified (source, target) pairs for it
xor_mlp.json      hand-set 2-4-2 ReLU network computing XOR of sign bits
xor_grid.json     its labels on a 3x3 grid, from a numpy forward pass

Deterministic: fixed seeds throughout. Run from any directory.
"""

import json
import pathlib

import numpy as np
from sklearn.datasets import make_moons
from sklearn.neural_network import MLPClassifier

HERE = pathlib.Path(__file__).resolve().parent
DIM = 16


def forward(layers, x):
    h = np.asarray(x, dtype=float)
    for layer in layers:
        h = np.asarray(layer["w"]) @ h + np.asarray(layer["b"])
        if layer["act"] == "relu":
            h = np.maximum(h, 0.0)
    return int(np.argmax(h))


def moons():
    rng = np.random.default_rng(20240601)
    pts, labels = make_moons(n_samples=3000, noise=0.12, random_state=7)
    pts = (pts - pts.mean(axis=0)) / pts.std(axis=0)
    # random orthonormal 2-frame in R^16 plus small isotropic jitter
    q, _ = np.linalg.qr(rng.standard_normal((DIM, 2)))
    x = pts @ q.T + 0.05 * rng.standard_normal((len(pts), DIM))

    clf = MLPClassifier(hidden_layer_sizes=(32, 32), activation="relu",
                        max_iter=3000, random_state=3, tol=1e-6)
    clf.fit(x, labels)

    w1, w2, w3 = (c.T for c in clf.coefs_)
    b1, b2, b3 = clf.intercepts_
    # single logistic output z -> logits (0, z): argmax is class 1 iff z > 0
    w_out = np.vstack([np.zeros_like(w3), w3])
    b_out = np.concatenate([[0.0], b3])
    layers = [
        {"w": w1.tolist(), "b": b1.tolist(), "act": "relu"},
        {"w": w2.tolist(), "b": b2.tolist(), "act": "relu"},
        {"w": w_out.tolist(), "b": b_out.tolist(), "act": "none"},
    ]
    (HERE / "moons16_mlp.json").write_text(json.dumps({"layers": layers}))

    pred = np.array([forward(layers, xi) for xi in x])
    acc = float((pred == labels).mean())
    ok0 = [i for i in range(len(x)) if labels[i] == 0 and pred[i] == 0]
    ok1 = [i for i in range(len(x)) if labels[i] == 1 and pred[i] == 1]
    pick = np.random.default_rng(11)
    src = pick.choice(ok0, size=40, replace=False)
    tgt = pick.choice(ok1, size=40, replace=False)
    pairs = [{"source": x[s].tolist(), "target": x[t].tolist()} for s, t in zip(src, tgt)]
    (HERE / "moons16_pairs.json").write_text(json.dumps({"accuracy": acc, "pairs": pairs}))
    print(f"moons16: train accuracy {acc:.4f}, {len(pairs)} pairs")


def xor():
    # h = relu(+-x0 +-x1) picks the quadrant; class 1 when the signs differ
    layers = [
        {"w": [[1, 1], [-1, -1], [1, -1], [-1, 1]], "b": [0, 0, 0, 0], "act": "relu"},
        {"w": [[1, 1, 0, 0], [0, 0, 1, 1]], "b": [0, 0], "act": "none"},
    ]
    (HERE / "xor_mlp.json").write_text(json.dumps({"layers": layers, "bounds": [-1, 1]}))
    grid = []
    for a in (-0.5, 0.25, 0.75):
        for b in (-0.75, -0.25, 0.5):
            grid.append({"x": [a, b], "label": forward(layers, [a, b])})
    (HERE / "xor_grid.json").write_text(json.dumps(grid))
    print("xor grid:", [g["label"] for g in grid])


if __name__ == "__main__":
    moons()
    xor()
