#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes the demo bundles under demos/ in the canonical bundle layout."""

import itertools
import json
import pathlib
import struct

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent / "demos"


def f32(x):
    return struct.unpack("<f", struct.pack("<f", float(x)))[0]


def hexf(x):
    return "0x%08X" % struct.unpack("<I", struct.pack("<f", float(x)))[0]


def dec(x):
    v = np.float32(x)
    return np.format_float_positional(v, unique=True, trim="-") if abs(v) >= 1e-4 or v == 0 else np.format_float_scientific(v, unique=True, trim="-")


def tensor(shape, data):
    data = [f32(v) for v in data]
    return {"shape": list(shape), "data": [hexf(v) for v in data], "data_decimal": [dec(v) for v in data]}


class Builder:
    def __init__(self):
        self.nodes = []
        self.params = {}

    def node(self, op, parents, shape, **extra):
        nid = len(self.nodes)
        n = {"id": nid, "op": op, "parents": parents, "out_shape": list(shape)}
        n.update(extra)
        self.nodes.append(n)
        return nid

    def inp(self, shape):
        return self.node("input", [], shape)

    def param(self, key, shape, data):
        self.params[key] = tensor(shape, data)
        return self.node("param", [], shape, key=key)

    def linear(self, x, key, w, b, batch=None):
        w = np.asarray(w, dtype=float)
        out_d, in_d = w.shape
        wn = self.param(key + ".W", (out_d, in_d), w.ravel())
        bn = self.param(key + ".b", (out_d,), b)
        shape = (out_d,) if batch is None else (batch, out_d)
        return self.node("linear", [x, wn, bn], shape, in_dim=in_d, out_dim=out_d)

    def bundle(self, graph_id, region=None, prop=None, inputs=None, meta=None):
        b = {
            "schema_version": 1,
            "graph_id": graph_id,
            "nodes": self.nodes,
            "output": len(self.nodes) - 1,
            "params": self.params,
            "metadata": meta or {},
        }
        if region is not None:
            b["input_region"] = [{"lo": [hexf(v) for v in lo], "hi": [hexf(v) for v in hi]} for lo, hi in region]
        if prop is not None:
            b["property"] = {"clauses": [{"C": [[hexf(v) for v in r] for r in C], "d": [hexf(v) for v in d]} for C, d in prop]}
        if inputs is not None:
            b["data"] = {"inputs": [tensor(s, v) for s, v in inputs]}
        return b


def write(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def relu_toy():
    b = Builder()
    x = b.inp((1,))
    b.node("relu", [x], (1,))
    return b.bundle("relu-toy", region=[([-1.0], [1.0])], meta={"source": "hand-written"})


def mlp(w1, b1, w2, b2, graph_id, region, prop=None):
    b = Builder()
    x = b.inp((len(w1[0]),))
    h = b.linear(x, "l1", w1, b1)
    r = b.node("relu", [h], (len(w1),))
    b.linear(r, "l2", w2, b2)
    return b.bundle(graph_id, region=region, prop=prop, meta={"source": "make_demos.py"})


MLP_W1 = [[1.0, -0.5], [0.25, 0.75], [-1.0, 0.5], [0.5, 0.5]]
MLP_B1 = [0.0, -0.25, 0.125, 0.0]
MLP_W2 = [[1.0, -1.0, 0.5, 0.25], [-0.5, 0.75, 1.0, -0.25]]
MLP_B2 = [0.5, -0.125]


def train_demo():
    b = Builder()
    x = b.inp((3, 2))
    y = b.inp((3, 1))
    p = b.linear(x, "fc", [[0.0, 0.0]], [0.0], batch=3)
    b.node("mse_loss", [p, y], ())
    return b.bundle(
        "linreg-3",
        inputs=[((3, 2), [1, 0, 0, 1, 1, 1]), ((3, 1), [2, -3, -1])],
        meta={"source": "make_demos.py", "task": "10 SGD steps, lr 0.2"},
    )


def vnn_suite():
    w1 = [[1.0, -1.0], [0.5, 1.0], [-0.75, 0.25]]
    b1 = [0.25, 0.0, -0.125]
    w2 = [[1.0, 0.5, -1.0]]
    b2 = [0.0]
    lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])

    def forward(x):
        h = np.maximum(np.array(w1) @ x + np.array(b1), 0.0)
        return float((np.array(w2) @ h + np.array(b2))[0])

    # Interval lower bound of the output and a dense-grid minimum.
    W1, B1 = np.array(w1), np.array(b1)
    hl = np.maximum(np.clip(W1, 0, None) @ lo + np.clip(W1, None, 0) @ hi + B1, 0)
    hu = np.maximum(np.clip(W1, 0, None) @ hi + np.clip(W1, None, 0) @ lo + B1, 0)
    W2 = np.array(w2)[0]
    ibp_lb = float(np.clip(W2, 0, None) @ hl + np.clip(W2, None, 0) @ hu + b2[0])
    grid = np.linspace(-1, 1, 201)
    true_min = min(forward(np.array(p)) for p in itertools.product(grid, grid))
    out = {}
    # Counterexample clause y <= t. Six thresholds under every sound bound,
    # four at or above the attained minimum.
    ts = [ibp_lb - 0.5 - 0.25 * k for k in range(6)] + [true_min + 0.25 * k + 0.125 for k in range(4)]
    for i, t in enumerate(ts):
        out["inst_%02d.json" % i] = mlp(w1, b1, w2, b2, "vnn-%02d" % i, [(lo.tolist(), hi.tolist())],
                                         prop=[([[1.0]], [t])])
    return out


def main():
    write(ROOT / "relu_toy.json", relu_toy())
    write(ROOT / "mlp.json", mlp(MLP_W1, MLP_B1, MLP_W2, MLP_B2, "mlp-2-4-2", [([-1.0, -1.0], [1.0, 1.0])],
                                 prop=[([[1.0, -1.0]], [-4.0])]))
    write(ROOT / "train_demo.json", train_demo())
    for name, b in vnn_suite().items():
        write(ROOT / "vnn" / name, b)


if __name__ == "__main__":
    main()
