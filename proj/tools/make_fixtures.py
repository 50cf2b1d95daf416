#!/usr/bin/env python3
"""Regenerates fixtures/ and the oracle values in fixtures/golden.json.

Every golden value here comes from code that shares nothing with the C++
library: numpy/scipy forward passes, central finite differences,
permutation-average Shapley values, direct circular convolution and an
exact-rational model of the truncating multiplier.

    python3 tools/make_fixtures.py [--out fixtures]
"""

import argparse
import itertools
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import correlate2d

SEED = 20240607


# ---------------------------------------------------------------- models

def dense(w, b, activation="identity"):
    return {"kind": "dense", "weights": np.asarray(w).tolist(), "bias": np.asarray(b).tolist(),
            "activation": activation}


def make_models(rng):
    r = lambda *shape: np.round(rng.normal(0.0, 0.7, size=shape), 6)
    models = {
        "mlp_4_8_2": {
            "schema_version": 1,
            "input_shape": [4],
            "layers": [dense(r(8, 4), r(8), "relu"), dense(r(2, 8), r(2)), {"kind": "softmax"}],
        },
        "linear_5": {
            "schema_version": 1,
            "input_shape": [5],
            "layers": [dense(r(1, 5), [0.25])],
        },
        "conv_4x4": {
            "schema_version": 1,
            "input_shape": [4, 4],
            "layers": [
                {"kind": "conv2d", "kernel": r(3, 3).tolist(), "bias": 0.1, "stride": 1,
                 "activation": "relu"},
                {"kind": "flatten"},
                dense(r(2, 16) / 2.0, r(2)),
                {"kind": "softmax"},
            ],
        },
        "wide_13": {
            "schema_version": 1,
            "input_shape": [13],
            "layers": [dense(r(1, 13), [0.0])],
        },
    }
    return models


def forward(model, x):
    shape = model["input_shape"]
    v = np.asarray(x, dtype=float).reshape(shape)
    for layer in model["layers"]:
        kind = layer["kind"]
        if kind == "dense":
            v = np.asarray(layer["weights"]) @ v.reshape(-1) + np.asarray(layer["bias"])
            v = activate(v, layer.get("activation", "identity"))
        elif kind == "conv2d":
            v = correlate2d(v, np.asarray(layer["kernel"]), mode="same") + layer["bias"]
            v = activate(v, layer.get("activation", "identity"))
        elif kind == "flatten":
            v = v.reshape(-1)
        elif kind == "relu":
            v = np.maximum(v, 0.0)
        elif kind == "softmax":
            v = softmax(v)
    return v.reshape(-1)


def activate(v, name):
    if name == "relu":
        return np.maximum(v, 0.0)
    if name == "softmax":
        return softmax(v)
    return v


def softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def fd_gradient(model, x, c, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        up, dn = x.copy(), x.copy()
        up[j] += h
        dn[j] -= h
        g[j] = (forward(model, up)[c] - forward(model, dn)[c]) / (2 * h)
    return g


def ig_dense(model, x, base, c, steps):
    """Riemann midpoint sum of finite-difference gradients."""
    x, base = np.asarray(x, float), np.asarray(base, float)
    total = np.zeros_like(x)
    for k in range(steps):
        a = (k + 0.5) / steps
        total += fd_gradient(model, base + a * (x - base), c)
    return total / steps * (x - base)


def shapley_permutations(model, x, base, c):
    n = len(x)
    phi = np.zeros(n)
    perms = list(itertools.permutations(range(n)))
    for perm in perms:
        cur = np.asarray(base, float).copy()
        prev = forward(model, cur)[c]
        for i in perm:
            cur[i] = x[i]
            val = forward(model, cur)[c]
            phi[i] += val - prev
            prev = val
    return phi / len(perms)


def circular_conv2d(x, k):
    rows, cols = x.shape
    y = np.zeros_like(x)
    for i in range(rows):
        for j in range(cols):
            s = 0.0
            for u in range(rows):
                for v in range(cols):
                    s += x[u, v] * k[(i - u) % rows, (j - v) % cols]
            y[i, j] = s
    return y


# ------------------------------------------------------ bfloat16 oracle

def bf16_round(q: Fraction) -> Fraction:
    """Nearest-even bfloat16 value of a rational (normal range only)."""
    if q == 0:
        return Fraction(0)
    sign = -1 if q < 0 else 1
    q = abs(q)
    e = math.floor(math.log2(q))
    while Fraction(2) ** e > q:
        e -= 1
    while Fraction(2) ** (e + 1) <= q:
        e += 1
    scaled = q / Fraction(2) ** (e - 7)  # in [128, 256)
    n = math.floor(scaled)
    rem = scaled - n
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and n % 2 == 1):
        n += 1
    return sign * Fraction(n) * Fraction(2) ** (e - 7)


def bf16_parts(v: float):
    q = Fraction(v)
    assert bf16_round(q) == q, v
    sign = -1 if q < 0 else 1
    q = abs(q)
    e = math.floor(math.log2(q))
    sig = q / Fraction(2) ** (e - 7)
    assert sig.denominator == 1 and 128 <= sig < 256
    return sign, int(sig), e - 7


def truncating_multiply(a: float, b: float, level: int) -> float:
    """8x8 significand product with the low (11 - level) columns dropped and
    half their maximum value added back."""
    if a == 0 or b == 0:
        return 0.0
    sa, ma, ea = bf16_parts(a)
    sb, mb, eb = bf16_parts(b)
    dropped = 11 - level
    # Dropping the low result columns keeps the high bits of the exact
    # 16-bit significand product.
    product = ma * mb
    kept = product - (product & ((1 << dropped) - 1))
    compensated = Fraction(kept) + Fraction((1 << dropped) - 1, 2)
    return float(sa * sb * bf16_round(compensated * Fraction(2) ** (ea + eb)))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)

    models = make_models(rng)
    for name, m in models.items():
        (out / f"{name}.json").write_text(json.dumps(m, indent=2) + "\n")

    inputs = {
        "mlp_4_8_2": np.round(rng.uniform(-1, 1, 4), 6),
        "linear_5": np.round(rng.uniform(-1, 1, 5), 6),
        "conv_4x4": np.round(rng.uniform(0, 1, 16), 6),
        "wide_13": np.round(rng.uniform(-1, 1, 13), 6),
    }
    np.savetxt(out / "x.csv", inputs["mlp_4_8_2"][None, :], delimiter=",", fmt="%.6f")
    np.savetxt(out / "x_linear.csv", inputs["linear_5"][None, :], delimiter=",", fmt="%.6f")
    np.savetxt(out / "x_conv.csv", inputs["conv_4x4"].reshape(4, 4), delimiter=",", fmt="%.6f")
    np.savetxt(out / "x_wide.csv", inputs["wide_13"][None, :], delimiter=",", fmt="%.6f")

    golden = {"forward": {}, "fd_gradient": {}, "ig_dense": {}, "shapley": {}}
    for name in ("mlp_4_8_2", "linear_5", "conv_4x4"):
        m, x = models[name], inputs[name]
        base = np.zeros_like(x)
        golden["forward"][name] = forward(m, x).tolist()
        golden["fd_gradient"][name] = fd_gradient(m, x, 0).tolist()
        golden["ig_dense"][name] = ig_dense(m, x, base, 0, 4000).tolist()
        if x.size <= 5:
            golden["shapley"][name] = shapley_permutations(m, x, base, 0).tolist()

    # Path gradients of the MLP at nine uniform nodes.
    m, x = models["mlp_4_8_2"], inputs["mlp_4_8_2"]
    golden["path_grads_mlp_n9"] = [fd_gradient(m, (i / 8) * x, 0).tolist() for i in range(9)]

    # Distillation pairs: an impulse pair and a random pair, 8x8, circular.
    impulse = np.zeros((8, 8))
    impulse[0, 0] = 1.0
    y_imp = np.round(rng.uniform(-1, 1, (8, 8)), 6)
    np.savetxt(out / "impulse_x.csv", impulse, delimiter=",", fmt="%.6f")
    np.savetxt(out / "impulse_y.csv", y_imp, delimiter=",", fmt="%.6f")
    xr = np.round(rng.uniform(-1, 1, (8, 8)), 6)
    kr = np.round(rng.uniform(-1, 1, (8, 8)), 6)
    yr = circular_conv2d(xr, kr)
    np.savetxt(out / "pair_x.csv", xr, delimiter=",", fmt="%.6f")
    np.savetxt(out / "pair_y.csv", yr, delimiter=",", fmt="%.17g")
    np.savetxt(out / "pair_k.csv", kr, delimiter=",", fmt="%.6f")

    golden["multiplier"] = {
        "1.2890625*1.828125@0": truncating_multiply(1.2890625, 1.828125, 0),
        "1.2890625*1.828125@5": truncating_multiply(1.2890625, 1.828125, 5),
        "-3.5*0.0078125@0": truncating_multiply(-3.5, 0.0078125, 0),
    }
    (out / "golden.json").write_text(json.dumps(golden, indent=2) + "\n")


if __name__ == "__main__":
    main()
