"""Independent oracles for the frozen expected values in the C++ test suites.

Each block evaluates the defining formula directly (or by Monte Carlo / brute
force) without touching the C++ implementation. Run with `python3
derive_expected.py`; the printed numbers are the constants hard-coded in
tests/unit/*.cpp and tests/acceptance/*.cpp.
"""
import math

import numpy as np


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def ndcg_two_items():
    # true ratings i1:5, i2:3; the model ranks i2 first
    dcg = 3 / math.log2(2) + 5 / math.log2(3)
    idcg = 5 / math.log2(2) + 3 / math.log2(3)
    print(f"ndcg two items        : {dcg / idcg:.12f}")


def contrastive_two_users():
    f1 = np.array([1.0, 0.0])
    f0 = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    logits = np.array([f1 @ g for g in f0]) / 1.0
    loss = -math.log(math.exp(logits[0]) / np.exp(logits).sum())
    print(f"contrastive 2 users   : {loss:.15f}")


def encoder_hand_set():
    # one hidden layer (2->2) then output layer (2->2), tanh on both
    x = np.array([0.5, -1.0])
    w0 = np.array([[0.3, -0.2], [0.1, 0.4]])
    b0 = np.array([0.05, -0.1])
    w1 = np.array([[1.0, 0.5], [-0.7, 0.2]])
    b1 = np.array([0.0, 0.3])
    a = np.tanh(w0 @ x + b0)
    z = np.tanh(w1 @ a + b1)
    print(f"encoder hand-set      : {z[0]:.15f} {z[1]:.15f}")


def caunet_hand_set():
    # mf mode, K=1: z = (e_u, e_i, e_u * e_i); affine heads r = w.z + b
    eu, ei = 0.8, -0.5
    z = np.array([eu, ei, eu * ei])
    w, b = np.array([0.2, -0.1, 1.5]), 3.0
    r1 = w @ z + b
    w0, b0 = np.array([0.0, 0.4, 0.5]), 2.5
    r0 = w0 @ z + b0
    h = np.array([0.7, 1.1, 0.0])
    o = sigmoid(h @ z)
    print(f"caunet hand-set       : r1={r1:.15f} r0={r0:.15f} o={o:.15f}")


def adam_closed_forms():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    # one step from zero moments
    for g in (0.5, -2.0, 1e-6):
        m = (1 - b1) * g
        v = (1 - b2) * g * g
        mh = m / (1 - b1)
        vh = v / (1 - b2)
        print(f"adam one step g={g:<8}: delta={-lr * mh / (math.sqrt(vh) + eps):.15e}")
    # constant gradient: brute-force recurrence for 1000 steps
    g, theta, m, v = 0.3, 1.0, 0.0, 0.0
    for t in range(1, 1001):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    print(f"adam 1000 const steps : theta={theta:.15f}  (closed form {1.0 - 1000 * lr * g / (g + eps):.15f})")


def snips_three_pairs():
    e = np.array([1.0, 4.0, 0.25])
    p = np.array([0.5, 0.2, 0.8])
    print(f"snips three pairs     : {(e / p).sum() / (1 / p).sum():.15f}")


def ecdf_bound():
    # every sample at least 0.1 away from each threshold; tau = 50
    # per-sample deviation from the indicator is at most 1 - sigmoid(50 * 0.1)
    print(f"ecdf per-sample bound : {1 - sigmoid(5.0):.6f}")
    rng = np.random.default_rng(3)
    thresholds = np.array([1 + 4 * k / 10 for k in range(1, 11)])
    samples = []
    while len(samples) < 1000:
        s = rng.uniform(0.5, 5.5)
        if np.min(np.abs(thresholds - s)) >= 0.1:
            samples.append(s)
    samples = np.array(samples)
    f = np.array([np.mean(1 / (1 + np.exp(-50 * (t - samples)))) for t in thresholds])
    ecdf = np.array([np.mean(samples <= t) for t in thresholds])
    print(f"ecdf sampled max err  : {np.max(np.abs(f - ecdf)):.6f}")


def ground_truth_mean():
    # same construction as generate_ground_truth, numpy RNG, many seeds
    n, m, rank, noise, lo, hi = 200, 300, 8, 0.5, 1.0, 5.0
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    means = []
    rng = np.random.default_rng(12345)
    for _ in range(400):
        a = rng.standard_normal((n, rank))
        b = rng.standard_normal((m, rank))
        raw = a @ b.T / math.sqrt(rank) + noise * rng.standard_normal((n, m))
        r = mid + (raw - raw.mean()) / raw.std() * (half / 2)
        means.append(np.clip(r, lo, hi).mean())
    means = np.array(means)
    print(f"ground truth mean     : mc_mean={means.mean():.6f} mc_sd={means.std(ddof=1):.6f}")


def binomial_bound():
    n = 200 * 300
    p = 0.3
    print(f"binomial 3 sigma      : {3 * math.sqrt(n * p * (1 - p)):.4f}")


if __name__ == "__main__":
    ndcg_two_items()
    contrastive_two_users()
    encoder_hand_set()
    caunet_hand_set()
    adam_closed_forms()
    snips_three_pairs()
    ecdf_bound()
    ground_truth_mean()
    binomial_bound()
