"""Shared fixtures and independent oracles for the test suite.

The oracles here recompute every quantity with plain Python loops or a
from-scratch dense construction so library results are checked against
arithmetic that shares no code with the implementation.
"""

import numpy as np
import pytest

from spgae.model import ModelParams, ProblemData, Variables
from spgae.rng import stream


def relu_scalar(y):
    return y if y > 0 else 0.0


def loop_objective(z, data, params):
    """O(z) computed sample by sample with scalar loops."""
    X = data.X
    n, n0, n1 = data.n_samples, data.n_visible, data.n_hidden
    fid = 0.0
    for j in range(n):
        for i in range(n0):
            recon = sum(z.W[r, i] * z.V[r, j] for r in range(n1)) + z.b2[i]
            fid += (relu_scalar(recon) - X[i, j]) ** 2
    fid /= n
    reg = params.lambda1 * float(np.sum(z.V)) \
        + params.lambda2 * float(np.sum(z.W ** 2))
    pen = 0.0
    for j in range(n):
        for r in range(n1):
            pre = sum(z.W[r, i] * X[i, j] for i in range(n0)) + z.b1[r]
            pen += z.V[r, j] - relu_scalar(pre)
    pen *= params.beta
    return fid + reg + pen, fid, reg, pen


def loop_smoothed(z, mu, data, params):
    """Smoothed objective recomputed with scalar branches."""

    def sig(y):
        if y < 0:
            return 0.0
        if y <= mu:
            return y * y / (2 * mu)
        return y - mu / 2

    X = data.X
    n, n0, n1 = data.n_samples, data.n_visible, data.n_hidden
    fid = float(np.sum(X ** 2))
    for j in range(n):
        for i in range(n0):
            y = sum(z.W[r, i] * z.V[r, j] for r in range(n1)) + z.b2[i]
            fid += relu_scalar(y) ** 2 - 2 * X[i, j] * sig(y)
    fid /= n
    pen = 0.0
    for j in range(n):
        for r in range(n1):
            s = sum(z.W[r, i] * X[i, j] for i in range(n0)) + z.b1[r]
            pen += z.V[r, j] - sig(s)
    pen *= params.beta
    reg = params.lambda1 * float(np.sum(z.V)) \
        + params.lambda2 * float(np.sum(z.W ** 2))
    return fid + pen + reg


def dense_constraint_rows(z, data, params):
    """All nu constraint values g_i(z) <= 0, built row by row."""
    X = data.X
    n, n0, n1 = data.n_samples, data.n_visible, data.n_hidden
    rows = []
    for j in range(n):
        for r in range(n1):
            pre = sum(z.W[r, i] * X[i, j] for i in range(n0)) + z.b1[r]
            rows.append(pre - z.V[r, j])
    for j in range(n):
        for r in range(n1):
            rows.append(-z.V[r, j])
    b = np.concatenate([z.b1, z.b2])
    rows.extend(b - params.alpha)
    rows.extend(-b - params.alpha)
    return np.array(rows)


def random_problem(n, n0, n1, seed=0):
    rng = np.random.default_rng(seed)
    X = np.maximum(rng.standard_normal((n0, n)) + 0.5, 0.0)
    # keep at least one strictly positive entry so norms are nonzero
    X[0, 0] = abs(X[0, 0]) + 0.1
    data = ProblemData.from_matrix(X, n1)
    return data, ModelParams.from_data(data)


def random_feasible(data, params, rng, scale=1.0):
    """A point of Z: V dominates the encoder preactivation, |b| <= alpha."""
    n, n0, n1 = data.n_samples, data.n_visible, data.n_hidden
    W = rng.standard_normal((n1, n0)) * scale
    bcap = min(params.alpha, 2.0 * scale)
    b1 = rng.uniform(-bcap, bcap, n1)
    b2 = rng.uniform(-bcap, bcap, n0)
    S = W @ data.X + b1[:, None]
    V = np.maximum(S, 0.0) + rng.uniform(0.0, scale, (n1, n))
    return Variables(W=W, b1=b1, b2=b2, V=V)


@pytest.fixture
def tiny_problem():
    return random_problem(6, 3, 2, seed=11)


@pytest.fixture
def test_rng():
    return stream(12345, "test")


def write_idx_images(path, images):
    """IDX image file writer independent of the loader under test."""
    import struct

    arr = np.asarray(images, dtype=np.uint8)
    count, rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">iiii", 0x00000803, count, rows, cols))
        fh.write(arr.tobytes())


def write_idx_labels(path, labels):
    import struct

    arr = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">ii", 0x00000801, arr.size))
        fh.write(arr.tobytes())
