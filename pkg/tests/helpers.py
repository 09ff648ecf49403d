"""Shared fixture builders for the test suite."""

import numpy as np

from qrfs.evaluation import LabeledDataset
from qrfs.matrix import kahan_matrix


def scaled_kahan(n=32, c=0.2, tau=1e-7):
    """Kahan matrix with column j damped by (1 - tau)**j.

    The exact family has all residual column norms tied to machine precision,
    so greedy pivoting picks arbitrarily; the standard damping pins the
    no-pivot order that exhibits the rank-revealing failure.
    """
    return kahan_matrix(n, c) * (1.0 - tau) ** np.arange(n)[None, :]


def planted_regression(seed, m=100, n=50, signals=5, noise_scale=1e-3):
    """Five strong orthogonal signal columns plus noisy copies.

    Returns (X, noise_fro): the data and the Frobenius norm of the injected
    noise, the floor for reconstruction-quality assertions.
    """
    rng = np.random.default_rng(seed)
    base = np.linalg.qr(rng.standard_normal((m, signals)))[0] * 3.0
    noise = rng.standard_normal((m, n)) * noise_scale
    noise[:, :signals] = 0.0
    x = np.empty((m, n))
    for j in range(n):
        x[:, j] = base[:, j % signals] + noise[:, j]
    return x, float(np.linalg.norm(noise))


def planted_nmf(seed, m=60, n=40, groups=5, atten=0.3, noise=0.3):
    """Nonnegative block-signal fixture: feature j carries signal j % groups.

    The first `groups` columns are the clean originals; the rest are
    attenuated noisy duplicates.
    """
    rng = np.random.default_rng(seed)
    block = m // groups
    base = np.zeros((m, groups))
    for g in range(groups):
        base[block * g: block * (g + 1), g] = 4.0 + rng.uniform(0.0, 1.0, block)
    x = np.empty((m, n))
    for j in range(n):
        g = j % groups
        if j < groups:
            x[:, j] = base[:, g]
        else:
            x[:, j] = np.abs(atten * base[:, g] + rng.standard_normal(m) * noise)
    return x


def planted_classification(seed, m=80, n=100, informative=5):
    """Binary task: a few shifted informative features, redundant mixes, noise."""
    rng = np.random.default_rng(seed)
    y = np.array([0, 1] * (m // 2))
    x = np.empty((m, n))
    for j in range(informative):
        x[:, j] = y * 2.0 + rng.standard_normal(m) * 0.7
    for j in range(informative, n):
        if j % 2 == 0:
            x[:, j] = 0.6 * x[:, j % informative] + rng.standard_normal(m)
        else:
            x[:, j] = rng.standard_normal(m)
    return LabeledDataset(x=x, y=y, class_count=2)


def xor_toy(seed=0, per_cluster=10):
    """Two features jointly sufficient (XOR clusters), third feature pure noise."""
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for cx, cy, lab in ((0, 0, 0), (1, 1, 0), (0, 1, 1), (1, 0, 1)):
        for _ in range(per_cluster):
            rows.append([cx + rng.normal(0, 0.05), cy + rng.normal(0, 0.05),
                         rng.normal(0, 1)])
            labels.append(lab)
    return LabeledDataset(x=np.array(rows), y=np.array(labels), class_count=2)


def separable_toy(seed=0, m=40, extra=2):
    """Linearly separated binary set with a couple of noise features."""
    rng = np.random.default_rng(seed)
    y = np.array([0, 1] * (m // 2))
    cols = [y * 4.0 + rng.standard_normal(m) * 0.2]
    for _ in range(extra):
        cols.append(rng.standard_normal(m))
    return LabeledDataset(x=np.column_stack(cols), y=y, class_count=2)
