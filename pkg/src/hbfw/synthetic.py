"""Seeded synthetic instances for desk-scale experiments and tests."""

import numpy as np

from .objectives import LogisticProblem, MatrixCompletionProblem, QuadraticProblem


def make_quadratic(dim, target_norm=0.5, seed=0):
    """Quadratic whose minimizer is a random point of norm `target_norm`."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(dim)
    return QuadraticProblem(target_norm * c / np.linalg.norm(c))


def make_logistic(n_samples=200, n_features=50, noise=0.5, seed=0):
    """Gaussian features, labels from a noisy random linear model."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_samples, n_features))
    w = rng.standard_normal(n_features)
    b = np.sign(A @ w / np.sqrt(n_features) + noise * rng.standard_normal(n_samples))
    b[b == 0] = 1.0
    return LogisticProblem(A, b)


def make_matrix_completion(rows=60, cols=40, observed_fraction=0.1, rank=3,
                           noise=0.1, seed=0):
    """Low-rank matrix plus noise, observed on a uniformly random index set."""
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((rows, rank))
    V = rng.standard_normal((cols, rank))
    truth = U @ V.T / np.sqrt(rank)
    n_obs = max(1, int(round(observed_fraction * rows * cols)))
    flat = np.sort(rng.choice(rows * cols, size=n_obs, replace=False))
    r, c = np.divmod(flat, cols)
    values = truth[r, c] + noise * rng.standard_normal(n_obs)
    return MatrixCompletionProblem(r, c, values, (rows, cols))
