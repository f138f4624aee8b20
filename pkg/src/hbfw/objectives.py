"""Smooth convex objectives: logistic loss, matrix completion, a quadratic.

Each problem exposes ``value``, ``gradient``, a global Lipschitz constant of
the gradient, the directional constant ``L(x, y)`` along a segment, and an
exact line search over ``[0, 1]``.
"""

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .exceptions import InvalidInputError

LINE_SEARCH_TOL = 1e-10
_SEGMENT_EPS = 1e-15


def _vdot(a, b):
    return float(np.vdot(a, b))


class Problem:
    """Common surface shared by the objectives below."""

    shape = None

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def value_and_gradient(self, x):
        return self.value(x), self.gradient(x)

    def global_lipschitz(self):
        raise NotImplementedError

    def directional_lipschitz(self, x, y):
        raise NotImplementedError

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            raise InvalidInputError(f"expected shape {self.shape}, got {x.shape}")
        return x

    def _segment(self, x, y):
        x, y = self._check(x), self._check(y)
        u = y - x
        sq = _vdot(u, u)
        if np.sqrt(sq) <= _SEGMENT_EPS:
            raise InvalidInputError("directional constant undefined for x == y")
        return u, sq

    def restrict(self, x, v):
        """Return ``(phi, dphi)`` for ``phi(eta) = f(x + eta (v - x))``."""
        x, v = self._check(x), self._check(v)
        u = v - x

        def phi(eta):
            return self.value(x + eta * u)

        def dphi(eta):
            return _vdot(u, self.gradient(x + eta * u))

        return phi, dphi

    def line_search(self, x, v, tol=LINE_SEARCH_TOL):
        """``argmin_{eta in [0, 1]} f((1 - eta) x + eta v)``."""
        if tol <= 0:
            raise InvalidInputError("tol must be positive")
        _, dphi = self.restrict(x, v)
        if np.linalg.norm(np.asarray(v) - np.asarray(x)) <= _SEGMENT_EPS:
            return 0.0
        return _bisect_derivative(dphi, tol)


def _bisect_derivative(dphi, tol):
    # dphi is nondecreasing on [0, 1] by convexity
    d0 = dphi(0.0)
    if d0 >= 0.0:
        return 0.0
    d1 = dphi(1.0)
    if d1 <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        dm = dphi(mid)
        if abs(dm) <= tol:
            return mid
        if dm < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class QuadraticProblem(Problem):
    """``f(x) = 0.5 ||x - c||^2``; Lipschitz constant 1, minimizer `c`."""

    def __init__(self, target):
        c = np.asarray(target, dtype=float)
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("target has non-finite entries")
        self.target = c
        self.shape = c.shape

    def value(self, x):
        r = self._check(x) - self.target
        return 0.5 * _vdot(r, r)

    def gradient(self, x):
        return self._check(x) - self.target

    def global_lipschitz(self):
        return 1.0

    def directional_lipschitz(self, x, y):
        self._segment(x, y)
        return 1.0

    def line_search(self, x, v, tol=LINE_SEARCH_TOL):
        x, v = self._check(x), self._check(v)
        u = v - x
        sq = _vdot(u, u)
        if np.sqrt(sq) <= _SEGMENT_EPS:
            return 0.0
        return float(np.clip(_vdot(self.gradient(x), -u) / sq, 0.0, 1.0))


class LogisticProblem(Problem):
    """Average logistic loss ``(1/N) sum_i log(1 + exp(-b_i <a_i, x>))``.

    Parameters
    ----------
    features : array-like or sparse matrix, shape (N, d)
    labels : array-like, shape (N,)
        Entries must be -1 or +1.
    """

    def __init__(self, features, labels):
        A = sp.csr_matrix(features, dtype=float)
        b = np.asarray(labels, dtype=float).ravel()
        if A.shape[0] < 1:
            raise InvalidInputError("logistic problem needs at least one datum")
        if b.shape[0] != A.shape[0]:
            raise InvalidInputError("features and labels disagree on N")
        if not np.all(np.abs(b) == 1.0):
            raise InvalidInputError("labels must be +1 or -1")
        if not np.all(np.isfinite(A.data)):
            raise InvalidInputError("features have non-finite entries")
        self.features = A
        self.labels = b
        self.n_samples = A.shape[0]
        self.shape = (A.shape[1],)
        self._row_sq = np.asarray(A.multiply(A).sum(axis=1)).ravel()

    def margins(self, x):
        return self.labels * (self.features @ self._check(x))

    def value(self, x):
        # logaddexp(0, -m) == log(1 + exp(-m)) without overflow
        return float(np.mean(np.logaddexp(0.0, -self.margins(x))))

    def gradient(self, x):
        weights = -self.labels * expit(-self.margins(x)) / self.n_samples
        return np.asarray(self.features.T @ weights).ravel()

    def global_lipschitz(self):
        return float(self._row_sq.sum() / (4.0 * self.n_samples))

    def directional_lipschitz(self, x, y):
        u, sq = self._segment(x, y)
        proj = self.features @ u
        return float(_vdot(proj, proj) / (4.0 * self.n_samples * sq))


class MatrixCompletionProblem(Problem):
    """``0.5 sum_{(i,j) in K} (X_ij - A_ij)^2`` over observed entries.

    Indices are 0-based. Use :meth:`from_triples` for 1-based input.
    """

    def __init__(self, rows, cols, values, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        m, n = (int(s) for s in shape)
        if rows.size == 0:
            raise InvalidInputError("matrix completion needs at least one observation")
        if not (rows.size == cols.size == values.size):
            raise InvalidInputError("rows, cols and values must have equal length")
        if rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n:
            raise InvalidInputError("observation index outside the matrix shape")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("observed values must be finite")
        flat = rows * n + cols
        if np.unique(flat).size != flat.size:
            raise InvalidInputError("duplicate (i, j) observation")
        order = np.argsort(flat, kind="stable")
        self.rows, self.cols, self.values = rows[order], cols[order], values[order]
        self.shape = (m, n)

    @classmethod
    def from_triples(cls, triples, shape=None):
        """Build from 1-based ``(i, j, A_ij)`` triples."""
        arr = np.asarray(list(triples), dtype=float).reshape(-1, 3)
        rows = arr[:, 0].astype(np.int64) - 1
        cols = arr[:, 1].astype(np.int64) - 1
        if shape is None:
            shape = (int(rows.max()) + 1, int(cols.max()) + 1) if arr.size else (0, 0)
        return cls(rows, cols, arr[:, 2], shape)

    @property
    def n_observed(self):
        return self.rows.size

    def observed_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.rows, self.cols] = True
        return mask

    def residuals(self, X):
        X = self._check(X)
        return X[self.rows, self.cols] - self.values

    def value(self, X):
        r = self.residuals(X)
        return 0.5 * _vdot(r, r)

    def gradient(self, X):
        G = np.zeros(self.shape)
        G[self.rows, self.cols] = self.residuals(X)
        return G

    def global_lipschitz(self):
        return 1.0

    def directional_lipschitz(self, X, Y):
        U, sq = self._segment(X, Y)
        obs = U[self.rows, self.cols]
        return float(_vdot(obs, obs) / sq)

    def line_search(self, x, v, tol=LINE_SEARCH_TOL):
        x, v = self._check(x), self._check(v)
        U = v - x
        if np.linalg.norm(U) <= _SEGMENT_EPS:
            return 0.0
        obs = U[self.rows, self.cols]
        curvature = _vdot(obs, obs)
        slope = _vdot(self.residuals(x), obs)
        if curvature == 0.0:
            # objective is flat or linear along the segment
            return 0.0 if slope >= 0.0 else 1.0
        return float(np.clip(-slope / curvature, 0.0, 1.0))


def finite_difference_check(problem, x, h=1e-6, n_directions=None, seed=0):
    """Max relative deviation between central differences and the gradient.

    Vectors are probed along each coordinate; matrices along
    `n_directions` random unit directions (default 20).
    """
    if not 1e-8 <= h <= 1e-4:
        raise InvalidInputError("h must lie in [1e-8, 1e-4]")
    x = np.asarray(x, dtype=float)
    grad = problem.gradient(x)
    scale = max(1.0, float(np.max(np.abs(grad))))
    if x.ndim == 1 and n_directions is None:
        directions = np.eye(x.size)
    else:
        rng = np.random.default_rng(seed)
        k = n_directions or 20
        directions = rng.standard_normal((k,) + x.shape)
        norms = np.sqrt((directions**2).reshape(k, -1).sum(axis=1))
        directions /= norms.reshape((k,) + (1,) * x.ndim)
    worst = 0.0
    for e in directions:
        fd = (problem.value(x + h * e) - problem.value(x - h * e)) / (2.0 * h)
        exact = _vdot(grad, e)
        worst = max(worst, abs(fd - exact) / max(abs(exact), scale))
    return worst
