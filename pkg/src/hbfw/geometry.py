"""Feasible regions and their linear minimization oracles.

Every region is a norm ball centred at the origin. Diameters and distances
are measured in the Euclidean norm for vectors and the Frobenius norm for
matrices, whatever norm defines the ball itself.
"""

import itertools
import warnings

import numpy as np

from .exceptions import InvalidInputError, ReducedAccuracyWarning

# Gradients whose relevant norm is at or below this are treated as zero.
ZERO_GRAD = 1e-15


def _as_finite_vector(g):
    g = np.asarray(g, dtype=float)
    if g.ndim != 1:
        raise InvalidInputError(f"expected a 1-D gradient, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("gradient has non-finite entries")
    return g


def _check_radius(R):
    if not (np.isfinite(R) and R > 0):
        raise InvalidInputError(f"radius must be positive and finite, got {R!r}")


def lmo_l2(g, R):
    """Minimize ``<g, v>`` over the Euclidean ball of radius `R`.

    Returns ``-R g / ||g||``, or the zero vector when ``||g|| <= 1e-15``.
    """
    g = _as_finite_vector(g)
    _check_radius(R)
    norm = np.linalg.norm(g)
    if norm <= ZERO_GRAD:
        return np.zeros_like(g)
    return (-R / norm) * g


def lmo_l1(g, R):
    """Minimize ``<g, v>`` over the l1 ball: a signed, scaled basis vector.

    The coordinate is the first one attaining ``max |g_i|``.
    """
    g = _as_finite_vector(g)
    _check_radius(R)
    v = np.zeros_like(g)
    if g.size == 0:
        return v
    i = int(np.argmax(np.abs(g)))
    if g[i] == 0.0:
        return v
    v[i] = -np.sign(g[i]) * R
    return v


def top_n_support(g, n):
    """Indices of the `n` largest ``|g_i|``, ties resolved to lower indices."""
    order = np.argsort(-np.abs(g), kind="stable")
    return np.sort(order[:n])


def lmo_nsupport(g, R, n):
    """Minimize ``<g, v>`` over ``conv{x : ||x||_0 <= n, ||x||_2 <= R}``.

    The minimizer lives on the `n` largest-magnitude coordinates of `g`,
    where it equals ``-R g_S / ||g_S||``.
    """
    g = _as_finite_vector(g)
    _check_radius(R)
    n = int(n)
    if not 1 <= n <= g.size:
        raise InvalidInputError(f"support size n={n} outside [1, {g.size}]")
    v = np.zeros_like(g)
    support = top_n_support(g, n)
    gs = g[support]
    norm = np.linalg.norm(gs)
    if norm <= ZERO_GRAD:
        return v
    v[support] = (-R / norm) * gs
    return v


def top_singular_pair(g, tol=1e-10, max_iter=500, seed=0):
    """Leading singular triple of `g` by power iteration on ``g^T g``.

    Iteration stops once ``||g^T p - sigma q|| <= tol * ||g||_F``.

    Returns
    -------
    sigma : float
    p, q : ndarray
        Unit left and right singular vectors.
    converged : bool
        False when `max_iter` was exhausted first.
    """
    g = np.asarray(g, dtype=float)
    m, n = g.shape
    gnorm = np.linalg.norm(g)
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    sigma, p = 0.0, np.zeros(m)
    threshold = tol * gnorm
    for _ in range(max_iter):
        u = g @ q
        sigma = np.linalg.norm(u)
        if sigma == 0.0:
            # start landed in the null space
            q = rng.standard_normal(n)
            q /= np.linalg.norm(q)
            continue
        p = u / sigma
        w = g.T @ p
        wnorm = np.linalg.norm(w)
        if np.linalg.norm(w - sigma * q) <= threshold:
            return sigma, p, q, True
        q = w / wnorm
    return sigma, p, q, False


def lmo_nuclear(g, R, tol=1e-10, max_iter=500, seed=0):
    """Minimize ``<g, V>`` over the nuclear-norm ball: ``-R p q^T``.

    Emits :class:`ReducedAccuracyWarning` when the power iteration does not
    reach `tol`; the best iterate is still returned.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2:
        raise InvalidInputError(f"expected a matrix gradient, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("gradient has non-finite entries")
    _check_radius(R)
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    if np.linalg.norm(g) <= ZERO_GRAD:
        return np.zeros_like(g)
    _, p, q, converged = top_singular_pair(g, tol=tol, max_iter=max_iter, seed=seed)
    if not converged:
        warnings.warn(
            f"power iteration hit max_iter={max_iter} before tol={tol:g}",
            ReducedAccuracyWarning,
            stacklevel=2,
        )
    return -R * np.outer(p, q)


def nsupport_norm(x, n):
    """Gauge of the n-support ball of radius one (the n-support norm).

    Uses the sorted-magnitude closed form: the largest ``n - r - 1`` entries
    contribute their squares, the remaining tail contributes its squared sum
    divided by ``r + 1``.
    """
    z = np.sort(np.abs(np.asarray(x, dtype=float)))[::-1]
    d = z.size
    n = int(n)
    if not 1 <= n <= d:
        raise InvalidInputError(f"support size n={n} outside [1, {d}]")
    best = None
    for r in range(n):
        h = n - r - 1
        tail = z[h:].sum() / (r + 1)
        upper_ok = h == 0 or z[h - 1] > tail * (1 - 1e-12)
        lower_ok = tail >= z[h] * (1 - 1e-12)
        value = np.sqrt(np.sum(z[:h] ** 2) + (r + 1) * tail**2)
        if upper_ok and lower_ok:
            return float(value)
        best = value if best is None else max(best, value)
    # rounding pushed every r just outside its bracket
    return float(best)


class FeasibleRegion:
    """Base class for origin-centred balls with a closed-form LMO."""

    kind = None

    def __init__(self, radius, shape):
        _check_radius(radius)
        self.radius = float(radius)
        self.shape = tuple(np.atleast_1d(shape).astype(int).tolist())

    def lmo(self, g):
        raise NotImplementedError

    def norm(self, x):
        """Gauge of the unit ball of this kind."""
        raise NotImplementedError

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            return False
        return bool(self.norm(x) <= self.radius + tol)

    def diameter(self):
        return 2.0 * self.radius

    def check_shape(self, x):
        if np.shape(x) != self.shape:
            raise InvalidInputError(f"expected shape {self.shape}, got {np.shape(x)}")

    def sample(self, rng, n_atoms=5):
        """A random feasible point: a shrunk convex combination of atoms."""
        atoms = [self.lmo(rng.standard_normal(self.shape)) for _ in range(n_atoms)]
        w = rng.dirichlet(np.ones(n_atoms))
        return rng.uniform() * sum(wi * a for wi, a in zip(w, atoms))

    def __repr__(self):
        return f"{type(self).__name__}(radius={self.radius!r}, shape={self.shape!r})"


class L2Ball(FeasibleRegion):
    kind = "l2"

    def __init__(self, radius, dim):
        super().__init__(radius, (dim,))

    def lmo(self, g):
        return lmo_l2(g, self.radius)

    def norm(self, x):
        return float(np.linalg.norm(x))


class L1Ball(FeasibleRegion):
    kind = "l1"

    def __init__(self, radius, dim):
        super().__init__(radius, (dim,))

    def lmo(self, g):
        return lmo_l1(g, self.radius)

    def norm(self, x):
        return float(np.abs(x).sum())


class NSupportBall(FeasibleRegion):
    kind = "nsupport"

    def __init__(self, radius, dim, n):
        super().__init__(radius, (dim,))
        n = int(n)
        if not 1 <= n <= dim:
            raise InvalidInputError(f"support size n={n} outside [1, {dim}]")
        self.n = n

    def lmo(self, g):
        return lmo_nsupport(g, self.radius, self.n)

    def norm(self, x):
        return nsupport_norm(x, self.n)

    def __repr__(self):
        return f"NSupportBall(radius={self.radius!r}, dim={self.shape[0]}, n={self.n})"


class NuclearBall(FeasibleRegion):
    kind = "nuclear"

    def __init__(self, radius, shape, tol=1e-10, max_iter=500, seed=0):
        super().__init__(radius, shape)
        if len(self.shape) != 2:
            raise InvalidInputError("NuclearBall needs a (rows, cols) shape")
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def lmo(self, g):
        return lmo_nuclear(g, self.radius, self.tol, self.max_iter, self.seed)

    def norm(self, x):
        return float(np.linalg.svd(x, compute_uv=False).sum())


def make_region(kind, radius, shape, n=None, **kwargs):
    """Build a region from its short name: l2, l1, nsupport or nuclear."""
    if kind == "l2":
        return L2Ball(radius, int(np.prod(shape)))
    if kind == "l1":
        return L1Ball(radius, int(np.prod(shape)))
    if kind == "nsupport":
        if n is None:
            raise InvalidInputError("nsupport region needs n")
        return NSupportBall(radius, int(np.prod(shape)), n)
    if kind == "nuclear":
        return NuclearBall(radius, shape, **kwargs)
    raise InvalidInputError(f"unknown region kind {kind!r}")


def lmo_bruteforce(g, region):
    """Exhaustive LMO over the atoms of a small l1 or n-support ball.

    Used as a test oracle only. Refuses l1 balls with d > 12 and n-support
    balls with d > 10 or n > 3.
    """
    g = _as_finite_vector(g)
    d = g.size
    R = region.radius
    best, best_val = None, np.inf
    if isinstance(region, L1Ball):
        if d > 12:
            raise InvalidInputError("brute-force l1 LMO limited to d <= 12")
        for i in range(d):
            for sign in (1.0, -1.0):
                atom = np.zeros(d)
                atom[i] = sign * R
                val = g @ atom
                if val < best_val:
                    best, best_val = atom, val
        return best
    if isinstance(region, NSupportBall):
        if d > 10 or region.n > 3:
            raise InvalidInputError("brute-force n-support LMO limited to d <= 10, n <= 3")
        for support in itertools.combinations(range(d), region.n):
            idx = list(support)
            atom = np.zeros(d)
            norm = np.linalg.norm(g[idx])
            if norm > ZERO_GRAD:
                atom[idx] = (-R / norm) * g[idx]
            val = g @ atom
            if val < best_val:
                best, best_val = atom, val
        return best
    raise InvalidInputError(f"no brute-force oracle for {type(region).__name__}")
