"""Frank-Wolfe and heavy-ball Frank-Wolfe iterations.

The heavy-ball variant keeps a running average ``g`` of past gradients and
calls the LMO on ``g`` instead of the current gradient. The same average
defines an affine lower bound ``Phi(y) = C + <g, y>`` on ``f``; the offset
``C`` is updated recursively, so the generalized gap
``G = f(x) - min Phi = f(x) - C - <g, v>`` costs nothing beyond the LMO
call the iteration already makes.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InvalidInputError, NumericFailure
from .objectives import LINE_SEARCH_TOL

FEAS_TOL = 1e-9
RANK_RTOL = 1e-8
_NULL_STEP = 1e-15


# --------------------------------------------------------------------------
# step-size policies


def _smooth_eta(grad, x, v, lipschitz):
    u = v - x
    sq = float(np.vdot(u, u))
    if sq == 0.0 or lipschitz <= 0.0:
        # any eta gives the same point, or the model is linear along u
        return 0.0 if sq == 0.0 or np.vdot(grad, u) >= 0 else 1.0
    return float(np.clip(np.vdot(grad, -u) / (lipschitz * sq), 0.0, 1.0))


class StepPolicy:
    """Chooses the momentum weight ``delta_k`` and the step ``eta_k``."""

    name = None

    def delta(self, k):
        return 2.0 / (k + 2.0)

    def eta(self, k, delta, problem, x, v, grad):
        return delta


@dataclass(frozen=True)
class OpenLoop2(StepPolicy):
    """``delta_k = eta_k = 2 / (k + 2)``."""

    name = "open-loop-2"


@dataclass(frozen=True)
class Uniform(StepPolicy):
    """``delta_k = eta_k = 1 / (k + 1)``: g is the plain gradient average."""

    name = "uniform"

    def delta(self, k):
        return 1.0 / (k + 1.0)


@dataclass(frozen=True)
class ConstantDelta(StepPolicy):
    """Fixed momentum weight with ``eta_k = c / (k + k0 + 1)``."""

    delta_value: float = 0.8
    c: float = 2.0
    k0: float = 2.0
    name = "constant-delta"

    def __post_init__(self):
        if not 0.0 < self.delta_value < 1.0:
            raise InvalidInputError("constant delta must lie in (0, 1)")
        if self.c <= 0 or self.k0 < 0:
            raise InvalidInputError("need c > 0 and k0 >= 0")

    def delta(self, k):
        return self.delta_value

    def eta(self, k, delta, problem, x, v, grad):
        return min(1.0, self.c / (k + self.k0 + 1.0))


@dataclass(frozen=True)
class Smooth(StepPolicy):
    """``eta_k = clip(<grad, x - v> / (L ||v - x||^2), 0, 1)`` with global L."""

    name = "smooth"

    def eta(self, k, delta, problem, x, v, grad):
        return _smooth_eta(grad, x, v, problem.global_lipschitz())


@dataclass(frozen=True)
class DirectionalSmooth(StepPolicy):
    """Smooth step with ``L`` replaced by ``L(x_k, v_{k+1})``."""

    name = "directional-smooth"

    def eta(self, k, delta, problem, x, v, grad):
        if np.linalg.norm(v - x) <= _NULL_STEP:
            lipschitz = problem.global_lipschitz()
        else:
            lipschitz = problem.directional_lipschitz(x, v)
        return _smooth_eta(grad, x, v, lipschitz)


@dataclass(frozen=True)
class LineSearch(StepPolicy):
    """Exact minimization of f along the segment ``[x_k, v_{k+1}]``."""

    tol: float = LINE_SEARCH_TOL
    name = "line-search"

    def eta(self, k, delta, problem, x, v, grad):
        return problem.line_search(x, v, self.tol)


@dataclass(frozen=True)
class JointDescent(StepPolicy):
    """Pick ``delta_k`` (and ``eta_k = delta_k``) to shrink the gap bound.

    See :func:`joint_descent_step`.
    """

    grid_size: int = 65
    name = "joint-descent"

    def __post_init__(self):
        if self.grid_size < 2:
            raise InvalidInputError("grid_size must be at least 2")


POLICIES = {
    "open-loop-2": OpenLoop2,
    "uniform": Uniform,
    "constant-delta": ConstantDelta,
    "smooth": Smooth,
    "directional-smooth": DirectionalSmooth,
    "line-search": LineSearch,
    "joint-descent": JointDescent,
}

# step rules accepted by plain Frank-Wolfe
FW_POLICIES = (OpenLoop2, Smooth, DirectionalSmooth, LineSearch)


def make_policy(name, **params):
    """Instantiate a policy by name, e.g. ``make_policy("constant-delta", delta_value=0.6)``."""
    try:
        cls = POLICIES[name]
    except KeyError:
        raise InvalidInputError(
            f"unknown policy {name!r}; choose from {sorted(POLICIES)}"
        ) from None
    return cls(**params)


# --------------------------------------------------------------------------
# state and trace


@dataclass
class MomentumState:
    """Running state of heavy-ball Frank-Wolfe after ``k`` iterations.

    ``C`` and ``g`` define the lower model ``Phi_k(y) = C + <g, y>`` and
    ``v`` is its minimizer over the region. ``delta``/``eta`` are the
    parameters of the step that produced ``x`` (None at k = 0).
    """

    x: np.ndarray
    g: np.ndarray
    C: float
    v: np.ndarray
    k: int
    f_x: float
    grad_x: np.ndarray
    gap_gen: float
    gap_vanilla: Optional[float] = None
    delta: Optional[float] = None
    eta: Optional[float] = None

    def phi(self, y):
        """Evaluate the affine lower model at `y`."""
        return self.C + float(np.vdot(self.g, y))

    @property
    def lower_bound(self):
        """Certified lower bound ``Phi_k(v_k) <= f(x*)``."""
        return self.C + float(np.vdot(self.g, self.v))


@dataclass
class TraceRecord:
    k: int
    f: float
    gap_gen: float
    gap_vanilla: Optional[float] = None
    delta: Optional[float] = None
    eta: Optional[float] = None
    elapsed_ns: int = 0
    structure: int = 0


@dataclass
class RunResult:
    trace: list
    state: object
    converged: bool
    extras: dict = field(default_factory=dict)

    @property
    def x(self):
        return self.state.x


def structure_of(x):
    """nnz for vectors, numerical rank (``sigma > 1e-8 sigma_max``) for matrices."""
    x = np.asarray(x)
    if x.ndim == 1:
        return int(np.count_nonzero(x))
    s = np.linalg.svd(x, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > RANK_RTOL * s[0]))


def _check_start(problem, region, x0):
    x0 = np.array(x0, dtype=float)
    if x0.shape != tuple(problem.shape) or x0.shape != region.shape:
        raise InvalidInputError(
            f"x0 shape {x0.shape} does not match problem {problem.shape} / region {region.shape}"
        )
    if not region.contains(x0, FEAS_TOL):
        raise InvalidInputError("x0 is not feasible")
    return x0


def _finite(value, what, k):
    if not np.all(np.isfinite(value)):
        raise NumericFailure(f"non-finite {what} at iteration {k}", iteration=k)
    return value


def gap_offset_update(C, delta, f_x, grad_x, x):
    """``C_{k+1} = (1 - delta) C_k + delta (f(x_k) - <grad f(x_k), x_k>)``."""
    return (1.0 - delta) * C + delta * (f_x - float(np.vdot(grad_x, x)))


def vanilla_gap(problem, x, region, grad=None):
    """Frank-Wolfe gap ``<grad f(x), x - v>`` with ``v = lmo(grad f(x))``."""
    if grad is None:
        grad = problem.gradient(x)
    v = region.lmo(grad)
    return float(np.vdot(grad, x - v))


def momentum_error(state, grad_now):
    """``||g_{k+1} - grad f(x_k)||_2`` for the averaged gradient in `state`."""
    return float(np.linalg.norm(np.asarray(state.g) - np.asarray(grad_now)))


def init_state(problem, region, x0, with_vanilla=False):
    """State at k = 0 with ``Phi_0`` the tangent plane of f at `x0`.

    The resulting ``gap_gen`` equals the vanilla gap at `x0`.
    """
    x0 = _check_start(problem, region, x0)
    f0, g0 = problem.value_and_gradient(x0)
    C0 = f0 - float(np.vdot(g0, x0))
    v0 = region.lmo(g0)
    gap = f0 - (C0 + float(np.vdot(g0, v0)))
    return MomentumState(
        x=x0, g=g0, C=C0, v=v0, k=0, f_x=f0, grad_x=g0, gap_gen=gap,
        gap_vanilla=gap if with_vanilla else None,
    )


def _advance(state, problem, region, delta, g_next, v_next, eta, with_vanilla):
    k = state.k
    x_next = (1.0 - eta) * state.x + eta * v_next
    _finite(x_next, "iterate", k)
    C_next = gap_offset_update(state.C, delta, state.f_x, state.grad_x, state.x)
    f_next, grad_next = problem.value_and_gradient(x_next)
    _finite(f_next, "objective", k)
    _finite(grad_next, "gradient", k)
    gap = f_next - (C_next + float(np.vdot(g_next, v_next)))
    gap_v = vanilla_gap(problem, x_next, region, grad_next) if with_vanilla else None
    return MomentumState(
        x=x_next, g=g_next, C=C_next, v=v_next, k=k + 1, f_x=f_next,
        grad_x=grad_next, gap_gen=gap, gap_vanilla=gap_v, delta=delta, eta=eta,
    )


def hfw_step(state, problem, region, policy, with_vanilla=False):
    """One heavy-ball Frank-Wolfe iteration; returns the next state."""
    if isinstance(policy, JointDescent):
        return joint_descent_step(state, problem, region, policy.grid_size, with_vanilla)
    k = state.k
    delta = policy.delta(k)
    g_next = (1.0 - delta) * state.g + delta * state.grad_x
    _finite(g_next, "averaged gradient", k)
    v_next = region.lmo(g_next)
    eta = float(policy.eta(k, delta, problem, state.x, v_next, state.grad_x))
    _finite(eta, "step size", k)
    return _advance(state, problem, region, delta, g_next, v_next, eta, with_vanilla)


def _joint_score(gap, delta, lipschitz, v, x):
    u = v - x
    return (1.0 - delta) * gap + 0.5 * delta**2 * lipschitz * float(np.vdot(u, u))


def joint_descent_step(state, problem, region, grid_size=65, with_vanilla=False):
    """Iteration that picks delta by minimizing the one-step gap bound.

    Every candidate ``delta`` on a uniform grid over [0, 1], plus
    ``2 / (k + 2)``, is scored by
    ``(1 - delta) G_k + delta^2 L ||v(delta) - x_k||^2 / 2`` with
    ``v(delta) = lmo((1 - delta) g_k + delta grad f(x_k))``. The lowest
    score wins (ties go to the smaller delta) and ``eta_k = delta_k``.
    """
    if grid_size < 2:
        raise InvalidInputError("grid_size must be at least 2")
    k = state.k
    lipschitz = problem.global_lipschitz()
    candidates = np.unique(np.append(np.linspace(0.0, 1.0, grid_size), 2.0 / (k + 2.0)))
    best = None
    for delta in candidates:
        if delta == 0.0:
            # v(0) is the current minimizer of Phi_k
            g_d, v_d = state.g, state.v
        else:
            g_d = (1.0 - delta) * state.g + delta * state.grad_x
            v_d = region.lmo(g_d)
        score = _joint_score(state.gap_gen, delta, lipschitz, v_d, state.x)
        if best is None or score < best[0]:
            best = (score, float(delta), g_d, v_d)
    _, delta, g_next, v_next = best
    return _advance(state, problem, region, delta, g_next, v_next, delta, with_vanilla)


def _record(state, t0, track_structure, timed):
    return TraceRecord(
        k=state.k,
        f=float(state.f_x),
        gap_gen=float(state.gap_gen),
        gap_vanilla=None if state.gap_vanilla is None else float(state.gap_vanilla),
        delta=state.delta,
        eta=state.eta,
        elapsed_ns=time.perf_counter_ns() - t0 if timed else 0,
        structure=structure_of(state.x) if track_structure else 0,
    )


def run_hfw(problem, region, policy, max_iter=1000, epsilon=1e-8, x0=None,
            emit_vanilla_gap=False, track_structure=True, timed=False, callback=None):
    """Heavy-ball Frank-Wolfe from `x0` (default: the origin).

    The trace holds one row per iterate ``k = 0, 1, ...`` and stops after
    `max_iter` rows or at the first row with ``gap_gen <= epsilon``.
    `callback`, if given, is called with every state.
    """
    if isinstance(policy, str):
        policy = make_policy(policy)
    if max_iter < 1:
        raise InvalidInputError("max_iter must be at least 1")
    if x0 is None:
        x0 = np.zeros(region.shape)
    t0 = time.perf_counter_ns()
    state = init_state(problem, region, x0, with_vanilla=emit_vanilla_gap)
    trace = [_record(state, t0, track_structure, timed)]
    if callback is not None:
        callback(state)
    while state.gap_gen > epsilon and state.k + 1 < max_iter:
        state = hfw_step(state, problem, region, policy, with_vanilla=emit_vanilla_gap)
        trace.append(_record(state, t0, track_structure, timed))
        if callback is not None:
            callback(state)
    return RunResult(trace=trace, state=state, converged=state.gap_gen <= epsilon)


@dataclass
class FWState:
    x: np.ndarray
    k: int
    f_x: float
    grad_x: np.ndarray
    v: np.ndarray
    gap_vanilla: float
    eta: Optional[float] = None

    @property
    def lower_bound(self):
        return self.f_x - self.gap_vanilla


def run_fw(problem, region, policy=None, max_iter=1000, epsilon=1e-8, x0=None,
           track_structure=True, timed=False, callback=None):
    """Classic Frank-Wolfe: LMO at the current gradient.

    `policy` is one of :data:`FW_POLICIES` (default :class:`OpenLoop2`). The
    stopping test uses the vanilla gap, which is also reported as
    ``gap_gen`` so that ``f - gap_gen`` is a certified lower bound for every
    algorithm.
    """
    if policy is None:
        policy = OpenLoop2()
    elif isinstance(policy, str):
        policy = make_policy(policy)
    if not isinstance(policy, FW_POLICIES):
        raise InvalidInputError(f"policy {policy.name!r} is not a Frank-Wolfe step rule")
    if max_iter < 1:
        raise InvalidInputError("max_iter must be at least 1")
    if x0 is None:
        x0 = np.zeros(region.shape)
    x = _check_start(problem, region, x0)
    t0 = time.perf_counter_ns()
    trace = []
    k, eta = 0, None
    while True:
        f_x, grad = problem.value_and_gradient(x)
        _finite(f_x, "objective", k)
        _finite(grad, "gradient", k)
        v = region.lmo(grad)
        gap = float(np.vdot(grad, x - v))
        state = FWState(x=x, k=k, f_x=f_x, grad_x=grad, v=v, gap_vanilla=gap, eta=eta)
        trace.append(TraceRecord(
            k=k, f=float(f_x), gap_gen=gap, gap_vanilla=gap,
            delta=None if eta is None else 1.0, eta=eta,
            elapsed_ns=time.perf_counter_ns() - t0 if timed else 0,
            structure=structure_of(x) if track_structure else 0,
        ))
        if callback is not None:
            callback(state)
        if gap <= epsilon or k + 1 >= max_iter:
            break
        # no gradient averaging; the policy's delta only feeds open-loop steps
        eta = float(policy.eta(k, policy.delta(k), problem, x, v, grad))
        x = (1.0 - eta) * x + eta * v
        _finite(x, "iterate", k)
        k += 1
    return RunResult(trace=trace, state=state, converged=gap <= epsilon)


def gap_bound(policy, k, lipschitz, diameter):
    """Certified bound on ``gap_gen`` at iteration ``k >= 1``, or None.

    Parameter-free, smooth, directional, line-search and joint-descent
    policies share ``2 L D^2 / (k + 1)``; uniform averaging has
    ``L D^2 ln(k + 1) / (2k)``. Constant delta has no gap bound.
    """
    if k < 1:
        return None
    LD2 = lipschitz * diameter**2
    if isinstance(policy, Uniform):
        return LD2 * math.log(k + 1.0) / (2.0 * k)
    if isinstance(policy, (OpenLoop2, Smooth, DirectionalSmooth, LineSearch, JointDescent)):
        return 2.0 * LD2 / (k + 1.0)
    return None
