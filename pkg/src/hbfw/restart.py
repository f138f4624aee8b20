"""Heavy-ball Frank-Wolfe with restart.

Each stage runs the momentum iteration with ``delta_k = 2 / (k + 2 + C^s)``
and tracks both the generalized gap and the vanilla gap. A stage ends as
soon as the vanilla gap drops strictly below the generalized one; the next
stage resets the gradient average at the current point and starts with the
offset ``C^{s+1} = 2 L D^2 / G^s_{K_s}``.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InvalidInputError
from .solver import (
    DirectionalSmooth,
    LineSearch,
    MomentumState,
    RunResult,
    Smooth,
    StepPolicy,
    TraceRecord,
    _check_start,
    _finite,
    gap_offset_update,
    structure_of,
)


class DeltaMatched(StepPolicy):
    """``eta = delta``."""

    name = "delta-matched"


ETA_MODES = {
    "delta-matched": DeltaMatched,
    "smooth": Smooth,
    "line-search": LineSearch,
    "directional-smooth": DirectionalSmooth,
}


@dataclass
class StageLog:
    s: int
    C: float
    K: int = 0
    start_row: int = 0
    gap_gen: Optional[float] = None
    gap_vanilla: Optional[float] = None


@dataclass
class RestartState:
    """Within-stage state. ``inner`` carries the stage-wise lower model."""

    s: int
    C_s: float
    k: int
    inner: MomentumState
    K_history: list = field(default_factory=list)

    @property
    def x(self):
        return self.inner.x

    @property
    def gap_gen(self):
        return self.inner.gap_gen

    @property
    def gap_vanilla(self):
        return self.inner.gap_vanilla


def stage_phi_init(x0, problem):
    """Offset and slope of the tangent plane ``Phi_0^s`` at the stage start."""
    f0, g0 = problem.value_and_gradient(x0)
    return f0 - float(np.vdot(g0, x0)), g0


def _stage_start(problem, region, x0):
    C, g = stage_phi_init(x0, problem)
    f0 = C + float(np.vdot(g, x0))
    v = region.lmo(g)
    gap = f0 - (C + float(np.vdot(g, v)))
    # Phi_0^s is the tangent plane, so both gaps coincide at k = 0
    return MomentumState(x=x0, g=g, C=C, v=v, k=0, f_x=f0, grad_x=g,
                         gap_gen=gap, gap_vanilla=gap)


def restart_step(state, problem, region, eta_policy):
    """One inner iteration of the restart scheme (two LMO calls)."""
    inner, k = state.inner, state.k
    delta = 2.0 / (k + 2.0 + state.C_s)
    g_next = (1.0 - delta) * inner.g + delta * inner.grad_x
    v_next = region.lmo(g_next)
    eta = float(eta_policy.eta(k, delta, problem, inner.x, v_next, inner.grad_x))
    x_next = (1.0 - eta) * inner.x + eta * v_next
    _finite(x_next, "iterate", k)
    C_next = gap_offset_update(inner.C, delta, inner.f_x, inner.grad_x, inner.x)
    f_next, grad_next = problem.value_and_gradient(x_next)
    _finite(f_next, "objective", k)
    v_bar = region.lmo(grad_next)
    gap = f_next - (C_next + float(np.vdot(g_next, v_next)))
    gap_v = float(np.vdot(grad_next, x_next - v_bar))
    nxt = MomentumState(x=x_next, g=g_next, C=C_next, v=v_next, k=inner.k + 1,
                        f_x=f_next, grad_x=grad_next, gap_gen=gap, gap_vanilla=gap_v,
                        delta=delta, eta=eta)
    return RestartState(s=state.s, C_s=state.C_s, k=k + 1, inner=nxt,
                        K_history=state.K_history)


@dataclass
class RestartResult(RunResult):
    stages: list = field(default_factory=list)
    steps: list = field(default_factory=list)


def run_restart(problem, region, eta_mode="delta-matched", max_total_iter=100_000,
                epsilon=1e-8, x0=None, track_structure=True, timed=False, callback=None):
    """Run heavy-ball Frank-Wolfe with restart.

    Parameters
    ----------
    eta_mode : str or StepPolicy
        ``delta-matched``, ``smooth``, ``line-search`` or
        ``directional-smooth``.
    max_total_iter : int
        Maximum number of trace rows across all stages.

    Returns
    -------
    RestartResult
        ``trace`` has one row per global iterate; ``steps[t]`` gives
        ``(s, k, C^s)`` for row ``t``; ``stages`` logs every stage.
    """
    if isinstance(eta_mode, str):
        try:
            eta_policy = ETA_MODES[eta_mode]()
        except KeyError:
            raise InvalidInputError(
                f"unknown eta mode {eta_mode!r}; choose from {sorted(ETA_MODES)}"
            ) from None
    else:
        eta_policy = eta_mode
    if max_total_iter < 1:
        raise InvalidInputError("max_total_iter must be at least 1")
    if x0 is None:
        x0 = np.zeros(region.shape)
    x0 = _check_start(problem, region, x0)
    LD2 = problem.global_lipschitz() * region.diameter() ** 2
    t0 = time.perf_counter_ns()

    def record(t, inner):
        return TraceRecord(
            k=t, f=float(inner.f_x), gap_gen=float(inner.gap_gen),
            gap_vanilla=float(inner.gap_vanilla), delta=inner.delta, eta=inner.eta,
            elapsed_ns=time.perf_counter_ns() - t0 if timed else 0,
            structure=structure_of(inner.x) if track_structure else 0,
        )

    def done(inner):
        return min(inner.gap_gen, inner.gap_vanilla) <= epsilon

    state = RestartState(s=0, C_s=0.0, k=0, inner=_stage_start(problem, region, x0))
    stages = [StageLog(s=0, C=0.0, start_row=0)]
    trace = [record(0, state.inner)]
    steps = [(0, 0, 0.0)]
    if callback is not None:
        callback(state)
    t = 0
    terminated = done(state.inner) or max_total_iter <= 1
    while not terminated:
        while (state.k == 0 or state.inner.gap_gen <= state.inner.gap_vanilla):
            state = restart_step(state, problem, region, eta_policy)
            t += 1
            trace.append(record(t, state.inner))
            steps.append((state.s, state.k, state.C_s))
            if callback is not None:
                callback(state)
            if done(state.inner) or t + 1 >= max_total_iter:
                terminated = True
                break
        log = stages[-1]
        log.K, log.gap_gen, log.gap_vanilla = state.k, state.inner.gap_gen, state.inner.gap_vanilla
        if terminated or state.inner.gap_gen <= 0.0:
            break
        history = state.K_history + [state.k]
        C_next = 2.0 * LD2 / state.inner.gap_gen
        x_start = state.inner.x
        state = RestartState(s=state.s + 1, C_s=C_next, k=0,
                             inner=_stage_start(problem, region, x_start), K_history=history)
        stages.append(StageLog(s=state.s, C=C_next, start_row=t))
    converged = done(state.inner)
    return RestartResult(trace=trace, state=state, converged=converged,
                         stages=stages, steps=steps)


def restart_bound(s, k, C_s, lipschitz, diameter):
    """Certified bound on the generalized gap at within-stage iteration k >= 1."""
    if k < 1:
        return None
    LD2 = lipschitz * diameter**2
    if s == 0:
        return 2.0 * LD2 / (k + 1.0)
    return 2.0 * LD2 / (k + C_s)
