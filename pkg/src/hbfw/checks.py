"""Built-in consistency checks used by ``hbfw selfcheck``."""

from dataclasses import dataclass

import numpy as np

from .geometry import L1Ball, L2Ball, NSupportBall, lmo_bruteforce, lmo_l1, lmo_nsupport
from .objectives import finite_difference_check
from .solver import ConstantDelta, OpenLoop2, Uniform, run_hfw
from .synthetic import make_logistic, make_matrix_completion, make_quadratic


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def phi_from_history(xs, fs, grads, deltas, y):
    """Evaluate ``Phi_{k+1}(y)`` as an explicit weighted sum of tangent planes.

    ``xs``, ``fs`` and ``grads`` hold iterates ``0..k``; ``deltas`` holds
    ``delta_0..delta_k``. Weight on plane ``tau >= 1`` is
    ``delta_tau prod_{j > tau} (1 - delta_j)``; plane 0 gets
    ``prod_{j >= 1} (1 - delta_j)``.
    """
    k = len(deltas) - 1
    total = 0.0
    for tau in range(k + 1):
        w = 1.0 if tau == 0 else deltas[tau]
        for j in range(tau + 1, k + 1):
            w *= 1.0 - deltas[j]
        plane = fs[tau] + float(np.vdot(grads[tau], np.asarray(y) - xs[tau]))
        total += w * plane
    return total


def history_oracle_error(problem, region, policy, n_iter=50):
    """Largest relative mismatch between recursive and explicit ``Phi_k(v_k)``."""
    states = []
    run_hfw(problem, region, policy, max_iter=n_iter + 1, epsilon=-np.inf,
            track_structure=False, callback=states.append)
    xs = [s.x for s in states]
    fs = [s.f_x for s in states]
    grads = [s.grad_x for s in states]
    deltas = [s.delta for s in states[1:]]
    worst = 0.0
    for k in range(1, len(states)):
        st = states[k]
        explicit = phi_from_history(xs[:k], fs[:k], grads[:k], deltas[:k], st.v)
        recursive = st.lower_bound
        worst = max(worst, abs(explicit - recursive) / max(1.0, abs(explicit)))
    return worst


def _perturbed_l1(g, R):
    v = lmo_l1(g, R)
    if np.any(v):
        # move the atom to the weakest coordinate
        i = int(np.argmin(np.abs(g)))
        v = np.zeros_like(v)
        v[i] = R
    return v


def check_lmo_equivalence(n_trials=200, seed=0, l1_impl=lmo_l1, nsupport_impl=lmo_nsupport):
    rng = np.random.default_rng(seed)
    worst_l1 = worst_ns = 0.0
    ok = True
    for _ in range(n_trials):
        d = int(rng.integers(1, 13))
        R = float(rng.uniform(0.1, 5.0))
        g = rng.standard_normal(d)
        a, b = l1_impl(g, R), lmo_bruteforce(g, L1Ball(R, d))
        ok &= np.array_equal(np.flatnonzero(a), np.flatnonzero(b))
        worst_l1 = max(worst_l1, float(np.max(np.abs(a - b))))
        d = int(rng.integers(1, 11))
        n = int(rng.integers(1, min(3, d) + 1))
        g = rng.standard_normal(d)
        a, b = nsupport_impl(g, R, n), lmo_bruteforce(g, NSupportBall(R, d, n))
        ok &= np.array_equal(np.flatnonzero(a), np.flatnonzero(b))
        worst_ns = max(worst_ns, float(np.max(np.abs(a - b))))
    ok &= worst_l1 <= 1e-12 and worst_ns <= 1e-12
    return CheckResult("lmo-bruteforce-equivalence", bool(ok),
                       f"max dev l1={worst_l1:.3g} nsupport={worst_ns:.3g}")


def check_gradients(seed=0, n_points=5):
    rng = np.random.default_rng(seed)
    cases = [
        ("quadratic", make_quadratic(15, seed=seed), 1e-7),
        ("logistic", make_logistic(30, 10, seed=seed), 1e-5),
        ("matcomp", make_matrix_completion(12, 9, 0.3, seed=seed), 1e-7),
    ]
    out = []
    for name, problem, tol in cases:
        err = max(finite_difference_check(problem, rng.standard_normal(problem.shape), 1e-6)
                  for _ in range(n_points))
        out.append(CheckResult(f"finite-difference-{name}", err <= tol, f"max rel err {err:.3g}"))
    return out


def check_phi_oracle(seed=0, n_iter=50):
    out = []
    quad = make_quadratic(10, seed=seed)
    logi = make_logistic(40, 8, seed=seed)
    for pname, problem, region in (("quadratic", quad, L2Ball(1.0, 10)),
                                   ("logistic", logi, L1Ball(2.0, 8))):
        for policy in (OpenLoop2(), Uniform(), ConstantDelta()):
            err = history_oracle_error(problem, region, policy, n_iter)
            out.append(CheckResult(f"phi-history-{pname}-{policy.name}", err <= 1e-8,
                                   f"max rel err {err:.3g}"))
    return out


def selfcheck(seed=0, fault=None):
    """Run all built-in checks; `fault="lmo"` swaps in a broken l1 LMO."""
    l1_impl = _perturbed_l1 if fault == "lmo" else lmo_l1
    results = [check_lmo_equivalence(seed=seed, l1_impl=l1_impl)]
    results += check_gradients(seed=seed)
    results += check_phi_oracle(seed=seed)
    return results
