"""scikit-learn compatible wrappers around the solvers.

``FrankWolfeLogisticRegression`` fits a constrained linear classifier;
``FrankWolfeMatrixCompletion`` fills the missing entries of a matrix under
a nuclear-norm budget.
"""

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets, type_of_target
from sklearn.utils.validation import check_is_fitted, validate_data

from .exceptions import InvalidInputError
from .geometry import make_region
from .objectives import LogisticProblem, MatrixCompletionProblem
from .restart import run_restart
from .solver import ConstantDelta, JointDescent, make_policy, run_fw, run_hfw


def _policy(name, delta, c, k0, grid_size):
    if name == "constant-delta":
        return ConstantDelta(delta_value=delta, c=c, k0=k0)
    if name == "joint-descent":
        return JointDescent(grid_size=grid_size)
    return make_policy(name)


def _solve(problem, region, algorithm, policy, max_iter, epsilon, x0):
    if algorithm == "hfw":
        return run_hfw(problem, region, policy, max_iter=max_iter, epsilon=epsilon, x0=x0)
    if algorithm == "fw":
        return run_fw(problem, region, policy, max_iter=max_iter, epsilon=epsilon, x0=x0)
    if algorithm == "restart":
        mode = "delta-matched" if policy.name == "open-loop-2" else policy.name
        return run_restart(problem, region, mode, max_total_iter=max_iter,
                           epsilon=epsilon, x0=x0)
    raise InvalidInputError(f"algorithm must be 'fw', 'hfw' or 'restart', got {algorithm!r}")


class FrankWolfeLogisticRegression(ClassifierMixin, BaseEstimator):
    """Binary logistic regression constrained to a norm ball.

    No intercept is fitted; append a constant column to `X` if one is needed.

    Parameters
    ----------
    constraint : {'l2', 'l1', 'nsupport'}
    radius : float
    n_support : int
        Support size for the n-support ball.
    algorithm : {'hfw', 'fw', 'restart'}
    policy : str
        Step-size policy name, see :data:`hbfw.solver.POLICIES`.
    max_iter : int
        Maximum number of iterates, the starting point included.
    epsilon : float
        Stop once the certified gap falls to this value.

    Attributes
    ----------
    coef_ : ndarray of shape (1, n_features)
    classes_ : ndarray of shape (2,)
    gap_ : float
        Final certified gap; ``f(coef_) - gap_`` lower-bounds the optimum.
    n_iter_ : int
    trace_ : list of TraceRecord
    """

    def __init__(self, constraint="l1", radius=1.0, n_support=2, algorithm="hfw",
                 policy="open-loop-2", max_iter=1000, epsilon=1e-8,
                 delta=0.8, c=2.0, k0=2.0, grid_size=65):
        self.constraint = constraint
        self.radius = radius
        self.n_support = n_support
        self.algorithm = algorithm
        self.policy = policy
        self.max_iter = max_iter
        self.epsilon = epsilon
        self.delta = delta
        self.c = c
        self.k0 = k0
        self.grid_size = grid_size

    def fit(self, X, y):
        X, y = validate_data(self, X, y, accept_sparse="csr", dtype=np.float64)
        check_classification_targets(y)
        y_type = type_of_target(y, input_name="y")
        if y_type != "binary":
            raise ValueError("Only binary classification is supported. "
                             f"The type of the target is {y_type}.")
        self.classes_ = np.unique(y)
        if self.classes_.size < 2:
            raise ValueError("y contains only one class; at least 2 classes are needed")
        if self.constraint not in ("l2", "l1", "nsupport"):
            raise ValueError(f"unsupported constraint {self.constraint!r}")
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        problem = LogisticProblem(X, signs)
        region = make_region(self.constraint, self.radius, problem.shape, n=self.n_support)
        policy = _policy(self.policy, self.delta, self.c, self.k0, self.grid_size)
        result = _solve(problem, region, self.algorithm, policy, self.max_iter,
                        self.epsilon, np.zeros(problem.shape))
        self.coef_ = result.x.reshape(1, -1)
        self.trace_ = result.trace
        self.gap_ = result.trace[-1].gap_gen
        self.n_iter_ = len(result.trace) - 1
        self.objective_ = result.trace[-1].f
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, accept_sparse="csr", dtype=np.float64, reset=False)
        return np.asarray(X @ self.coef_.ravel()).ravel()

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[(scores > 0).astype(int)]

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.sparse = True
        tags.classifier_tags.multi_class = False
        return tags


class FrankWolfeMatrixCompletion(TransformerMixin, BaseEstimator):
    """Low-rank completion of a partially observed matrix.

    `fit` takes a dense matrix with NaN marking missing entries and solves
    the squared-error fit on observed entries over a nuclear-norm ball.
    `transform` returns the input with its NaNs replaced by the fitted
    values.

    Attributes
    ----------
    completed_ : ndarray of shape (n_rows, n_cols)
    rank_ : int
        Numerical rank of `completed_`.
    gap_ : float
    """

    def __init__(self, radius=1.0, algorithm="hfw", policy="open-loop-2", max_iter=200,
                 epsilon=1e-8, init="lmo", random_state=0):
        self.radius = radius
        self.algorithm = algorithm
        self.policy = policy
        self.max_iter = max_iter
        self.epsilon = epsilon
        self.init = init
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64, ensure_all_finite="allow-nan")
        mask = ~np.isnan(X)
        rows, cols = np.nonzero(mask)
        if rows.size == 0:
            raise ValueError("X has no observed entries")
        problem = MatrixCompletionProblem(rows, cols, X[rows, cols], X.shape)
        region = make_region("nuclear", self.radius, X.shape, seed=self.random_state)
        x0 = np.zeros(X.shape)
        if self.init == "lmo":
            x0 = region.lmo(problem.gradient(x0))
        elif self.init != "zero":
            raise ValueError("init must be 'lmo' or 'zero'")
        result = _solve(problem, region, self.algorithm, make_policy(self.policy),
                        self.max_iter, self.epsilon, x0)
        self.completed_ = result.x
        self.shape_ = X.shape
        self.trace_ = result.trace
        self.gap_ = result.trace[-1].gap_gen
        self.rank_ = result.trace[-1].structure
        self.n_iter_ = len(result.trace) - 1
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, ensure_all_finite="allow-nan",
                          reset=False)
        if X.shape != self.shape_:
            raise ValueError(f"expected shape {self.shape_}, got {X.shape}")
        return np.where(np.isnan(X), self.completed_, X)

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.allow_nan = True
        return tags
