"""Dataset loaders, trace CSV files and run configuration."""

import csv
import math
import os
from dataclasses import dataclass, fields

import numpy as np
import scipy.sparse as sp

from .exceptions import InvalidInputError, ParseError
from .objectives import MatrixCompletionProblem
from .solver import TraceRecord

TRACE_HEADER = ["k", "f", "gap_gen", "gap_vanilla", "delta", "eta", "elapsed_ns", "structure"]


# --------------------------------------------------------------------------
# LIBSVM


@dataclass
class SparseDataset:
    """Rows of a LIBSVM file as a CSR matrix (0-based columns) plus ±1 labels."""

    X: sp.csr_matrix
    y: np.ndarray

    @property
    def n_features(self):
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]


def _parse_label(token, path, lineno):
    try:
        label = float(token)
    except ValueError:
        raise ParseError(f"bad label {token!r}", path, lineno) from None
    if label in (1.0, -1.0):
        return label
    if label == 0.0:
        return -1.0
    raise ParseError(f"label {token!r} is not in {{-1, +1}} or {{0, 1}}", path, lineno)


def parse_libsvm(path, n_features=None):
    """Read a binary-classification LIBSVM file.

    Each line is ``label idx:val idx:val ...`` with 1-based, strictly
    increasing indices. Labels 0/1 are mapped to -1/+1. Blank lines and
    anything after ``#`` are ignored.
    """
    labels, indptr, indices, data = [], [0], [], []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path) from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            labels.append(_parse_label(tokens[0], path, lineno))
            prev = 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(f"malformed feature token {tok!r}", path, lineno)
                try:
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise ParseError(f"malformed feature token {tok!r}", path, lineno) from None
                if idx < 1:
                    raise ParseError(f"feature index {idx} < 1", path, lineno)
                if idx <= prev:
                    raise ParseError("feature indices not strictly increasing", path, lineno)
                prev = idx
                indices.append(idx - 1)
                data.append(val)
            indptr.append(len(indices))
    d = max(indices) + 1 if indices else 0
    if n_features is not None:
        if n_features < d:
            raise ParseError(f"file uses {d} features, more than n_features={n_features}", path)
        d = n_features
    X = sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(labels), d),
    )
    return SparseDataset(X=X, y=np.asarray(labels, dtype=float))


def write_libsvm(path, dataset):
    """Write a dataset back in LIBSVM form (labels as +1/-1)."""
    X = sp.csr_matrix(dataset.X)
    with open(path, "w", encoding="utf-8") as fh:
        for i, label in enumerate(dataset.y):
            start, end = X.indptr[i], X.indptr[i + 1]
            parts = ["+1" if label > 0 else "-1"]
            pairs = zip(X.indices[start:end], X.data[start:end])
            parts += [f"{j + 1}:{float(v)!r}" for j, v in pairs]
            fh.write(" ".join(parts) + "\n")


# --------------------------------------------------------------------------
# ratings


def load_ratings(path):
    """Read ``user item rating [timestamp]`` lines into a completion problem.

    Indices are 1-based in the file; the matrix shape is inferred from the
    largest user and item ids.
    """
    rows, cols, vals = [], [], []
    seen = set()
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path) from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            tokens = raw.split()
            if not tokens:
                continue
            if len(tokens) < 3:
                raise ParseError("expected 'user item rating [timestamp]'", path, lineno)
            try:
                i, j, a = int(tokens[0]), int(tokens[1]), float(tokens[2])
            except ValueError:
                raise ParseError("non-numeric field", path, lineno) from None
            if i < 1 or j < 1:
                raise ParseError("user and item ids are 1-based", path, lineno)
            if (i, j) in seen:
                raise ParseError(f"duplicate entry ({i}, {j})", path, lineno)
            seen.add((i, j))
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(a)
    if not rows:
        raise ParseError("no ratings found (at least one observation required)", path)
    return MatrixCompletionProblem(rows, cols, vals, (max(rows) + 1, max(cols) + 1))


# --------------------------------------------------------------------------
# traces


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _opt_float(s):
    return None if s == "" else float(s)


def trace_rows(records):
    for r in records:
        yield [_fmt(r.k), _fmt(r.f), _fmt(r.gap_gen), _fmt(r.gap_vanilla),
               _fmt(r.delta), _fmt(r.eta), _fmt(r.elapsed_ns), _fmt(r.structure)]


def write_trace(path, records):
    """Write trace records as CSV; floats use 17 significant digits."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            w.writerows(trace_rows(records))
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def read_trace(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ParseError(f"unexpected trace header {header}", path, 1)
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(TraceRecord(
                    k=int(row[0]), f=float(row[1]), gap_gen=float(row[2]),
                    gap_vanilla=_opt_float(row[3]), delta=_opt_float(row[4]),
                    eta=_opt_float(row[5]), elapsed_ns=int(row[6]), structure=int(row[7]),
                ))
            except (ValueError, IndexError):
                raise ParseError("malformed trace row", path, lineno) from None
    return out


# --------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    """Flat key/value description of one experiment.

    With no ``dataset`` a synthetic instance is drawn from ``seed``:
    ``n_samples`` x ``n_features`` for logistic, ``n_features`` for the
    quadratic, ``rows`` x ``cols`` with ``observed_fraction`` for matcomp.
    """

    problem: str = "quadratic"
    dataset: str = ""
    constraint: str = "l2"
    radius: float = 1.0
    n: int = 2
    algorithm: str = "hfw"
    policy: str = "open-loop-2"
    delta: float = 0.8
    c: float = 2.0
    k0: float = 2.0
    grid_size: int = 65
    max_iter: int = 1000
    epsilon: float = 1e-8
    seed: int = 0
    trace: str = ""
    emit_vanilla_gap: bool = False
    record_time: bool = False
    label: str = ""
    init: str = "zero"
    n_samples: int = 200
    n_features: int = 20
    rows: int = 60
    cols: int = 40
    observed_fraction: float = 0.1
    target_norm: float = 0.5

    PROBLEMS = ("logistic", "matcomp", "quadratic")
    CONSTRAINTS = ("l2", "l1", "nsupport", "nuclear")
    ALGORITHMS = ("fw", "hfw", "restart")
    INITS = ("zero", "lmo")

    def validate(self):
        if self.problem not in self.PROBLEMS:
            raise InvalidInputError(f"problem must be one of {self.PROBLEMS}")
        if self.constraint not in self.CONSTRAINTS:
            raise InvalidInputError(f"constraint must be one of {self.CONSTRAINTS}")
        if self.algorithm not in self.ALGORITHMS:
            raise InvalidInputError(f"algorithm must be one of {self.ALGORITHMS}")
        if self.init not in self.INITS:
            raise InvalidInputError(f"init must be one of {self.INITS}")
        if (self.problem == "matcomp") != (self.constraint == "nuclear"):
            raise InvalidInputError("matcomp pairs with the nuclear constraint only")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidInputError("radius must be positive")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be at least 1")
        if self.epsilon < 0:
            raise InvalidInputError("epsilon must be nonnegative")
        if not 0.0 < self.delta < 1.0:
            raise InvalidInputError("delta must lie in (0, 1)")
        if self.grid_size < 2:
            raise InvalidInputError("grid_size must be at least 2")
        if not 0.0 < self.observed_fraction <= 1.0:
            raise InvalidInputError("observed_fraction must lie in (0, 1]")
        if self.dataset and not os.path.exists(self.dataset):
            raise InvalidInputError(f"dataset {self.dataset!r} does not exist")
        return self

    def set(self, key, value):
        """Assign one key from its string form."""
        types = {f.name: f.type for f in fields(self)}
        if key not in types:
            raise InvalidInputError(f"unknown config key {key!r}")
        kind = types[key]
        try:
            if kind in (bool, "bool"):
                low = str(value).strip().lower()
                if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                    raise ValueError(value)
                parsed = low in ("1", "true", "yes", "on")
            elif kind in (int, "int"):
                parsed = int(value)
            elif kind in (float, "float"):
                parsed = float(value)
            else:
                parsed = str(value).strip()
        except ValueError:
            raise InvalidInputError(f"bad value {value!r} for {key}") from None
        setattr(self, key, parsed)

    def problem_key(self):
        """Fields that must agree for two runs to share problem and region."""
        keys = ["problem", "dataset", "constraint", "radius"]
        if self.constraint == "nsupport":
            keys.append("n")
        if not self.dataset:
            keys += ["seed", "target_norm"]
            keys += {"logistic": ["n_samples", "n_features"], "quadratic": ["n_features"],
                     "matcomp": ["rows", "cols", "observed_fraction"]}[self.problem]
        return tuple((k, getattr(self, k)) for k in keys)

    def display_label(self):
        if self.label:
            return self.label
        if self.algorithm == "fw":
            return "fw" if self.policy == "open-loop-2" else f"fw-{self.policy}"
        return f"{self.algorithm}-{self.policy}"


def parse_config_text(text, source="<config>"):
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"expected key = value, got {raw.strip()!r}", source, lineno)
        try:
            cfg.set(key.strip(), value.strip())
        except InvalidInputError as exc:
            raise ParseError(str(exc), source, lineno) from None
    return cfg


def load_config(path=None, overrides=()):
    """Read a ``key = value`` config file, then apply ``key=value`` overrides."""
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                cfg = parse_config_text(fh.read(), path)
        except OSError as exc:
            raise ParseError(f"cannot read config: {exc}", path) from exc
    else:
        cfg = RunConfig()
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise InvalidInputError(f"override {item!r} is not key=value")
        cfg.set(key.strip(), value.strip())
    return cfg.validate()
