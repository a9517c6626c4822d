"""Tabular data, least squares and heteroskedasticity-robust covariances.

Everything here is a pure function of its inputs. The least-squares solver
works from a QR decomposition; the just-identified IV solver works from
the instrument cross-moment system and delegates the row passes to
:mod:`noshlab.kernels`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import InputError, SingularityError

#: Relative tolerance on |diag(R)| of a QR factor below which a column is
#: treated as linearly dependent on the ones before it.
RANK_TOL = 1e-10


class Dataset:
    """Named numeric columns of equal length.

    Columns are stored as read-only float64 arrays, in insertion order.

    Parameters
    ----------
    columns : mapping of str to array_like
        Column name to values. Every column must have the same length
        ``n >= 1`` and contain only finite values.
    """

    __slots__ = ("_columns", "_n")

    def __init__(self, columns: Mapping[str, Iterable[float]]):
        cols: dict[str, np.ndarray] = {}
        n = None
        for name, values in columns.items():
            if not isinstance(name, str) or not name:
                raise InputError(f"column names must be non-empty strings, got {name!r}")
            arr = np.array(values, dtype=np.float64)
            if arr.ndim != 1:
                raise InputError(f"column {name!r} is not one-dimensional")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise InputError(
                    f"column {name!r} has length {arr.shape[0]}, expected {n}"
                )
            if not np.all(np.isfinite(arr)):
                raise InputError(f"column {name!r} contains NaN or infinite values")
            arr.flags.writeable = False
            cols[name] = arr
        if not cols:
            raise InputError("a dataset needs at least one column")
        if n < 1:
            raise InputError("a dataset needs at least one row")
        self._columns = cols
        self._n = n

    @property
    def n(self) -> int:
        return self._n

    @property
    def names(self) -> list[str]:
        return list(self._columns)

    @property
    def columns(self) -> Mapping[str, np.ndarray]:
        return dict(self._columns)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._columns[name]
        except KeyError:
            raise InputError(f"no column named {name!r}; have {self.names}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._columns

    def __len__(self) -> int:
        return self._n

    def __repr__(self) -> str:
        return f"Dataset(n={self._n}, columns={self.names})"

    def require(self, *names: str) -> None:
        missing = [c for c in names if c not in self._columns]
        if missing:
            raise InputError(f"missing column(s) {missing}; have {self.names}")

    def with_column(self, name: str, values: Iterable[float]) -> "Dataset":
        cols = dict(self._columns)
        cols[name] = values
        return Dataset(cols)

    def to_csv(self, path: str | Path) -> None:
        """Write with a header row; floats use ``repr`` so reading back is exact."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.names)
            cols = [self._columns[c] for c in self.names]
            for i in range(self._n):
                writer.writerow([repr(float(c[i])) for c in cols])

    @classmethod
    def read_csv(cls, path: str | Path) -> "Dataset":
        """Read a UTF-8 CSV with a header row. Blank cells are an error."""
        try:
            fh = open(path, newline="", encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot open {path}: {exc.strerror}") from None
        with fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise InputError(f"{path}: empty file") from None
            header = [h.strip() for h in header]
            if len(set(header)) != len(header):
                raise InputError(f"{path}: duplicate column names in header")
            values: list[list[float]] = [[] for _ in header]
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise InputError(
                        f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                    )
                for j, cell in enumerate(row):
                    cell = cell.strip()
                    if not cell:
                        raise InputError(f"{path}:{lineno}: blank value in column {header[j]!r}")
                    try:
                        values[j].append(float(cell))
                    except ValueError:
                        raise InputError(
                            f"{path}:{lineno}: non-numeric value {cell!r} in column {header[j]!r}"
                        ) from None
        return cls(dict(zip(header, values)))


@dataclass(frozen=True)
class LinearFit:
    """Result of a linear fit: coefficients (intercept first when present),
    residuals against the actual regressors, and a robust covariance."""

    coefficients: np.ndarray
    residuals: np.ndarray
    robust_cov: np.ndarray

    @property
    def robust_se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.robust_cov), 0.0, None))


def _as_matrix(a, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise InputError(f"{name} must be a 2-D matrix")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} contains non-finite values")
    return m


def _as_vector(a, name: str) -> np.ndarray:
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise InputError(f"{name} must be a vector")
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name} contains non-finite values")
    return v


def _column_labels(names: Sequence[str] | None, k: int) -> list[str]:
    if names is None:
        return [f"col{j}" for j in range(k)]
    if len(names) != k:
        raise InputError(f"{len(names)} column names given for {k} columns")
    return list(names)


def _dependent_columns(r_diag: np.ndarray) -> list[int]:
    mag = np.abs(r_diag)
    scale = mag.max() if mag.size else 0.0
    if scale == 0.0:
        return list(range(mag.size))
    return [j for j in range(mag.size) if mag[j] <= RANK_TOL * scale]


def fit_least_squares(y, regressors, names: Sequence[str] | None = None) -> LinearFit:
    """Ordinary least squares via a QR decomposition.

    Parameters
    ----------
    y : array_like, shape (n,)
    regressors : array_like, shape (n, k)
        Design matrix; include the intercept column yourself.
    names : sequence of str, optional
        Column labels used in rank-deficiency messages.

    Returns
    -------
    LinearFit
        ``robust_cov`` is the HC0 sandwich.

    Raises
    ------
    SingularityError
        If a column is (numerically) a combination of the preceding ones.
    """
    y = _as_vector(y, "y")
    X = _as_matrix(regressors, "regressors")
    n, k = X.shape
    if y.shape[0] != n:
        raise InputError(f"y has {y.shape[0]} rows but regressors have {n}")
    if n < k:
        raise SingularityError(
            f"{n} rows cannot identify {k} coefficients", _column_labels(names, k)
        )
    q, r = np.linalg.qr(X, mode="reduced")
    bad = _dependent_columns(np.diag(r))
    if bad:
        labels = _column_labels(names, k)
        cols = [labels[j] for j in bad]
        raise SingularityError(
            f"rank-deficient regressors: {cols} depend linearly on earlier columns", cols
        )
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    return LinearFit(coef, resid, sandwich_cov(X, X, resid))


def solve_cross_moments(A: np.ndarray, rhs: np.ndarray, labels: Sequence[str]):
    """Solve ``A x = rhs`` and return ``(x, A^{-1})`` after a rank check on A's QR."""
    q, r = np.linalg.qr(A)
    bad = _dependent_columns(np.diag(r))
    if bad:
        cols = [labels[j] for j in bad]
        raise SingularityError(
            f"singular instrument cross-moment matrix (weak or collinear instruments); "
            f"offending regressor(s): {cols}",
            cols,
        )
    a_inv = np.linalg.solve(r, q.T)
    x = a_inv @ rhs if rhs is not None else None
    return x, a_inv


def sandwich_cov(regressors, instruments, residuals) -> np.ndarray:
    """HC0 sandwich ``(W'R)^-1 (sum_i w_i w_i' e_i^2) (R'W)^-1``.

    With ``instruments`` equal to ``regressors`` this is the usual
    heteroskedasticity-robust OLS covariance.
    """
    R = np.ascontiguousarray(_as_matrix(regressors, "regressors"))
    W = np.ascontiguousarray(_as_matrix(instruments, "instruments"))
    e = np.ascontiguousarray(_as_vector(residuals, "residuals"))
    n, k = R.shape
    if W.shape != R.shape:
        raise InputError(
            f"instruments {W.shape} and regressors {R.shape} must have the same shape"
        )
    if e.shape[0] != n:
        raise InputError(f"{e.shape[0]} residuals for {n} rows")
    A = W.T @ R
    _, a_inv = solve_cross_moments(A, None, _column_labels(None, k))
    # residual_meat recomputes y - R b; with b = 0 and y = e it returns e itself.
    _, meat = kernels.residual_meat(W, R, e, np.zeros(k))
    cov = a_inv @ meat @ a_inv.T
    return 0.5 * (cov + cov.T)


def fit_iv(y, regressors, instruments, names: Sequence[str] | None = None) -> LinearFit:
    """Just-identified linear IV with an HC0 sandwich covariance.

    Coefficients solve ``W'(y - R b) = 0``; residuals use the actual
    regressors ``R`` (never first-stage fitted values).
    """
    y = np.ascontiguousarray(_as_vector(y, "y"))
    R = np.ascontiguousarray(_as_matrix(regressors, "regressors"))
    W = np.ascontiguousarray(_as_matrix(instruments, "instruments"))
    n, k = R.shape
    if W.shape != R.shape:
        raise InputError(
            f"instruments {W.shape} and regressors {R.shape} must have the same shape"
        )
    if y.shape[0] != n:
        raise InputError(f"y has {y.shape[0]} rows but regressors have {n}")
    WR, Wy = kernels.cross_moments(W, R, y)
    coef, a_inv = solve_cross_moments(WR, Wy, _column_labels(names, k))
    resid, meat = kernels.residual_meat(W, R, y, coef)
    cov = a_inv @ meat @ a_inv.T
    return LinearFit(coef, resid, 0.5 * (cov + cov.T))


def sample_cov(a, b) -> float:
    """Sample covariance with the n-1 divisor."""
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    if a.shape[0] != b.shape[0]:
        raise InputError(f"lengths differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 2:
        raise InputError("sample covariance needs at least two observations")
    return float(np.dot(a - a.mean(), b - b.mean()) / (a.shape[0] - 1))


def sample_median(v) -> float:
    """Median; the mean of the two middle order statistics for even length."""
    v = _as_vector(v, "v")
    if v.shape[0] == 0:
        raise InputError("median of an empty vector")
    return float(np.median(v))


def sample_sd(v) -> float:
    return math.sqrt(max(sample_cov(v, v), 0.0))
