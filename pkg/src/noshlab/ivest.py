"""Instrumental-variable estimators and the decomposition identities.

All estimators are just-identified: the Wald ratio and four TSLS
specifications that differ in how the modifiers ``U6``/``V6`` enter.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .errors import (
    InputError,
    IrrelevantInstrumentError,
    SpecError,
    UndefinedEstimandError,
)
from . import kernels
from .numkit import Dataset, fit_iv, sample_cov, sandwich_cov, solve_cross_moments

#: Two-sided 95% normal quantile used for every confidence interval.
Z_975 = NormalDist().inv_cdf(0.975)


class IvKind(enum.Enum):
    WALD = "wald"
    TSLS1 = "1"
    TSLS2 = "2"
    TSLS3 = "3"
    TSLS4 = "4"

    @classmethod
    def parse(cls, value) -> "IvKind":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        if text.startswith("tsls"):
            text = text[4:].strip("()")
        try:
            return cls(text)
        except ValueError:
            raise SpecError(f"unknown estimator {value!r}; use wald or 1-4") from None

    @property
    def index(self) -> int:
        """Stable small integer used when deriving seeds (wald=0, TSLS(k)=k)."""
        return 0 if self is IvKind.WALD else int(self.value)

    @property
    def needs_modifiers(self) -> bool:
        return self in (IvKind.TSLS2, IvKind.TSLS3, IvKind.TSLS4)

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class IvSpec:
    """Which estimator to run and on which columns."""

    kind: IvKind
    instrument: str = "Z"
    treatment: str = "X"
    outcome: str = "Y"
    modifiers: tuple[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", IvKind.parse(self.kind))
        if self.modifiers is not None:
            mods = tuple(self.modifiers)
            if len(mods) != 2 or not all(isinstance(m, str) and m for m in mods):
                raise SpecError(f"modifiers must be a pair of column names, got {self.modifiers!r}")
            object.__setattr__(self, "modifiers", mods)
        if self.kind.needs_modifiers and self.modifiers is None:
            raise SpecError(f"TSLS({self.kind}) needs the two modifier columns (U6, V6)")
        if not self.kind.needs_modifiers and self.modifiers is not None:
            raise SpecError(f"{self.kind.name} takes no modifier columns")

    @classmethod
    def simulation(cls, kind) -> "IvSpec":
        """Spec over the column names produced by :func:`noshlab.dgp.generate`."""
        kind = IvKind.parse(kind)
        return cls(kind, modifiers=("U6", "V6") if kind.needs_modifiers else None)

    def columns(self) -> tuple[str, ...]:
        cols = (self.instrument, self.treatment, self.outcome)
        return cols + (self.modifiers or ())

    def check(self, data: Dataset) -> None:
        missing = [c for c in self.columns() if c not in data]
        if missing:
            raise SpecError(f"dataset lacks column(s) {missing} required by {self.kind.name}")


@dataclass(frozen=True)
class IvEstimate:
    point: float
    se: float
    ci_low: float
    ci_high: float
    spec: IvSpec

    @classmethod
    def from_point_se(cls, point: float, se: float, spec: IvSpec) -> "IvEstimate":
        half = Z_975 * se
        return cls(float(point), float(se), float(point - half), float(point + half), spec)

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high

    def rejects(self, null: float = 0.0) -> bool:
        return not self.covers(null)


def _relevance_check(x: np.ndarray, z: np.ndarray, cov_xz: float) -> None:
    if np.ptp(z) == 0.0:
        raise IrrelevantInstrumentError("irrelevant instrument: the instrument is constant")
    if np.ptp(x) == 0.0:
        raise IrrelevantInstrumentError("irrelevant instrument: the treatment is constant")
    sd = np.sqrt(sample_cov(x, x) * sample_cov(z, z))
    if abs(cov_xz) <= 1e-12 * sd:
        raise IrrelevantInstrumentError(
            f"irrelevant instrument: cov(X, Z) = {cov_xz:.3g} is numerically zero"
        )


def wald_arrays(z, x, y) -> tuple[float, float]:
    """Wald ratio and its HC0 IV standard error from arrays."""
    zv, xv, yv = (np.asarray(a, dtype=np.float64) for a in (z, x, y))
    cov_xz = sample_cov(xv, zv)
    _relevance_check(xv, zv, cov_xz)
    slope = sample_cov(yv, zv) / cov_xz
    intercept = yv.mean() - slope * xv.mean()
    one = np.ones(len(zv))
    R = np.column_stack([one, xv])
    W = np.column_stack([one, zv])
    resid = yv - intercept - slope * xv
    cov = sandwich_cov(R, W, resid)
    return float(slope), float(np.sqrt(max(cov[1, 1], 0.0)))


def wald_ratio(data: Dataset, z: str = "Z", x: str = "X", y: str = "Y") -> IvEstimate:
    """Wald ratio ``cov(Y, Z) / cov(X, Z)`` with an HC0 IV standard error."""
    spec = IvSpec(IvKind.WALD, instrument=z, treatment=x, outcome=y)
    spec.check(data)
    point, se = wald_arrays(data[z], data[x], data[y])
    return IvEstimate.from_point_se(point, se, spec)


def wald_from_summary(itt_point: float, itt_ci, first_stage: float):
    """Wald estimate from published summaries.

    Divides the intention-to-treat estimate and both of its confidence
    limits by the first-stage effect. First-stage uncertainty is ignored.

    Returns
    -------
    (point, (ci_low, ci_high))
    """
    lo, hi = (float(c) for c in itt_ci)
    if lo > hi:
        raise InputError(f"confidence interval ({lo}, {hi}) is not ordered")
    if first_stage == 0:
        raise InputError("first-stage effect must be non-zero")
    a, b = lo / first_stage, hi / first_stage
    return itt_point / first_stage, (min(a, b), max(a, b))


def design(data: Dataset, spec: IvSpec):
    """Regressor and instrument matrices for a TSLS specification.

    Returns ``(R, W, names)``; the treatment is always column 1. Modifiers are
    centred at their sample means before any product is formed. In TSLS(3)
    and TSLS(4) the modifier terms multiply X in ``R`` and Z in ``W``, so
    the X-interactions are instrumented by the matching Z-interactions.
    """
    spec.check(data)
    z, x = data[spec.instrument], data[spec.treatment]
    one = np.ones(data.n)
    kind = spec.kind
    if kind in (IvKind.WALD, IvKind.TSLS1):
        return np.column_stack([one, x]), np.column_stack([one, z]), ["const", spec.treatment]
    u_name, v_name = spec.modifiers
    u = data[u_name] - data[u_name].mean()
    v = data[v_name] - data[v_name].mean()
    r_cols = [one, x, u, v]
    w_cols = [one, z, u, v]
    names = ["const", spec.treatment, u_name, v_name]
    if kind is IvKind.TSLS4:
        uv = u * v
        r_cols.append(uv)
        w_cols.append(uv)
        names.append(f"{u_name}*{v_name}")
    if kind in (IvKind.TSLS3, IvKind.TSLS4):
        mods = [(u, u_name), (v, v_name)]
        if kind is IvKind.TSLS4:
            mods.append((u * v, f"{u_name}*{v_name}"))
        for m, label in mods:
            r_cols.append(m * x)
            w_cols.append(m * z)
            names.append(f"{label}*{spec.treatment}")
    return np.column_stack(r_cols), np.column_stack(w_cols), names


# Base columns for the product-term route: X, Z, centred U, centred V.
_X, _Z, _U, _V = 0, 1, 2, 3


def design_terms(kind, treatment: str = "X", modifiers=("U", "V")):
    """Product-term encoding of :func:`design` over base columns (X, Z, u, v).

    Each row lists up to three base-column indices whose product is one
    design column; ``-1`` pads, and an all-padding row is the constant.
    """
    kind = IvKind.parse(kind)
    r = [(), (_X,)]
    w = [(), (_Z,)]
    u_name, v_name = modifiers
    names = ["const", treatment]
    if kind.needs_modifiers:
        r += [(_U,), (_V,)]
        w += [(_U,), (_V,)]
        names += [u_name, v_name]
    if kind is IvKind.TSLS4:
        r.append((_U, _V))
        w.append((_U, _V))
        names.append(f"{u_name}*{v_name}")
    if kind in (IvKind.TSLS3, IvKind.TSLS4):
        mods = [(_U,), (_V,)] + ([(_U, _V)] if kind is IvKind.TSLS4 else [])
        labels = [u_name, v_name, f"{u_name}*{v_name}"]
        for m, label in zip(mods, labels):
            r.append(m + (_X,))
            w.append(m + (_Z,))
            names.append(f"{label}*{treatment}")

    def pack(terms):
        out = np.full((len(terms), 3), -1, dtype=np.intp)
        for a, t in enumerate(terms):
            out[a, : len(t)] = t
        return out

    return pack(r), pack(w), names


def tsls_arrays(y, x, z, u=None, v=None, kind=IvKind.TSLS1, labels=None) -> tuple[float, float]:
    """Treatment coefficient and robust SE straight from arrays.

    Same estimator as :func:`tsls_fit`, but the design is expanded row by
    row inside the kernels instead of being materialised. ``u`` and ``v``
    are centred here. ``labels`` (treatment, u, v) name columns in errors.
    """
    kind = IvKind.parse(kind)
    n = len(y)
    base = np.empty((n, 4))
    base[:, _X] = x
    base[:, _Z] = z
    if kind.needs_modifiers:
        base[:, _U] = u
        base[:, _V] = v
        base[:, _U] -= base[:, _U].mean()
        base[:, _V] -= base[:, _V].mean()
    else:
        base[:, _U] = 0.0
        base[:, _V] = 0.0
    y = np.ascontiguousarray(y, dtype=np.float64)
    treatment, *mods = labels or ("X", "U", "V")
    r_terms, w_terms, names = design_terms(kind, treatment, tuple(mods))
    WR, Wy = kernels.product_moments(base, r_terms, w_terms, y)
    coef, a_inv = solve_cross_moments(WR, Wy, names)
    _, meat = kernels.product_meat(base, r_terms, w_terms, y, coef)
    var = a_inv[1] @ meat @ a_inv[1]
    return float(coef[1]), float(np.sqrt(var))


def tsls_fit(data: Dataset, spec: IvSpec) -> IvEstimate:
    """Fit one of TSLS(1)-(4) and return the treatment coefficient.

    ``spec.kind`` may also be ``WALD``, which is computed as TSLS(1).
    """
    spec.check(data)
    z, x, y = data[spec.instrument], data[spec.treatment], data[spec.outcome]
    u = v = None
    mods = ("U", "V")
    if spec.kind.needs_modifiers:
        mods = spec.modifiers
        u, v = (data[m] for m in mods)
    point, se = tsls_arrays(y, x, z, u, v, spec.kind, (spec.treatment, *mods))
    return IvEstimate.from_point_se(point, se, spec)


def tsls_fit_materialized(data: Dataset, spec: IvSpec) -> IvEstimate:
    """:func:`tsls_fit` via explicit design matrices and :func:`fit_iv`."""
    R, W, names = design(data, spec)
    fit = fit_iv(data[spec.outcome], R, W, names=names)
    return IvEstimate.from_point_se(fit.coefficients[1], fit.robust_se[1], spec)


def estimate(data: Dataset, spec: IvSpec) -> IvEstimate:
    """Dispatch on ``spec.kind``."""
    if spec.kind is IvKind.WALD:
        return wald_ratio(data, spec.instrument, spec.treatment, spec.outcome)
    return tsls_fit(data, spec)


@dataclass(frozen=True)
class DecompositionRow:
    level: float
    pairwise_estimate: float
    weight: float


@dataclass(frozen=True)
class Decomposition:
    rows: list[DecompositionRow]
    combined: float


def discrete_z_decomposition(
    data: Dataset, z: str = "Z", x: str = "X", y: str = "Y"
) -> Decomposition:
    """Write the Wald ratio of a discrete instrument as a weighted sum of
    adjacent-level Wald ratios.

    Levels are ordered by the sample mean of X (ties broken by the level
    value). For the level at position ``l >= 2`` the pairwise estimate is
    ``(Ybar_l - Ybar_{l-1}) / (Xbar_l - Xbar_{l-1})`` and the unnormalised
    weight is ``(Xbar_l - Xbar_{l-1}) * sum_{j >= l} p_j (z_j - zbar)``,
    which makes the weighted sum equal ``cov(Y, Z) / cov(X, Z)`` exactly
    (summation by parts).

    Raises
    ------
    UndefinedEstimandError
        If two adjacent levels share the same mean of X; ``combined`` on
        the exception still holds the covariance ratio.
    """
    data.require(z, x, y)
    zv, xv, yv = data[z], data[x], data[y]
    levels, inverse, counts = np.unique(zv, return_inverse=True, return_counts=True)
    if levels.size < 2:
        raise InputError("the instrument takes a single value")
    if counts.min() < 2:
        raise InputError("every instrument level needs at least two observations")
    xbar = np.bincount(inverse, weights=xv) / counts
    ybar = np.bincount(inverse, weights=yv) / counts
    order = np.lexsort((levels, xbar))
    levels, counts, xbar, ybar = levels[order], counts[order], xbar[order], ybar[order]
    p = counts / counts.sum()
    zbar = float(np.dot(p, levels))
    tail = np.cumsum((p * (levels - zbar))[::-1])[::-1]
    dx = np.diff(xbar)
    dy = np.diff(ybar)
    raw = dx * tail[1:]
    total = raw.sum()
    cov_xz = sample_cov(xv, zv)
    if cov_xz == 0.0:
        raise UndefinedEstimandError("cov(X, Z) is zero; the Wald ratio is undefined")
    combined = sample_cov(yv, zv) / cov_xz
    if np.any(dx == 0.0):
        at = [float(levels[i + 1]) for i in np.flatnonzero(dx == 0.0)]
        raise UndefinedEstimandError(
            f"adjacent levels share the same mean of X at Z={at}", combined=combined
        )
    weights = raw / total
    pairwise = dy / dx
    rows = [
        DecompositionRow(float(levels[i + 1]), float(pairwise[i]), float(weights[i]))
        for i in range(dx.size)
    ]
    return Decomposition(rows, float(np.dot(weights, pairwise)))


def binary_decomposition_estimand(beta_x, beta_y) -> float:
    """Wald estimand of a binary instrument and binary treatment from
    individual effects.

    ``beta_x`` holds each unit's effect of Z on X (1 complier, -1 defier,
    0 always/never taker); ``beta_y`` its effect of X on Y. Frequencies are
    empirical.
    """
    bx = np.asarray(beta_x, dtype=np.float64)
    by = np.asarray(beta_y, dtype=np.float64)
    if bx.shape != by.shape or bx.ndim != 1:
        raise InputError("beta_x and beta_y must be vectors of equal length")
    if bx.size == 0:
        raise InputError("empty population")
    if not np.all(np.isin(bx, (-1.0, 0.0, 1.0))):
        raise InputError("beta_x entries must be -1, 0 or 1")
    comp = bx == 1.0
    defi = bx == -1.0
    p1, pm1 = comp.mean(), defi.mean()
    if p1 == pm1:
        raise UndefinedEstimandError(
            "equal shares of compliers and defiers: the instrument is irrelevant in aggregate"
        )
    # E[b|c] P(c) = sum over the subgroup / N
    num = by[comp].sum() / bx.size - by[defi].sum() / bx.size
    return float(num / (p1 - pm1))
