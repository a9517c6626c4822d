"""Simulation data-generating process with binary confounders.

Model, for confounder blocks k = 3..6 (each a pair U_k, V_k of
independent Bernoulli(0.5) variables)::

    Z = e_Z
    X = gamma Z + rho Z^p + sum_k dX_k . m_k + sum_{k in 4,6} Z thX_k . m_k + e_X
    Y = tau X + phi X^2  + sum_k dY_k . m_k + sum_{k in 5,6} X thY_k . m_k + e_Y

where ``m_k = (U_k, V_k, U_k V_k)`` and ``p = rho_power``. Block 4 modifies
only Z -> X, block 5 only X -> Y, block 6 both, block 3 neither.
"""

from __future__ import annotations

import enum
import json
import warnings
import zlib
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from . import kernels
from .errors import InputError, UnsupportedConfigError
from .numkit import Dataset

BLOCKS = (3, 4, 5, 6)
Z_MODIFIER_BLOCKS = (4, 6)
Y_MODIFIER_BLOCKS = (5, 6)
BUILTIN_IDS = (1, 2, 3, 4, 5)
COLUMNS = ("Z", "X", "Y", "U3", "V3", "U4", "V4", "U5", "V5", "U6", "V6")


class ErrorDist(enum.Enum):
    STANDARD_NORMAL = "standard_normal"
    BETA_HALF_HALF = "beta_half_half"
    CHISQ_MIXTURE = "chisq_mixture"

    @classmethod
    def parse(cls, value) -> "ErrorDist":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(d.value for d in cls)
            raise InputError(f"unknown error distribution {value!r} (expected one of {choices})") from None


@dataclass(frozen=True)
class Triple:
    """Coefficients on ``U``, ``V`` and ``U*V`` of one confounder block."""

    u: float = 0.0
    v: float = 0.0
    uv: float = 0.0

    def is_zero(self) -> bool:
        return self.u == 0.0 and self.v == 0.0 and self.uv == 0.0

    def mean_effect(self) -> float:
        """Expected value of ``u U + v V + uv U V`` for independent Bernoulli(0.5)."""
        return 0.5 * self.u + 0.5 * self.v + 0.25 * self.uv

    def apply(self, U: np.ndarray, V: np.ndarray) -> np.ndarray:
        return self.u * U + self.v * V + self.uv * (U * V)


def _triples(raw, allowed: tuple[int, ...], what: str) -> dict[int, Triple]:
    out = {k: Triple() for k in allowed}
    if raw is None:
        return out
    for key, val in dict(raw).items():
        try:
            k = int(key)
        except (TypeError, ValueError):
            raise InputError(f"{what}: block key {key!r} is not an integer") from None
        if k not in allowed:
            raise InputError(f"{what}: block {k} not allowed (use {list(allowed)})")
        if isinstance(val, Triple):
            out[k] = val
        elif isinstance(val, Mapping):
            extra = set(val) - {"u", "v", "uv"}
            if extra:
                raise InputError(f"{what}[{k}]: unknown keys {sorted(extra)}")
            out[k] = Triple(**{m: float(c) for m, c in val.items()})
        else:
            try:
                u, v, uv = (float(c) for c in val)
            except (TypeError, ValueError):
                raise InputError(f"{what}[{k}]: expected three numbers (u, v, uv), got {val!r}") from None
            out[k] = Triple(u, v, uv)
    return out


@dataclass(frozen=True)
class ScenarioConfig:
    """Full parameter vector of the simulation model.

    ``rho_power`` is the exponent of the instrument's non-linear term.
    ``reference_ace``, when set, is the ACE that Monte Carlo bias and
    coverage are scored against instead of :func:`analytic_ace`.
    """

    n: int = 1000
    gamma: float = 0.0
    rho: float = 0.0
    rho_power: int = 3
    tau: float = 0.0
    phi: float = 0.0
    delta_x: dict = field(default_factory=dict)
    delta_y: dict = field(default_factory=dict)
    theta_x: dict = field(default_factory=dict)
    theta_y: dict = field(default_factory=dict)
    error_dist: ErrorDist = ErrorDist.STANDARD_NORMAL
    reference_ace: float | None = None
    name: str = ""
    description: str = ""

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "delta_x", _triples(self.delta_x, BLOCKS, "delta_x"))
        set_(self, "delta_y", _triples(self.delta_y, BLOCKS, "delta_y"))
        set_(self, "theta_x", _triples(self.theta_x, Z_MODIFIER_BLOCKS, "theta_x"))
        set_(self, "theta_y", _triples(self.theta_y, Y_MODIFIER_BLOCKS, "theta_y"))
        set_(self, "error_dist", ErrorDist.parse(self.error_dist))
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise InputError(f"n must be an integer >= 2, got {self.n!r}")
        set_(self, "n", int(self.n))
        if self.rho_power not in (2, 3):
            raise InputError(f"rho_power must be 2 or 3, got {self.rho_power!r}")
        scalars = [self.gamma, self.rho, self.tau, self.phi]
        for block in (self.delta_x, self.delta_y, self.theta_x, self.theta_y):
            for t in block.values():
                scalars += [t.u, t.v, t.uv]
        if self.reference_ace is not None:
            scalars.append(self.reference_ace)
        if not np.all(np.isfinite(np.asarray(scalars, dtype=float))):
            raise InputError("all coefficients must be finite")

    def with_n(self, n: int) -> "ScenarioConfig":
        return replace(self, n=n)

    def packed_params(self) -> np.ndarray:
        """Coefficients in the flat layout taken by ``kernels.structural``."""
        zero = Triple()
        out = [self.gamma, self.rho, self.tau, self.phi]
        for block, keys in (
            (self.delta_x, BLOCKS),
            (self.delta_y, BLOCKS),
            (self.theta_x, Z_MODIFIER_BLOCKS),
            (self.theta_y, Y_MODIFIER_BLOCKS),
        ):
            for k in keys:
                t = block.get(k, zero)
                out += [t.u, t.v, t.uv]
        return np.asarray(out, dtype=np.float64)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("delta_x", "delta_y", "theta_x", "theta_y"):
            d[key] = {str(k): v for k, v in d[key].items()}
        d["error_dist"] = self.error_dist.value
        return d

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScenarioConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise InputError(f"unknown scenario keys {sorted(extra)}")
        return cls(**dict(d))

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid scenario JSON: {exc}") from None
        if not isinstance(d, dict):
            raise InputError("scenario JSON must be an object")
        try:
            return cls.from_dict(d)
        except TypeError as exc:
            raise InputError(f"invalid scenario JSON: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror}") from None
        return cls.from_json(text)

    def seed_key(self) -> int:
        """Integer identifying the scenario in seed derivation.

        Numeric names (the built-ins) map to themselves; otherwise a CRC32
        of the parameter JSON without ``n``.
        """
        if self.name.isdigit():
            return int(self.name)
        d = self.to_dict()
        d.pop("n")
        return zlib.crc32(json.dumps(d, sort_keys=True).encode())

    @property
    def label(self) -> str:
        return self.name or f"custom-{self.seed_key():08x}"


def builtin_scenario(scenario_id: int) -> ScenarioConfig:
    """One of the five published scenarios, read from the packaged JSON."""
    try:
        sid = int(scenario_id)
    except (TypeError, ValueError):
        sid = None
    if sid not in BUILTIN_IDS:
        raise InputError(f"unknown scenario {scenario_id!r}; built-ins are 1-5")
    text = resources.files("noshlab").joinpath(f"scenarios/scenario{sid}.json").read_text("utf-8")
    return ScenarioConfig.from_json(text)


def resolve_scenario(ref: str | int) -> ScenarioConfig:
    """A built-in id (``"1"``..``"5"``) or a path to a scenario JSON file."""
    text = str(ref)
    if text.isdigit():
        return builtin_scenario(int(text))
    return ScenarioConfig.load(text)


def _standardize(raw: np.ndarray) -> np.ndarray:
    centred = raw - raw.mean()
    sd = np.sqrt(np.dot(centred, centred) / (raw.shape[0] - 1))
    if sd == 0.0:
        raise InputError("cannot standardise a constant error vector")
    return centred / sd


def raw_errors(dist, n: int, rng) -> np.ndarray:
    """Unstandardised draws from the named error distribution."""
    dist = ErrorDist.parse(dist)
    rng = np.random.default_rng(rng)
    if dist is ErrorDist.STANDARD_NORMAL:
        return rng.standard_normal(n)
    if dist is ErrorDist.BETA_HALF_HALF:
        return rng.beta(0.5, 0.5, n)
    return rng.chisquare(2, n) + 7.0 * (rng.random(n) < 0.5)


def draw_errors(dist, n: int, seed) -> np.ndarray:
    """``n`` error draws; non-normal regimes come back as sample z-scores
    (mean 0, variance 1 with the n-1 divisor).

    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    dist = ErrorDist.parse(dist)
    if n < 2 and dist is not ErrorDist.STANDARD_NORMAL:
        raise InputError("standardised errors need n >= 2")
    if n < 1:
        raise InputError("n must be positive")
    raw = raw_errors(dist, n, seed)
    if dist is ErrorDist.STANDARD_NORMAL:
        return raw
    return _standardize(raw)


def treatment_equation(config: ScenarioConfig, z, confounders: Mapping, eps_x):
    """X from the structural equation, given Z, confounders and its error."""
    z = np.asarray(z, dtype=np.float64)
    x = config.gamma * z + config.rho * z**config.rho_power + eps_x
    for k in BLOCKS:
        U, V = confounders[f"U{k}"], confounders[f"V{k}"]
        x = x + config.delta_x[k].apply(U, V)
        if k in Z_MODIFIER_BLOCKS:
            x = x + z * config.theta_x[k].apply(U, V)
    return x


def outcome_equation(config: ScenarioConfig, x, confounders: Mapping, eps_y):
    """Y from the structural equation, given X, confounders and its error."""
    x = np.asarray(x, dtype=np.float64)
    y = config.tau * x + config.phi * x * x + eps_y
    for k in BLOCKS:
        U, V = confounders[f"U{k}"], confounders[f"V{k}"]
        y = y + config.delta_y[k].apply(U, V)
        if k in Y_MODIFIER_BLOCKS:
            y = y + x * config.theta_y[k].apply(U, V)
    return y


def beta_x_oracle(config: ScenarioConfig, z, confounders: Mapping) -> np.ndarray:
    """Individual dX/dZ."""
    z = np.asarray(z, dtype=np.float64)
    p = config.rho_power
    b = config.gamma + p * config.rho * z ** (p - 1)
    for k in Z_MODIFIER_BLOCKS:
        b = b + config.theta_x[k].apply(confounders[f"U{k}"], confounders[f"V{k}"])
    return np.broadcast_to(b, z.shape).astype(np.float64)


def beta_y_oracle(config: ScenarioConfig, x, confounders: Mapping) -> np.ndarray:
    """Individual dY/dX evaluated at the realised X."""
    x = np.asarray(x, dtype=np.float64)
    b = config.tau + 2.0 * config.phi * x
    for k in Y_MODIFIER_BLOCKS:
        b = b + config.theta_y[k].apply(confounders[f"U{k}"], confounders[f"V{k}"])
    return np.broadcast_to(b, x.shape).astype(np.float64)


@dataclass(frozen=True)
class GeneratedData:
    data: Dataset
    beta_x: np.ndarray
    beta_y: np.ndarray
    ace: float | None
    errors: Mapping[str, np.ndarray]


def draw(config: ScenarioConfig, seed):
    """Random inputs of one replication: ``(e_Z, e_X, e_Y, bits)``.

    ``bits`` is an ``(8, n)`` int8 array with rows U3, V3, ..., U6, V6.
    Draw order: e_Z, e_X, e_Y, then the bits.
    """
    rng = np.random.default_rng(seed)
    n = config.n
    ez, ex, ey = (draw_errors(config.error_dist, n, rng) for _ in range(3))
    bits = rng.integers(0, 2, size=(2 * len(BLOCKS), n), dtype=np.int8)
    return ez, ex, ey, bits


def simulate_arrays(config: ScenarioConfig, seed):
    """``(z, x, y, bits)`` for one replication, using the structural kernel."""
    ez, ex, ey, bits = draw(config, seed)
    x, y = kernels.structural(ez, ex, ey, bits, config.packed_params(), config.rho_power)
    return ez, x, y, bits


def generate_columns(config: ScenarioConfig, seed):
    """Raw draw behind :func:`generate`: ``(columns, confounders, errors)``."""
    ez, ex, ey, bits = draw(config, seed)
    x, y = kernels.structural(ez, ex, ey, bits, config.packed_params(), config.rho_power)
    fbits = bits.astype(np.float64)
    conf = {}
    for j, k in enumerate(BLOCKS):
        conf[f"U{k}"] = fbits[2 * j]
        conf[f"V{k}"] = fbits[2 * j + 1]
    eps = {"Z": ez, "X": ex, "Y": ey}
    return {"Z": ez, "X": x, "Y": y, **conf}, conf, eps


def generate(config: ScenarioConfig, seed) -> GeneratedData:
    """Draw one dataset of size ``config.n`` with its individual-effect oracles.

    Deterministic in (config, seed). ``ace`` is None when the analytic ACE
    is unavailable for the configuration.
    """
    cols, conf, eps = generate_columns(config, seed)
    try:
        ace = analytic_ace(config)
    except UnsupportedConfigError:
        ace = None
    return GeneratedData(
        data=Dataset(cols),
        beta_x=beta_x_oracle(config, cols["Z"], conf),
        beta_y=beta_y_oracle(config, cols["X"], conf),
        ace=ace,
        errors=eps,
    )


def _instrument_moment(config: ScenarioConfig) -> float:
    """E[Z^p] for standard-normal Z."""
    return 1.0 if config.rho_power == 2 else 0.0


def expected_treatment(config: ScenarioConfig) -> float:
    """E[X] for standard-normal errors (E[Z] = E[Z^3] = 0, E[Z^2] = 1)."""
    if config.error_dist is not ErrorDist.STANDARD_NORMAL:
        raise UnsupportedConfigError(
            "E[X] is only available in closed form for standard-normal errors"
        )
    return config.rho * _instrument_moment(config) + sum(
        config.delta_x[k].mean_effect() for k in BLOCKS
    )


def analytic_ace(config: ScenarioConfig) -> float:
    """Population mean of the individual effect dY/dX.

    A quadratic X -> Y term makes the ACE depend on E[X], which is only
    available in closed form for normal errors; that combination is
    rejected for the other regimes.
    """
    ace = config.tau + sum(config.theta_y[k].mean_effect() for k in Y_MODIFIER_BLOCKS)
    if config.phi != 0.0:
        try:
            ex = expected_treatment(config)
        except UnsupportedConfigError:
            raise UnsupportedConfigError(
                "analytic ACE with phi != 0 requires standard-normal errors"
            ) from None
        ace += 2.0 * config.phi * ex
    return float(ace)


def scoring_ace(config: ScenarioConfig) -> float:
    """The ACE Monte Carlo metrics are scored against."""
    if config.reference_ace is not None:
        return float(config.reference_ace)
    return analytic_ace(config)


@dataclass(frozen=True)
class AssumptionReport:
    assumption1: bool
    assumption2: bool
    nosh: bool
    nem1: bool
    nem2: bool
    effect_homogeneous: bool
    instrument_homogeneous: bool

    def as_dict(self) -> dict[str, bool]:
        return asdict(self)


def classify(config: ScenarioConfig) -> AssumptionReport:
    """Which identifying assumptions the configuration satisfies.

    Assumption 1 fails when some confounder block modifies both Z -> X and
    X -> Y (only block 6 can); blocks are mutually independent, so no other
    route to dependence exists. Assumption 2 fails with a quadratic X -> Y
    term. Every confounder causes X, so any confounder-driven or X-driven
    variation in dY/dX breaks NEM1, and any confounder-driven variation in
    dX/dZ breaks NEM2.
    """
    a1 = not any(
        not config.theta_x[k].is_zero() and not config.theta_y[k].is_zero()
        for k in set(Z_MODIFIER_BLOCKS) & set(Y_MODIFIER_BLOCKS)
    )
    a2 = config.phi == 0.0
    no_theta_y = all(t.is_zero() for t in config.theta_y.values())
    no_theta_x = all(t.is_zero() for t in config.theta_x.values())
    nem1 = no_theta_y and a2
    return AssumptionReport(
        assumption1=a1,
        assumption2=a2,
        nosh=a1 and a2,
        nem1=nem1,
        nem2=no_theta_x,
        effect_homogeneous=nem1,
        instrument_homogeneous=no_theta_x and config.rho == 0.0,
    )


def multiplicative_additive_mod(base: float, effect_ratio: float, modifier_ratio: float):
    """Additive effects implied by a multiplicative model ``E = base * a^Z * t^V``.

    Returns the additive effect of Z at V = 0 and at V = 1. They differ
    (additive effect modification) unless ``modifier_ratio == 1`` or
    ``effect_ratio == 1``.
    """
    if base < 0:
        raise InputError("base must be non-negative")
    corners = [base, base * effect_ratio, base * modifier_ratio, base * effect_ratio * modifier_ratio]
    if max(corners) > 1.0:
        warnings.warn(
            "parameters imply a Bernoulli mean above 1; returning the algebraic values",
            RuntimeWarning,
            stacklevel=2,
        )
    return base * (effect_ratio - 1.0), base * modifier_ratio * (effect_ratio - 1.0)
