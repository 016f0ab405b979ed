"""Model parameters for the three-factor CIR system and its stationary Gamma law."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

POSITIVE_FIELDS = ("k", "k_theta", "k_v", "alpha", "beta", "gamma", "zeta", "eta")
CORRELATION_FIELDS = ("rho_theta", "rho_v")


class ParameterError(ValueError):
    """Base class for parameter validation failures."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class NonPositiveParameter(ParameterError):
    pass


class NonFiniteParameter(ParameterError):
    pass


class CorrelationOutOfRange(ParameterError):
    pass


class RhoBarNotPositive(ParameterError):
    def __init__(self, rho_bar: float):
        super().__init__(
            f"rho_bar = 1 - rho_theta^2 - rho_v^2 = {rho_bar:.6g} must be > 0",
            field="rho_theta",
        )
        self.rho_bar = rho_bar


@dataclass(frozen=True)
class ModelParams:
    """Rates, volatilities, long-run levels and noise correlations.

    ``R`` reverts to ``theta`` at speed ``k``; ``theta`` reverts to ``zeta`` at
    ``k_theta`` with volatility ``alpha*beta*sqrt(v*theta)``; ``v`` is a CIR
    process reverting to ``eta`` at ``k_v`` with volatility ``gamma*sqrt(v)``.
    """

    k: float = 1.0
    k_theta: float = 1.0
    k_v: float = 1.0
    alpha: float = 0.5
    beta: float = 1.0
    gamma: float = 0.5
    zeta: float = 1.0
    eta: float = 1.0
    rho_theta: float = 0.3
    rho_v: float = 0.3

    @property
    def rho_bar(self) -> float:
        return 1.0 - self.rho_theta**2 - self.rho_v**2

    @property
    def feller(self) -> bool:
        """True when ``2 k_v eta >= gamma^2`` (v stays strictly positive)."""
        return 2.0 * self.k_v * self.eta >= self.gamma**2

    def replace(self, **changes: float) -> ModelParams:
        data = asdict(self)
        data.update(changes)
        return ModelParams(**data)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, data: dict) -> ModelParams:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown model parameter(s): {sorted(unknown)}", field=sorted(unknown)[0])
        values = {}
        for name, value in data.items():
            try:
                values[name] = float(value)
            except (TypeError, ValueError):
                raise ParameterError(f"{name} must be a number, got {value!r}", field=name) from None
        return cls(**values)

    def as_tuple(self) -> tuple[float, ...]:
        """Kernel argument order: k, k_theta, k_v, alpha, beta, gamma, zeta, eta, rho_theta, rho_v."""
        return tuple(getattr(self, f.name) for f in fields(self))


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged if every invariant holds, else raise."""
    for f in fields(params):
        value = getattr(params, f.name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise NonFiniteParameter(f"{f.name} must be finite, got {value!r}", field=f.name)
    for name in POSITIVE_FIELDS:
        if getattr(params, name) <= 0.0:
            raise NonPositiveParameter(f"{name} must be > 0, got {getattr(params, name)!r}", field=name)
    for name in CORRELATION_FIELDS:
        if not -1.0 <= getattr(params, name) <= 1.0:
            raise CorrelationOutOfRange(f"{name} must lie in [-1, 1], got {getattr(params, name)!r}", field=name)
    if params.rho_bar <= 0.0:
        raise RhoBarNotPositive(params.rho_bar)
    return params


@dataclass(frozen=True)
class GammaStationary:
    """Gamma(shape, scale) law invariant for the v-factor."""

    shape: float
    scale: float

    @property
    def mean(self) -> float:
        return self.shape * self.scale


def stationary_gamma(params: ModelParams) -> GammaStationary:
    g2 = params.gamma**2
    return GammaStationary(shape=2.0 * params.k_v * params.eta / g2, scale=g2 / (2.0 * params.k_v))


PRESETS: dict[str, ModelParams] = {
    "default": ModelParams(),
    # Feller condition violated: 2 k_v eta = 2 < gamma^2 = 4, stationary shape 0.5
    "stress": ModelParams(gamma=2.0),
}
