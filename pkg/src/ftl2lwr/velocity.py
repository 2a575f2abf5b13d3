"""Velocity laws for Follow-the-Leader traffic and the induced LWR flux.

A model is given in density form ``v(rho)`` on ``[0, 1]`` with ``v(0) = 1``
and ``v(1) = 0``.  The spacing form used by the particle system is
``V(y) = v(1 / y)`` for spacings ``y >= 1`` measured in vehicle lengths.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

RHO_TOL = 1e-12
SPACING_TOL = 1e-9


class DomainError(ValueError):
    """Raised when a density or spacing leaves the model's domain."""


@dataclass(frozen=True)
class VelocityModel:
    """Speed-density relation together with the constants of its growth bounds.

    Parameters
    ----------
    name : str
        Identifier used in configs.
    v, v_prime : callable
        ``v(rho)`` and its derivative.  Both must accept floats and arrays.
    sigma : float
        Exponent in ``V(y) >= 1 - y**(1 - sigma)``; must exceed 1.
    M : float
        Bound on ``y**2 * V'(y)`` for ``y >= 1``.
    """

    name: str
    v: Callable
    v_prime: Callable
    sigma: float
    M: float
    # populated in __post_init__ by sampling the flux
    rho_star: float = field(init=False, repr=False)
    max_wave_speed: float = field(init=False, repr=False)

    def __post_init__(self):
        if not self.sigma > 1:
            raise ValueError(f"sigma must be > 1, got {self.sigma}")
        if not self.M > 0:
            raise ValueError(f"M must be > 0, got {self.M}")
        rho = np.linspace(0.0, 1.0, 10_001)
        df = np.asarray(self.v(rho) + rho * self.v_prime(rho), dtype=float)
        signs = np.sign(df[np.abs(df) > 1e-14])
        if np.count_nonzero(np.diff(signs) > 0):
            raise ValueError(f"flux of model {self.name!r} is not unimodal on [0, 1]")
        f = rho * self.v(rho)
        j = int(np.argmax(f))
        lo, hi = rho[max(j - 1, 0)], rho[min(j + 1, rho.size - 1)]
        # golden-section refinement of the flux maximiser
        g = (np.sqrt(5.0) - 1.0) / 2.0
        for _ in range(80):
            a = hi - g * (hi - lo)
            b = lo + g * (hi - lo)
            if a * self.v(a) < b * self.v(b):
                lo = a
            else:
                hi = b
        object.__setattr__(self, "rho_star", float(0.5 * (lo + hi)))
        object.__setattr__(self, "max_wave_speed", float(np.max(np.abs(df))))

    def V(self, y):
        """Spacing-form velocity without domain checks; ``y = inf`` gives 1."""
        return self.v(1.0 / y)

    def V_prime(self, y):
        return -self.v_prime(1.0 / y) / (y * y)

    def f(self, rho):
        return rho * self.v(rho)


def greenshields() -> VelocityModel:
    return VelocityModel("greenshields", lambda r: 1.0 - r, lambda r: -1.0 + 0.0 * r,
                         sigma=2.0, M=1.0)


def quadratic() -> VelocityModel:
    return VelocityModel("quadratic", lambda r: 1.0 - r * r, lambda r: -2.0 * r,
                         sigma=3.0, M=2.0)


MODELS = {"greenshields": greenshields, "quadratic": quadratic}


def get_model(name: str) -> VelocityModel:
    try:
        return MODELS[name]()
    except KeyError:
        raise ValueError(f"unknown velocity model {name!r}; "
                         f"choose from {sorted(MODELS)}") from None


def _check_rho(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < -RHO_TOL) or np.any(rho > 1 + RHO_TOL) or np.any(np.isnan(rho)):
        raise DomainError(f"density outside [0, 1]: {rho}")
    return np.clip(rho, 0.0, 1.0)


def v_of_rho(model: VelocityModel, rho):
    """Speed at density ``rho``."""
    rho = _check_rho(rho)
    out = model.v(rho)
    return float(out) if np.ndim(out) == 0 else out


def V_of_y(model: VelocityModel, y):
    """Speed at spacing ``y`` (in vehicle lengths); ``y = inf`` is the free road."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 1 - SPACING_TOL) or np.any(np.isnan(y)):
        raise DomainError(f"spacing below one vehicle length: {y}")
    out = model.V(np.maximum(y, 1.0))
    return float(out) if np.ndim(out) == 0 else out


def flux(model: VelocityModel, rho):
    """LWR flux ``f(rho) = rho * v(rho)``."""
    rho = _check_rho(rho)
    out = rho * model.v(rho)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class AssumptionReport:
    growth_margin: float
    derivative_margin: float
    monotone: bool
    boundary_ok: bool
    tol: float = 1e-12

    @property
    def growth_ok(self) -> bool:
        return self.growth_margin >= -self.tol

    @property
    def derivative_ok(self) -> bool:
        return self.derivative_margin >= -self.tol

    @property
    def passed(self) -> bool:
        return self.growth_ok and self.derivative_ok and self.monotone and self.boundary_ok


def verify_assumptions(model: VelocityModel, grid_size: int = 1000) -> AssumptionReport:
    """Sample the structural assumptions on a geometric grid over ``[1, 1e6]``.

    Reports the worst margin of ``V(y) - (1 - y**(1 - sigma)) >= 0`` and of
    ``M - y**2 V'(y) >= 0``, plus monotonicity of ``v`` and its boundary
    values.  Nothing is raised; inspect ``report.passed``.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    y = np.geomspace(1.0, 1e6, grid_size)
    growth = model.V(y) - (1.0 - y ** (1.0 - model.sigma))
    deriv = model.M - y * y * model.V_prime(y)
    rho = np.linspace(0.0, 1.0, grid_size)
    monotone = bool(np.all(np.asarray(model.v_prime(rho)) <= 0.0)
                    and np.all(np.diff(model.v(rho)) <= RHO_TOL))
    boundary_ok = abs(model.v(0.0) - 1.0) <= RHO_TOL and abs(model.v(1.0)) <= RHO_TOL
    return AssumptionReport(float(growth.min()), float(deriv.min()), monotone, boundary_ok)
