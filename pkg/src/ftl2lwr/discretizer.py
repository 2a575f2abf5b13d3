"""Initial vehicle placement by inverting the cumulative mass of rho_0."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASS_TOL = 1e-12


@dataclass(frozen=True)
class InitialDensity:
    """Piecewise-constant density: ``values[j]`` on ``[breakpoints[j], breakpoints[j+1])``.

    Zero outside ``[breakpoints[0], breakpoints[-1]]``.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or v.ndim != 1 or b.size != v.size + 1 or v.size == 0:
            raise ValueError("need m+1 breakpoints for m values (m >= 1)")
        if not np.all(np.isfinite(b)) or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be finite and strictly increasing")
        if np.any(v < -MASS_TOL) or np.any(v > 1 + MASS_TOL) or not np.all(np.isfinite(v)):
            raise ValueError("density values must lie in [0, 1]")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", np.clip(v, 0.0, 1.0))

    @property
    def mass(self) -> float:
        return float(np.dot(self.values, np.diff(self.breakpoints)))

    @property
    def total_variation(self) -> float:
        v = self.values
        return float(abs(v[0]) + np.abs(np.diff(v)).sum() + abs(v[-1]))

    def cumulative(self) -> np.ndarray:
        """Cumulative mass at each breakpoint (starts at 0)."""
        return np.concatenate([[0.0], np.cumsum(self.values * np.diff(self.breakpoints))])

    def cdf(self, z):
        """Exact (piecewise-linear) cumulative mass up to ``z``."""
        return np.interp(z, self.breakpoints, self.cumulative())

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        j = np.searchsorted(self.breakpoints, z, side="right") - 1
        inside = (j >= 0) & (j < self.values.size)
        return np.where(inside, self.values[np.clip(j, 0, self.values.size - 1)], 0.0)


@dataclass(frozen=True)
class InitialLayout:
    N: int
    ell: float
    positions: np.ndarray
    spacings: np.ndarray


def normalize(density: InitialDensity) -> InitialDensity:
    """Stretch the z-axis about the left end so the total mass is one.

    Values are untouched, so they stay inside ``[0, 1]``.
    """
    mass = density.mass
    if mass <= 0:
        raise ValueError("cannot normalize a density with zero mass")
    if abs(mass - 1.0) <= MASS_TOL:
        return density
    x0 = density.breakpoints[0]
    return InitialDensity(x0 + (density.breakpoints - x0) / mass, density.values)


def quantiles(density: InitialDensity, levels) -> np.ndarray:
    """Smallest ``z`` with ``cdf(z) >= level`` for each level in ``(0, mass]``."""
    levels = np.asarray(levels, dtype=float)
    cum = density.cumulative()
    if np.any(levels <= 0) or np.any(levels > cum[-1] + MASS_TOL):
        raise ValueError("quantile levels must lie in (0, mass]")
    j = np.clip(np.searchsorted(cum, levels, side="left"), 1, density.values.size)
    # cum[j-1] < level <= cum[j], so the piece j-1 carries positive density
    return density.breakpoints[j - 1] + (levels - cum[j - 1]) / density.values[j - 1]


def initial_positions(density: InitialDensity, N: int) -> InitialLayout:
    """Place N vehicle fronts so that consecutive fronts enclose mass ``1/(N+1)``.

    Position ``i`` (0-based) is the ``(i+1)/(N+1)`` quantile of ``density``,
    taking the left edge of any flat stretch of the cumulative mass.
    """
    if int(N) != N or N < 2:
        raise ValueError(f"N must be an integer >= 2, got {N}")
    N = int(N)
    if abs(density.mass - 1.0) > MASS_TOL:
        raise ValueError(f"density must be normalized (mass {density.mass!r})")
    ell = 1.0 / (N + 1)
    positions = quantiles(density, np.arange(1, N + 1) * ell)
    if np.any(np.diff(positions) <= 0):
        raise ValueError("vehicle positions are not strictly increasing")
    return InitialLayout(N, ell, positions, np.diff(positions) / ell)


def block() -> InitialDensity:
    return InitialDensity([0.0, 1.0], [1.0])


def riemann(rho_left: float, rho_right: float) -> InitialDensity:
    return normalize(InitialDensity([-1.0, 0.0, 1.0], [rho_left, rho_right]))


def two_blocks() -> InitialDensity:
    return InitialDensity([0.0, 0.5, 1.0, 1.5], [1.0, 0.0, 1.0])


def from_spec(spec: dict) -> InitialDensity:
    """Build a normalized density from a config entry.

    Either ``{"preset": "block" | "riemann" | "two_blocks", ...}`` or
    ``{"breakpoints": [...], "values": [...]}``.
    """
    if "preset" in spec:
        name = spec["preset"]
        if name == "block":
            return block()
        if name == "two_blocks":
            return two_blocks()
        if name == "riemann":
            return riemann(float(spec["rho_left"]), float(spec["rho_right"]))
        raise ValueError(f"unknown density preset {name!r}")
    return normalize(InitialDensity(spec["breakpoints"], spec["values"]))
