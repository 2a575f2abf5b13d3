"""Reference entropy solutions of rho_t + f(rho)_z = 0.

Two independent routes: a Godunov finite-volume solver for any unimodal
flux, and closed-form wave solutions for the Greenshields flux
``f = rho (1 - rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretizer import InitialDensity
from .reconstruct import PiecewiseLinear, StepFunction
from .velocity import VelocityModel

TIME_TOL = 1e-12


class BoundaryReachedError(RuntimeError):
    pass


class WaveInteractionError(ValueError):
    pass


def godunov_flux(model: VelocityModel, a, b):
    """Godunov flux: ``min f`` over ``[a, b]`` if ``a <= b``, else ``max f`` over ``[b, a]``.

    For a unimodal flux with maximiser ``rho*`` this is the demand/supply
    form ``min(f(min(a, rho*)), f(max(b, rho*)))``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rs = model.rho_star
    out = np.minimum(model.f(np.minimum(a, rs)), model.f(np.maximum(b, rs)))
    return float(out) if out.ndim == 0 else out


def godunov_step(u: np.ndarray, lam: float, model: VelocityModel) -> np.ndarray:
    """One conservative update with transmissive boundaries; ``lam = dt / dx``."""
    ext = np.concatenate([u[:1], u, u[-1:]])
    F = godunov_flux(model, ext[:-1], ext[1:])
    return u - lam * (F[1:] - F[:-1])


def godunov_evolve(u0, dx: float, model: VelocityModel, t_end: float,
                   output_times=None, cfl: float = 0.45):
    """Evolve cell averages ``u0``; returns ``[(t, u), ...]`` at the requested times."""
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    targets = sorted(set(float(t) for t in (output_times if output_times is not None else [])))
    if targets and (targets[0] < 0 or targets[-1] > t_end + TIME_TOL):
        raise ValueError("output times must lie in [0, t_end]")
    if not targets or targets[-1] < t_end:
        targets.append(float(t_end))
    dt = cfl * dx / model.max_wave_speed
    u = np.array(u0, dtype=float)
    t = 0.0
    out = []
    for target in targets:
        while target - t > TIME_TOL * max(1.0, target):
            h = min(dt, target - t)
            u = godunov_step(u, h / dx, model)
            t += h
        t = target
        out.append((t, u.copy()))
    return out


@dataclass
class GridSolution:
    x_min: float
    x_max: float
    cells: int
    snapshots: list = field(default_factory=list)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.cells

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.cells + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    def at(self, t: float) -> StepFunction:
        for ts, u in self.snapshots:
            if abs(ts - t) <= TIME_TOL * max(1.0, t):
                return StepFunction(self.edges, u)
        raise KeyError(f"no snapshot at t={t}")

    def rows(self):
        """``(t, x_center, rho)`` rows."""
        xc = self.centers
        for t, u in self.snapshots:
            for x, r in zip(xc, u):
                yield (t, x, r)


def godunov_solve(density: InitialDensity, model: VelocityModel, cells: int,
                  t_end: float, output_times=None, cfl: float = 0.45) -> GridSolution:
    """Godunov solution on a domain padded so no wave reaches the boundary.

    The padding covers the scheme's numerical domain of dependence (one
    cell per step), so the boundary cells stay exactly zero and mass is
    conserved to round-off.
    """
    if int(cells) != cells or cells < 1:
        raise ValueError("cells must be a positive integer")
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    pad = 1.1 * t_end * model.max_wave_speed / cfl + 1e-9
    x_min = density.breakpoints[0] - pad
    x_max = density.breakpoints[-1] + pad
    sol = GridSolution(x_min, x_max, int(cells))
    e = sol.edges
    u0 = np.diff(density.cdf(e)) / sol.dx
    for t, u in godunov_evolve(u0, sol.dx, model, t_end, output_times, cfl):
        if u[0] != 0.0 or u[-1] != 0.0:
            raise BoundaryReachedError(f"a wave reached the domain boundary by t={t}")
        sol.snapshots.append((t, u))
    return sol


# ---------------------------------------------------------------------------
# Greenshields closed forms

@dataclass(frozen=True)
class RiemannSolution:
    """Entropy solution for a single jump at ``x0`` under ``f = rho(1 - rho)``."""

    rho_left: float
    rho_right: float
    t: float
    x0: float = 0.0

    @property
    def is_shock(self) -> bool:
        return self.rho_left < self.rho_right

    @property
    def shock_speed(self) -> float:
        return 1.0 - self.rho_left - self.rho_right

    @property
    def speeds(self) -> tuple[float, float]:
        """Slowest and fastest characteristic bounding the wave (equal for a shock)."""
        if self.rho_left == self.rho_right:
            return 0.0, 0.0
        if self.is_shock:
            s = self.shock_speed
            return s, s
        return 1.0 - 2.0 * self.rho_left, 1.0 - 2.0 * self.rho_right

    @property
    def span(self) -> tuple[float, float]:
        lo, hi = self.speeds
        return self.x0 + lo * self.t, self.x0 + hi * self.t

    def __call__(self, z):
        xi = (np.asarray(z, dtype=float) - self.x0) / self.t
        lo, hi = self.speeds
        fan = np.clip((1.0 - xi) / 2.0, min(self.rho_left, self.rho_right),
                      max(self.rho_left, self.rho_right))
        return np.where(xi < lo, self.rho_left, np.where(xi >= hi, self.rho_right, fan))

    def restrict(self, a: float, b: float) -> PiecewiseLinear:
        """The solution on ``[a, b]`` (zero elsewhere), for exact L1 comparisons."""
        pts = [a] + [p for p in self.span if a < p < b] + [b]
        pts = np.unique(pts)
        left = self(pts[:-1])
        right = np.array([self._left_limit(p) for p in pts[1:]])
        return PiecewiseLinear(pts, left, right)

    def _left_limit(self, z):
        lo, hi = self.span
        if z <= lo:
            return self.rho_left
        if z > hi:
            return self.rho_right
        if self.is_shock:
            return self.rho_left
        return float(np.clip((1.0 - (z - self.x0) / self.t) / 2.0,
                             self.rho_right, self.rho_left))


def riemann_exact(rho_left: float, rho_right: float, t: float, x0: float = 0.0) -> RiemannSolution:
    """Greenshields Riemann solution: shock if ``rho_left < rho_right``, fan otherwise."""
    if not t > 0:
        raise ValueError("t must be positive")
    for r in (rho_left, rho_right):
        if not 0 <= r <= 1:
            raise ValueError("states must lie in [0, 1]")
    return RiemannSolution(float(rho_left), float(rho_right), float(t), float(x0))


def exact_solution(density: InitialDensity, t: float) -> PiecewiseLinear:
    """Greenshields solution for step data, valid until neighbouring waves meet.

    Every jump of ``density`` (including the jumps to the empty road at both
    ends) is resolved by :func:`riemann_exact`; between waves the initial
    states persist.
    """
    b = density.breakpoints
    states = np.concatenate([[0.0], density.values, [0.0]])
    if t == 0:
        return StepFunction(b, density.values)
    waves = [riemann_exact(states[j], states[j + 1], t, b[j]) for j in range(b.size)]
    for w0, w1 in zip(waves[:-1], waves[1:]):
        if w0.span[1] > w1.span[0] + 1e-12:
            raise WaveInteractionError(
                f"waves from z={w0.x0} and z={w1.x0} interact before t={t}")
    pts, left, right = [], [], []

    def add(a, c, fa, fc):
        if c > a:
            if not pts:
                pts.append(a)
            pts.append(c)
            left.append(fa)
            right.append(fc)

    for j, w in enumerate(waves):
        lo, hi = w.span
        if hi > lo:
            add(lo, hi, w.rho_left, w.rho_right)
        if j + 1 < len(waves):
            nxt = waves[j + 1].span[0]
            add(hi, nxt, states[j + 1], states[j + 1])
    return PiecewiseLinear(np.array(pts), np.array(left), np.array(right))
