"""Continuum fields built from particle states, with exact L1/TV/mass functionals
and the Kruzkov entropy residual of a particle trajectory."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ftl_sim import FtlState, Trajectory
from .velocity import VelocityModel


@dataclass(frozen=True)
class PiecewiseLinear:
    """Function that is linear on each ``[breakpoints[j], breakpoints[j+1])``.

    ``left[j]`` and ``right[j]`` are the limits at the two ends of piece ``j``;
    the function is zero outside ``[breakpoints[0], breakpoints[-1]]``.
    """

    breakpoints: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        lv = np.asarray(self.left, dtype=float)
        rv = np.asarray(self.right, dtype=float)
        if b.ndim != 1 or b.size < 2 or lv.shape != (b.size - 1,) or rv.shape != lv.shape:
            raise ValueError("need p+1 breakpoints for p pieces")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "left", lv)
        object.__setattr__(self, "right", rv)

    def _limits(self, a, b):
        """Values at ``a+`` and ``b-`` for sub-intervals lying inside one piece each."""
        bp = self.breakpoints
        mid = 0.5 * (a + b)
        j = np.searchsorted(bp, mid, side="right") - 1
        inside = (j >= 0) & (j < bp.size - 1)
        j = np.clip(j, 0, bp.size - 2)
        x0, x1 = bp[j], bp[j + 1]
        slope = (self.right[j] - self.left[j]) / (x1 - x0)
        fa = np.where(inside, self.left[j] + slope * (a - x0), 0.0)
        fb = np.where(inside, self.left[j] + slope * (b - x0), 0.0)
        return fa, fb

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        fa, _ = self._limits(z, z)
        return fa

    @property
    def mass(self) -> float:
        return float(np.sum(0.5 * (self.left + self.right) * np.diff(self.breakpoints)))


class StepFunction(PiecewiseLinear):
    """Piecewise-constant function, zero outside its breakpoints."""

    def __init__(self, breakpoints, values):
        values = np.asarray(values, dtype=float)
        super().__init__(breakpoints, values, values)

    @property
    def values(self) -> np.ndarray:
        return self.left

    def __repr__(self):
        return f"StepFunction(breakpoints={self.breakpoints!r}, values={self.values!r})"


def _abs_linear_integral(fa, fb, w):
    """Exact integral of ``|f|`` over an interval of width ``w`` where f is linear."""
    same = fa * fb >= 0
    full = 0.5 * np.abs(fa + fb) * w
    denom = np.abs(fa) + np.abs(fb)
    split = 0.5 * (fa * fa + fb * fb) / np.where(denom > 0, denom, 1.0) * w
    return np.where(same, full, split)


def l1_distance(f: PiecewiseLinear, g: PiecewiseLinear) -> float:
    """Exact ``integral |f - g|`` over the real line."""
    edges = np.union1d(f.breakpoints, g.breakpoints)
    if edges.size < 2:
        return 0.0
    a, b = edges[:-1], edges[1:]
    fa, fb = f._limits(a, b)
    ga, gb = g._limits(a, b)
    return float(np.sum(_abs_linear_integral(fa - ga, fb - gb, b - a)))


def mass(f: PiecewiseLinear) -> float:
    return f.mass


def total_variation(f: StepFunction, far_field: float = 0.0) -> float:
    """Sum of all jumps, including the jumps to ``far_field`` at both ends."""
    v = f.values
    if v.size == 0:
        return 0.0
    return float(abs(v[0] - far_field) + np.abs(np.diff(v)).sum() + abs(v[-1] - far_field))


def density_field(state: FtlState) -> StepFunction:
    """``rho_i = 1 / y_i`` on each ``[z_{i-1/2}, z_{i+1/2})``; the leader adds no cell."""
    return StepFunction(state.positions, state.densities)


def velocity_field(state: FtlState, model: VelocityModel) -> StepFunction:
    """``V_i = V(y_i)`` on the cells of :func:`density_field` (zero outside).

    Outside the platoon the road is empty, so the physical speed there is
    ``v(0) = 1``; pass ``far_field=1`` to :func:`total_variation` to measure
    the variation of that field.
    """
    return StepFunction(state.positions, state.speeds(model))


# ---------------------------------------------------------------------------
# Kruzkov entropy residual

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)
_MAX_PANEL = 1.0 / 32


def bump(s):
    """``exp(1 / (s**2 - 1))`` on ``|s| < 1``, zero elsewhere."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    d = np.where(inside, s * s - 1.0, -1.0)
    return np.where(inside, np.exp(1.0 / d), 0.0)


def bump_prime(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    d = np.where(inside, s * s - 1.0, -1.0)
    return np.where(inside, np.exp(1.0 / d) * (-2.0 * s) / (d * d), 0.0)


def bump_integrals(edges) -> np.ndarray:
    """``integral bump(s) ds`` over each ``[edges[k], edges[k+1]]`` (sorted edges).

    Composite 10-point Gauss-Legendre with panels no wider than 1/32; the
    absolute error is below 1e-13.
    """
    edges = np.clip(np.asarray(edges, dtype=float), -1.0, 1.0)
    a, b = edges[:-1], edges[1:]
    w = b - a
    panels = np.maximum(1, np.ceil(w / _MAX_PANEL).astype(int))
    owner = np.repeat(np.arange(a.size), panels)
    first = np.cumsum(panels) - panels
    local = np.arange(owner.size) - first[owner]
    h = w[owner] / panels[owner]
    left = a[owner] + local * h
    nodes = left[:, None] + 0.5 * h[:, None] * (_GL_NODES[None, :] + 1.0)
    vals = 0.5 * h * (bump(nodes) @ _GL_WEIGHTS)
    return np.bincount(owner, weights=vals, minlength=a.size)


@dataclass(frozen=True)
class BumpTestFunction:
    """Non-negative test function ``bump((t - t0)/r_t) * bump((z - z0)/r_z)``."""

    t0: float
    z0: float
    r_t: float
    r_z: float

    def __post_init__(self):
        if not (self.r_t > 0 and self.r_z > 0):
            raise ValueError("bump radii must be positive")

    def __call__(self, t, z):
        return bump((np.asarray(t) - self.t0) / self.r_t) * bump((np.asarray(z) - self.z0) / self.r_z)

    def phi_t(self, t, z):
        return (bump_prime((np.asarray(t) - self.t0) / self.r_t) / self.r_t
                * bump((np.asarray(z) - self.z0) / self.r_z))

    def phi_z(self, t, z):
        return (bump((np.asarray(t) - self.t0) / self.r_t)
                * bump_prime((np.asarray(z) - self.z0) / self.r_z) / self.r_z)

    @property
    def t_support(self) -> tuple[float, float]:
        return self.t0 - self.r_t, self.t0 + self.r_t

    @property
    def z_support(self) -> tuple[float, float]:
        return self.z0 - self.r_z, self.z0 + self.r_z


class ResolutionError(ValueError):
    pass


MIN_SNAPSHOTS_IN_SUPPORT = 32


def kruzkov_flux(model: VelocityModel, rho, k: float):
    """Entropy flux ``sign(rho - k) * (f(rho) - f(k))`` paired with ``|rho - k|``."""
    rho = np.asarray(rho, dtype=float)
    return np.sign(rho - k) * (model.f(rho) - model.f(k))


def _space_integrals(field: StepFunction, model: VelocityModel, k: float,
                     phi: BumpTestFunction):
    """``(int |rho-k| bump_z dz, int q(rho) d/dz bump_z dz)`` for one snapshot."""
    z_lo, z_hi = phi.z_support
    bp = field.breakpoints
    # cells of the platoon plus the empty road on either side, clipped to the bump
    edges = np.concatenate([[z_lo], bp[(bp > z_lo) & (bp < z_hi)], [z_hi]])
    rho = field(0.5 * (edges[:-1] + edges[1:]))
    s = (edges - phi.z0) / phi.r_z
    entropy = np.abs(rho - k)
    first = phi.r_z * np.dot(entropy, bump_integrals(s))
    b = bump(s)
    second = np.dot(kruzkov_flux(model, rho, k), b[1:] - b[:-1])
    return first, second


def kruzkov_residual(traj: Trajectory, model: VelocityModel, k: float,
                     phi: BumpTestFunction) -> float:
    """Left-hand side of the Kruzkov entropy inequality for the particle density.

    The space integrals are exact per cell up to the quadrature of the bump;
    the time integral is the trapezoid rule over the trajectory snapshots.
    """
    t_lo, t_hi = phi.t_support
    states = traj.with_initial()
    times = np.array([s.t for s in states])
    if t_lo < -1e-12 or t_hi > times[-1] + 1e-12:
        raise ResolutionError("test function support leaves [0, t_end]")
    inside = np.count_nonzero((times > t_lo) & (times < t_hi))
    if inside < MIN_SNAPSHOTS_IN_SUPPORT:
        raise ResolutionError(f"only {inside} snapshots inside the test function's "
                              f"time support; need {MIN_SNAPSHOTS_IN_SUPPORT}")
    g = np.zeros(times.size)
    for n, state in enumerate(states):
        tau = (state.t - phi.t0) / phi.r_t
        if abs(tau) >= 1:
            continue
        first, second = _space_integrals(density_field(state), model, k, phi)
        g[n] = bump_prime(tau) / phi.r_t * first + bump(tau) * second
    total = float(np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(times)))
    tau0 = (traj.initial.t - phi.t0) / phi.r_t
    if abs(tau0) < 1:
        first, _ = _space_integrals(density_field(traj.initial), model, k, phi)
        total += float(bump(tau0)) * first
    return total
