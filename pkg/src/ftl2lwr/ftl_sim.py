"""Follow-the-Leader particle dynamics.

Vehicle ``i`` occupies ``[z[i-1], z[i])`` and moves with the speed of its
spacing ``y_i = (z[i] - z[i-1]) / ell``; the leader ``z[N-1]`` drives at
the free-road speed 1.  Time stepping is backward Euler, which keeps every
spacing inside ``[1, (y_i(0)**sigma + sigma*t/ell)**(1/sigma)]`` and the
variation of the density and speed non-increasing for any step size.  The
implicit system is upper bidiagonal, so each step is a sweep of scalar
solves from the leader backwards.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .discretizer import InitialLayout
from .velocity import SPACING_TOL, VelocityModel

log = logging.getLogger(__name__)

TIME_TOL = 1e-12
# deficits below this are left alone: they are round-off in z differences
CLAMP_TOL = 1e-12


class StepSizeError(ValueError):
    pass


class SpacingError(RuntimeError):
    """A spacing dropped below one vehicle length by more than round-off."""


@dataclass(frozen=True)
class FtlState:
    t: float
    positions: np.ndarray
    ell: float

    @property
    def N(self) -> int:
        return self.positions.size

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.positions) / self.ell

    @property
    def densities(self) -> np.ndarray:
        return 1.0 / self.spacings

    def speeds(self, model: VelocityModel) -> np.ndarray:
        """V_1, ..., V_{N-1}; the leader's speed 1 is not included."""
        return model.V(np.maximum(self.spacings, 1.0))


@dataclass
class Trajectory:
    model: VelocityModel
    initial: FtlState
    snapshots: list = field(default_factory=list)
    step_count: int = 0
    dt_used: float = 0.0
    clamp_count: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def with_initial(self) -> list:
        """Snapshots with the initial state prepended when it is not already there."""
        if self.snapshots and self.snapshots[0].t == self.initial.t:
            return list(self.snapshots)
        return [self.initial] + list(self.snapshots)


def rhs(state: FtlState, model: VelocityModel) -> np.ndarray:
    """Velocities of all N vehicle fronts; the leader's entry is 1."""
    return np.append(state.speeds(model), 1.0)


def _solve_spacing(V, V_prime, c, R, guess):
    """Root of ``u + c*V(u) = R`` on ``[max(1, R - c), R]`` (unique, V non-decreasing)."""
    lo = R - c if R - c > 1.0 else 1.0
    hi = R
    if hi - lo <= 1e-15 * hi:
        return hi
    u = guess if lo < guess < hi else 0.5 * (lo + hi)
    for _ in range(100):
        g = u + c * V(u) - R
        if g > 0:
            hi = u
        elif g < 0:
            lo = u
        else:
            return u
        du = g / (1.0 + c * V_prime(u))
        un = u - du
        if not lo < un < hi:
            un = 0.5 * (lo + hi)
        if abs(un - u) <= 1e-15 * un or hi - lo <= 1e-15 * hi:
            return un
        u = un
    return u


def _implicit_step(z, dt, ell, model):
    """One backward-Euler step on positions; returns (new positions, clamps)."""
    V, V_prime = model.V, model.V_prime
    y = np.diff(z) / ell
    n = y.size
    c = dt / ell
    speeds = np.empty(n)
    V_next = 1.0
    for k in range(n - 1, -1, -1):
        yk = y[k] if y[k] > 1.0 else 1.0
        u = _solve_spacing(V, V_prime, c, yk + c * V_next, yk)
        V_next = V(u)
        speeds[k] = V_next
    z_new = np.empty_like(z)
    z_new[:-1] = z[:-1] + dt * speeds
    z_new[-1] = z[-1] + dt
    clamps = 0
    gaps = np.diff(z_new) / ell
    if np.any(gaps < 1.0 - CLAMP_TOL):
        if np.min(gaps) < 1.0 - SPACING_TOL:
            raise SpacingError(f"spacing {np.min(gaps)!r} < 1 after step")
        for k in range(n - 1, -1, -1):
            if (z_new[k + 1] - z_new[k]) / ell < 1.0 - CLAMP_TOL:
                z_new[k] = z_new[k + 1] - ell
                clamps += 1
    return z_new, clamps


def max_step(ell: float, model: VelocityModel, cfl: float = 1.0) -> float:
    return cfl * ell / model.M


def step(state: FtlState, dt: float, model: VelocityModel) -> FtlState:
    """Advance ``state`` by ``dt`` (at most ``ell / M``)."""
    if not dt > 0:
        raise StepSizeError(f"dt must be positive, got {dt}")
    if dt > max_step(state.ell, model) * (1 + 1e-12):
        raise StepSizeError(f"dt={dt} exceeds ell/M={max_step(state.ell, model)}")
    z, clamps = _implicit_step(state.positions, dt, state.ell, model)
    if clamps:
        log.warning("clamped %d spacings to one vehicle length", clamps)
    return FtlState(state.t + dt, z, state.ell)


def simulate(layout: InitialLayout, model: VelocityModel, t_end: float,
             output_times=None, cfl: float = 0.9) -> Trajectory:
    """Integrate the particle system from the layout up to ``t_end``.

    A snapshot is recorded at every requested output time and at ``t_end``.
    The step is ``cfl * ell / M``, shortened where needed to land on output
    times exactly.
    """
    if not 0 < cfl <= 1:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    if not t_end >= 0:
        raise ValueError("t_end must be non-negative")
    targets = sorted(set(float(t) for t in (output_times if output_times is not None else [])))
    if targets and (targets[0] < 0 or targets[-1] > t_end + TIME_TOL):
        raise ValueError("output times must lie in [0, t_end]")
    if not targets or targets[-1] < t_end:
        targets.append(float(t_end))

    ell = layout.ell
    dt = max_step(ell, model, cfl)
    z = np.array(layout.positions, dtype=float)
    traj = Trajectory(model, FtlState(0.0, z.copy(), ell), dt_used=dt)
    t = 0.0
    for target in targets:
        while target - t > TIME_TOL * max(1.0, target):
            h = min(dt, target - t)
            z, clamps = _implicit_step(z, h, ell, model)
            traj.clamp_count += clamps
            traj.step_count += 1
            t += h
        t = target
        traj.snapshots.append(FtlState(t, z.copy(), ell))
    if traj.clamp_count:
        log.warning("clamped %d spacings to one vehicle length", traj.clamp_count)
    return traj


@dataclass
class BoundReport:
    times: np.ndarray
    lower_margins: np.ndarray
    upper_margins: np.ndarray

    def passed(self, lower_tol: float = 1e-12, upper_tol: float = 1e-8) -> bool:
        return bool(np.all(self.lower_margins >= -lower_tol)
                    and np.all(self.upper_margins >= -upper_tol))


def spacing_upper_bound(y0: np.ndarray, t: float, ell: float, sigma: float) -> np.ndarray:
    return (y0 ** sigma + sigma * t / ell) ** (1.0 / sigma)


def check_lemma1(traj: Trajectory, model: VelocityModel) -> BoundReport:
    """Worst margins of ``1 <= y_i(t) <= (y_i(0)^sigma + sigma t / ell)^(1/sigma)``."""
    y0 = traj.initial.spacings
    lower, upper = [], []
    for s in traj.snapshots:
        y = s.spacings
        lower.append(np.min(y - 1.0))
        upper.append(np.min(spacing_upper_bound(y0, s.t, s.ell, model.sigma) - y))
    return BoundReport(traj.times, np.array(lower), np.array(upper))


def variation_sums(state: FtlState, model: VelocityModel) -> tuple[float, float]:
    """``sum |V_{i+1} - V_i|`` with ``V_N = 1`` and ``sum |rho_{i+1} - rho_i|`` with ``rho_N = 0``."""
    V = np.append(state.speeds(model), 1.0)
    rho = np.append(state.densities, 0.0)
    return float(np.abs(np.diff(V)).sum()), float(np.abs(np.diff(rho)).sum())


def trajectory_rows(traj: Trajectory):
    """Rows ``(t, i, z_left, z_right, y, rho, V)`` for every vehicle of every snapshot.

    Vehicle ``N`` is the leader, with an open road ahead.
    """
    for s in traj.snapshots:
        z = s.positions
        y = s.spacings
        V = s.speeds(traj.model)
        for i in range(s.N - 1):
            yield (s.t, i + 1, z[i], z[i + 1], y[i], 1.0 / y[i], V[i])
        yield (s.t, s.N, z[-1], np.inf, np.inf, 0.0, 1.0)
