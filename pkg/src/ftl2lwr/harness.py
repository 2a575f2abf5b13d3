"""Experiment orchestration: single runs, convergence studies, entropy suites.

Every ``run_*`` function writes its CSV files and ``report.json`` into an
output directory and returns ``(report, exit_code)``.  Exit codes: 0 ok,
2 bad config, 3 convergence failure, 4 invariant breach.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import discretizer, ftl_sim, lwr_ref, reconstruct
from .velocity import MODELS, get_model

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INVARIANT = 0, 2, 3, 4

LOWER_TOL = 1e-12
UPPER_TOL = 1e-8
TV_TOL = 1e-8
MASS_TOL = 1e-10
LIPSCHITZ_TOL = 1e-6


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class PhiSpec:
    t0: float
    z0: float
    r_t: float
    r_z: float

    def bump(self) -> reconstruct.BumpTestFunction:
        return reconstruct.BumpTestFunction(self.t0, self.z0, self.r_t, self.r_z)


@dataclass
class ExperimentConfig:
    initial: dict
    t_end: float
    model: str = "greenshields"
    N: int | None = None
    N_list: list = field(default_factory=list)
    output_times: list = field(default_factory=list)
    cfl_particle: float = 0.9
    cfl_grid: float = 0.45
    reference_cells: int | None = None
    entropy_ks: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    phi: list = field(default_factory=list)
    snapshots_per_bump: int = 64
    output_dir: str | None = None

    @property
    def n_values(self) -> list:
        return list(self.N_list) if self.N_list else [self.N]

    def density(self) -> discretizer.InitialDensity:
        return discretizer.from_spec(self.initial)

    def reference_cell_count(self) -> int:
        return self.reference_cells or 8 * max(self.n_values)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """Validate a parsed JSON config; all problems are reported together."""
        errors = []
        if not isinstance(raw, dict):
            raise ConfigError(["config: must be a JSON object"])
        known = {f for f in cls.__dataclass_fields__}
        for key in raw:
            if key not in known:
                errors.append(f"{key}: unknown field")

        def number(key, default=None, positive=True):
            val = raw.get(key, default)
            if val is None:
                return None
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
                errors.append(f"{key}: must be a number")
                return None
            if positive and not val > 0:
                errors.append(f"{key}: must be positive")
                return None
            return float(val)

        def integer(val, key):
            if isinstance(val, bool) or not isinstance(val, int):
                errors.append(f"{key}: must be an integer")
                return None
            if val < 2:
                errors.append(f"{key}: must be >= 2 (got {val})")
                return None
            return val

        model = raw.get("model", "greenshields")
        if model not in MODELS:
            errors.append(f"model: unknown model {model!r}; choose from {sorted(MODELS)}")

        initial = raw.get("initial")
        if not isinstance(initial, dict):
            errors.append("initial: required object (preset or breakpoints/values)")
        else:
            try:
                discretizer.from_spec(initial)
            except (ValueError, KeyError, TypeError) as exc:
                errors.append(f"initial: {exc}")

        t_end = number("t_end")
        if "t_end" not in raw:
            errors.append("t_end: required")

        N = raw.get("N")
        N_list = raw.get("N_list", [])
        if N is not None:
            N = integer(N, "N")
        if not isinstance(N_list, list):
            errors.append("N_list: must be a list of integers")
            N_list = []
        else:
            N_list = [integer(n, f"N_list[{i}]") for i, n in enumerate(N_list)]
            if any(n is None for n in N_list):
                N_list = []
            elif any(b <= a for a, b in zip(N_list, N_list[1:])):
                errors.append("N_list: must be strictly increasing")
        if N is None and not N_list and "N" not in raw and "N_list" not in raw:
            errors.append("N: either N or N_list is required")

        times = raw.get("output_times")
        if times is None:
            times = [t_end] if t_end else []
        elif not isinstance(times, list) or not all(
                isinstance(t, (int, float)) and not isinstance(t, bool) for t in times):
            errors.append("output_times: must be a list of numbers")
            times = []
        else:
            times = [float(t) for t in times]
            if any(t < 0 for t in times):
                errors.append("output_times: must be non-negative")
            if t_end is not None and times and max(times) > t_end:
                errors.append(f"output_times: {max(times)} exceeds t_end={t_end}")
            if any(b <= a for a, b in zip(times, times[1:])):
                errors.append("output_times: must be strictly increasing")

        cfl_p = number("cfl_particle", 0.9)
        cfl_g = number("cfl_grid", 0.45)
        for key, val in (("cfl_particle", cfl_p), ("cfl_grid", cfl_g)):
            if val is not None and val > 1:
                errors.append(f"{key}: must be <= 1")

        ref_cells = raw.get("reference_cells")
        if ref_cells is not None:
            if isinstance(ref_cells, bool) or not isinstance(ref_cells, int) or ref_cells < 1:
                errors.append("reference_cells: must be a positive integer")
            else:
                ns = [n for n in ([N] + N_list) if n]
                if ns and ref_cells < 8 * max(ns):
                    errors.append(f"reference_cells: must be >= 8 * max(N) = {8 * max(ns)}")

        ks = raw.get("entropy_ks", [0.0, 0.25, 0.5, 0.75, 1.0])
        if not isinstance(ks, list) or not all(
                isinstance(k, (int, float)) and not isinstance(k, bool) and 0 <= k <= 1 for k in ks):
            errors.append("entropy_ks: must be a list of numbers in [0, 1]")
            ks = []

        phis = []
        for i, p in enumerate(raw.get("phi", [])):
            try:
                (t0, z0), (rt, rz) = p["center"], p["radii"]
                spec = PhiSpec(float(t0), float(z0), float(rt), float(rz))
            except (KeyError, TypeError, ValueError):
                errors.append(f"phi[{i}]: need {{\"center\": [t, z], \"radii\": [r_t, r_z]}}")
                continue
            if not (spec.r_t > 0 and spec.r_z > 0):
                errors.append(f"phi[{i}]: radii must be positive")
            elif spec.t0 - spec.r_t < 0 or (t_end is not None and spec.t0 + spec.r_t > t_end):
                errors.append(f"phi[{i}]: time support [{spec.t0 - spec.r_t}, "
                              f"{spec.t0 + spec.r_t}] leaves [0, t_end]")
            phis.append(spec)

        spb = raw.get("snapshots_per_bump", 64)
        if isinstance(spb, bool) or not isinstance(spb, int) or spb < reconstruct.MIN_SNAPSHOTS_IN_SUPPORT:
            errors.append(f"snapshots_per_bump: must be an integer >= "
                          f"{reconstruct.MIN_SNAPSHOTS_IN_SUPPORT}")

        out = raw.get("output_dir")
        if errors:
            raise ConfigError(errors)
        return cls(initial=initial, t_end=t_end, model=model, N=N, N_list=N_list,
                   output_times=times, cfl_particle=cfl_p, cfl_grid=cfl_g,
                   reference_cells=ref_cells, entropy_ks=[float(k) for k in ks],
                   phi=phis, snapshots_per_bump=spb, output_dir=out)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError([f"config: cannot read {path}: {exc}"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: line {exc.lineno}: {exc.msg}"]) from None
        return cls.from_dict(raw)


# ---------------------------------------------------------------------------
# output helpers

def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
            n += 1
    return n


def time_tag(t: float) -> str:
    return format(float(t), "g")


def step_rows(f: reconstruct.StepFunction):
    b = f.breakpoints
    return zip(b[:-1], b[1:], f.values)


def write_report(out: Path, report: dict):
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# invariant checks shared by the runs

def invariant_report(traj: ftl_sim.Trajectory, model) -> dict:
    """Spacing-bound margins, variation and mass sequences and the L1 time-Lipschitz check."""
    states = traj.with_initial()
    N, ell = traj.initial.N, traj.initial.ell
    bounds = ftl_sim.check_lemma1(traj, model)
    rho = [reconstruct.density_field(s) for s in states]
    vel = [reconstruct.velocity_field(s, model) for s in states]
    tv_rho = [reconstruct.total_variation(f) for f in rho]
    tv_vel = [reconstruct.total_variation(f, far_field=1.0) for f in vel]
    masses = [f.mass for f in rho]
    slope = tv_rho[0] + tv_vel[0]
    lip = [reconstruct.l1_distance(rho[j + 1], rho[j]) - (states[j + 1].t - states[j].t) * slope
           for j in range(len(states) - 1)]
    checks = {
        "spacing_lower": bool(np.all(bounds.lower_margins >= -LOWER_TOL)),
        "spacing_upper": bool(np.all(bounds.upper_margins >= -UPPER_TOL)),
        "tv_density_nonincreasing": bool(np.all(np.diff(tv_rho) <= TV_TOL)),
        "tv_velocity_nonincreasing": bool(np.all(np.diff(tv_vel) <= TV_TOL)),
        "mass_conserved": bool(all(abs(m - (N - 1) * ell) <= MASS_TOL for m in masses)),
        "l1_time_lipschitz": bool(all(x <= LIPSCHITZ_TOL for x in lip)),
    }
    return {
        "checks": checks,
        "passed": all(checks.values()),
        "times": [s.t for s in states],
        "spacing_lower_margin": bounds.lower_margins.tolist(),
        "spacing_upper_margin": bounds.upper_margins.tolist(),
        "tv_density": tv_rho,
        "tv_velocity": tv_vel,
        "mass": masses,
        "lipschitz_slack": lip,
        "clamp_count": traj.clamp_count,
    }


def _simulate(config: ExperimentConfig, N: int, extra_times=()):
    model = get_model(config.model)
    layout = discretizer.initial_positions(config.density(), N)
    times = sorted(set(config.output_times) | set(extra_times))
    return model, ftl_sim.simulate(layout, model, config.t_end, times, config.cfl_particle)


def run_single(config: ExperimentConfig, out_dir) -> tuple[dict, int]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    N = config.N if config.N is not None else config.n_values[0]
    model, traj = _simulate(config, N)
    write_csv(out / "trajectory.csv", ["t", "i", "z_left", "z_right", "y", "rho", "V"],
              ftl_sim.trajectory_rows(traj))
    for s in traj.snapshots:
        write_csv(out / f"fields_t{time_tag(s.t)}.csv", ["z_left", "z_right", "value"],
                  step_rows(reconstruct.density_field(s)))
    inv = invariant_report(traj, model)
    report = {"command": "run", "N": N, "ell": traj.initial.ell, "model": model.name,
              "steps": traj.step_count, "dt": traj.dt_used, "invariants": inv,
              "passed": inv["passed"]}
    write_report(out, report)
    return report, EXIT_OK if inv["passed"] else EXIT_INVARIANT


# ---------------------------------------------------------------------------
# convergence

def reference_solutions(config: ExperimentConfig, times):
    """Exact Greenshields wave solution where available, else Godunov."""
    density = config.density()
    model = get_model(config.model)
    if model.name == "greenshields":
        try:
            return "exact", {t: lwr_ref.exact_solution(density, t) for t in times}
        except lwr_ref.WaveInteractionError as exc:
            log.info("exact reference unavailable (%s); using Godunov", exc)
    sol = lwr_ref.godunov_solve(density, model, config.reference_cell_count(),
                                config.t_end, times, config.cfl_grid)
    return "godunov", {t: sol.at(t) for t in times}


def _bump_times(config: ExperimentConfig):
    times = []
    for p in config.phi:
        lo, hi = p.t0 - p.r_t, p.t0 + p.r_t
        times.extend(np.linspace(lo, hi, config.snapshots_per_bump + 2).tolist())
    return [t for t in times if 0 <= t <= config.t_end]


def _convergence_worker(args):
    config, N, refs = args
    model, traj = _simulate(config, N, _bump_times(config))
    by_time = {s.t: s for s in traj.snapshots}
    bounds = ftl_sim.check_lemma1(traj, model)
    margin = float(bounds.lower_margins.min())
    worst = None
    if config.phi:
        worst = min(reconstruct.kruzkov_residual(traj, model, k, p.bump())
                    for k in config.entropy_ks for p in config.phi)
    rows = []
    for t in config.output_times:
        f = reconstruct.density_field(by_time[t])
        rows.append({"N": N, "ell": traj.initial.ell, "t": t,
                     "l1_error": reconstruct.l1_distance(f, refs[t]),
                     "tv": reconstruct.total_variation(f),
                     "min_spacing_margin": margin,
                     "worst_entropy_residual": worst})
    return rows


def convergence_orders(ells, errors):
    """Observed order between consecutive resolutions; ``None`` for the first."""
    orders = [None]
    for (l0, e0), (l1, e1) in zip(zip(ells, errors), zip(ells[1:], errors[1:])):
        if e0 > 0 and e1 > 0:
            orders.append(math.log(e0 / e1) / math.log(l0 / l1))
        else:
            orders.append(None)
    return orders


def run_convergence(config: ExperimentConfig, out_dir, jobs: int = 1) -> tuple[dict, int]:
    """L1 error of the particle density against the reference for every N and output time."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ns = config.n_values
    if len(ns) < 3:
        raise ConfigError(["N_list: convergence needs at least 3 entries"])
    kind, refs = reference_solutions(config, config.output_times)
    for t, ref in refs.items():
        write_csv(out / f"reference_t{time_tag(t)}.csv", ["z_left", "z_right", "rho_left", "rho_right"],
                  zip(ref.breakpoints[:-1], ref.breakpoints[1:], ref.left, ref.right))
    tasks = [(config, N, refs) for N in ns]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_convergence_worker, tasks))
    else:
        results = [_convergence_worker(t) for t in tasks]
    rows = [r for per_n in results for r in per_n]
    decreasing = {}
    for t in config.output_times:
        sel = [r for r in rows if r["t"] == t]
        errs = [r["l1_error"] for r in sel]
        for r, p in zip(sel, convergence_orders([r["ell"] for r in sel], errs)):
            r["order"] = p
        decreasing[time_tag(t)] = all(b < a for a, b in zip(errs, errs[1:]))
    rows.sort(key=lambda r: (r["t"], r["N"]))
    cols = ["N", "ell", "t", "l1_error", "tv", "min_spacing_margin", "worst_entropy_residual", "order"]
    write_csv(out / "convergence.csv", cols,
              ([("" if r[c] is None else r[c]) for c in cols] for r in rows))
    ok = all(decreasing.values())
    report = {"command": "converge", "reference": kind, "model": config.model,
              "rows": rows, "errors_strictly_decreasing": decreasing, "passed": ok}
    write_report(out, report)
    return report, EXIT_OK if ok else EXIT_CONVERGENCE


# ---------------------------------------------------------------------------
# entropy

def _entropy_worker(args):
    config, N = args
    model, traj = _simulate(config, N, _bump_times(config))
    return [{"N": N, "ell": traj.initial.ell, "k": k, "phi_center_t": p.t0,
             "phi_center_z": p.z0,
             "residual": reconstruct.kruzkov_residual(traj, model, k, p.bump())}
            for k in config.entropy_ks for p in config.phi]


def run_entropy_suite(config: ExperimentConfig, out_dir, jobs: int = 1) -> tuple[dict, int]:
    """Kruzkov residual for every (N, k, phi); passes when the negative part shrinks in N."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    errors = []
    if not config.entropy_ks:
        errors.append("entropy_ks: must be non-empty")
    if not config.phi:
        errors.append("phi: at least one test function is required")
    if errors:
        raise ConfigError(errors)
    tasks = [(config, N) for N in config.n_values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_entropy_worker, tasks))
    else:
        results = [_entropy_worker(t) for t in tasks]
    rows = [r for per_n in results for r in per_n]
    cols = ["N", "ell", "k", "phi_center_t", "phi_center_z", "residual"]
    write_csv(out / "entropy.csv", cols, ([r[c] for c in cols] for r in rows))
    verdicts = []
    for k in config.entropy_ks:
        for p in config.phi:
            neg = [max(0.0, -r["residual"]) for r in rows
                   if r["k"] == k and r["phi_center_t"] == p.t0 and r["phi_center_z"] == p.z0]
            verdicts.append({"k": k, "phi": asdict(p), "negative_part": neg,
                             "nonincreasing": all(b <= a for a, b in zip(neg, neg[1:]))})
    ok = all(v["nonincreasing"] for v in verdicts)
    report = {"command": "entropy", "model": config.model, "rows": rows,
              "verdicts": verdicts, "passed": ok}
    write_report(out, report)
    return report, EXIT_OK if ok else EXIT_CONVERGENCE
