"""Galerkin time integration of the gauged system and trajectory diagnostics.

The gauge transform removes the stiff k^3 linear term exactly, so a classical
explicit fourth-order one-step method is stable under a convective-type
restriction; the default step bound is dt <= 0.5 / (n_max^2 * max |c_k|).
The first/second/modified reformulations are never integrated directly; they
are verified as residual identities along trajectories of the original form.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .fields import (
    FieldError,
    Gauge,
    ModeSet,
    SpectralField,
    SpectralPair,
    energy_functional,
    field_from_json,
    field_to_json,
    gauge,
    hamiltonian,
    pair_norm,
    project_low,
    sobolev_norm,
)
from .operators import PhaseCache, b1_vec, eval_terms_array
from . import terms as T

__all__ = [
    "DiagnosticsRecord",
    "DivergenceError",
    "SimulationConfig",
    "StabilityError",
    "Trajectory",
    "convergence_study",
    "form_residual",
    "galerkin_rhs",
    "integrate",
    "integrate_steps",
    "load_trajectory",
    "save_trajectory",
    "stability_bound",
]

DIAGNOSTIC_NORMS = (0.0, 0.5, 1.0)


class DivergenceError(RuntimeError):
    """State became non-finite during integration."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state at step {step} (t = {t:.6g})")
        self.step = step
        self.t = t


class StabilityError(ValueError):
    """Configured dt violates the stability rule."""

    def __init__(self, dt: float, bound: float):
        super().__init__(f"dt = {dt:.6g} exceeds the stability bound {bound:.6g}")
        self.bound = bound


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters of one Galerkin run.

    ``n_cut`` is the Galerkin cutoff N (modes |k| > n_cut keep zero
    derivative); it defaults to n_max, i.e. the ambient truncation is the
    Galerkin projection itself.
    """

    n_max: int
    dt: float
    t_end: float
    initial: SpectralPair
    n_cut: int | None = None
    diagnostic_every: int = 1
    record_every: int = 1

    def __post_init__(self):
        if self.dt <= 0 or self.t_end < self.dt:
            raise ValueError("need 0 < dt <= t_end")
        if self.diagnostic_every < 1 or self.record_every < 1:
            raise ValueError("cadences must be positive")
        if self.initial.n_max != self.n_max:
            raise ValueError("initial data does not match n_max")
        if self.initial.gauge != Gauge.INTERACTION:
            raise ValueError("initial data must be in the interaction gauge")
        if self.cutoff < 1 or self.cutoff > self.n_max:
            raise ValueError("n_cut must lie in [1, n_max]")

    @property
    def cutoff(self) -> int:
        return self.n_max if self.n_cut is None else self.n_cut


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    energy_cal: float
    hamiltonian: float
    norms: dict[float, float] = field(compare=False)
    max_mode_amp: float = 0.0


@dataclass(frozen=True)
class Trajectory:
    times: tuple[float, ...]
    states: tuple[SpectralPair, ...]
    config: SimulationConfig

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times/states length mismatch")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must increase strictly")


def stability_bound(n_max: int, initial: SpectralPair) -> float:
    """Default step-size bound 0.5 / (n_max^2 * max mode amplitude)."""
    amp = max(float(np.max(np.abs(initial.u.coeffs))),
              float(np.max(np.abs(initial.v.coeffs))), 1e-12)
    return 0.5 / (n_max * amp * n_max)


def _rhs_arrays(u: np.ndarray, v: np.ndarray, t: float, m: int, n_cut: int,
                lowmask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """RHS of the Galerkin system on raw arrays: project inputs, evaluate the
    convection combination by the FFT path, project the output."""
    from .operators import _b1_fast_core
    uu = u * lowmask
    vv = v * lowmask
    buv = _b1_fast_core(uu, vv, t, m)
    buu = _b1_fast_core(uu, uu, t, m)
    bvv = _b1_fast_core(vv, vv, t, m)
    return (buv - buu) * lowmask, (buv - bvv) * lowmask


def galerkin_rhs(p: SpectralPair, t: float, n_cut: int) -> SpectralPair:
    """Right-hand side of the Galerkin system at cutoff n_cut."""
    if p.gauge != Gauge.INTERACTION:
        raise FieldError("galerkin_rhs expects the interaction gauge")
    m = p.n_max
    k = p.modes.wavenumbers()
    lowmask = (np.abs(k) <= n_cut) & (k != 0)
    du, dv = _rhs_arrays(p.u.coeffs, p.v.coeffs, float(t), m, n_cut, lowmask)
    return SpectralPair(SpectralField(p.modes, du), SpectralField(p.modes, dv),
                        p.gauge, float(t))


def integrate_steps(initial: SpectralPair, t0: float, dt: float, n_steps: int,
                    n_cut: int | None = None) -> SpectralPair:
    """Raw fourth-order stepping from (t0, initial) for n_steps of size dt.

    Negative dt runs the method backwards; no stability validation is
    performed here (callers own that).
    """
    m = initial.n_max
    cut = m if n_cut is None else n_cut
    k = initial.modes.wavenumbers()
    lowmask = (np.abs(k) <= cut) & (k != 0)
    u = initial.u.coeffs.copy()
    v = initial.v.coeffs.copy()
    t = float(t0)
    for step in range(1, n_steps + 1):
        k1u, k1v = _rhs_arrays(u, v, t, m, cut, lowmask)
        k2u, k2v = _rhs_arrays(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v, t + 0.5 * dt, m, cut, lowmask)
        k3u, k3v = _rhs_arrays(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v, t + 0.5 * dt, m, cut, lowmask)
        k4u, k4v = _rhs_arrays(u + dt * k3u, v + dt * k3v, t + dt, m, cut, lowmask)
        u = u + (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        t = t0 + step * dt
        if not (np.all(np.isfinite(u.view(np.float64)))
                and np.all(np.isfinite(v.view(np.float64)))):
            raise DivergenceError(step, t)
    return SpectralPair(SpectralField(initial.modes, u),
                        SpectralField(initial.modes, v), Gauge.INTERACTION, t)


def _diagnostics(p: SpectralPair, t: float) -> DiagnosticsRecord:
    phys = gauge(p, t, Gauge.PHYSICAL)
    norms = {s: pair_norm(p, s) for s in DIAGNOSTIC_NORMS}
    amp = max(float(np.max(np.abs(p.u.coeffs))), float(np.max(np.abs(p.v.coeffs))))
    return DiagnosticsRecord(t=float(t), energy_cal=energy_functional(p),
                             hamiltonian=hamiltonian(phys), norms=norms,
                             max_mode_amp=amp)


def integrate(config: SimulationConfig) -> tuple[Trajectory, list[DiagnosticsRecord]]:
    """Classical fourth-order one-step integration of the gauged Galerkin
    system.  Diagnostics and state records are emitted on their cadences and
    always include the first and last step."""
    m = config.n_max
    bound = stability_bound(m, config.initial)
    if config.dt > bound:
        raise StabilityError(config.dt, bound)
    # shrink the step slightly if needed so the horizon is hit exactly
    n_steps = max(1, int(np.ceil(config.t_end / config.dt - 1e-9)))
    dt = config.t_end / n_steps
    modes = config.initial.modes
    k = modes.wavenumbers()
    lowmask = (np.abs(k) <= config.cutoff) & (k != 0)
    # modes above the cutoff receive zero derivative and stay at their
    # initial values
    u = config.initial.u.coeffs.copy()
    v = config.initial.v.coeffs.copy()

    def rhs(uu, vv, t):
        return _rhs_arrays(uu, vv, t, m, config.cutoff, lowmask)

    def snapshot(t):
        return SpectralPair(SpectralField(modes, u), SpectralField(modes, v),
                            Gauge.INTERACTION, t)

    times = [0.0]
    states = [snapshot(0.0)]
    diags = [_diagnostics(states[0], 0.0)]
    t = 0.0
    for step in range(1, n_steps + 1):
        k1u, k1v = rhs(u, v, t)
        k2u, k2v = rhs(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v, t + 0.5 * dt)
        k3u, k3v = rhs(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v, t + 0.5 * dt)
        k4u, k4v = rhs(u + dt * k3u, v + dt * k3v, t + dt)
        u = u + (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        t = step * dt
        if not (np.all(np.isfinite(u.view(np.float64))) and np.all(np.isfinite(v.view(np.float64)))):
            raise DivergenceError(step, t)
        last = step == n_steps
        if step % config.record_every == 0 or last:
            times.append(t)
            states.append(snapshot(t))
        if step % config.diagnostic_every == 0 or last:
            diags.append(_diagnostics(snapshot(t), t))
    return Trajectory(tuple(times), tuple(states), config), diags


# ---------------------------------------------------------------------------
# residual identities along trajectories

def _bracket_and_rhs(state: SpectralPair, t: float, ft: T.FormTerms
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Stacked (2, n) arrays: bracket = state + bracket-terms, and the RHS."""
    m = state.n_max
    cache = PhaseCache(t, m)
    arrays = {"u": state.u.coeffs, "v": state.v.coeffs}
    br = np.empty((2, 2 * m + 1), dtype=np.complex128)
    rh = np.empty_like(br)
    for i, (bterms, rterms) in enumerate(zip(ft.bracket, ft.rhs)):
        bout, _ = eval_terms_array(bterms, arrays, t, m, cache)
        rout, _ = eval_terms_array(rterms, arrays, t, m, cache)
        br[i] = arrays["u" if i == 0 else "v"] + bout
        rh[i] = rout
    return br, rh


def _stack_norm0(arr: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(arr) ** 2)))


def form_residual(traj: Trajectory, form: str, n_cut: int | None = None) -> float:
    """Maximum (H0)^2 residual of one reformulation along a trajectory.

    The bracketed quantity is differenced centrally in time at the interior
    samples and compared to the form's right-hand side, so the residual of a
    solution trajectory is pure O(dt^2) finite-difference error.  The
    trajectory must be recorded densely (record_every = 1 when integrating).
    """
    if len(traj.times) < 3:
        raise ValueError("trajectory too short for centered differences")
    if form.startswith("modified"):
        if n_cut is None:
            raise ValueError(f"form {form!r} requires n_cut")
        if traj.config.cutoff != traj.config.n_max:
            raise ValueError("modified forms need a trajectory with cutoff == n_max")
        ft = T.form_terms(form, traj.config.n_max, n_cut)
    else:
        # the unmodified forms are generated against the trajectory's own
        # Galerkin cutoff; a coarser Galerkin run needs its P-restricted list
        ft = T.form_terms(form, traj.config.n_max, None)
        ft = _galerkin_restricted(ft, traj.config.cutoff, traj.config.n_max)
    worst = 0.0
    brackets = []
    rhss = []
    for t, state in zip(traj.times, traj.states):
        br, rh = _bracket_and_rhs(state, t, ft)
        brackets.append(br)
        rhss.append(rh)
    for i in range(1, len(traj.times) - 1):
        h_fwd = traj.times[i + 1] - traj.times[i]
        h_bwd = traj.times[i] - traj.times[i - 1]
        if abs(h_fwd - h_bwd) > 1e-12 * h_fwd:
            raise ValueError("centered differences need uniform sampling")
        ddt = (brackets[i + 1] - brackets[i - 1]) / (h_fwd + h_bwd)
        worst = max(worst, _stack_norm0(ddt - rhss[i]))
    return worst


def _galerkin_restricted(ft: T.FormTerms, n_cut: int, n_max: int) -> T.FormTerms:
    """Restrict a form's term lists to a Galerkin cutoff below the ambient
    truncation: every argument slot gains a low tag at n_cut and every
    derived sum constraint is capped at n_cut instead of n_max."""
    if n_cut >= n_max:
        return ft

    def fix(terms):
        out = []
        for t_ in terms:
            cons = []
            for c in t_.constraints:
                hi = c.hi
                if hi is not None and hi >= n_max:
                    hi = n_cut
                cons.append(T.SumConstraint(c.slots, c.lo, hi))
            for slot in range(t_.arity):
                cons.append(T.SumConstraint((slot,), hi=n_cut))
            cons.append(T.SumConstraint(tuple(range(t_.arity)), hi=n_cut))
            out.append(T.Term(t_.coeff, t_.kind, t_.args, tuple(cons), t_.resonance))
        return tuple(out)

    return T.FormTerms(ft.name, (fix(ft.bracket[0]), fix(ft.bracket[1])),
                       (fix(ft.rhs[0]), fix(ft.rhs[1])))


# ---------------------------------------------------------------------------
# Galerkin convergence study

@dataclass(frozen=True)
class ConvergenceReport:
    n_values: tuple[int, ...]
    errors: tuple[float, ...]
    ref_cutoff: int
    t_end: float


def convergence_study(base: SimulationConfig, n_list) -> ConvergenceReport:
    """Integrate the same initial data at several Galerkin cutoffs and report
    the final-time (H0)^2 distance to the reference run at base cutoff."""
    n_list = tuple(int(n) for n in n_list)
    if any(n > base.n_max for n in n_list):
        raise ValueError("cutoffs must not exceed the reference n_max")
    ref_traj, _ = integrate(SimulationConfig(
        base.n_max, base.dt, base.t_end, base.initial, base.n_cut,
        diagnostic_every=10 ** 9, record_every=10 ** 9))
    ref = ref_traj.states[-1]
    errors = []
    for n in n_list:
        init = SpectralPair(project_low(base.initial.u, n),
                            project_low(base.initial.v, n),
                            Gauge.INTERACTION, base.initial.t_ref)
        traj, _ = integrate(SimulationConfig(
            base.n_max, base.dt, base.t_end, init, n,
            diagnostic_every=10 ** 9, record_every=10 ** 9))
        fin = traj.states[-1]
        diff = np.hypot(_stack_norm0(fin.u.coeffs - ref.u.coeffs),
                        _stack_norm0(fin.v.coeffs - ref.v.coeffs))
        errors.append(float(diff))
    return ConvergenceReport(n_list, tuple(errors), base.cutoff, base.t_end)


# ---------------------------------------------------------------------------
# persistence

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_trajectory(traj: Trajectory, diags: list[DiagnosticsRecord], outdir: str) -> None:
    """Write config.json, diagnostics.csv and per-snapshot field files."""
    os.makedirs(outdir, exist_ok=True)
    cfg = traj.config
    snaps = []
    for i, (t, state) in enumerate(zip(traj.times, traj.states)):
        fu = f"snap_{i:06d}_u.json"
        fv = f"snap_{i:06d}_v.json"
        with open(os.path.join(outdir, fu), "w") as fh:
            fh.write(field_to_json(state.u))
        with open(os.path.join(outdir, fv), "w") as fh:
            fh.write(field_to_json(state.v))
        snaps.append({"t": t, "u": fu, "v": fv, "gauge": state.gauge.value})
    with open(os.path.join(outdir, "config.json"), "w") as fh:
        json.dump({
            "n_max": cfg.n_max, "dt": cfg.dt, "t_end": cfg.t_end,
            "n_cut": cfg.cutoff, "diagnostic_every": cfg.diagnostic_every,
            "record_every": cfg.record_every, "snapshots": snaps,
        }, fh, indent=1)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["t", "energy_cal", "hamiltonian", "norm_s0", "norm_s05",
                     "norm_s1", "max_mode_amp"])
    for d in diags:
        writer.writerow([_fmt(d.t), _fmt(d.energy_cal), _fmt(d.hamiltonian),
                         _fmt(d.norms[0.0]), _fmt(d.norms[0.5]), _fmt(d.norms[1.0]),
                         _fmt(d.max_mode_amp)])
    with open(os.path.join(outdir, "diagnostics.csv"), "w", newline="") as fh:
        fh.write(buf.getvalue())


def load_trajectory(outdir: str) -> Trajectory:
    """Rebuild a trajectory from a saved directory (states only)."""
    with open(os.path.join(outdir, "config.json")) as fh:
        doc = json.load(fh)
    states = []
    times = []
    for snap in doc["snapshots"]:
        with open(os.path.join(outdir, snap["u"])) as fh:
            u = field_from_json(fh.read())
        with open(os.path.join(outdir, snap["v"])) as fh:
            v = field_from_json(fh.read())
        states.append(SpectralPair(u, v, Gauge(snap["gauge"]), snap["t"]))
        times.append(float(snap["t"]))
    init = states[0]
    cfg = SimulationConfig(doc["n_max"], doc["dt"], doc["t_end"], init,
                           doc["n_cut"], doc["diagnostic_every"], doc["record_every"])
    return Trajectory(tuple(times), tuple(states), cfg)
