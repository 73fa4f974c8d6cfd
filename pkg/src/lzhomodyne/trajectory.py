"""Single-run solvers and their records.

Three views of the same sweep:

  simulate_conditional   one monitored quantum trajectory (stochastic)
  solve_unconditional    the ensemble-average master equation (no record)
  solve_unitary          the lossless sweep (decay switched off)

The deterministic references use a classical 4th-order one-step method on
the identical fixed grid, so curve-to-curve comparisons are never confused
by grid interpolation.

Summary conventions: every summary statistic of a monitored trajectory
(maximum excitation, dwell table, terminal value) is computed on the
stored grid, i.e. from the samples taken every `decimation` steps.  This
is deliberate.  A threshold statistic near 1 is an extreme-value quantity
whose value depends on how often the noisy curve is inspected, and the
reference results this package reproduces inspected their trajectories on
the decimated grid (stride decimation * dt, 0.002 at the default
settings): exit fractions computed from per-step maxima come out
systematically higher.  Tying the dwell table to the same grid keeps the
record self-consistent (dwell is zero above max_excitation by
construction).  Setting decimation = 1 recovers per-step accounting
exactly.  Deterministic references are smooth, so their max_excitation is
taken over every step; there is no estimator subtlety there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .dynamics import SweepParams
from .qubit import GROUND, NonPhysicalState, normalize
from .sde import BrownianPath, NumericsConfig, n_steps_for, sample_path

# Threshold grid recorded by default: dense enough for dwell curves plus the
# crossing-retention marks used throughout the package.
DEFAULT_THRESHOLDS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.96, 0.99)

TRACE_DRIFT_TOL = 1e-9  # raw deterministic runs must conserve trace to this


@dataclass(frozen=True)
class TrajectoryRecord:
    """Stored samples and summaries of one monitored trajectory.

    times, pe, x, y, z, purity are sampled every `decimation` steps
    (index 0 is the initial state).  dq holds the photocurrent integrated
    over each storage block, None when eta = 0 and no record exists.
    max_excitation and dwell_times are stored-grid statistics: the max of
    the pe samples, and per threshold the number of samples at or above it
    times the storage stride (see the module docstring for why).
    """

    times: np.ndarray
    pe: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    purity: np.ndarray
    dq: np.ndarray | None
    thresholds: np.ndarray
    dwell_times: np.ndarray
    max_excitation: float
    terminal_pe: float
    t_initial: float
    t_final: float
    dt: float
    master_seed: int
    trajectory_index: int
    stepper: str

    @property
    def window(self) -> float:
        return self.t_final - self.t_initial


@dataclass(frozen=True)
class ReferenceRecord:
    """Deterministic solution samples (unconditional or unitary)."""

    times: np.ndarray
    pe: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    purity: np.ndarray
    max_excitation: float
    terminal_pe: float
    max_trace_drift: float
    t_initial: float
    t_final: float
    dt: float


def _stored_times(p: SweepParams, dt: float, n_steps: int, decim: int) -> np.ndarray:
    idx = np.arange(n_steps // decim + 1, dtype=np.int64)
    return p.t_initial + idx * (decim * dt)


def _storage_layout(p: SweepParams, n: NumericsConfig) -> tuple[int, int]:
    steps = n_steps_for(p, n)
    if steps % n.decimation != 0:
        raise ValueError(
            f"decimation {n.decimation} does not divide {steps} steps; "
            "the stored grid must end on t_final")
    return steps, steps // n.decimation + 1


def simulate_conditional(p: SweepParams, n: NumericsConfig,
                         master_seed: int, trajectory_index: int = 0,
                         thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
                         rho0: np.ndarray | None = None,
                         path: BrownianPath | None = None) -> TrajectoryRecord:
    """Integrate one monitored trajectory from |g><g| (or rho0) over the window.

    The Brownian path is drawn from the (master_seed, trajectory_index)
    stream unless an explicit path is supplied; the same increments drive
    both the state and the stored photocurrent.

    Raises NonPhysicalState if the state leaves the physical set.
    """
    steps, n_stored = _storage_layout(p, n)
    thr = np.asarray(sorted(thresholds), dtype=np.float64)
    if thr.size and (thr[0] < 0.0 or thr[-1] > 1.0):
        raise ValueError(f"thresholds must lie in [0, 1], got {list(thresholds)!r}")
    if path is None:
        path = sample_path(master_seed, trajectory_index, steps, n.dt)
    elif path.n_steps != steps:
        raise ValueError(f"supplied path has {path.n_steps} steps, expected {steps}")

    rho = normalize(np.asarray(GROUND if rho0 is None else rho0, dtype=np.complex128))
    store_dq = p.eta > 0.0
    pe_out = np.empty(n_stored)
    state_out = np.empty((n_stored, 4))
    dq_out = np.empty(n_stored if store_dq else 1)
    dwell_counts = np.zeros(thr.size, dtype=np.int64)

    status, k, *_ = _kernels.run_conditional(
        rho[0, 0], rho[0, 1], rho[1, 0], rho[1, 1],
        p.t_initial, n.dt, path.increments,
        p.omega, p.alpha, p.gamma_decay, p.phi, p.eta,
        n.stepper == "milstein", n.renormalize_each_step, n.decimation,
        thr, dwell_counts,
        pe_out, True, state_out, store_dq, dq_out)
    if status != _kernels.STATUS_OK:
        raise NonPhysicalState(
            f"trajectory {trajectory_index} left the physical set at step {k} "
            f"(status {status})")

    return TrajectoryRecord(
        times=_stored_times(p, n.dt, steps, n.decimation),
        pe=pe_out, x=state_out[:, 0], y=state_out[:, 1], z=state_out[:, 2],
        purity=state_out[:, 3],
        dq=dq_out if store_dq else None,
        thresholds=thr, dwell_times=dwell_counts * (n.decimation * n.dt),
        max_excitation=float(pe_out.max()), terminal_pe=float(pe_out[-1]),
        t_initial=p.t_initial, t_final=p.t_final, dt=n.dt,
        master_seed=master_seed, trajectory_index=trajectory_index,
        stepper=n.stepper)


def _solve_reference(p: SweepParams, n: NumericsConfig,
                     rho0: np.ndarray | None) -> ReferenceRecord:
    steps, n_stored = _storage_layout(p, n)
    rho = normalize(np.asarray(GROUND if rho0 is None else rho0, dtype=np.complex128))
    pe_out = np.empty(n_stored)
    state_out = np.empty((n_stored, 4))

    status, k, max_pe, max_drift, *_ = _kernels.run_reference(
        rho[0, 0], rho[0, 1], rho[1, 0], rho[1, 1],
        p.t_initial, n.dt, steps,
        p.omega, p.alpha, p.gamma_decay, n.decimation,
        pe_out, state_out)
    if status != _kernels.STATUS_OK:
        raise NonPhysicalState(f"reference solve failed at step {k} (status {status})")
    if max_drift > TRACE_DRIFT_TOL:
        raise NonPhysicalState(
            f"trace drifted by {max_drift:.3e} in a trace-preserving flow")

    return ReferenceRecord(
        times=_stored_times(p, n.dt, steps, n.decimation),
        pe=pe_out, x=state_out[:, 0], y=state_out[:, 1], z=state_out[:, 2],
        purity=state_out[:, 3],
        max_excitation=float(max_pe), terminal_pe=float(pe_out[-1]),
        max_trace_drift=float(max_drift),
        t_initial=p.t_initial, t_final=p.t_final, dt=n.dt)


def solve_unconditional(p: SweepParams, n: NumericsConfig,
                        rho0: np.ndarray | None = None) -> ReferenceRecord:
    """Deterministic master equation on the same grid as the trajectories.

    This is the eta-independent ensemble average: measurement terms drop
    out, decay stays.
    """
    return _solve_reference(p, n, rho0)


def solve_unitary(p: SweepParams, n: NumericsConfig,
                  rho0: np.ndarray | None = None) -> ReferenceRecord:
    """Lossless sweep reference: identical grid, decay switched off."""
    from dataclasses import replace
    return _solve_reference(replace(p, gamma_decay=0.0), n, rho0)


def max_excitation(record: TrajectoryRecord | ReferenceRecord) -> float:
    """Largest excited population reached (stored grid for monitored runs)."""
    return record.max_excitation


def dwell_time(record: TrajectoryRecord, threshold: float) -> float:
    """Total time the trajectory spent at or above `threshold` excitation.

    Read from the stored-grid dwell table for the thresholds configured at
    simulation time.  Two cases need no table and work for any value:
    threshold <= 0 returns the whole window, threshold > max_excitation
    returns 0.  Other unconfigured thresholds raise ValueOutOfRange rather
    than interpolate.
    """
    from .ensemble import ValueOutOfRange

    if threshold <= 0.0:
        return record.window
    if threshold > record.max_excitation:
        return 0.0
    hit = np.nonzero(np.isclose(record.thresholds, threshold, rtol=0.0, atol=1e-12))[0]
    if hit.size == 0:
        raise ValueOutOfRange(
            f"threshold {threshold!r} was not configured for this record "
            f"(have {record.thresholds.tolist()!r})")
    return float(record.dwell_times[hit[0]])


def dwell_fraction(record: TrajectoryRecord, threshold: float) -> float:
    """dwell_time normalized by the sweep window."""
    return dwell_time(record, threshold) / record.window
