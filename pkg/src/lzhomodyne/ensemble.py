"""Ensemble runner and the statistics reduced from many trajectories.

Trajectory i of an ensemble always consumes the noise stream keyed by
(master_seed, i), and the reducer walks results in index order, so the
returned statistics are bitwise identical whether the ensemble ran on one
worker or thirty.  Parallelism is plain threads: the compiled integration
loop releases the GIL.

Statistical conventions: "exceeds C" means >= C; exit fractions and dwell
times are stored-grid statistics, so the storage stride (decimation * dt)
is part of the estimator, exactly as when the numbers are read off saved
curves (rationale in the trajectory module).  Both skewness numbers use
population (1/n) central moments; histograms live on the fixed domain
[0, 1] with equal-width bins so different time slices share axes; the
value 1.0 belongs to the top bin.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .dynamics import SweepParams
from .qubit import GROUND, NonPhysicalState
from .sde import NumericsConfig, sample_path
from .trajectory import (TrajectoryRecord, _storage_layout, _stored_times,
                         simulate_conditional)

GRID_ATOL = 1e-9  # histogram times must sit on the stored grid to this slack


class ValueOutOfRange(Exception):
    """A value fell outside the domain the statistic is defined on."""


class DegenerateDistribution(Exception):
    """Skewness requested for a zero-spread sample."""


class EnsembleRunError(NonPhysicalState):
    """One or more trajectories left the physical set.

    Carries (trajectory_index, message) pairs for every failure so a bad
    ensemble reports all offenders at once.
    """

    def __init__(self, failures: list[tuple[int, str]]):
        self.failures = failures
        listed = "; ".join(f"#{i}: {msg}" for i, msg in failures[:5])
        more = f" (+{len(failures) - 5} more)" if len(failures) > 5 else ""
        super().__init__(f"{len(failures)} trajectories failed: {listed}{more}")


@dataclass(frozen=True)
class EnsembleConfig:
    """Size, seeding and reduction controls for one ensemble.

    thresholds         excitation marks in (0, 1], strictly increasing,
                       used for exit fractions and dwell times
    histogram_bins     equal-width bins on [0, 1] (default 25)
    histogram_times    sample times at which P_e histograms are collected;
                       must lie on the stored grid inside the sweep window
    store_trajectories keep every full TrajectoryRecord on the stats object
    """

    n_traj: int
    master_seed: int
    thresholds: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8,
                                     0.9, 0.95, 0.96, 0.99)
    histogram_bins: int = 25
    histogram_times: tuple[float, ...] = ()
    store_trajectories: bool = False

    def __post_init__(self) -> None:
        if not (isinstance(self.n_traj, int) and self.n_traj >= 1):
            raise ValueError(f"n_traj must be a positive integer, got {self.n_traj!r}")
        if not (0 <= self.master_seed < 2**64):
            raise ValueError(f"master_seed must fit in uint64, got {self.master_seed!r}")
        object.__setattr__(self, "thresholds", tuple(float(c) for c in self.thresholds))
        object.__setattr__(self, "histogram_times",
                           tuple(float(t) for t in self.histogram_times))
        for c in self.thresholds:
            if not (0.0 < c <= 1.0):
                raise ValueError(f"thresholds must lie in (0, 1], got {c!r}")
        if any(b >= a for a, b in zip(self.thresholds[1:], self.thresholds)):
            raise ValueError(f"thresholds must be strictly increasing, got {self.thresholds!r}")
        if not (isinstance(self.histogram_bins, int) and self.histogram_bins >= 1):
            raise ValueError(f"histogram_bins must be >= 1, got {self.histogram_bins!r}")


@dataclass(frozen=True)
class EnsembleSummaries:
    """Per-trajectory scalars, one row per index: the reducer's raw material."""

    indices: np.ndarray        # (n,) int64
    master_seed: int
    max_excitation: np.ndarray  # (n,)
    terminal_pe: np.ndarray     # (n,)
    thresholds: np.ndarray      # (k,)
    dwell_fractions: np.ndarray  # (n, k)
    window: float

    def __len__(self) -> int:
        return int(self.indices.shape[0])


@dataclass(frozen=True)
class HistogramStats:
    """One time slice: counts on [0, 1] plus the two skewness readings.

    Skews are None when the slice is degenerate (zero spread or fewer than
    three values), e.g. for unmonitored eta = 0 ensembles.
    """

    counts: np.ndarray
    skew_moment: float | None
    skew_pearson: float | None


@dataclass(frozen=True)
class EnsembleStats:
    """Everything run_ensemble reduces an ensemble to."""

    times: np.ndarray
    mean_pe: np.ndarray
    histograms: dict[float, HistogramStats]
    exit_fractions: dict[float, float]
    dwell: dict[float, tuple[float, float]]
    summaries: EnsembleSummaries
    n_traj: int
    records: tuple[TrajectoryRecord, ...] | None = None


def histogram(values: Sequence[float] | np.ndarray, bins: int) -> np.ndarray:
    """Counts over `bins` equal-width bins spanning [0, 1].

    Bins are left-closed; the final bin is closed on both sides so a value
    of exactly 1.0 lands in it.  Counts always sum to len(values).

    Raises ValueOutOfRange for any input outside [0, 1].
    """
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins!r}")
    v = np.asarray(values, dtype=np.float64)
    if v.size and (np.min(v) < 0.0 or np.max(v) > 1.0):
        raise ValueOutOfRange(
            f"histogram values must lie in [0, 1], got range "
            f"[{np.min(v)!r}, {np.max(v)!r}]")
    counts, _ = np.histogram(v, bins=bins, range=(0.0, 1.0))
    return counts


def skewness(values: Sequence[float] | np.ndarray) -> tuple[float, float]:
    """(moment skew, Pearson skew) of a sample.

    moment skew   m3 / m2**1.5 with population central moments
    Pearson skew  3 (mean - median) / population stddev, median being the
                  midpoint of the two central order statistics for even n

    Raises ValueError for fewer than 3 values and DegenerateDistribution
    for zero spread.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size < 3:
        raise ValueError(f"skewness needs at least 3 values, got {v.size}")
    mean = float(np.mean(v))
    dev = v - mean
    m2 = float(np.mean(dev**2))
    if m2 == 0.0:
        raise DegenerateDistribution("sample has zero standard deviation")
    m3 = float(np.mean(dev**3))
    moment = m3 / m2**1.5
    pearson = 3.0 * (mean - float(np.median(v))) / math.sqrt(m2)
    return moment, pearson


def exit_fraction(summaries: EnsembleSummaries, threshold: float) -> float:
    """Fraction of trajectories whose max excitation reached `threshold`.

    Works for arbitrary thresholds because it compares against the
    per-trajectory maxima rather than a configured threshold list.
    """
    if len(summaries) == 0:
        raise ValueError("exit_fraction needs at least one trajectory")
    return float(np.mean(summaries.max_excitation >= threshold))


def _dwell_column(summaries: EnsembleSummaries, threshold: float) -> np.ndarray:
    if threshold <= 0.0:
        return np.ones(len(summaries))
    if threshold > float(summaries.max_excitation.max()):
        return np.zeros(len(summaries))
    hit = np.nonzero(np.isclose(summaries.thresholds, threshold,
                                rtol=0.0, atol=1e-12))[0]
    if hit.size == 0:
        raise ValueOutOfRange(
            f"dwell threshold {threshold!r} was not configured "
            f"(have {summaries.thresholds.tolist()!r})")
    return summaries.dwell_fractions[:, hit[0]]


def dwell_stats(summaries: EnsembleSummaries, threshold: float) -> tuple[float, float]:
    """(mean, max) over trajectories of the dwell fraction at `threshold`.

    Thresholds at or below 0 give (1, 1); thresholds above the global
    maximum excitation give (0, 0); anything else must have been configured
    when the trajectories ran, otherwise ValueOutOfRange.
    """
    if len(summaries) == 0:
        raise ValueError("dwell_stats needs at least one trajectory")
    col = _dwell_column(summaries, threshold)
    return float(np.mean(col)), float(np.max(col))


def _match_stored_index(t: float, t_initial: float, stride: float, n_stored: int) -> int:
    idx = round((t - t_initial) / stride)
    if not (0 <= idx < n_stored) or abs(t_initial + idx * stride - t) > GRID_ATOL:
        raise ValueOutOfRange(
            f"histogram time {t!r} does not sit on the stored grid "
            f"(stride {stride!r} from {t_initial!r})")
    return idx


def _run_one(p: SweepParams, n: NumericsConfig, e: EnsembleConfig,
             thr: np.ndarray, steps: int, n_stored: int, index: int):
    """Integrate trajectory `index` and return its reduction inputs."""
    if e.store_trajectories:
        rec = simulate_conditional(p, n, e.master_seed, index, thresholds=thr)
        return (np.asarray(rec.pe), rec.max_excitation, rec.dwell_times / p.window,
                rec.terminal_pe, rec)
    path = sample_path(e.master_seed, index, steps, n.dt)
    pe_out = np.empty(n_stored)
    dwell_counts = np.zeros(thr.size, dtype=np.int64)
    dummy_state = np.empty((1, 4))
    dummy_dq = np.empty(1)
    status, k, *_ = _kernels.run_conditional(
        GROUND[0, 0], GROUND[0, 1], GROUND[1, 0], GROUND[1, 1],
        p.t_initial, n.dt, path.increments,
        p.omega, p.alpha, p.gamma_decay, p.phi, p.eta,
        n.stepper == "milstein", n.renormalize_each_step, n.decimation,
        thr, dwell_counts,
        pe_out, False, dummy_state, False, dummy_dq)
    if status != _kernels.STATUS_OK:
        raise NonPhysicalState(f"left the physical set at step {k} (status {status})")
    dwell_frac = dwell_counts * (n.decimation * n.dt) / p.window
    return pe_out, float(pe_out.max()), dwell_frac, float(pe_out[-1]), None


def run_ensemble(p: SweepParams, n: NumericsConfig, e: EnsembleConfig,
                 n_workers: int = 1) -> EnsembleStats:
    """Run e.n_traj independent monitored trajectories and reduce them.

    Trajectory i consumes the (e.master_seed, i) noise stream; n_workers
    only sets how many threads integrate concurrently and cannot change a
    single bit of the result.  All failures are collected and raised
    together as EnsembleRunError.
    """
    steps, n_stored = _storage_layout(p, n)
    thr = np.asarray(e.thresholds, dtype=np.float64)
    times = _stored_times(p, n.dt, steps, n.decimation)
    stride = n.decimation * n.dt
    for t in e.histogram_times:
        if not (p.t_initial - GRID_ATOL <= t <= p.t_final + GRID_ATOL):
            raise ValueOutOfRange(
                f"histogram time {t!r} outside the sweep window "
                f"[{p.t_initial!r}, {p.t_final!r}]")
    hist_idx = {t: _match_stored_index(t, p.t_initial, stride, n_stored)
                for t in e.histogram_times}

    results: list = [None] * e.n_traj
    failures: list[tuple[int, str]] = []

    def work(i: int) -> None:
        try:
            results[i] = _run_one(p, n, e, thr, steps, n_stored, i)
        except NonPhysicalState as exc:  # collected, re-raised together
            failures.append((i, str(exc)))

    if n_workers <= 1:
        for i in range(e.n_traj):
            work(i)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(work, range(e.n_traj)))

    if failures:
        raise EnsembleRunError(sorted(failures))

    mean_pe = np.zeros(n_stored)
    max_exc = np.empty(e.n_traj)
    terminal = np.empty(e.n_traj)
    dwell_fracs = np.empty((e.n_traj, thr.size))
    records: list[TrajectoryRecord] = []
    for i in range(e.n_traj):  # fixed reduction order: bitwise worker-independent
        pe_curve, mx, dw, tp, rec = results[i]
        mean_pe += pe_curve
        max_exc[i] = mx
        dwell_fracs[i] = dw
        terminal[i] = tp
        if rec is not None:
            records.append(rec)
    mean_pe /= e.n_traj

    pe_slices = {t: np.array([results[i][0][j] for i in range(e.n_traj)])
                 for t, j in hist_idx.items()}
    histograms: dict[float, HistogramStats] = {}
    for t, slice_vals in pe_slices.items():
        counts = histogram(slice_vals, e.histogram_bins)
        skew_m: float | None
        skew_p: float | None
        try:
            skew_m, skew_p = skewness(slice_vals)
        except (ValueError, DegenerateDistribution):
            skew_m = skew_p = None
        histograms[t] = HistogramStats(counts=counts, skew_moment=skew_m,
                                       skew_pearson=skew_p)

    summaries = EnsembleSummaries(
        indices=np.arange(e.n_traj, dtype=np.int64),
        master_seed=e.master_seed,
        max_excitation=max_exc, terminal_pe=terminal,
        thresholds=thr, dwell_fractions=dwell_fracs,
        window=p.window)

    exit_fractions = {float(c): exit_fraction(summaries, float(c)) for c in thr}
    dwell = {float(c): dwell_stats(summaries, float(c)) for c in thr}

    return EnsembleStats(
        times=times, mean_pe=mean_pe, histograms=histograms,
        exit_fractions=exit_fractions, dwell=dwell,
        summaries=summaries, n_traj=e.n_traj,
        records=tuple(records) if e.store_trajectories else None)
