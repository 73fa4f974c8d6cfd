"""Fixed-step stochastic integration on reproducible Brownian paths.

Noise discipline: every trajectory owns a counter-based random stream keyed
by (master_seed, trajectory_index), so path i is the same bit pattern no
matter how many workers run or in which order trajectories complete.
Coarse paths for convergence studies are built by summing disjoint blocks
of fine increments (`coarsen`), never by redrawing, which is what makes
pathwise scheme comparisons meaningful.

Two one-step maps are provided, and they are built differently on purpose.

Euler-Maruyama is the textbook explicit update, rho + drift * dt +
diffusion * dW, settled back onto the physical set afterwards (symmetrize,
unit trace, radial projection onto the Bloch ball) with a hard failure on
overshoots large enough to signal a broken step size.  It is the
strong-order-1/2 baseline for convergence comparisons.  Near the pure
manifold its containment is a wall: clipped excursions bias the state
toward purity, so it is not the scheme to use for partial-efficiency
statistics.

Milstein is realized as a completely positive Kraus update,
M rho M+ + (1 - eta) L rho L+ dt with M = 1 - (iH + L+L/2) dt
+ sqrt(eta) dy L and dy the measured increment.  Expanding the normalized
map in dW reproduces the drift, the diffusion and the noise correction
0.5 * D_b(rho)[b] * (dW**2 - dt) of the explicit Milstein formula -- for a
single-noise SDE the dW**2 coefficient of any smooth one-step map is
exactly the Milstein term -- so it converges at strong order 1, while the
Kraus form guarantees the state never leaves the Bloch ball.  No wall, no
clipping, no purity bias: the settling stage is rounding hygiene for this
map.  It is the default stepper.

Both maps treat the detuning by an integrating factor rather than inside
the explicit increment.  The reason is stability, not taste: an explicit
step multiplies the coherence by (1 - i * delta * dt), whose modulus
sqrt(1 + (delta dt)^2) exceeds 1, so once |delta| passes 1/sqrt(dt) the
amplification outruns the Gamma/2 damping and the integration blows up
exponentially -- and a linear sweep spends most of its window beyond that
line.  Each step therefore advances the smooth part (drive, decay,
measurement) at the step's start time and then applies the detuning
rotation exp(-i * Int delta dt) to the coherence in closed form, which is
exact for any step size and changes nothing else: same SDE, same noise,
same strong orders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .dynamics import (SweepParams, detuning_phase, diffusion,
                       stationary_drift)
from .qubit import (MAX_STEP_OVERSHOOT, NonPhysicalState, normalize,
                    project_physical)

GRID_RTOL = 1e-9  # relative slack when checking that dt tiles the window

STEPPERS = ("euler", "milstein")


class IndivisibleFactor(Exception):
    """Coarsening factor does not divide the number of fine increments."""


@dataclass(frozen=True)
class NumericsConfig:
    """Integration controls, independent of the physics.

    dt          fixed step size (> 0)
    stepper     "milstein" (default) or "euler"
    renormalize_each_step
                symmetrize + rescale after every step (default on; turning
                it off is for raw convergence diagnostics)
    decimation  store (and summarize on) every k-th sample; 1 keeps all
    """

    dt: float = 4e-5
    stepper: str = "milstein"
    renormalize_each_step: bool = True
    decimation: int = 50

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be finite and > 0, got {self.dt!r}")
        if self.stepper not in STEPPERS:
            raise ValueError(f"stepper must be one of {STEPPERS}, got {self.stepper!r}")
        if not (isinstance(self.decimation, int) and self.decimation >= 1):
            raise ValueError(f"decimation must be an integer >= 1, got {self.decimation!r}")


@dataclass(frozen=True)
class BrownianPath:
    """One realization of Wiener increments on a fixed grid.

    increments[k] ~ Normal(0, dt) drives the step from t_k to t_k + dt.
    The (master_seed, trajectory_index) pair that generated the path rides
    along so records stay self-describing.
    """

    dt: float
    increments: np.ndarray
    master_seed: int
    trajectory_index: int

    @property
    def n_steps(self) -> int:
        return int(self.increments.shape[0])


def trajectory_rng(master_seed: int, trajectory_index: int) -> np.random.Generator:
    """Counter-based generator for one trajectory's private stream."""
    if not (0 <= master_seed < 2**64):
        raise ValueError(f"master_seed must fit in uint64, got {master_seed!r}")
    if not (0 <= trajectory_index < 2**64):
        raise ValueError(f"trajectory_index must fit in uint64, got {trajectory_index!r}")
    key = np.array([master_seed, trajectory_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_path(master_seed: int, trajectory_index: int,
                n_steps: int, dt: float) -> BrownianPath:
    """Draw the Wiener increments for one trajectory.

    Deterministic in (master_seed, trajectory_index); different indices give
    independent streams, so ensembles can be sampled in any order or split
    across any number of workers without changing a single bit.
    """
    if n_steps < 0:
        raise ValueError(f"n_steps must be >= 0, got {n_steps!r}")
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be finite and > 0, got {dt!r}")
    rng = trajectory_rng(master_seed, trajectory_index)
    increments = rng.normal(0.0, math.sqrt(dt), size=n_steps)
    return BrownianPath(dt=dt, increments=increments,
                        master_seed=master_seed, trajectory_index=trajectory_index)


def coarsen(path: BrownianPath, factor: int) -> BrownianPath:
    """Collapse `factor` consecutive increments into one.

    The coarse path is the same Brownian motion observed on a grid
    `factor` times coarser; sums over disjoint blocks preserve the joint
    law and the realized displacement.
    """
    if not (isinstance(factor, int) and factor >= 1):
        raise IndivisibleFactor(f"factor must be an integer >= 1, got {factor!r}")
    if path.n_steps % factor != 0:
        raise IndivisibleFactor(
            f"{path.n_steps} increments cannot be grouped in blocks of {factor}")
    if factor == 1:
        return path
    blocks = path.increments.reshape(-1, factor).sum(axis=1)
    return BrownianPath(dt=path.dt * factor, increments=blocks,
                        master_seed=path.master_seed,
                        trajectory_index=path.trajectory_index)


def _rotate_coherence(rho: np.ndarray, theta: float) -> np.ndarray:
    """Apply the closed-form detuning rotation: rho_ge *= exp(-i theta)."""
    phase = complex(math.cos(theta), -math.sin(theta))
    out = rho.copy()
    out[0, 1] = out[0, 1] * phase
    out[1, 0] = out[1, 0] * phase.conjugate()
    return out


def _settle(mat: np.ndarray) -> np.ndarray:
    """Post-increment cleanup: symmetrize, unit trace, back onto the ball.

    Mirrors the compiled kernels bit for bit, which is why this does not
    simply call qubit.normalize: a raw increment may legitimately overshoot
    the sphere by much more than normalize's strict emission slack, and the
    overshoot is removed by projection instead.  Overshoot beyond
    MAX_STEP_OVERSHOOT means the step size is far too large for the
    parameters and raises NonPhysicalState.
    """
    sym = 0.5 * (mat + mat.conj().T)
    d_g = sym[0, 0].real
    d_e = sym[1, 1].real
    tr = d_g + d_e
    if not tr > 0.0:
        raise NonPhysicalState(f"trace {tr!r} is not positive")
    if d_g <= d_e:
        p_g = d_g / tr
        p_e = 1.0 - p_g
    else:
        p_e = d_e / tr
        p_g = 1.0 - p_e
    coh = sym[0, 1] / tr
    x = 2.0 * coh.real
    y = -2.0 * coh.imag
    z = p_e - p_g
    r2 = x * x + y * y + z * z
    if not r2 <= (1.0 + MAX_STEP_OVERSHOOT) ** 2:
        raise NonPhysicalState(
            f"Bloch norm squared {r2!r} exceeds (1 + {MAX_STEP_OVERSHOOT})**2; "
            "step size too large for these parameters")
    rho = np.array([[p_g, coh], [np.conj(coh), p_e]], dtype=np.complex128)
    return project_physical(rho)


def em_step(rho: np.ndarray, t: float, dt: float, dw: float,
            p: SweepParams) -> np.ndarray:
    """One Euler-Maruyama step, renormalized.

    Drive, decay and measurement advance explicitly; the detuning rotation
    is applied exactly afterwards and any overshoot of the Bloch sphere is
    projected back (see module docstring).  Populations see the plain
    Euler-Maruyama update.
    """
    inc = rho + stationary_drift(rho, p) * dt + diffusion(rho, p) * dw
    return _settle(_rotate_coherence(inc, detuning_phase(t, dt, p)))


def milstein_step(rho: np.ndarray, t: float, dt: float, dw: float,
                  p: SweepParams) -> np.ndarray:
    """One strong-order-1 step as a normalized Kraus update.

    The dW expansion of this map reproduces em_step plus the correction
    0.5 * D_b(rho)[b(rho)] * (dW**2 - dt), so it carries the Milstein
    order, but the update is completely positive by construction and the
    state cannot leave the Bloch ball however large the increment.
    """
    scale = math.sqrt(p.eta * p.gamma_decay)
    phase = complex(math.cos(p.phi), math.sin(p.phi))
    s = (phase * rho[1, 0] + phase.conjugate() * rho[0, 1]).real
    g = scale * (scale * s * dt + dw)
    m = np.array([
        [1.0, -0.5j * p.omega * dt + g * phase],
        [-0.5j * p.omega * dt, 1.0 - 0.5 * p.gamma_decay * dt],
    ])
    new = m @ rho @ m.conj().T
    new[0, 0] += (1.0 - p.eta) * p.gamma_decay * dt * rho[1, 1]
    return _settle(_rotate_coherence(new, detuning_phase(t, dt, p)))


def _check_grid(path: BrownianPath, p: SweepParams, n: NumericsConfig) -> None:
    if not math.isclose(path.dt, n.dt, rel_tol=GRID_RTOL, abs_tol=0.0):
        raise ValueError(f"path dt {path.dt!r} disagrees with configured dt {n.dt!r}")
    span = path.n_steps * path.dt
    if abs(span - p.window) > GRID_RTOL * max(p.window, 1.0):
        raise ValueError(
            f"path covers {span!r} but the sweep window is {p.window!r}; "
            "dt must tile the window exactly")


def n_steps_for(p: SweepParams, n: NumericsConfig) -> int:
    """Number of fixed steps tiling [t_initial, t_final]; errors if dt does not fit."""
    steps = round(p.window / n.dt)
    if steps < 1 or abs(steps * n.dt - p.window) > GRID_RTOL * max(p.window, 1.0):
        raise ValueError(
            f"dt {n.dt!r} does not divide the window {p.window!r} within {GRID_RTOL:.0e}")
    return steps


def integrate(rho0: np.ndarray, path: BrownianPath, p: SweepParams,
              n: NumericsConfig,
              observer: Callable[[float, np.ndarray, float], None] | None = None,
              ) -> np.ndarray:
    """Drive rho0 through the whole path with the configured stepper.

    The observer, when given, is called as observer(t_after, rho_after, dw)
    once per step.

    Raises NonPhysicalState if any step leaves the physical set.
    """
    _check_grid(path, p, n)
    rho = normalize(np.asarray(rho0, dtype=np.complex128))
    use_milstein = n.stepper == "milstein"
    renorm = n.renormalize_each_step
    dt = n.dt

    if observer is None:
        status, k, rgg, rge, reg, ree = _kernels.run_terminal(
            rho[0, 0], rho[0, 1], rho[1, 0], rho[1, 1],
            p.t_initial, dt, path.increments,
            p.omega, p.alpha, p.gamma_decay, p.phi, p.eta,
            use_milstein, renorm)
        if status != _kernels.STATUS_OK:
            raise NonPhysicalState(f"integration failed with status {status} at step {k}")
        return np.array([[rgg, rge], [reg, ree]], dtype=np.complex128)

    for k in range(path.n_steps):
        t = p.t_initial + k * dt
        dw = float(path.increments[k])
        rgg, rge, reg, ree, status = _kernels.sde_step(
            rho[0, 0], rho[0, 1], rho[1, 0], rho[1, 1], t, dt, dw,
            p.omega, p.alpha, p.gamma_decay, p.phi, p.eta,
            use_milstein, renorm)
        if status != _kernels.STATUS_OK:
            raise NonPhysicalState(f"integration failed with status {status} at step {k}")
        rho = np.array([[rgg, rge], [reg, ree]], dtype=np.complex128)
        observer(t + dt, rho, dw)
    return rho


def strong_error(p: SweepParams, dt_fine: float, factors: Sequence[int],
                 n_paths: int, master_seed: int,
                 stepper: str = "milstein", renormalize: bool = True,
                 rho0: np.ndarray | None = None,
                 ) -> list[tuple[float, float]]:
    """Pathwise convergence probe against the finest grid.

    For every path the fine solution (dt_fine) is the reference; each
    coarsening factor m reruns the same Brownian motion at dt = m * dt_fine
    via `coarsen` and the Frobenius distance between terminal states is
    averaged over paths.  Factor 1 is therefore exactly 0 and is reported
    as such.

    Returns [(dt, mean_error), ...] ordered like `factors`.
    """
    factors = list(factors)
    if not factors or any((not isinstance(f, int)) or f < 1 for f in factors):
        raise IndivisibleFactor(f"factors must be integers >= 1, got {factors!r}")
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths!r}")
    numerics = NumericsConfig(dt=dt_fine, stepper=stepper,
                              renormalize_each_step=renormalize, decimation=1)
    n_fine = n_steps_for(p, numerics)
    for f in factors:
        if n_fine % f != 0:
            raise IndivisibleFactor(
                f"coarsening factor {f} does not divide {n_fine} fine steps")

    if rho0 is None:
        rho0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.complex128)
    rho0 = normalize(np.asarray(rho0, dtype=np.complex128))
    use_milstein = stepper == "milstein"

    sums = np.zeros(len(factors))
    for i in range(n_paths):
        fine = sample_path(master_seed, i, n_fine, dt_fine)
        terminals: dict[int, np.ndarray] = {}
        for f in sorted(set(factors) | {1}):
            sub = coarsen(fine, f)
            status, k, rgg, rge, reg, ree = _kernels.run_terminal(
                rho0[0, 0], rho0[0, 1], rho0[1, 0], rho0[1, 1],
                p.t_initial, sub.dt, sub.increments,
                p.omega, p.alpha, p.gamma_decay, p.phi, p.eta,
                use_milstein, renormalize)
            if status != _kernels.STATUS_OK:
                raise NonPhysicalState(
                    f"path {i}, factor {f}: status {status} at step {k}")
            terminals[f] = np.array([[rgg, rge], [reg, ree]])
        ref = terminals[1]
        for j, f in enumerate(factors):
            diff = terminals[f] - ref
            sums[j] += math.sqrt(float(np.sum(np.abs(diff) ** 2)))

    return [(dt_fine * f, sums[j] / n_paths) for j, f in enumerate(factors)]
