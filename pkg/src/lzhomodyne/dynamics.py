"""Swept two-level dynamics under radiative decay and homodyne monitoring.

The model: a qubit with fixed coupling omega/2 between |g> and |e> whose
detuning is ramped linearly through resonance, delta(t) = alpha * t, while
the excited state decays at rate gamma_decay into a continuously monitored
radiation channel.  A homodyne receiver with efficiency eta and local
oscillator phase phi observes the emitted field.

Everything is expressed in decay units: gamma_decay = 1 means times are in
inverse linewidths.  The conditional evolution for a measurement record
increment dW is

    drho = drift(rho, t) dt + diffusion(rho) dW

with drift = -i[H, rho] + gamma * D[sigma_minus] rho (Lindblad part) and
diffusion = sqrt(eta * gamma) * (c rho + rho c+ - <c + c+> rho) for
c = sigma_minus * exp(i phi).  The same dW feeds the photocurrent increment
returned by `current_increment`, which is what ties the simulated record to
the simulated state.

The asymptotic crossing probability for the lossless sweep is the classic
exponential formula, exposed here as `lz_probability` with the dimensionless
sweep-rate ratio `adiabaticity` = omega**2 / alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qubit import SIGMA_MINUS, NUMBER_OP, dag


class UndefinedCurrent(Exception):
    """Homodyne current requested at eta = 0, where no field is observed."""


@dataclass(frozen=True)
class SweepParams:
    """Physical parameters of one sweep, in units of the decay rate.

    omega       coupling strength (Rabi frequency of the avoided crossing)
    alpha       linear detuning ramp rate, delta(t) = alpha * t
    gamma_decay radiative decay rate; 0 is allowed and gives unitary dynamics
    phi         local oscillator phase of the homodyne receiver
    eta         detector efficiency in [0, 1]; 0 means nothing is observed
    t_initial, t_final
                sweep window endpoints, t_initial < t_final
    """

    omega: float
    alpha: float
    gamma_decay: float = 1.0
    phi: float = 0.0
    eta: float = 1.0
    t_initial: float = -1.0
    t_final: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega) and self.omega >= 0.0):
            raise ValueError(f"omega must be finite and >= 0, got {self.omega!r}")
        if not (math.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValueError(f"alpha must be finite and > 0, got {self.alpha!r}")
        if not (math.isfinite(self.gamma_decay) and self.gamma_decay >= 0.0):
            raise ValueError(f"gamma_decay must be finite and >= 0, got {self.gamma_decay!r}")
        if not math.isfinite(self.phi):
            raise ValueError(f"phi must be finite, got {self.phi!r}")
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta must lie in [0, 1], got {self.eta!r}")
        if not (math.isfinite(self.t_initial) and math.isfinite(self.t_final)
                and self.t_initial < self.t_final):
            raise ValueError(
                f"need t_initial < t_final, got [{self.t_initial!r}, {self.t_final!r}]")

    @property
    def window(self) -> float:
        return self.t_final - self.t_initial


def detuning(t: float, p: SweepParams) -> float:
    """Instantaneous detuning alpha * t; resonance sits at t = 0."""
    return p.alpha * t


def hamiltonian(t: float, p: SweepParams) -> np.ndarray:
    """H(t) = (omega/2)(sigma_+ + sigma_-) - delta(t) |e><e|, as a 2x2 array."""
    half = 0.5 * p.omega
    return np.array([[0.0, half], [half, -detuning(t, p)]], dtype=np.complex128)


def dissipator(rho: np.ndarray) -> np.ndarray:
    """Radiative damping D[sigma_-] rho = s rho s+ - (1/2){s+ s, rho}."""
    return (SIGMA_MINUS @ rho @ dag(SIGMA_MINUS)
            - 0.5 * (NUMBER_OP @ rho + rho @ NUMBER_OP))


def _lowering(phi: float) -> np.ndarray:
    """Measured jump operator c = exp(i phi) sigma_-."""
    return np.exp(1j * phi) * SIGMA_MINUS


def homodyne_superop(rho: np.ndarray, phi: float) -> np.ndarray:
    """Measurement back-action map c rho + rho c+ - tr((c + c+) rho) rho."""
    c = _lowering(phi)
    m = np.trace((c + dag(c)) @ rho)
    return c @ rho + rho @ dag(c) - m * rho


def drift(rho: np.ndarray, t: float, p: SweepParams) -> np.ndarray:
    """Deterministic generator: -i[H, rho] + gamma_decay * D[sigma_-] rho."""
    h = hamiltonian(t, p)
    return -1j * (h @ rho - rho @ h) + p.gamma_decay * dissipator(rho)


def stationary_drift(rho: np.ndarray, p: SweepParams) -> np.ndarray:
    """Drift with the detuning commutator removed: drive and decay only.

    Equal to drift(rho, 0, p) because the detuning vanishes at resonance.
    The steppers advance this smooth part explicitly and apply the stiff
    detuning rotation in closed form; see the sde module for why.
    """
    return drift(rho, 0.0, p)


def detuning_phase(t: float, dt: float, p: SweepParams) -> float:
    """Coherence phase accumulated by the detuning across one step.

    Exact integral of delta(s) = alpha * s over [t, t + dt]:
    alpha * dt * (t + dt/2).  Across a step the lab-frame coherence
    rho_ge picks up exp(-i * detuning_phase).
    """
    return p.alpha * dt * (t + 0.5 * dt)


def diffusion(rho: np.ndarray, p: SweepParams) -> np.ndarray:
    """Stochastic generator sqrt(eta * gamma) * homodyne back-action.

    Identically zero when eta = 0: an unobserved channel feeds no
    measurement noise back into the state.
    """
    scale = math.sqrt(p.eta * p.gamma_decay)
    return scale * homodyne_superop(rho, p.phi)


def diffusion_derivative(rho: np.ndarray, h: np.ndarray, p: SweepParams) -> np.ndarray:
    """Directional (Frechet) derivative of `diffusion` at rho along h.

    The back-action map is quadratic in rho through the expectation term,
    so the derivative is exact:

        D_b(rho)[h] = sqrt(eta gamma) (c h + h c+ - tr((c+c+) h) rho
                                       - tr((c+c+) rho) h)
    """
    c = _lowering(p.phi)
    cpc = c + dag(c)
    scale = math.sqrt(p.eta * p.gamma_decay)
    return scale * (c @ h + h @ dag(c)
                    - np.trace(cpc @ h) * rho
                    - np.trace(cpc @ rho) * h)


def current_increment(rho: np.ndarray, dt: float, dw: float, p: SweepParams) -> float:
    """Homodyne photocurrent increment for one step driven by noise dw.

    dq = gamma sqrt(eta) <c + c+> dt + sqrt(gamma / eta) dw, evaluated on
    the pre-step state (Ito convention).  The dw must be the same draw that
    advances the state, otherwise record and state decohere from each other.

    Raises UndefinedCurrent at eta = 0: the shot-noise term diverges and no
    record exists.
    """
    if p.eta == 0.0:
        raise UndefinedCurrent("homodyne record does not exist at eta = 0")
    c = _lowering(p.phi)
    m = np.trace((c + dag(c)) @ rho).real
    return float(p.gamma_decay * math.sqrt(p.eta) * m * dt
                 + math.sqrt(p.gamma_decay / p.eta) * dw)


def adiabaticity(p: SweepParams) -> float:
    """Dimensionless sweep-rate ratio omega**2 / alpha.

    Large values mean a slow sweep (adiabatic following), small values a
    fast diabatic punch through the crossing.
    """
    return p.omega**2 / p.alpha


def lz_probability(p: SweepParams) -> float:
    """Asymptotic crossing probability 1 - exp(-pi/2 * omega**2 / alpha).

    This is the lossless infinite-window limit; it serves as an anchor for
    the unitary reference solver, not as a prediction for decaying sweeps.
    """
    return 1.0 - math.exp(-0.5 * math.pi * adiabaticity(p))
