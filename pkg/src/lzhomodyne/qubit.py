"""Exact 2x2 state algebra for a two-level emitter.

Basis convention used throughout the package: index 0 is the ground state
|g>, index 1 is the excited state |e>.  With this ordering the number
operator sigma_plus @ sigma_minus is diag(0, 1), the excited population is
the (1, 1) entry of the density matrix, and the Bloch z coordinate is +1
for pure |e>.

Density matrices are plain (2, 2) complex128 ndarrays.  `normalize` is the
strict gatekeeper that turns an arbitrary near-physical matrix into a valid
state: it symmetrizes, rescales to unit trace, and rejects anything whose
Bloch vector pokes out of the sphere by more than EPS_PHYS.  The stochastic
steppers additionally run `project_physical` between steps, because a
discrete noise increment legitimately overshoots the sphere by far more
than rounding and must be put back; anything past MAX_STEP_OVERSHOOT still
fails hard.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

# Bloch-norm slack for rounding noise on emitted states; anything beyond
# this is treated as a broken state, not noise.
EPS_PHYS = 1e-6

# A single integrator step that leaves the Bloch ball by more than this is a
# broken integration (step size far too large), not statistical overshoot.
MAX_STEP_OVERSHOOT = 0.25

# Hermiticity / reality residues larger than these mean the caller handed us
# something that was never a density matrix.
HERM_TOL = 1e-9
IMAG_TOL = 1e-12

IDENTITY = np.eye(2, dtype=np.complex128)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)  # |g><e|
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128)   # |e><g|
NUMBER_OP = SIGMA_PLUS @ SIGMA_MINUS                                   # |e><e|

GROUND = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.complex128)
EXCITED = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=np.complex128)


class NonPhysicalState(Exception):
    """State failed a physicality check (trace, Hermiticity or Bloch norm)."""


class BlochVector(NamedTuple):
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return float(np.sqrt(self.x**2 + self.y**2 + self.z**2))


def dag(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return a.conj().T


def to_bloch(rho: np.ndarray) -> BlochVector:
    """Map a density matrix to its Bloch vector.

    x = rho_ge + rho_eg, y = i(rho_ge - rho_eg), z = rho_ee - rho_gg.
    All three must come out real to IMAG_TOL; the residue is discarded
    after the check.
    """
    x = rho[0, 1] + rho[1, 0]
    y = 1j * (rho[0, 1] - rho[1, 0])
    z = rho[1, 1] - rho[0, 0]
    worst = max(abs(x.imag), abs(y.imag), abs(z.imag))
    if worst > IMAG_TOL:
        raise NonPhysicalState(f"Bloch components have imaginary residue {worst:.3e}")
    return BlochVector(float(x.real), float(y.real), float(z.real))


def excited_population(rho: np.ndarray) -> float:
    """P_e = rho_ee; equals (1 + z)/2 on the Bloch sphere."""
    return float(rho[1, 1].real)


def purity(rho: np.ndarray) -> float:
    """tr(rho^2); equals (1 + |r|^2)/2 in terms of the Bloch vector r."""
    return float(np.trace(rho @ rho).real)


def normalize(mat: np.ndarray) -> np.ndarray:
    """Return the physical state obtained by symmetrizing and rescaling `mat`.

    The input must be Hermitian within HERM_TOL and have positive trace.
    The output has trace exactly 1.0 (the larger diagonal entry is stored
    as the complement of the smaller, which makes repeated normalization a
    bitwise no-op) and its Bloch norm may not exceed 1 + EPS_PHYS.

    Raises NonPhysicalState on any violation.  Never clamps.
    """
    herm_residue = np.abs(mat - dag(mat)).max()
    if not herm_residue <= HERM_TOL:
        raise NonPhysicalState(f"Hermiticity residue {herm_residue:.3e} exceeds {HERM_TOL:.0e}")
    sym = 0.5 * (mat + dag(mat))
    tr = sym[0, 0].real + sym[1, 1].real
    if not tr > 0.0:
        raise NonPhysicalState(f"trace {tr!r} is not positive")

    d_g = sym[0, 0].real
    d_e = sym[1, 1].real
    # Divide the smaller diagonal, complement the larger: the trace then
    # lands on 1.0 exactly and a second normalize is a bitwise no-op.
    if d_g <= d_e:
        p_g = d_g / tr
        p_e = 1.0 - p_g
    else:
        p_e = d_e / tr
        p_g = 1.0 - p_e
    coh = sym[0, 1] / tr

    rho = np.array([[p_g, coh], [np.conj(coh), p_e]], dtype=np.complex128)
    r = to_bloch(rho)
    if r.norm() > 1.0 + EPS_PHYS:
        raise NonPhysicalState(f"Bloch norm {r.norm()!r} exceeds 1 + {EPS_PHYS:.0e}")
    return rho


def project_physical(rho: np.ndarray) -> np.ndarray:
    """Nearest physical state for a unit-trace Hermitian matrix.

    A stochastic integration step inevitably pokes a near-pure state a
    little way out of the Bloch ball, and the conditional evolution is
    unstable outside it (the expectation-value feedback that pins pure
    states onto the sphere amplifies radially once past it), so small
    excursions must be removed rather than carried.  Flooring the negative
    eigenvalue at zero and rescaling the trace is the closest density
    matrix, and for a qubit that is exactly the radial projection of the
    Bloch vector onto the unit sphere.

    States already inside the ball are returned unchanged (same object).
    The caller is responsible for rejecting gross violations first; see
    MAX_STEP_OVERSHOOT.
    """
    coh = rho[0, 1]
    z = rho[1, 1].real - rho[0, 0].real
    x = 2.0 * coh.real
    y = -2.0 * coh.imag
    r2 = x * x + y * y + z * z
    if not r2 > 1.0:
        return rho
    inv = 1.0 / math.sqrt(r2)
    coh = coh * inv
    z = z * inv
    # Complement the larger population so the trace lands exactly on 1.0.
    if z >= 0.0:
        p_g = 0.5 * (1.0 - z)
        p_e = 1.0 - p_g
    else:
        p_e = 0.5 * (1.0 + z)
        p_g = 1.0 - p_e
    return np.array([[p_g, coh], [np.conj(coh), p_e]], dtype=np.complex128)
