"""Shared helpers: random physical states and the recurring parameter sets."""

from __future__ import annotations

import numpy as np
import pytest

from lzhomodyne import SweepParams


def bloch_to_rho(x: float, y: float, z: float) -> np.ndarray:
    return 0.5 * np.array([[1.0 - z, x - 1j * y],
                           [x + 1j * y, 1.0 + z]], dtype=np.complex128)


@pytest.fixture
def make_states():
    """Factory for batches of random density matrices inside the Bloch ball."""

    def make(n: int, seed: int = 7, radius: float | None = None) -> list[np.ndarray]:
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(n):
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            r = rng.uniform(0.05, 0.999) if radius is None else radius
            out.append(bloch_to_rho(*(r * v)))
        return out

    return make


@pytest.fixture
def fast_params():
    """Cheap moderate sweep: nothing stiff, nothing adiabatic."""
    return SweepParams(omega=2.0, alpha=10.0, gamma_decay=1.0, phi=0.0, eta=1.0)


@pytest.fixture
def slow_sweep_params():
    """Near-adiabatic crossing with strong monitoring, the package default."""
    return SweepParams(omega=100.0, alpha=1.0e3, gamma_decay=1.0, phi=0.0, eta=1.0)
