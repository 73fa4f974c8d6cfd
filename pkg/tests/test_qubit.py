"""State algebra: conventions, normalization contract, projection geometry."""

from __future__ import annotations

import numpy as np
import pytest

from lzhomodyne import (EPS_PHYS, EXCITED, GROUND, IDENTITY, NUMBER_OP,
                        SIGMA_MINUS, SIGMA_PLUS, BlochVector, NonPhysicalState,
                        dag, excited_population, normalize, purity, to_bloch)
from lzhomodyne.qubit import project_physical

from conftest import bloch_to_rho


def test_basis_convention():
    # index 0 = ground, index 1 = excited
    assert GROUND[0, 0] == 1.0 and GROUND[1, 1] == 0.0
    assert EXCITED[1, 1] == 1.0 and EXCITED[0, 0] == 0.0
    assert np.array_equal(NUMBER_OP, np.diag([0.0, 1.0]))
    # sigma_minus maps |e><e| to |g><g|
    assert np.array_equal(SIGMA_MINUS @ EXCITED @ SIGMA_PLUS, GROUND)
    assert np.array_equal(dag(SIGMA_MINUS), SIGMA_PLUS)
    assert np.array_equal(SIGMA_PLUS @ SIGMA_MINUS + SIGMA_MINUS @ SIGMA_PLUS,
                          IDENTITY)


@pytest.mark.parametrize("rho, expected", [
    (GROUND, (0.0, 0.0, -1.0)),
    (EXCITED, (0.0, 0.0, 1.0)),
    (0.5 * np.array([[1.0, 1.0], [1.0, 1.0]]), (1.0, 0.0, 0.0)),
    (0.5 * np.array([[1.0, -1.0j], [1.0j, 1.0]]), (0.0, 1.0, 0.0)),
    (0.5 * IDENTITY, (0.0, 0.0, 0.0)),
])
def test_to_bloch_cardinal_points(rho, expected):
    r = to_bloch(np.asarray(rho, dtype=np.complex128))
    assert r == pytest.approx(expected, abs=1e-15)


def test_to_bloch_round_trip(make_states):
    for rho in make_states(20):
        r = to_bloch(rho)
        assert np.allclose(bloch_to_rho(r.x, r.y, r.z), rho, atol=1e-15)
        assert r.norm() <= 1.0 + 1e-12


def test_to_bloch_rejects_nonhermitian_part():
    bad = np.array([[0.5, 0.1], [0.3, 0.5]], dtype=np.complex128)
    with pytest.raises(NonPhysicalState, match="imaginary residue"):
        to_bloch(bad)


def test_excited_population():
    assert excited_population(GROUND) == 0.0
    assert excited_population(EXCITED) == 1.0
    assert excited_population(bloch_to_rho(0.0, 0.0, 0.2)) == pytest.approx(0.6)


def test_purity_matches_bloch_radius(make_states):
    assert purity(GROUND) == 1.0
    assert purity(0.5 * IDENTITY) == 0.5
    for rho in make_states(20):
        r = to_bloch(rho)
        assert purity(rho) == pytest.approx(0.5 * (1.0 + r.norm() ** 2), abs=1e-13)


def test_bloch_vector_norm():
    assert BlochVector(3.0, 4.0, 0.0).norm() == 5.0


def test_normalize_rescales_and_is_idempotent(make_states):
    for i, rho in enumerate(make_states(10)):
        scaled = (1.0 + 3.0 * i) * rho
        out = normalize(scaled)
        tr = out[0, 0].real + out[1, 1].real
        assert tr == 1.0  # exact by construction, not approximately
        again = normalize(out)
        assert np.array_equal(again, out)


def test_normalize_symmetrizes_rounding_noise():
    rho = bloch_to_rho(0.3, -0.2, 0.4)
    rho[0, 1] += 1e-12  # below HERM_TOL: treated as noise, averaged away
    out = normalize(rho)
    assert np.array_equal(out[0, 1], np.conj(out[1, 0]))


def test_normalize_accepts_tiny_sphere_overshoot():
    out = normalize(bloch_to_rho(0.0, 0.0, 1.0 + 0.5 * EPS_PHYS))
    assert out[1, 1].real > 0.999


@pytest.mark.parametrize("mat, msg", [
    (np.array([[0.5, 0.1], [0.4, 0.5]], dtype=complex), "Hermiticity"),
    (np.zeros((2, 2), dtype=complex), "trace"),
    (-1.0 * GROUND, "trace"),
    (np.array([[np.nan, 0.0], [0.0, 1.0]], dtype=complex), None),
    (bloch_to_rho(0.0, 0.0, 1.0 + 5.0 * EPS_PHYS), "Bloch norm"),
])
def test_normalize_rejects_broken_states(mat, msg):
    with pytest.raises(NonPhysicalState, match=msg):
        normalize(mat)


def test_project_physical_no_op_inside_ball(make_states):
    for rho in make_states(10):
        assert project_physical(rho) is rho  # same object, untouched


def test_project_physical_radial_projection():
    rho = bloch_to_rho(0.9, 0.6, -0.5)  # radius ~1.19
    out = project_physical(rho)
    r = to_bloch(out)
    assert r.norm() == pytest.approx(1.0, abs=1e-14)
    v_in = np.array([0.9, 0.6, -0.5])
    v_out = np.array([r.x, r.y, r.z])
    assert np.allclose(np.cross(v_in, v_out), 0.0, atol=1e-14)
    assert out[0, 0].real + out[1, 1].real == 1.0
