"""Acceptance battery: one test per headline result, at desk scale.

Desk scale means 1000 trajectories per ensemble (the published statistics
used 6000), dt = 4e-5 in decay units and the sweep window [-1, 1].  The
tolerances are 3-sigma binomial bounds at this ensemble size plus slack for
the sampling error of the numbers being reproduced.  Each test prints the
measured values, so `pytest -v -s tests/test_acceptance.py` doubles as a
results table.  The whole battery takes about a minute.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from lzhomodyne import (EnsembleConfig, NumericsConfig, SweepParams,
                        diffusion, diffusion_derivative, dissipator,
                        exit_fraction, homodyne_superop, integrate,
                        lz_probability, run_ensemble, sample_path,
                        simulate_conditional, solve_unconditional,
                        solve_unitary, strong_error)
from lzhomodyne.cli import log_log_slope
from lzhomodyne.qubit import GROUND

from conftest import bloch_to_rho

DESK = NumericsConfig(dt=4e-5, decimation=50)
N_DESK = 1000
SKEW_TIMES = (0.1, 0.2, 0.3, 0.4)

# near-adiabatic crossing (coupling**2 / ramp = 10) with unit decay rate
FAMILY = dict(omega=100.0, alpha=1.0e3, gamma_decay=1.0, phi=0.0)

# coupling tuned so the lossless crossing probability is exactly one half
OMEGA_HALF = math.sqrt(2.0e3 * math.log(2.0) / math.pi)


def _ensemble(p: SweepParams, n_traj: int = N_DESK, **kwargs):
    e = EnsembleConfig(n_traj=n_traj, master_seed=0, **kwargs)
    return run_ensemble(p, DESK, e)


@pytest.fixture(scope="module")
def eta_sweep():
    """Desk-scale ensembles of the default family at each detector efficiency."""
    out = {}
    for eta in (1.0, 0.95, 0.9, 0.5):
        p = SweepParams(eta=eta, **FAMILY)
        out[eta] = _ensemble(p, histogram_times=SKEW_TIMES)
    return out


def test_criterion_01_strong_monitoring_retains_the_crossing(eta_sweep):
    exits = eta_sweep[1.0].exit_fractions
    print(f"criterion 1: exit(0.96) = {exits[0.96]:.3f}, "
          f"exit(0.99) = {exits[0.99]:.3f}")
    assert exits[0.96] >= 0.99
    assert exits[0.99] >= 0.90


def test_criterion_02_unconditional_ceiling():
    ref = solve_unconditional(SweepParams(eta=1.0, **FAMILY), DESK)
    print(f"criterion 2: unconditional max P_e = {ref.max_excitation:.4f}")
    assert ref.max_excitation == pytest.approx(0.85, abs=0.02)


def test_criterion_03_efficiency_degrades_full_excursions(eta_sweep):
    measured = {eta: eta_sweep[eta].exit_fractions[0.99]
                for eta in (0.95, 0.9, 0.5)}
    print(f"criterion 3: exit(0.99) = {measured[0.95]:.3f} @ eta=0.95, "
          f"{measured[0.9]:.3f} @ eta=0.9, {measured[0.5]:.3f} @ eta=0.5")
    assert measured[0.95] == pytest.approx(0.75, abs=0.06)
    assert measured[0.9] == pytest.approx(0.27, abs=0.06)
    assert measured[0.5] <= 0.01


def test_criterion_04_intermediate_and_fast_sweeps():
    p_half = SweepParams(omega=OMEGA_HALF, alpha=1.0e3, gamma_decay=1.0, eta=1.0)
    ceiling = solve_unitary(p_half, DESK).max_excitation
    exceed = exit_fraction(_ensemble(p_half).summaries, ceiling)
    p_fast = SweepParams(omega=10.0, alpha=1.0e3, gamma_decay=1.0, eta=1.0)
    never = _ensemble(p_fast).exit_fractions[0.4]
    print(f"criterion 4: lossless ceiling = {ceiling:.4f}, "
          f"fraction exceeding it = {exceed:.3f}, "
          f"fast-sweep exit(0.4) = {never:.3f}")
    assert ceiling == pytest.approx(0.64, abs=0.02)
    assert exceed == pytest.approx(0.56, abs=0.07)
    assert never <= 0.01


def test_criterion_05_ensemble_mean_recovers_the_master_equation(eta_sweep):
    p = SweepParams(eta=1.0, **FAMILY)
    ref = solve_unconditional(p, DESK)
    sup_1000 = float(np.max(np.abs(eta_sweep[1.0].mean_pe - ref.pe)))
    sup_4000 = float(np.max(np.abs(_ensemble(p, n_traj=4000).mean_pe - ref.pe)))
    print(f"criterion 5: sup-norm = {sup_1000:.4f} at N=1000, "
          f"{sup_4000:.4f} at N=4000")
    assert sup_1000 <= 0.05
    assert sup_4000 < sup_1000


def test_criterion_06_detection_efficiency_sets_the_purity():
    stored = dict(store_trajectories=True)
    perfect = _ensemble(SweepParams(eta=1.0, **FAMILY), n_traj=100, **stored)
    lossy = _ensemble(SweepParams(eta=0.5, **FAMILY), n_traj=100, **stored)
    min_purity = min(float(r.purity.min()) for r in perfect.records)
    min_bloch = min(math.sqrt(float(np.min(r.x**2 + r.y**2 + r.z**2)))
                    for r in lossy.records)
    print(f"criterion 6: min purity = {min_purity:.5f} at eta=1, "
          f"min Bloch length = {min_bloch:.3f} at eta=0.5")
    assert min_purity >= 0.99
    assert min_bloch < 0.9


def test_criterion_07_strong_convergence_orders():
    started = time.monotonic()
    p = SweepParams(omega=2.0, alpha=10.0, gamma_decay=1.0, eta=1.0)
    slopes = {}
    for stepper in ("milstein", "euler"):
        points = strong_error(p, 1e-5, [4, 8, 16, 32], 200, 0, stepper=stepper)
        slopes[stepper] = log_log_slope(points)
    elapsed = time.monotonic() - started
    print(f"criterion 7: milstein slope = {slopes['milstein']:.3f}, "
          f"euler slope = {slopes['euler']:.3f}, {elapsed:.0f}s")
    assert 0.8 <= slopes["milstein"] <= 1.2
    assert 0.4 <= slopes["euler"] <= 0.7
    assert elapsed < 600.0


def test_criterion_08_excitation_histograms_lean_left(eta_sweep):
    skews = {t: eta_sweep[1.0].histograms[t].skew_moment for t in SKEW_TIMES}
    print("criterion 8: moment skew "
          + ", ".join(f"{s:+.2f} @ t={t}" for t, s in skews.items()))
    assert all(s is not None and s < 0.0 for s in skews.values())


def test_criterion_09_property_suite(make_states):
    p = SweepParams(omega=2.0, alpha=10.0, gamma_decay=1.0, eta=1.0)

    # trace preserved (exactly) along a monitored trajectory
    worst = 0.0

    def obs(t, rho, dw):
        nonlocal worst
        worst = max(worst, abs((rho[0, 0] + rho[1, 1]).real - 1.0))

    integrate(GROUND, sample_path(0, 0, 2000, 1e-3), p,
              NumericsConfig(dt=1e-3), observer=obs)
    assert worst < 1e-12

    # generator identities on random states
    rng = np.random.default_rng(2)
    for rho in make_states(6):
        assert abs(np.trace(dissipator(rho))) < 1e-15
        assert abs(np.trace(homodyne_superop(rho, 0.3))) < 1e-14
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        h = 0.5 * (a + a.conj().T)
        step = 1e-6
        fd = (diffusion(rho + step * h, p) - diffusion(rho - step * h, p)) / (2 * step)
        assert np.allclose(diffusion_derivative(rho, h, p), fd, atol=1e-8)

    # unmonitored trajectory reproduces the master equation
    p0 = SweepParams(omega=2.0, alpha=10.0, gamma_decay=1.0, eta=0.0)
    fine = NumericsConfig(dt=2e-6, decimation=1000)
    gap = np.max(np.abs(simulate_conditional(p0, fine, 0).pe
                        - solve_unconditional(p0, fine).pe))
    assert gap < 1e-6

    # crossing-formula anchors
    assert 1.0 - lz_probability(SweepParams(omega=100.0, alpha=1.0e3)) == \
        pytest.approx(1.5e-7, rel=5e-3)
    assert lz_probability(SweepParams(omega=OMEGA_HALF, alpha=1.0e3)) == \
        pytest.approx(0.5, abs=1e-12)

    # worker count is statistically invisible, bit for bit
    ps = SweepParams(eta=0.9, **FAMILY)
    e = EnsembleConfig(n_traj=24, master_seed=3)
    one = run_ensemble(ps, DESK, e, n_workers=1)
    many = run_ensemble(ps, DESK, e, n_workers=8)
    assert np.array_equal(one.mean_pe, many.mean_pe)
    assert np.array_equal(one.summaries.max_excitation,
                          many.summaries.max_excitation)

    # threshold statistics are monotone and histograms conserve mass
    cs = sorted(one.exit_fractions)
    exits = [one.exit_fractions[c] for c in cs]
    dwells = [one.dwell[c][0] for c in cs]
    assert all(a >= b for a, b in zip(exits, exits[1:]))
    assert all(a >= b for a, b in zip(dwells, dwells[1:]))
    counts = [h.counts.sum() for h in
              _ensemble(ps, n_traj=50, histogram_times=(0.0, 0.2)).histograms.values()]
    assert counts == [50, 50]
    print("criterion 9: property suite clean")


def test_criterion_10_oscillator_phase_barely_matters(eta_sweep):
    baseline = eta_sweep[1.0].exit_fractions[0.96]
    rotated = _ensemble(SweepParams(eta=1.0, **dict(FAMILY, phi=0.5 * math.pi)))
    shifted = rotated.exit_fractions[0.96]
    print(f"criterion 10: exit(0.96) = {baseline:.3f} at phi=0, "
          f"{shifted:.3f} at phi=pi/2")
    assert abs(shifted - baseline) <= 0.05
