"""Compiled inner loops for the stochastic and deterministic integrators.

Everything here is a scalar-arithmetic restatement of the public maps in
`dynamics`, the steppers in `sde` and the normalization in `qubit`,
specialized to 2x2 states held as four complex entries (rgg, rge, reg,
ree).  The public numpy functions remain the contract; tests assert the
two agree to float noise on random states.  The loops are numba-compiled
with nogil so trajectory ensembles parallelize over plain Python threads.

The stochastic step mirrors sde.em_step / sde.milstein_step, including the
two structural choices explained in the sde module docstring: the stiff
detuning advances by a closed-form rotation rather than an explicit term,
and the strong-order-1 scheme is built as a completely positive Kraus
update so it can never leave the Bloch ball.  The deterministic reference
keeps the full drift and integrates it classically at 4th order, which is
stable because its stability region covers the imaginary axis up to
|delta| * dt near 2.8.

Status codes returned by the loops:
    0  finished
    1  trace became non-positive at the reported step
    2  Bloch norm exceeded 1 + MAX_STEP_OVERSHOOT at the reported step
    3  state stopped being finite at the reported step
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .qubit import MAX_STEP_OVERSHOOT

STATUS_OK = 0
STATUS_TRACE = 1
STATUS_BLOCH = 2
STATUS_NONFINITE = 3

_BLOW_LIMIT_SQ = (1.0 + MAX_STEP_OVERSHOOT) ** 2


@njit(inline="always")
def _drift(rgg, rge, reg, ree, hx, delta, gam):
    # -i[H, rho] + gam * D[sigma_-]rho with H = [[0, hx], [hx, -delta]]
    c_gg = hx * (reg - rge)
    c_ge = hx * (ree - rgg) + delta * rge
    c_eg = hx * (rgg - ree) - delta * reg
    c_ee = hx * (rge - reg)
    a_gg = -1j * c_gg + gam * ree
    a_ge = -1j * c_ge - 0.5 * gam * rge
    a_eg = -1j * c_eg - 0.5 * gam * reg
    a_ee = -1j * c_ee - gam * ree
    return a_gg, a_ge, a_eg, a_ee


@njit(inline="always")
def _diffusion(rgg, rge, reg, ree, ep, em, scale):
    # scale * (c rho + rho c+ - <c + c+> rho), c = ep * sigma_-
    m = ep * reg + em * rge
    b_gg = scale * (ep * reg + em * rge - m * rgg)
    b_ge = scale * (ep * ree - m * rge)
    b_eg = scale * (em * ree - m * reg)
    b_ee = scale * (-m * ree)
    return b_gg, b_ge, b_eg, b_ee, m


@njit(inline="always")
def _diffusion_derivative(rgg, rge, reg, ree, m,
                          h_gg, h_ge, h_eg, h_ee, ep, em, scale):
    # Frechet derivative of the diffusion map at rho along h
    mh = ep * h_eg + em * h_ge
    d_gg = scale * (ep * h_eg + em * h_ge - mh * rgg - m * h_gg)
    d_ge = scale * (ep * h_ee - mh * rge - m * h_ge)
    d_eg = scale * (em * h_ee - mh * reg - m * h_eg)
    d_ee = scale * (-mh * ree - m * h_ee)
    return d_gg, d_ge, d_eg, d_ee


@njit(inline="always")
def _renormalize(rgg, rge, reg, ree):
    # Symmetrize, rescale to trace exactly 1.0 (complement the larger
    # diagonal), then put any overshoot back on the Bloch sphere.  Mirrors
    # qubit.normalize followed by qubit.project_physical bit for bit.
    d_g = rgg.real
    d_e = ree.real
    coh = 0.5 * (rge + reg.conjugate())
    tr = d_g + d_e
    if not tr > 0.0:
        return rgg, rge, reg, ree, STATUS_TRACE
    if d_g <= d_e:
        p_g = d_g / tr
        p_e = 1.0 - p_g
    else:
        p_e = d_e / tr
        p_g = 1.0 - p_e
    coh = coh / tr
    x = 2.0 * coh.real
    y = -2.0 * coh.imag
    z = p_e - p_g
    r2 = x * x + y * y + z * z
    if not r2 <= _BLOW_LIMIT_SQ:  # catches NaN too
        return rgg, rge, reg, ree, STATUS_BLOCH
    if r2 > 1.0:
        inv = 1.0 / math.sqrt(r2)
        coh = coh * inv
        z = z * inv
        if z >= 0.0:
            p_g = 0.5 * (1.0 - z)
            p_e = 1.0 - p_g
        else:
            p_e = 0.5 * (1.0 + z)
            p_g = 1.0 - p_e
    return (complex(p_g, 0.0), coh, coh.conjugate(), complex(p_e, 0.0), STATUS_OK)


@njit(inline="always")
def _sde_step(rgg, rge, reg, ree, t, dt, dw,
              hx, alpha, gam, ep, em, eta, use_milstein, renorm):
    # Integrating-factor step: the smooth part (drive + decay + measurement)
    # advances explicitly at frozen time t; the stiff detuning rotation is
    # applied afterwards in closed form (exact integral of alpha * s over
    # the step).  An explicit detuning term would amplify the coherence by
    # sqrt(1 + (delta dt)^2) per step and diverge in the sweep wings.
    scale = math.sqrt(eta * gam)
    if use_milstein:
        # Kraus factorization M rho M+ + (1 - eta) L rho L+ dt with
        # M = 1 - (i H + L+L / 2) dt + sqrt(eta) dy L, L = sqrt(gam) e^{i phi}
        # sigma_-, dy = sqrt(eta) <L + L+> dt + dW.  Expanding in dW
        # reproduces drift, diffusion and the Milstein correction exactly
        # (the dW^2 coefficient of any smooth one-step map of a single-noise
        # SDE is the Milstein term), so this is the strong-order-1 scheme of
        # the module contract, packaged so the update is completely positive
        # and the state can never leave the Bloch ball.
        s = (ep * reg + em * rge).real
        g = scale * (scale * s * dt + dw)
        # M entries: m_gg = 1, m_ge = -i hx dt + g e^{i phi},
        #            m_eg = -i hx dt, m_ee = 1 - gam dt / 2
        q = complex(0.0, -hx * dt) + g * ep
        r = complex(0.0, -hx * dt)
        w = 1.0 - 0.5 * gam * dt
        u = rgg + q * reg          # (M rho) row g entries
        v = rge + q * ree
        n_gg = u + v * q.conjugate()
        n_ge = u * r.conjugate() + v * w
        n_ee = (r * rgg + w * reg) * r.conjugate() + (r * rge + w * ree) * w
        n_gg = n_gg + (1.0 - eta) * gam * dt * ree
        n_eg = n_ge.conjugate()
    else:
        a_gg, a_ge, a_eg, a_ee = _drift(rgg, rge, reg, ree, hx, 0.0, gam)
        b_gg, b_ge, b_eg, b_ee, m = _diffusion(rgg, rge, reg, ree, ep, em, scale)
        n_gg = rgg + a_gg * dt + b_gg * dw
        n_ge = rge + a_ge * dt + b_ge * dw
        n_eg = reg + a_eg * dt + b_eg * dw
        n_ee = ree + a_ee * dt + b_ee * dw
    theta = alpha * dt * (t + 0.5 * dt)
    phase = complex(math.cos(theta), -math.sin(theta))
    n_ge = n_ge * phase
    n_eg = n_eg * phase.conjugate()
    if renorm:
        return _renormalize(n_gg, n_ge, n_eg, n_ee)
    if not math.isfinite(n_ee.real):
        return n_gg, n_ge, n_eg, n_ee, STATUS_NONFINITE
    return n_gg, n_ge, n_eg, n_ee, STATUS_OK


@njit(cache=True, nogil=True)
def sde_step(rgg, rge, reg, ree, t, dt, dw,
             omega, alpha, gam, phi, eta, use_milstein, renorm):
    """Single conditional step; entry point for observer-driven loops."""
    ep = complex(math.cos(phi), math.sin(phi))
    em = ep.conjugate()
    return _sde_step(rgg, rge, reg, ree, t, dt, dw,
                     0.5 * omega, alpha, gam, ep, em, eta,
                     use_milstein, renorm)


@njit(cache=True, nogil=True)
def run_conditional(rgg, rge, reg, ree, t0, dt, dws,
                    omega, alpha, gam, phi, eta,
                    use_milstein, renorm, decim,
                    thresholds, dwell_counts,
                    pe_out, store_state, state_out, store_dq, dq_out):
    """Integrate one monitored trajectory and accumulate its summaries.

    dws has one Normal(0, dt) increment per step.  Every `decim`-th state
    is written to pe_out (and state_out / dq_out when the flags are set);
    slot 0 holds the initial state.  dq_out gets the photocurrent summed
    over each storage block, so the integrated record at stored times is
    exact.  Summary statistics live on the stored grid: the dwell counters
    advance once per stored sample (each then worth decim * dt of sweep
    time; the initial slot carries no weight) and the maximum excitation is
    left to the caller as the max over pe_out.  decim = 1 recovers
    per-step accounting exactly.

    Returns (status, fail_step, rgg, rge, reg, ree).
    """
    n = dws.shape[0]
    n_thr = thresholds.shape[0]
    ep = complex(math.cos(phi), math.sin(phi))
    em = ep.conjugate()
    hx = 0.5 * omega
    cur_det = gam * math.sqrt(eta) if eta > 0.0 else 0.0
    cur_noise = math.sqrt(gam / eta) if eta > 0.0 else 0.0

    tr0 = rgg.real + ree.real
    pe_out[0] = ree.real / tr0
    if store_state:
        coh = 0.5 * (rge + reg.conjugate())
        state_out[0, 0] = 2.0 * coh.real / tr0
        state_out[0, 1] = -2.0 * coh.imag / tr0
        state_out[0, 2] = (ree.real - rgg.real) / tr0
        state_out[0, 3] = (rgg.real**2 + ree.real**2 + 2.0 * abs(coh) ** 2) / tr0**2
    if store_dq:
        dq_out[0] = 0.0
    block_dq = 0.0

    for k in range(n):
        t = t0 + k * dt
        dw = dws[k]
        if store_dq:
            m_pre = (ep * reg + em * rge).real
            block_dq += cur_det * m_pre * dt + cur_noise * dw
        rgg, rge, reg, ree, status = _sde_step(
            rgg, rge, reg, ree, t, dt, dw,
            hx, alpha, gam, ep, em, eta, use_milstein, renorm)
        if status != STATUS_OK:
            return status, k, rgg, rge, reg, ree

        if (k + 1) % decim == 0:
            tr = rgg.real + ree.real
            pe = ree.real / tr
            for j in range(n_thr):
                if pe >= thresholds[j]:
                    dwell_counts[j] += 1
                else:
                    break
            idx = (k + 1) // decim
            pe_out[idx] = pe
            if store_state:
                coh = 0.5 * (rge + reg.conjugate())
                state_out[idx, 0] = 2.0 * coh.real / tr
                state_out[idx, 1] = -2.0 * coh.imag / tr
                state_out[idx, 2] = (ree.real - rgg.real) / tr
                state_out[idx, 3] = (rgg.real**2 + ree.real**2
                                     + 2.0 * abs(coh) ** 2) / tr**2
            if store_dq:
                dq_out[idx] = block_dq
                block_dq = 0.0

    return STATUS_OK, n, rgg, rge, reg, ree


@njit(cache=True, nogil=True)
def run_terminal(rgg, rge, reg, ree, t0, dt, dws,
                 omega, alpha, gam, phi, eta, use_milstein, renorm):
    """Bare conditional integration keeping only the terminal state.

    Used by the strong-convergence harness where per-step bookkeeping
    would dominate the runtime.
    """
    n = dws.shape[0]
    ep = complex(math.cos(phi), math.sin(phi))
    em = ep.conjugate()
    hx = 0.5 * omega
    for k in range(n):
        rgg, rge, reg, ree, status = _sde_step(
            rgg, rge, reg, ree, t0 + k * dt, dt, dws[k],
            hx, alpha, gam, ep, em, eta, use_milstein, renorm)
        if status != STATUS_OK:
            return status, k, rgg, rge, reg, ree
    return STATUS_OK, n, rgg, rge, reg, ree


@njit(cache=True, nogil=True)
def run_reference(rgg, rge, reg, ree, t0, dt, n,
                  omega, alpha, gam, decim,
                  pe_out, state_out):
    """Classical 4th-order integration of the deterministic master equation.

    Runs raw (no per-step renormalization; the flow is trace preserving)
    and reports the worst |trace - 1| seen so callers can assert the drift
    stays at rounding level.  gam = 0 gives the unitary reference.

    Returns (status, fail_step, max_pe, max_trace_drift, rgg, rge, reg, ree).
    """
    hx = 0.5 * omega
    half = 0.5 * dt
    sixth = dt / 6.0

    tr = rgg.real + ree.real
    pe = ree.real / tr
    max_pe = pe
    max_drift = abs(tr - 1.0)
    pe_out[0] = pe
    coh = 0.5 * (rge + reg.conjugate())
    state_out[0, 0] = 2.0 * coh.real / tr
    state_out[0, 1] = -2.0 * coh.imag / tr
    state_out[0, 2] = (ree.real - rgg.real) / tr
    state_out[0, 3] = (rgg.real**2 + ree.real**2 + 2.0 * abs(coh) ** 2) / tr**2

    for k in range(n):
        t = t0 + k * dt
        d0 = alpha * t
        dh = alpha * (t + half)
        d1 = alpha * (t + dt)

        k1_gg, k1_ge, k1_eg, k1_ee = _drift(rgg, rge, reg, ree, hx, d0, gam)
        k2_gg, k2_ge, k2_eg, k2_ee = _drift(
            rgg + half * k1_gg, rge + half * k1_ge,
            reg + half * k1_eg, ree + half * k1_ee, hx, dh, gam)
        k3_gg, k3_ge, k3_eg, k3_ee = _drift(
            rgg + half * k2_gg, rge + half * k2_ge,
            reg + half * k2_eg, ree + half * k2_ee, hx, dh, gam)
        k4_gg, k4_ge, k4_eg, k4_ee = _drift(
            rgg + dt * k3_gg, rge + dt * k3_ge,
            reg + dt * k3_eg, ree + dt * k3_ee, hx, d1, gam)

        rgg = rgg + sixth * (k1_gg + 2.0 * (k2_gg + k3_gg) + k4_gg)
        rge = rge + sixth * (k1_ge + 2.0 * (k2_ge + k3_ge) + k4_ge)
        reg = reg + sixth * (k1_eg + 2.0 * (k2_eg + k3_eg) + k4_eg)
        ree = ree + sixth * (k1_ee + 2.0 * (k2_ee + k3_ee) + k4_ee)

        tr = rgg.real + ree.real
        if not math.isfinite(tr):
            return STATUS_NONFINITE, k, max_pe, max_drift, rgg, rge, reg, ree
        drift_now = abs(tr - 1.0)
        if drift_now > max_drift:
            max_drift = drift_now
        pe = ree.real / tr
        if pe > max_pe:
            max_pe = pe
        if (k + 1) % decim == 0:
            idx = (k + 1) // decim
            pe_out[idx] = pe
            coh = 0.5 * (rge + reg.conjugate())
            state_out[idx, 0] = 2.0 * coh.real / tr
            state_out[idx, 1] = -2.0 * coh.imag / tr
            state_out[idx, 2] = (ree.real - rgg.real) / tr
            state_out[idx, 3] = (rgg.real**2 + ree.real**2
                                 + 2.0 * abs(coh) ** 2) / tr**2

    return STATUS_OK, n, max_pe, max_drift, rgg, rge, reg, ree
