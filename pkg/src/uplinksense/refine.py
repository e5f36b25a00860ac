"""Fine-grid delay refinement and per-path Doppler/AoA/gain estimation.

Coarse grid supports are polished on a local fine grid, per-packet tap
coefficients are recovered by a ridge-regularized projection onto the refined
steering columns, and Doppler/AoA follow from conjugate products of those
coefficients.  The known-zero-Doppler LoS tap anchors the Doppler estimator:
multiplying by its slow-time product conjugates away the per-packet CFO and
phase-offset terms that are common to all taps of a UE.
"""

import json
from dataclasses import dataclass

import numpy as np

from .signal_model import delay_steering, subcarrier_frequencies

REF_ENERGY_GATE = 1e-12   # reference tap vs strongest tap
TAP_ENERGY_GATE = 1e-4    # reportable tap vs strongest tap


@dataclass(frozen=True)
class RefinedTaps:
    """Refined delays of one UE with their steering columns."""

    delays: np.ndarray    # (L,) seconds
    reduced: np.ndarray   # (N_k, L) steering columns at the refined delays
    los_ref: int          # index of the tap nearest the geometric LoS delay


@dataclass(frozen=True)
class PathEstimates:
    """All per-path parameter estimates of one UE."""

    delays: np.ndarray
    dopplers: np.ndarray          # Hz; NaN when gated, 0 at los_ref
    aoas: np.ndarray              # radians; NaN when gated
    gain_powers: np.ndarray       # |alpha|^2, linear
    los_ref: int
    doppler_reliable: np.ndarray  # bool per tap
    aoa_clamped: np.ndarray       # bool per tap


@dataclass(frozen=True)
class EstimateSet:
    """Per-UE path estimates plus a structured-text emitter."""

    per_ue: list

    def to_report(self):
        paths = []
        for k, ue in enumerate(self.per_ue):
            for l in range(len(ue.delays)):
                paths.append({
                    "ue": k + 1,
                    "path": l + 1,
                    "delay_s": float(ue.delays[l]),
                    "doppler_hz": float(ue.dopplers[l]),
                    "aoa_rad": float(ue.aoas[l]),
                    "gain_power": float(ue.gain_powers[l]),
                    "is_los_ref": l == ue.los_ref,
                    "doppler_reliable": bool(ue.doppler_reliable[l]),
                    "aoa_clamped": bool(ue.aoa_clamped[l]),
                })
        return json.dumps({"paths": paths}, indent=2)


def fine_candidates(coarse, coarse_spacing, factor=4, half_width=8,
                    tau_max=None):
    """2*half_width+1 fine-grid delays around one coarse tap, clipped to the
    physical range."""
    cands = coarse + np.arange(-half_width, half_width + 1) * (coarse_spacing / factor)
    hi = np.inf if tau_max is None else tau_max
    return np.clip(cands, 0.0, hi)


def refine_delays(ytilde, coarse_delays, tau_geom, subcarrier_set, spacing,
                  coarse_spacing, factor=4, half_width=8, tau_max=None):
    """Argmax of the matched-filter energy on each tap's local fine grid."""
    ytilde = np.asarray(ytilde)
    freqs = subcarrier_frequencies(np.asarray(subcarrier_set), spacing)
    refined = np.empty(len(coarse_delays))
    peak_energy = np.empty(len(coarse_delays))
    for l, coarse in enumerate(np.asarray(coarse_delays, dtype=float)):
        cands = fine_candidates(coarse, coarse_spacing, factor, half_width,
                                tau_max)
        steer = np.exp(-2j * np.pi * np.outer(freqs, cands))
        p = (np.abs(steer.conj().T @ ytilde) ** 2).sum(axis=1)
        best = int(np.argmax(p))
        refined[l] = cands[best]
        peak_energy[l] = p[best]
    reduced = np.stack(
        [delay_steering(tau, subcarrier_set, spacing) for tau in refined],
        axis=1,
    )
    dist = np.abs(refined - tau_geom)
    near = np.flatnonzero(dist <= dist.min() + 1e-18)
    los_ref = int(near[np.argmax(peak_energy[near])])
    return RefinedTaps(delays=refined, reduced=reduced, los_ref=los_ref)


def ls_project(y, reduced, ridge=1e-3):
    """Ridge-regularized projection of one packet onto the refined columns."""
    b = np.asarray(reduced)
    system = b.conj().T @ b + ridge * np.eye(b.shape[1])
    return np.linalg.solve(system, b.conj().T @ np.asarray(y))


def _tap_energies(coeffs):
    return (np.abs(coeffs) ** 2).mean(axis=(0, 2))


def estimate_doppler(coeffs, los_ref, packet_interval, *,
                     ref_gate=REF_ENERGY_GATE, tap_gate=TAP_ENERGY_GATE):
    """Doppler per tap from LoS-referenced slow-time conjugate products.

    coeffs: (T, L, M).  Returns (doppler Hz, reliable) arrays of length L;
    the reference tap reports 0 by definition, gated taps report NaN.
    """
    coeffs = np.asarray(coeffs)
    num_taps = coeffs.shape[1]
    energy = _tap_energies(coeffs)
    doppler = np.full(num_taps, np.nan)
    reliable = np.zeros(num_taps, dtype=bool)
    doppler[los_ref] = 0.0
    if energy[los_ref] < ref_gate * energy.max():
        return doppler, reliable
    reliable[los_ref] = True
    ref_prod = np.einsum("tm,tm->t", coeffs[:-1, los_ref],
                         coeffs[1:, los_ref].conj())
    tap_prod = np.einsum("tlm,tlm->tl", coeffs[:-1].conj(), coeffs[1:])
    acc = (ref_prod[:, None] * tap_prod).sum(axis=0)
    for l in range(num_taps):
        if l == los_ref:
            continue
        if energy[l] < tap_gate * energy.max():
            continue
        doppler[l] = np.angle(acc[l]) / (2 * np.pi * packet_interval)
        reliable[l] = True
    return doppler, reliable


def estimate_aoa_gain(coeffs, *, tap_gate=TAP_ENERGY_GATE):
    """AoA and gain power per tap from adjacent-antenna conjugate products.

    With the array response exp(+j pi (m-1) sin theta), the product
    x_m x*_{m+1} carries exp(-j pi sin theta), hence the minus sign.
    """
    coeffs = np.asarray(coeffs)
    t_pkts, num_taps, m_ant = coeffs.shape
    c = np.einsum("tlm,tlm->l", coeffs[:, :, :-1], coeffs[:, :, 1:].conj())
    c /= t_pkts * (m_ant - 1)
    sine = -np.angle(c) / np.pi
    clamped = np.abs(sine) > 1.0
    theta = np.arcsin(np.clip(sine, -1.0, 1.0))
    gain = np.abs(c)
    energy = _tap_energies(coeffs)
    theta = np.where(energy < tap_gate * energy.max(), np.nan, theta)
    return theta, gain, clamped


def estimate_path_parameters(csi, supports, los_geom_delay, sp, *,
                             subcarrier_spacing, packet_interval, ridge=1e-3,
                             factor=4, half_width=8):
    """Full refinement stage: supports -> EstimateSet for every UE."""
    data = np.asarray(csi.data)
    num_ues, t_pkts, n_k, m_ant = data.shape
    per_ue = []
    for k in range(num_ues):
        ytilde = np.ascontiguousarray(
            data[k].transpose(1, 0, 2).reshape(n_k, t_pkts * m_ant)
        )
        refined = refine_delays(
            ytilde, supports[k].delays, los_geom_delay[k],
            csi.subcarrier_sets[k], subcarrier_spacing,
            coarse_spacing=sp.grid_spacing, factor=factor,
            half_width=half_width, tau_max=sp.tau_max,
        )
        coeffs = np.stack([
            ls_project(data[k, t], refined.reduced, ridge)
            for t in range(t_pkts)
        ])  # (T, L, M)
        doppler, reliable = estimate_doppler(coeffs, refined.los_ref,
                                             packet_interval)
        theta, gain, clamped = estimate_aoa_gain(coeffs)
        per_ue.append(PathEstimates(
            delays=refined.delays, dopplers=doppler, aoas=theta,
            gain_powers=gain, los_ref=refined.los_ref,
            doppler_reliable=reliable, aoa_clamped=clamped,
        ))
    return EstimateSet(per_ue=per_ue)
