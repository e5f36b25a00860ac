"""Tests for LoS-referenced timing-offset estimation and compensation.

Oracles: a scalar triple-loop periodogram, the analytic parabola vertex, and
a brute-force dense-grid argmax for the sub-bin refinement.
"""

import numpy as np
import pytest

from uplinksense.calibration import (
    LosTimingCalibrator,
    compensate_to,
    default_search_grid,
    delay_periodogram,
    estimate_to,
    parabolic_refine,
)
from uplinksense.config import SparsityConfig, SystemConfig
from uplinksense.signal_model import (
    OffsetTrace,
    delay_steering,
    sample_offsets,
    sample_scenario,
    synthesize_csi,
)
from tests.test_signal_model import manual_scenario, small_system


def periodogram_oracle(y, sset, grid, spacing):
    """Scalar triple loop over (grid point, subcarrier, antenna)."""
    n_k, m = y.shape
    out = np.zeros(len(grid))
    for g, tau in enumerate(grid):
        for mm in range(m):
            acc = 0.0 + 0.0j
            for i, n in enumerate(sset):
                d = np.exp(-2j * np.pi * (n - 1) * spacing * tau)
                acc += np.conj(d) * y[i, mm]
            out[g] += abs(acc) ** 2
    return out / m


def test_periodogram_matches_triple_loop_oracle():
    rng = np.random.default_rng(0)
    y = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    sset = np.array([2, 5, 6, 9])
    grid = np.linspace(0, 2e-6, 8)
    p = delay_periodogram(y, sset, grid, 60e3)
    np.testing.assert_allclose(p, periodogram_oracle(y, sset, grid, 60e3), rtol=1e-12)


def test_periodogram_peak_at_true_delay():
    sset = np.arange(1, 65)
    tau = 1.0e-6
    psi = delay_steering(tau, sset, 60e3)
    y = np.outer(psi, [1.0, 0.5 + 0.5j])
    grid = np.linspace(0, 2.5e-6, 251)  # tau on this grid
    p = delay_periodogram(y, sset, grid, 60e3)
    assert grid[np.argmax(p)] == pytest.approx(tau, abs=1e-15)


def test_periodogram_zero_input():
    p = delay_periodogram(np.zeros((4, 2), complex), np.arange(1, 5), np.linspace(0, 1e-6, 5), 60e3)
    assert not np.any(p)
    assert np.all(p >= 0)


def test_parabolic_symmetric_peak_zero_offset():
    assert parabolic_refine(2.0, 5.0, 2.0, 1e-9) == 0.0


def test_parabolic_recovers_exact_parabola_vertex():
    # p(x) = 1 - (x - 0.3)^2 sampled at x = -1, 0, 1 (spacing 1)
    p = lambda x: 1 - (x - 0.3) ** 2
    off = parabolic_refine(p(-1.0), p(0.0), p(1.0), 1.0)
    assert off == pytest.approx(0.3, abs=1e-12)


def test_parabolic_arithmetic_example():
    assert parabolic_refine(1.0, 4.0, 3.0, 1.0) == pytest.approx(0.25)


def test_parabolic_flat_triple_returns_zero():
    assert parabolic_refine(3.0, 3.0, 3.0, 1.0) == 0.0


def test_parabolic_offset_bounded_by_half_spacing():
    rng = np.random.default_rng(1)
    for _ in range(200):
        sides = rng.uniform(0, 1, size=2)
        peak = max(sides) + rng.uniform(0, 1)
        off = parabolic_refine(sides[0], peak, sides[1], 1.0)
        assert abs(off) <= 0.5 + 1e-12


# ---------------------------------------------------------------- estimate_to

def los_only_csi(sys_cfg, tau_geom, timing, aoa=0.2):
    """Single-UE, LoS-only CSI with a per-packet injected timing offset."""
    n_packets = len(timing)
    sset = np.arange(1, 129)
    scn = manual_scenario(
        sset.reshape(1, -1), [[tau_geom]], [[0.0]], [[aoa]], [[2.0 + 1.0j]],
        [[True]], geom=[tau_geom],
    )
    off = OffsetTrace(
        timing=np.asarray(timing, float).reshape(1, -1),
        cfo=np.zeros((1, n_packets)),
        phase=np.zeros((1, n_packets)),
    )
    csi = synthesize_csi(scn, off, sys_cfg, np.random.default_rng(0))
    return scn, off, csi


def test_estimate_to_zero_offset_noise_free_exact():
    sys_cfg = small_system(num_antennas=4, num_packets=2, num_subcarriers=128)
    tau_geom = 0.8e-6
    scn, off, csi = los_only_csi(sys_cfg, tau_geom, [0.0, 0.0])
    grid, step = default_search_grid(tau_geom, 128, sys_cfg.subcarrier_spacing, sys_cfg.bandwidth)
    ent = estimate_to(csi.data[0, 0], tau_geom, grid, scn.subcarrier_sets[0],
                      sys_cfg.subcarrier_spacing)
    assert abs(ent.offset) < 1e-18
    assert not ent.boundary


def test_estimate_to_step_multiple_offsets_exact_noise_free():
    # offsets landing on the search grid are recovered exactly: the peak
    # neighborhood is symmetric so the parabolic correction vanishes
    sys_cfg = small_system(num_antennas=4, num_packets=3, num_subcarriers=128)
    tau_geom = 1.1e-6
    grid, step = default_search_grid(tau_geom, 128, sys_cfg.subcarrier_spacing, sys_cfg.bandwidth)
    injected = [0.0, step, 3 * step]
    scn, off, csi = los_only_csi(sys_cfg, tau_geom, injected)
    for t, true_to in enumerate(injected):
        ent = estimate_to(csi.data[0, t], tau_geom, grid, scn.subcarrier_sets[0],
                          sys_cfg.subcarrier_spacing)
        assert abs(ent.offset - true_to) < 1e-16


def test_estimate_to_fifty_ns_at_snr15_within_one_step():
    sys_cfg = small_system(num_antennas=8, num_packets=2, num_subcarriers=128, snr_db=15.0)
    tau_geom = 0.6e-6
    scn, off, csi = los_only_csi(sys_cfg, tau_geom, [50e-9, 50e-9])
    grid, step = default_search_grid(tau_geom, 128, sys_cfg.subcarrier_spacing, sys_cfg.bandwidth)
    ent = estimate_to(csi.data[0, 0], tau_geom, grid, scn.subcarrier_sets[0],
                      sys_cfg.subcarrier_spacing)
    assert abs(ent.offset - 50e-9) < step

    # brute-force dense-grid argmax oracle agrees to a fraction of a step
    dense = np.linspace(grid[0], grid[-1], 20001)
    p = delay_periodogram(csi.data[0, 0], scn.subcarrier_sets[0], dense,
                          sys_cfg.subcarrier_spacing)
    oracle = dense[np.argmax(p)] - tau_geom
    assert abs(ent.offset - oracle) < step / 4


def test_estimate_to_independent_per_packet():
    sys_cfg = small_system(num_antennas=4, num_packets=2, num_subcarriers=128)
    tau_geom = 0.9e-6
    scn, off, csi = los_only_csi(sys_cfg, tau_geom, [10e-9, 90e-9])
    grid, _ = default_search_grid(tau_geom, 128, sys_cfg.subcarrier_spacing, sys_cfg.bandwidth)
    ents = [
        estimate_to(csi.data[0, t], tau_geom, grid, scn.subcarrier_sets[0],
                    sys_cfg.subcarrier_spacing)
        for t in range(2)
    ]
    assert abs(ents[0].offset - 10e-9) < 5e-9
    assert abs(ents[1].offset - 90e-9) < 5e-9


def test_estimate_to_boundary_peak_flagged_and_coarse():
    sys_cfg = small_system(num_antennas=4, num_packets=2, num_subcarriers=128)
    tau_geom = 1.0e-6
    scn, off, csi = los_only_csi(sys_cfg, tau_geom, [0.0, 0.0])
    # a grid starting exactly at the peak forces the boundary path
    step = 1.0 / (4 * 128 * sys_cfg.subcarrier_spacing)
    grid = tau_geom + np.arange(6) * step
    ent = estimate_to(csi.data[0, 0], tau_geom, grid, scn.subcarrier_sets[0],
                      sys_cfg.subcarrier_spacing)
    assert ent.boundary
    assert ent.offset == 0.0


# ---------------------------------------------------------------- compensate

def test_compensate_zero_offset_is_identity():
    rng = np.random.default_rng(2)
    y = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    out = compensate_to(y, 0.0, np.arange(1, 7), 60e3)
    np.testing.assert_array_equal(out, y)


def test_compensate_round_trip():
    rng = np.random.default_rng(3)
    y = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    sset = np.arange(4, 10)
    back = compensate_to(compensate_to(y, 37e-9, sset, 60e3), -37e-9, sset, 60e3)
    np.testing.assert_allclose(back, y, atol=1e-14)


def test_compensate_unitary_per_subcarrier():
    rng = np.random.default_rng(4)
    y = rng.standard_normal((16, 4)) + 1j * rng.standard_normal((16, 4))
    out = compensate_to(y, 80e-9, np.arange(1, 17), 60e3)
    np.testing.assert_allclose(np.abs(out), np.abs(y), atol=1e-14)
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(y), rel=1e-14)


def test_compensate_exact_offset_restores_steering_column_space():
    sys_cfg = small_system(num_antennas=4, num_subcarriers=128)
    tau, delta = 0.7e-6, 63e-9
    scn, off, csi = los_only_csi(sys_cfg, tau, [delta, delta])
    bar = compensate_to(csi.data[0, 0], delta, scn.subcarrier_sets[0],
                        sys_cfg.subcarrier_spacing)
    psi = delay_steering(tau, scn.subcarrier_sets[0], sys_cfg.subcarrier_spacing)
    proj = np.outer(psi, psi.conj()) @ bar / (np.abs(psi) ** 2).sum()
    assert np.linalg.norm(bar - proj) < 1e-10 * np.linalg.norm(bar)


# ------------------------------------------------------------ full pipeline

def test_calibrator_median_error_small_at_snr10():
    sys_cfg = SystemConfig(num_packets=25, snr_db=10.0)
    sp_cfg = SparsityConfig()
    rng = np.random.default_rng(5)
    scn = sample_scenario(sys_cfg, sp_cfg, rng)
    off = sample_offsets(sys_cfg, rng)
    csi = synthesize_csi(scn, off, sys_cfg, rng)
    cal = LosTimingCalibrator(
        subcarrier_spacing=sys_cfg.subcarrier_spacing, bandwidth=sys_cfg.bandwidth
    ).fit(csi, scn.los_geom_delay)
    err = np.abs(cal.to_estimate_ - off.timing)
    assert err.size == 200
    bin_width = 1.0 / (sp_cfg.per_ue_subcarriers * sys_cfg.subcarrier_spacing)
    assert np.median(err) < bin_width / 10


def test_calibrator_transform_preserves_magnitudes():
    sys_cfg = SystemConfig(num_ues=2, num_packets=4, snr_db=12.0, num_subcarriers=256)
    sp_cfg = SparsityConfig(per_ue_subcarriers=64, num_clusters_true=2,
                            num_clusters_candidate=2)
    rng = np.random.default_rng(6)
    scn = sample_scenario(sys_cfg, sp_cfg, rng)
    off = sample_offsets(sys_cfg, rng)
    csi = synthesize_csi(scn, off, sys_cfg, rng)
    cal = LosTimingCalibrator(subcarrier_spacing=sys_cfg.subcarrier_spacing).fit(
        csi, scn.los_geom_delay
    )
    out = cal.transform(csi)
    np.testing.assert_allclose(np.abs(out.data), np.abs(csi.data), atol=1e-12)
    assert out.data.shape == csi.data.shape


def test_calibrator_diagnostics_table():
    sys_cfg = SystemConfig(num_ues=2, num_packets=3, snr_db=None, num_subcarriers=256)
    sp_cfg = SparsityConfig(per_ue_subcarriers=64, num_clusters_true=2,
                            num_clusters_candidate=2)
    rng = np.random.default_rng(7)
    scn = sample_scenario(sys_cfg, sp_cfg, rng)
    off = sample_offsets(sys_cfg, rng)
    csi = synthesize_csi(scn, off, sys_cfg, rng)
    cal = LosTimingCalibrator(subcarrier_spacing=sys_cfg.subcarrier_spacing).fit(
        csi, scn.los_geom_delay
    )
    table = cal.diagnostics_table(true_offsets=off)
    lines = table.strip().splitlines()
    assert lines[0] == "ue,packet,observed_los_delay_s,to_estimate_s,boundary,true_to_s"
    assert len(lines) == 1 + 2 * 3
