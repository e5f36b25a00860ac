"""Ground-truth scenario sampling and asynchronous uplink CSI synthesis.

The model: K single-antenna UEs transmit on disjoint contiguous subcarrier
blocks to an M-element ULA. For UE k and packet t the delay-domain CSI is

    Y_k[t] = sum_l psi_k(tau_kl + dtau_k[t]) * s_kl[t]^T + E_k[t]

with per-path slow-time coefficient

    s_kl[t] = alpha_kl * exp(j beta_k[t])
              * exp(j 2 pi t T_A (nu_kl + dnu_k[t])) * a(theta_kl),

where psi_k is the delay steering vector over UE k's subcarriers, a() the
array response, and (dtau, dnu, beta) the packet-dependent timing, carrier
frequency, and phase offsets. The packet index t is 1-based in the slow-time
phase. Subcarrier indices are 1-based; subcarrier n sits at baseband
frequency (n - 1) * subcarrier_spacing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SparsityConfig, SystemConfig, validate_configs

__all__ = [
    "Scenario",
    "OffsetTrace",
    "CsiTensor",
    "allocate_subcarriers",
    "subcarrier_frequencies",
    "delay_steering",
    "array_response",
    "sample_scenario",
    "sample_offsets",
    "synthesize_csi",
]


# ----------------------------------------------------------------- types

@dataclass
class Scenario:
    """True multipath geometry for one trial.

    Arrays are indexed [ue, path]. Exactly one path per UE is the LoS tap;
    its delay equals ``los_geom_delay`` (known at the receiver) and its
    Doppler is zero. All UEs sharing a ``cluster_labels`` value have
    identical shared (non-private) delay values.
    """

    cluster_labels: np.ndarray   # (K,) int, 1-based cluster ids
    subcarrier_sets: np.ndarray  # (K, N_k) int, 1-based subcarrier indices
    delays: np.ndarray           # (K, L) seconds
    dopplers: np.ndarray         # (K, L) Hz
    aoas: np.ndarray             # (K, L) radians
    gains: np.ndarray            # (K, L) complex
    is_los: np.ndarray           # (K, L) bool
    los_geom_delay: np.ndarray   # (K,) seconds
    on_grid: bool = False

    @property
    def num_ues(self) -> int:
        return self.delays.shape[0]

    @property
    def num_paths(self) -> int:
        return self.delays.shape[1]


@dataclass
class OffsetTrace:
    """Per-(UE, packet) timing offset (s), CFO (Hz), and phase offset (rad)."""

    timing: np.ndarray  # (K, T)
    cfo: np.ndarray     # (K, T)
    phase: np.ndarray   # (K, T)

    @classmethod
    def zeros(cls, num_ues: int, num_packets: int) -> "OffsetTrace":
        shape = (num_ues, num_packets)
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape))


@dataclass
class CsiTensor:
    """Observed (or noise-free) CSI, shape (K, T, N_k, M).

    ``noise_precision_true`` is 1 / noise variance per complex element;
    ``inf`` when noise is disabled.
    """

    data: np.ndarray
    subcarrier_sets: np.ndarray
    noise_precision_true: float

    @property
    def num_ues(self) -> int:
        return self.data.shape[0]

    @property
    def num_packets(self) -> int:
        return self.data.shape[1]


# ------------------------------------------------------------- primitives

def allocate_subcarriers(num_total: int, num_ues: int, per_ue: int) -> list[np.ndarray]:
    """Contiguous disjoint 1-based index blocks: UE k gets {(k-1)*per_ue+1, ..., k*per_ue}."""
    if num_ues * per_ue > num_total:
        raise ValueError(
            "subcarrier budget exceeded: %d UEs x %d > %d" % (num_ues, per_ue, num_total)
        )
    return [np.arange(k * per_ue + 1, (k + 1) * per_ue + 1) for k in range(num_ues)]


def subcarrier_frequencies(subcarrier_set: np.ndarray, spacing: float) -> np.ndarray:
    """Baseband frequencies f_n = (n - 1) * spacing for 1-based indices n."""
    return (np.asarray(subcarrier_set) - 1) * spacing


def delay_steering(tau: float, subcarrier_set: np.ndarray, spacing: float) -> np.ndarray:
    """Unit-modulus phase ramp exp(-j 2 pi f_n tau) over the subcarrier set."""
    freqs = subcarrier_frequencies(subcarrier_set, spacing)
    return np.exp(-2j * np.pi * freqs * tau)


def array_response(theta: float, num_antennas: int) -> np.ndarray:
    """Half-wavelength ULA response: entry m (1-based) is exp(j pi (m-1) sin theta)."""
    return np.exp(1j * np.pi * np.arange(num_antennas) * np.sin(theta))


# --------------------------------------------------------------- sampling

def _draw_separated_delays(rng, count, taken, tau_max, min_sep, snap_spacing, grid_size):
    """Draw `count` delays in (0, tau_max], each >= min_sep away from everything.

    Returns the new delays only. Raises RuntimeError when separation cannot
    be satisfied (bounded rejection sampling).
    """
    out: list[float] = []
    tol = min_sep * (1.0 - 1e-9)
    for _ in range(count):
        for _attempt in range(2000):
            if snap_spacing is not None:
                cand = float(rng.integers(1, grid_size)) * snap_spacing
            else:
                cand = float(rng.uniform(0.0, tau_max))
            if all(abs(cand - x) >= tol for x in taken) and all(
                abs(cand - x) >= tol for x in out
            ):
                out.append(cand)
                break
        else:
            raise RuntimeError(
                "could not place %d delays with separation %.3g within tau_max %.3g"
                % (count, min_sep, tau_max)
            )
    return out


def sample_scenario(sys_cfg: SystemConfig, sp_cfg: SparsityConfig, rng) -> Scenario:
    """Draw a random multi-user multipath scenario.

    Cluster structure: UEs are split into ``num_clusters_true`` groups as
    evenly as possible (earlier clusters take the remainder); each cluster
    draws ``shared_paths`` delays common to its members. Every UE then draws
    its private taps: the LoS tap at a fresh geometric delay plus any extra
    private NLoS taps. All taps of one UE are at least two coarse grid bins
    apart. NLoS gains are rho * exp(j phi) with rho ~ U[0.5, 1]; the LoS
    magnitude is pinned to 3x the UE's largest NLoS magnitude so the LoS
    dominates the delay periodogram. NLoS Dopplers ~ U[-350, 350] Hz, LoS
    Doppler 0 (static UEs), AoAs ~ U[-pi/2, pi/2].
    """
    validate_configs(sys_cfg, sp_cfg)
    num_ues = sys_cfg.num_ues
    num_clusters = sp_cfg.num_clusters_true
    l_sh, l_pr = sp_cfg.shared_paths, sp_cfg.private_paths
    num_paths = l_sh + l_pr
    min_sep = sp_cfg.min_delay_separation
    snap = sp_cfg.grid_spacing if sp_cfg.on_grid else None

    base, extra = divmod(num_ues, num_clusters)
    sizes = [base + (1 if c < extra else 0) for c in range(num_clusters)]
    labels = np.repeat(np.arange(1, num_clusters + 1), sizes)

    shared = [
        sorted(
            _draw_separated_delays(
                rng, l_sh, [], sp_cfg.tau_max, min_sep, snap, sp_cfg.grid_size
            )
        )
        for _ in range(num_clusters)
    ]

    sets = np.stack(
        allocate_subcarriers(sys_cfg.num_subcarriers, num_ues, sp_cfg.per_ue_subcarriers)
    )
    delays = np.zeros((num_ues, num_paths))
    dopplers = np.zeros((num_ues, num_paths))
    aoas = np.zeros((num_ues, num_paths))
    gains = np.zeros((num_ues, num_paths), dtype=complex)
    is_los = np.zeros((num_ues, num_paths), dtype=bool)
    geom = np.zeros(num_ues)

    for k in range(num_ues):
        cluster_shared = shared[labels[k] - 1]
        private = _draw_separated_delays(
            rng, l_pr, list(cluster_shared), sp_cfg.tau_max, min_sep, snap, sp_cfg.grid_size
        )
        # the first private draw is the LoS geometric delay; it goes last in
        # the path list, extra private NLoS taps sit in between
        geom[k] = private[0]
        delays[k] = np.concatenate([cluster_shared, sorted(private[1:]), [geom[k]]])
        is_los[k, num_paths - 1] = True

        nlos_mag = rng.uniform(0.5, 1.0, size=num_paths - 1)
        nlos_phase = rng.uniform(0.0, 2 * np.pi, size=num_paths - 1)
        los_phase = rng.uniform(0.0, 2 * np.pi)
        gains[k, : num_paths - 1] = nlos_mag * np.exp(1j * nlos_phase)
        gains[k, num_paths - 1] = 3.0 * nlos_mag.max() * np.exp(1j * los_phase)

        dopplers[k, : num_paths - 1] = rng.uniform(-350.0, 350.0, size=num_paths - 1)
        aoas[k] = rng.uniform(-np.pi / 2, np.pi / 2, size=num_paths)

    return Scenario(
        cluster_labels=labels,
        subcarrier_sets=sets,
        delays=delays,
        dopplers=dopplers,
        aoas=aoas,
        gains=gains,
        is_los=is_los,
        los_geom_delay=geom,
        on_grid=sp_cfg.on_grid,
    )


def sample_offsets(sys_cfg: SystemConfig, rng, disabled: bool = False) -> OffsetTrace:
    """Per-packet offsets: dtau ~ U[0, 20/B], dnu ~ U[0, 150] Hz, beta ~ U[0, 2 pi)."""
    shape = (sys_cfg.num_ues, sys_cfg.num_packets)
    if disabled:
        return OffsetTrace.zeros(*shape)
    return OffsetTrace(
        timing=rng.uniform(0.0, sys_cfg.timing_offset_max, size=shape),
        cfo=rng.uniform(0.0, sys_cfg.cfo_max, size=shape),
        phase=rng.uniform(0.0, 2 * np.pi, size=shape),
    )


def synthesize_csi(scn: Scenario, off: OffsetTrace, sys_cfg: SystemConfig, rng) -> CsiTensor:
    """Generate the CSI tensor (K, T, N_k, M) from scenario + offsets.

    Noise is circularly symmetric complex Gaussian; its variance is set so
    that 10*log10(mean |signal|^2 / variance) equals ``snr_db``, the mean
    running over every (ue, packet, subcarrier, antenna) element of the
    noise-free tensor. ``snr_db=None`` disables noise. When the scenario has
    no paths at all the variance falls back to 1.
    """
    num_ues, num_paths = scn.delays.shape
    num_packets = off.timing.shape[1]
    per_ue = scn.subcarrier_sets.shape[1]
    num_ant = sys_cfg.num_antennas

    signal = np.zeros((num_ues, num_packets, per_ue, num_ant), dtype=complex)
    packet_idx = np.arange(1, num_packets + 1)
    for k in range(num_ues):
        freqs = subcarrier_frequencies(scn.subcarrier_sets[k], sys_cfg.subcarrier_spacing)
        spatial = np.exp(
            1j * np.pi * np.outer(np.sin(scn.aoas[k]), np.arange(num_ant))
        )  # (L, M)
        for t in range(num_packets):
            if num_paths == 0:
                continue
            tau_eff = scn.delays[k] + off.timing[k, t]
            steering = np.exp(-2j * np.pi * freqs[:, None] * tau_eff[None, :])  # (N_k, L)
            slow = scn.gains[k] * np.exp(
                1j * off.phase[k, t]
                + 2j
                * np.pi
                * packet_idx[t]
                * sys_cfg.packet_interval
                * (scn.dopplers[k] + off.cfo[k, t])
            )
            signal[k, t] = steering @ (slow[:, None] * spatial)

    if sys_cfg.snr_db is None:
        return CsiTensor(signal, scn.subcarrier_sets.copy(), np.inf)

    sig_power = float(np.mean(np.abs(signal) ** 2))
    variance = sig_power * 10.0 ** (-sys_cfg.snr_db / 10.0) if sig_power > 0 else 1.0
    noise = rng.standard_normal(signal.shape) + 1j * rng.standard_normal(signal.shape)
    data = signal + np.sqrt(variance / 2.0) * noise
    return CsiTensor(data, scn.subcarrier_sets.copy(), 1.0 / variance)
