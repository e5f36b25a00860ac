"""Configuration dataclasses for the uplink sensing simulator.

Two configs split the parameter space: `SystemConfig` holds the OFDMA/array
geometry and noise level, `SparsityConfig` holds everything tied to the delay
grid and the multipath structure. Subcarrier indices are 1-based throughout;
the baseband frequency of subcarrier n is (n - 1) * subcarrier_spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace


@dataclass
class SystemConfig:
    """OFDMA uplink geometry, slow-time sampling, and noise level.

    Attributes
    ----------
    carrier_freq : float
        Carrier frequency in Hz. Informational; the delay-domain model only
        uses baseband subcarrier frequencies.
    bandwidth : float
        Nominal system bandwidth in Hz. Sets the timing-offset draw range
        [0, 20/bandwidth]; all signal math uses
        num_subcarriers * subcarrier_spacing instead.
    num_subcarriers : int
        Total subcarrier count N across all UEs.
    subcarrier_spacing : float
        Subcarrier spacing in Hz.
    packet_interval : float
        Slow-time spacing between sensing packets, in seconds.
    num_antennas : int
        ULA element count M at the receiver.
    num_ues : int
        Number of uplink users K.
    num_packets : int
        Number of packets T per trial.
    snr_db : float or None
        Per-resource-element SNR in dB; None disables noise entirely.
    rng_seed : int
        Base seed for scenario/offset/noise draws.
    """

    carrier_freq: float = 3.5e9
    bandwidth: float = 140e6
    num_subcarriers: int = 2048
    subcarrier_spacing: float = 60e3
    packet_interval: float = 0.25e-3
    num_antennas: int = 8
    num_ues: int = 8
    num_packets: int = 16
    snr_db: float | None = 10.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_subcarriers < self.num_ues:
            raise ValueError("need at least one subcarrier per UE")
        if self.num_antennas < 2:
            raise ValueError("num_antennas must be >= 2")
        if self.num_packets < 2:
            raise ValueError("num_packets must be >= 2")
        if self.subcarrier_spacing <= 0 or self.packet_interval <= 0:
            raise ValueError("subcarrier_spacing and packet_interval must be positive")
        if self.bandwidth <= 0 or self.carrier_freq <= 0:
            raise ValueError("bandwidth and carrier_freq must be positive")

    @property
    def timing_offset_max(self) -> float:
        """Upper edge of the timing-offset draw range, in seconds."""
        return 20.0 / self.bandwidth

    @property
    def cfo_max(self) -> float:
        """Upper edge of the CFO draw range, in Hz."""
        return 150.0


@dataclass
class SparsityConfig:
    """Delay grid, cluster structure, and per-UE path composition.

    `shared_paths` delays are common to every UE of a cluster; each UE adds
    `private_paths` of its own, one of which is always the line-of-sight tap
    at the UE's known geometric delay.
    """

    tau_max: float = 2.5e-6
    grid_size: int = 256
    num_clusters_true: int = 3
    num_clusters_candidate: int = 8
    shared_paths: int = 3
    private_paths: int = 1
    per_ue_subcarriers: int = 128
    on_grid: bool = False

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if self.tau_max <= 0:
            raise ValueError("tau_max must be positive")
        if self.num_clusters_candidate < self.num_clusters_true or self.num_clusters_true < 1:
            raise ValueError("need num_clusters_candidate >= num_clusters_true >= 1")
        if self.private_paths < 1:
            raise ValueError("private_paths must be >= 1 (the LoS tap is private)")
        if self.shared_paths < 0:
            raise ValueError("shared_paths must be >= 0")
        if self.per_ue_subcarriers < 1:
            raise ValueError("per_ue_subcarriers must be >= 1")

    @property
    def num_paths(self) -> int:
        return self.shared_paths + self.private_paths

    @property
    def grid_spacing(self) -> float:
        """Coarse delay-grid spacing tau_max / (grid_size - 1), in seconds."""
        return self.tau_max / (self.grid_size - 1)

    @property
    def min_delay_separation(self) -> float:
        """Minimum spacing between any two true taps of one UE (two bins)."""
        return 2.0 * self.grid_spacing


def validate_configs(sys_cfg: SystemConfig, sp_cfg: SparsityConfig) -> None:
    """Cross-config consistency checks; raises ValueError on violation."""
    if sys_cfg.num_ues * sp_cfg.per_ue_subcarriers > sys_cfg.num_subcarriers:
        raise ValueError(
            "subcarrier budget exceeded: K * N_k = %d > N = %d"
            % (sys_cfg.num_ues * sp_cfg.per_ue_subcarriers, sys_cfg.num_subcarriers)
        )
    if sp_cfg.tau_max >= 1.0 / sys_cfg.subcarrier_spacing:
        raise ValueError("tau_max must stay below 1/subcarrier_spacing for unambiguous delays")
    if sp_cfg.num_clusters_true > sys_cfg.num_ues:
        raise ValueError("cannot have more true clusters than UEs")


def with_updates(cfg, **kwargs):
    """Return a copy of a config dataclass with fields replaced."""
    return replace(cfg, **kwargs)
