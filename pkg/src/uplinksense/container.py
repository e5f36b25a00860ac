"""Versioned on-disk container for one trial (scenario + offsets + CSI).

Format: a single ``.npz`` archive, no pickling, so the calibration and
recovery stages can run out-of-process or on another host. Keys, in order:

    container_version   str, currently "1"
    cluster_labels      (K,) int
    subcarrier_sets     (K, N_k) int, 1-based
    delays, dopplers, aoas                 (K, L) float
    gains               (K, L) complex
    is_los              (K, L) bool
    los_geom_delay      (K,) float
    on_grid             () bool
    off_timing, off_cfo, off_phase         (K, T) float
    csi_data            (K, T, N_k, M) complex
    noise_precision_true () float  (inf stored as np.inf)
"""

from __future__ import annotations

import numpy as np

from .signal_model import CsiTensor, OffsetTrace, Scenario

CONTAINER_VERSION = "1"

__all__ = ["CONTAINER_VERSION", "save_trial", "load_trial"]


def save_trial(path, scn: Scenario, off: OffsetTrace, csi: CsiTensor) -> None:
    np.savez(
        path,
        container_version=np.str_(CONTAINER_VERSION),
        cluster_labels=scn.cluster_labels,
        subcarrier_sets=scn.subcarrier_sets,
        delays=scn.delays,
        dopplers=scn.dopplers,
        aoas=scn.aoas,
        gains=scn.gains,
        is_los=scn.is_los,
        los_geom_delay=scn.los_geom_delay,
        on_grid=np.bool_(scn.on_grid),
        off_timing=off.timing,
        off_cfo=off.cfo,
        off_phase=off.phase,
        csi_data=csi.data,
        noise_precision_true=np.float64(csi.noise_precision_true),
    )


def load_trial(path) -> tuple[Scenario, OffsetTrace, CsiTensor]:
    with np.load(path, allow_pickle=False) as raw:
        version = str(raw["container_version"])
        if version != CONTAINER_VERSION:
            raise ValueError(
                "unsupported container version %r (expected %r)" % (version, CONTAINER_VERSION)
            )
        scn = Scenario(
            cluster_labels=raw["cluster_labels"],
            subcarrier_sets=raw["subcarrier_sets"],
            delays=raw["delays"],
            dopplers=raw["dopplers"],
            aoas=raw["aoas"],
            gains=raw["gains"],
            is_los=raw["is_los"],
            los_geom_delay=raw["los_geom_delay"],
            on_grid=bool(raw["on_grid"]),
        )
        off = OffsetTrace(raw["off_timing"], raw["off_cfo"], raw["off_phase"])
        csi = CsiTensor(
            raw["csi_data"], raw["subcarrier_sets"], float(raw["noise_precision_true"])
        )
    return scn, off, csi
