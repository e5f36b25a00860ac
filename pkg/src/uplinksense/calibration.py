"""Per-packet timing-offset estimation from the line-of-sight path.

Each UE's geometric LoS delay is known to the receiver, so the observed LoS
peak location in a delay periodogram, minus that known delay, is the timing
offset of the packet.  The search runs on a coarse grid around the expected
location and is refined to sub-grid resolution with a three-point parabolic
interpolation, then the offset is removed by counter-rotating the subcarrier
phases.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .signal_model import CsiTensor, OffsetTrace, subcarrier_frequencies


def delay_periodogram(y, subcarrier_set, grid, spacing):
    """Antenna-averaged matched-filter energy over a delay grid.

    y: (N_k, M) one packet of one UE.  Returns (len(grid),) nonnegative.
    """
    y = np.asarray(y)
    freqs = subcarrier_frequencies(np.asarray(subcarrier_set), spacing)
    steer = np.exp(-2j * np.pi * np.outer(freqs, np.asarray(grid, dtype=float)))
    proj = steer.conj().T @ y
    return (np.abs(proj) ** 2).sum(axis=1) / y.shape[1]


def parabolic_refine(p_left, p_peak, p_right, spacing):
    """Vertex offset of the parabola through three equispaced samples.

    Returns 0 for a degenerate (flat) triple; |offset| <= spacing/2 whenever
    p_peak is the largest of the three.
    """
    denom = p_left - 2.0 * p_peak + p_right
    if denom == 0.0:
        return 0.0
    return 0.5 * spacing * (p_left - p_right) / denom


@dataclass(frozen=True)
class ToEstimateEntry:
    """One (UE, packet) timing-offset estimate."""

    observed: float  # estimated absolute LoS delay [s]
    offset: float    # observed minus geometric LoS delay [s]
    boundary: bool   # peak sat on the grid edge; refinement skipped


def default_search_grid(tau_geom, per_ue_subcarriers, spacing, bandwidth=140e6,
                        step_factor=4, margin_steps=2):
    """Coarse grid covering the admissible offset range around tau_geom.

    Step is a quarter of the UE's delay resolution cell; a two-step margin on
    both sides keeps the true peak off the grid edges.
    """
    step = 1.0 / (step_factor * per_ue_subcarriers * spacing)
    lo = tau_geom - margin_steps * step
    span = 20.0 / bandwidth + 2 * margin_steps * step
    n = int(np.floor(span / step + 1e-9)) + 1
    return lo + np.arange(n) * step, step


def estimate_to(y, tau_geom, cal_grid, subcarrier_set, spacing):
    """Locate the LoS peak of one packet and return its timing offset."""
    p = delay_periodogram(y, subcarrier_set, cal_grid, spacing)
    return _peak_to_entry(p, np.asarray(cal_grid, dtype=float), tau_geom)


def _peak_to_entry(p, grid, tau_geom):
    i = int(np.argmax(p))
    if i == 0 or i == len(grid) - 1:
        return ToEstimateEntry(observed=float(grid[i]),
                               offset=float(grid[i] - tau_geom), boundary=True)
    sub = parabolic_refine(p[i - 1], p[i], p[i + 1], grid[1] - grid[0])
    observed = float(grid[i] + sub)
    return ToEstimateEntry(observed=observed, offset=observed - tau_geom,
                           boundary=False)


def compensate_to(y, offset, subcarrier_set, spacing):
    """Counter-rotate subcarrier phases to remove a timing offset.

    Per-subcarrier unit-modulus scaling: magnitudes and norms are preserved,
    and compensating with -offset undoes the operation.
    """
    freqs = subcarrier_frequencies(np.asarray(subcarrier_set), spacing)
    return np.asarray(y) * np.exp(2j * np.pi * freqs * offset)[:, None]


class LosTimingCalibrator(BaseEstimator, TransformerMixin):
    """Estimates per-(UE, packet) timing offsets and removes them.

    fit() locates each packet's LoS peak around the UE's known geometric
    delay; transform() applies the fitted phase counter-rotation to a CSI
    tensor of matching shape.

    Parameters
    ----------
    subcarrier_spacing : float
        Subcarrier spacing in Hz.
    bandwidth : float
        System bandwidth in Hz; bounds the admissible offset range.
    step_factor : int
        Grid oversampling relative to the UE delay resolution cell.
    margin_steps : int
        Extra grid steps kept on both sides of the admissible range.
    """

    def __init__(self, subcarrier_spacing=60e3, bandwidth=140e6, step_factor=4,
                 margin_steps=2):
        self.subcarrier_spacing = subcarrier_spacing
        self.bandwidth = bandwidth
        self.step_factor = step_factor
        self.margin_steps = margin_steps

    def fit(self, csi, los_geom_delay):
        """Estimate timing offsets for every (UE, packet) in `csi`."""
        data, sets = self._validate_csi(csi)
        k_ues, t_pkts, n_k, _ = data.shape
        geom = np.asarray(los_geom_delay, dtype=float).reshape(-1)
        if geom.shape != (k_ues,):
            raise ValueError(
                f"los_geom_delay must have one entry per UE, got {geom.shape}"
            )
        self.to_estimate_ = np.zeros((k_ues, t_pkts))
        self.observed_los_delay_ = np.zeros((k_ues, t_pkts))
        self.boundary_ = np.zeros((k_ues, t_pkts), dtype=bool)
        for k in range(k_ues):
            grid, _ = default_search_grid(
                geom[k], n_k, self.subcarrier_spacing, self.bandwidth,
                self.step_factor, self.margin_steps,
            )
            freqs = subcarrier_frequencies(sets[k], self.subcarrier_spacing)
            steer = np.exp(-2j * np.pi * np.outer(freqs, grid))
            # (T, n_grid, M) projections for all packets of UE k at once
            proj = np.einsum("ng,tnm->tgm", steer.conj(), data[k])
            p_all = (np.abs(proj) ** 2).sum(axis=2) / data.shape[3]
            for t in range(t_pkts):
                ent = _peak_to_entry(p_all[t], grid, geom[k])
                self.to_estimate_[k, t] = ent.offset
                self.observed_los_delay_[k, t] = ent.observed
                self.boundary_[k, t] = ent.boundary
        self.n_ues_ = k_ues
        self.n_packets_ = t_pkts
        return self

    def transform(self, csi):
        """Return a copy of `csi` with the fitted offsets compensated."""
        check_is_fitted(self, "to_estimate_")
        data, sets = self._validate_csi(csi)
        if data.shape[:2] != self.to_estimate_.shape:
            raise ValueError(
                f"csi has shape {data.shape[:2]} per (UE, packet) but the "
                f"calibrator was fitted on {self.to_estimate_.shape}"
            )
        freqs = np.stack(
            [subcarrier_frequencies(s, self.subcarrier_spacing) for s in sets]
        )
        phases = np.exp(
            2j * np.pi * freqs[:, None, :] * self.to_estimate_[:, :, None]
        )
        return CsiTensor(
            data=data * phases[:, :, :, None],
            subcarrier_sets=csi.subcarrier_sets,
            noise_precision_true=csi.noise_precision_true,
        )

    def diagnostics_table(self, true_offsets=None):
        """CSV-formatted per-(UE, packet) estimates, optionally with truth."""
        check_is_fitted(self, "to_estimate_")
        header = "ue,packet,observed_los_delay_s,to_estimate_s,boundary"
        truth = None
        if true_offsets is not None:
            truth = (true_offsets.timing if isinstance(true_offsets, OffsetTrace)
                     else np.asarray(true_offsets, dtype=float))
            header += ",true_to_s"
        lines = [header]
        for k in range(self.n_ues_):
            for t in range(self.n_packets_):
                row = (f"{k + 1},{t + 1},{self.observed_los_delay_[k, t]:.9e},"
                       f"{self.to_estimate_[k, t]:.9e},"
                       f"{int(self.boundary_[k, t])}")
                if truth is not None:
                    row += f",{truth[k, t]:.9e}"
                lines.append(row)
        return "\n".join(lines) + "\n"

    @staticmethod
    def _validate_csi(csi):
        data = np.asarray(csi.data)
        if data.ndim != 4 or not np.iscomplexobj(data):
            raise ValueError("csi.data must be a complex (K, T, N_k, M) array")
        sets = np.asarray(csi.subcarrier_sets)
        if sets.shape != data.shape[:1] + data.shape[2:3]:
            raise ValueError("subcarrier_sets must be (K, N_k) matching csi.data")
        return data, sets
