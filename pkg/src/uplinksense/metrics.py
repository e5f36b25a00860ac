"""Path association and trial scoring.

Estimated paths are matched to ground truth by delay before any error is
computed; the per-field errors then feed normalized MSE (delay, Doppler),
AoA RMSE in degrees, and permutation-matched clustering accuracy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

DEFAULT_GATE_BINS = 3

_FIELDS = {"delay": "delays", "doppler": "dopplers", "aoa": "aoas"}


@dataclass(frozen=True)
class UeMatch:
    """One UE's association: (true idx, est idx, distance) pairs plus leftovers."""

    pairs: list
    misses: list
    false_alarms: list


@dataclass(frozen=True)
class MatchResult:
    per_ue: list

    @property
    def total_pairs(self) -> int:
        return sum(len(m.pairs) for m in self.per_ue)


@dataclass(frozen=True)
class MetricsReport:
    nmse_delay: float
    nmse_doppler: float
    rmse_aoa_deg: float
    clustering_accuracy: float
    miss_rate: float
    false_alarm_rate: float


def match_delays(true_delays, est_delays, gate: float) -> UeMatch:
    """Greedy one-to-one nearest-delay assignment.

    Candidate pairs within ``gate`` are claimed in ascending
    (distance, true value, estimate value) order, so the result depends on
    the delay values, not on input ordering.
    """
    if gate <= 0:
        raise ValueError("gate must be positive")
    true_delays = np.asarray(true_delays, dtype=float)
    est_delays = np.asarray(est_delays, dtype=float)
    cands = []
    for t, tv in enumerate(true_delays):
        for e, ev in enumerate(est_delays):
            d = abs(tv - ev)
            if d <= gate:
                cands.append((d, tv, ev, t, e))
    cands.sort()
    t_used, e_used, pairs = set(), set(), []
    for d, _, _, t, e in cands:
        if t in t_used or e in e_used:
            continue
        pairs.append((t, e, d))
        t_used.add(t)
        e_used.add(e)
    misses = [t for t in range(len(true_delays)) if t not in t_used]
    false_alarms = [e for e in range(len(est_delays)) if e not in e_used]
    return UeMatch(pairs=pairs, misses=misses, false_alarms=false_alarms)


def match_paths(scenario, estimates, gate: float) -> MatchResult:
    per_ue = [
        match_delays(scenario.delays[k], estimates.per_ue[k].delays, gate)
        for k in range(scenario.num_ues)
    ]
    return MatchResult(per_ue=per_ue)


def paired_field(scenario, estimates, match: MatchResult, field: str):
    """Per-UE (true, estimate, los_mask) arrays for one physical quantity.

    Missed paths and non-finite estimates fall back to an estimate of 0, so
    every true path contributes exactly one error term.
    """
    attr = _FIELDS[field]
    out = []
    for k, m in enumerate(match.per_ue):
        true_vals = np.asarray(getattr(scenario, attr)[k], dtype=float)
        est_all = np.asarray(getattr(estimates.per_ue[k], attr), dtype=float)
        est_vals = np.zeros_like(true_vals)
        for t, e, _ in m.pairs:
            v = est_all[e]
            est_vals[t] = v if np.isfinite(v) else 0.0
        out.append((true_vals, est_vals, scenario.is_los[k].copy()))
    return out


def nmse(values, exclude_los: bool = True) -> float:
    """Mean over UEs of sum((est - true)^2) / sum(true^2).

    UEs whose denominator is zero are skipped with a warning; NaN when
    every UE is skipped.
    """
    terms = []
    skipped = 0
    for true_vals, est_vals, los in values:
        keep = ~np.asarray(los) if exclude_los else np.ones(len(true_vals), bool)
        denom = float(np.sum(true_vals[keep] ** 2))
        if denom == 0.0:
            skipped += 1
            continue
        num = float(np.sum((est_vals[keep] - true_vals[keep]) ** 2))
        terms.append(num / denom)
    if skipped:
        warnings.warn(
            "%d UE(s) skipped in NMSE: zero reference energy" % skipped,
            UserWarning, stacklevel=2)
    return float(np.mean(terms)) if terms else float("nan")


def rmse_aoa(values) -> float:
    """Mean over UEs of per-UE RMS angle error, in degrees. Includes LoS."""
    roots = [
        np.sqrt(np.mean((est_vals - true_vals) ** 2))
        for true_vals, est_vals, _ in values
    ]
    return float(np.rad2deg(np.mean(roots)))


def clustering_accuracy(true_labels, responsibilities) -> float:
    """Hard-assignment accuracy maximized over cluster relabelings.

    Predicted labels are argmax rows of ``responsibilities``; the best
    one-to-one map between true and predicted labels is found by the
    Hungarian algorithm on the confusion matrix.
    """
    true_labels = np.asarray(true_labels, dtype=int)
    resp = np.atleast_2d(np.asarray(responsibilities, dtype=float))
    pred = np.argmax(resp, axis=1)
    num_true = int(true_labels.max())
    num_pred = resp.shape[1]
    confusion = np.zeros((num_true, num_pred))
    for t, p in zip(true_labels, pred):
        confusion[t - 1, p] += 1.0
    rows, cols = linear_sum_assignment(-confusion)
    return float(confusion[rows, cols].sum() / len(true_labels))


def score_trial(scenario, estimates, responsibilities, *, gate: float) -> MetricsReport:
    """Match paths and compute the full per-trial metrics row."""
    match = match_paths(scenario, estimates, gate)
    delay_vals = paired_field(scenario, estimates, match, "delay")
    doppler_vals = paired_field(scenario, estimates, match, "doppler")
    aoa_vals = paired_field(scenario, estimates, match, "aoa")
    total_true = int(scenario.delays.size)
    total_est = sum(len(estimates.per_ue[k].delays) for k in range(scenario.num_ues))
    total_miss = sum(len(m.misses) for m in match.per_ue)
    total_fa = sum(len(m.false_alarms) for m in match.per_ue)
    return MetricsReport(
        nmse_delay=nmse(delay_vals, exclude_los=True),
        nmse_doppler=nmse(doppler_vals, exclude_los=True),
        rmse_aoa_deg=rmse_aoa(aoa_vals),
        clustering_accuracy=(float("nan") if responsibilities is None else
                             clustering_accuracy(scenario.cluster_labels,
                                                 responsibilities)),
        miss_rate=total_miss / total_true if total_true else 0.0,
        false_alarm_rate=total_fa / total_est if total_est else 0.0,
    )
