"""Monte-Carlo sweep harness: generate -> calibrate -> recover -> score.

One trial draws a scenario, offsets, and noise from a trial-derived seed,
runs every requested method on the identical calibrated tensor, and emits
one result row per method. Sweeps persist rows to an append-only JSONL log
(for resume) and a canonical sorted CSV (for figures).
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .calibration import LosTimingCalibrator
from .config import SparsityConfig, SystemConfig, validate_configs
from .metrics import DEFAULT_GATE_BINS, score_trial
from .refine import estimate_path_parameters
from .sbl import ClusterDelayRecovery, IndividualDelayRecovery, VIDivergenceError
from .signal_model import sample_offsets, sample_scenario, synthesize_csi

SCHEMA_VERSION = 1

CSV_COLUMNS = [
    "schema_version", "sweep_param", "sweep_value", "composition",
    "method", "trial", "seed", "data_hash", "nmse_delay", "nmse_doppler",
    "rmse_aoa_deg", "clustering_accuracy", "miss_rate",
    "false_alarm_rate", "vi_iterations", "failed",
]

_SWEEP_PARAMS = ("snr", "nk", "packets")
_METHODS = ("cluster_sbl", "individual_sbl")


@dataclass
class ExperimentSpec:
    """Full description of one sweep; hashable for the resume manifest."""

    system: SystemConfig
    sparsity: SparsityConfig
    sweep_param: str
    sweep_values: list
    methods: tuple = _METHODS
    trials: int = 100
    seed: int = 0
    compositions: list = field(default_factory=lambda: [(3, 1)])
    oracle_count: bool = False
    no_offsets: bool = False
    fixed_scenario: bool = False
    output_path: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.sweep_param not in _SWEEP_PARAMS:
            raise ValueError("sweep_param must be one of %s" % (_SWEEP_PARAMS,))
        if not self.sweep_values:
            raise ValueError("sweep_values must be non-empty")
        self.methods = tuple(self.methods)
        for m in self.methods:
            if m not in _METHODS:
                raise ValueError("unknown method %r" % (m,))
        if not self.methods:
            raise ValueError("methods must be non-empty")
        self.compositions = [tuple(c) for c in self.compositions]
        num_paths = self.sparsity.num_paths
        for l_sh, l_pr in self.compositions:
            if l_sh + l_pr != num_paths or l_pr < 1 or l_sh < 0:
                raise ValueError(
                    "composition (%d,%d) incompatible with %d paths per UE"
                    % (l_sh, l_pr, num_paths))
        if self.sweep_param == "snr":
            self.sweep_values = [float(v) for v in self.sweep_values]
        else:
            self.sweep_values = [int(v) for v in self.sweep_values]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["system"] = asdict(self.system)
        d["sparsity"] = asdict(self.sparsity)
        d["methods"] = list(self.methods)
        d["compositions"] = [list(c) for c in self.compositions]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        d["system"] = SystemConfig(**d["system"])
        d["sparsity"] = SparsityConfig(**d["sparsity"])
        d["methods"] = tuple(d["methods"])
        d["compositions"] = [tuple(c) for c in d["compositions"]]
        return cls(**d)


def spec_hash(spec: ExperimentSpec) -> str:
    """Canonical digest of everything that affects results (not the path)."""
    d = spec.to_dict()
    d.pop("output_path", None)
    blob = json.dumps(d, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ResultRow:
    schema_version: int
    sweep_param: str
    sweep_value: float
    composition: str
    method: str
    trial: int
    seed: int
    data_hash: str
    scenario_hash: str
    nmse_delay: float
    nmse_doppler: float
    rmse_aoa_deg: float
    clustering_accuracy: float
    miss_rate: float
    false_alarm_rate: float
    vi_iterations: int
    failed: bool
    wall_time_s: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRow":
        return cls(**d)


@dataclass
class SweepOutcome:
    csv_path: str
    rows: list
    num_failed: int


# ---------------------------------------------------------------- pipeline

def _point_configs(spec: ExperimentSpec, sweep_value, composition):
    sys_cfg, sp_cfg = spec.system, spec.sparsity
    l_sh, l_pr = composition
    sp_cfg = replace(sp_cfg, shared_paths=l_sh, private_paths=l_pr)
    if spec.sweep_param == "snr":
        sys_cfg = replace(sys_cfg, snr_db=sweep_value)
    elif spec.sweep_param == "nk":
        sp_cfg = replace(sp_cfg, per_ue_subcarriers=sweep_value)
    else:
        sys_cfg = replace(sys_cfg, num_packets=sweep_value)
    validate_configs(sys_cfg, sp_cfg)
    return sys_cfg, sp_cfg


def _draw_trial_data(spec: ExperimentSpec, sys_cfg, sp_cfg, trial: int):
    if spec.fixed_scenario:
        geom_rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    else:
        geom_rng = np.random.default_rng(np.random.SeedSequence([spec.seed, trial]))
    scenario = sample_scenario(sys_cfg, sp_cfg, geom_rng)
    offsets = sample_offsets(sys_cfg, geom_rng, disabled=spec.no_offsets)
    noise_rng = geom_rng if not spec.fixed_scenario else np.random.default_rng(
        np.random.SeedSequence([spec.seed, trial, 1]))
    csi = synthesize_csi(scenario, offsets, sys_cfg, noise_rng)
    return scenario, offsets, csi


def _hash_arrays(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def _run_cluster(csi_cal, sys_cfg, sp_cfg, oracle_counts):
    rec = ClusterDelayRecovery(
        tau_max=sp_cfg.tau_max, grid_size=sp_cfg.grid_size,
        subcarrier_spacing=sys_cfg.subcarrier_spacing,
        num_clusters=sp_cfg.num_clusters_candidate, seed=0,
    ).fit(csi_cal, oracle_counts=oracle_counts)
    return rec.support_, rec.responsibilities_, int(rec.n_iter_)


def _run_individual(csi_cal, sys_cfg, sp_cfg, oracle_counts):
    rec = IndividualDelayRecovery(
        tau_max=sp_cfg.tau_max, grid_size=sp_cfg.grid_size,
        subcarrier_spacing=sys_cfg.subcarrier_spacing,
    ).fit(csi_cal, oracle_counts=oracle_counts)
    return rec.support_, None, int(np.max(rec.n_iter_))


_METHOD_RUNNERS = {
    "cluster_sbl": _run_cluster,
    "individual_sbl": _run_individual,
}


def run_trial(spec: ExperimentSpec, sweep_value, composition, trial: int):
    """Execute one (sweep point, composition, trial) for every method."""
    sys_cfg, sp_cfg = _point_configs(spec, sweep_value, composition)
    scenario, offsets, csi = _draw_trial_data(spec, sys_cfg, sp_cfg, trial)
    data_hash = _hash_arrays(csi.data, csi.subcarrier_sets)
    scenario_hash = _hash_arrays(scenario.delays, scenario.dopplers,
                                 scenario.aoas, scenario.gains.view(float),
                                 scenario.cluster_labels)
    calibrator = LosTimingCalibrator(
        subcarrier_spacing=sys_cfg.subcarrier_spacing,
        bandwidth=sys_cfg.bandwidth)
    csi_cal = calibrator.fit(csi, scenario.los_geom_delay).transform(csi)
    oracle_counts = ([sp_cfg.num_paths] * sys_cfg.num_ues
                     if spec.oracle_count else None)
    gate = DEFAULT_GATE_BINS * sp_cfg.grid_spacing
    comp_str = "%d+%d" % composition
    rows = []
    for method in spec.methods:
        t0 = time.monotonic()
        base = dict(
            schema_version=SCHEMA_VERSION, sweep_param=spec.sweep_param,
            sweep_value=sweep_value, composition=comp_str, method=method,
            trial=trial, seed=spec.seed, data_hash=data_hash,
            scenario_hash=scenario_hash,
        )
        try:
            supports, resp, n_iter = _METHOD_RUNNERS[method](
                csi_cal, sys_cfg, sp_cfg, oracle_counts)
            estimates = estimate_path_parameters(
                csi_cal, supports, scenario.los_geom_delay, sp_cfg,
                subcarrier_spacing=sys_cfg.subcarrier_spacing,
                packet_interval=sys_cfg.packet_interval)
            report = score_trial(scenario, estimates, resp, gate=gate)
            rows.append(ResultRow(
                **base,
                nmse_delay=report.nmse_delay,
                nmse_doppler=report.nmse_doppler,
                rmse_aoa_deg=report.rmse_aoa_deg,
                clustering_accuracy=report.clustering_accuracy,
                miss_rate=report.miss_rate,
                false_alarm_rate=report.false_alarm_rate,
                vi_iterations=n_iter, failed=False,
                wall_time_s=time.monotonic() - t0,
            ))
        except VIDivergenceError as err:
            rows.append(ResultRow(
                **base,
                nmse_delay=float("nan"), nmse_doppler=float("nan"),
                rmse_aoa_deg=float("nan"), clustering_accuracy=float("nan"),
                miss_rate=float("nan"), false_alarm_rate=float("nan"),
                vi_iterations=getattr(err, "iteration", 0) or 0, failed=True,
                wall_time_s=time.monotonic() - t0,
            ))
    return rows


# ------------------------------------------------------------------ sweeps

def _task_list(spec: ExperimentSpec):
    return [
        (comp, value, trial)
        for comp in spec.compositions
        for value in spec.sweep_values
        for trial in range(spec.trials)
    ]


def _task_key(comp, value, trial):
    return "%d+%d|%r|%d" % (comp[0], comp[1], value, trial)


def _load_log(log_path, methods):
    done = {}
    try:
        with open(log_path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    row = ResultRow.from_dict(json.loads(line))
                except (json.JSONDecodeError, TypeError):
                    continue  # torn tail line from an interrupted run
                comp = tuple(int(x) for x in row.composition.split("+"))
                key = _task_key(comp, row.sweep_value, row.trial)
                done.setdefault(key, {})[row.method] = row
    except FileNotFoundError:
        pass
    return {k: v for k, v in done.items() if set(v) == set(methods)}


def _fmt_cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            d = row.to_dict()
            writer.writerow([_fmt_cell(d[c]) for c in CSV_COLUMNS])


def run_sweep(spec: ExperimentSpec, out_path: str, *, workers: int = 1,
              echo=None) -> SweepOutcome:
    """Run (or resume) every task of a sweep and write the canonical CSV.

    The manifest pins the spec digest so a resumed run cannot silently mix
    results from two different specs; the JSONL log carries wall times and
    is the resume source of truth.
    """
    manifest_path = out_path + ".manifest.json"
    log_path = out_path + ".rows.jsonl"
    digest = spec_hash(spec)
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        if manifest.get("spec_hash") != digest:
            raise RuntimeError(
                "manifest at %s was written by a different spec; "
                "refusing to mix results" % manifest_path)
    except FileNotFoundError:
        with open(manifest_path, "w") as fh:
            json.dump({"schema_version": SCHEMA_VERSION, "spec_hash": digest,
                       "spec": spec.to_dict()}, fh, indent=2, sort_keys=True)
    # open the results log up front so path problems surface before compute
    log_fh = open(log_path, "a")
    try:
        done = _load_log(log_path, spec.methods)
        tasks = _task_list(spec)
        pending = [t for t in tasks if _task_key(*t) not in done]
        if echo:
            echo("sweep: %d tasks total, %d already logged, %d to run"
                 % (len(tasks), len(tasks) - len(pending), len(pending)))
        if workers > 1 and pending:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = pool.map(
                    run_trial,
                    [spec] * len(pending),
                    *zip(*((v, c, t) for c, v, t in pending)),
                )
                for (comp, value, trial), rows in zip(pending, results):
                    for row in rows:
                        log_fh.write(json.dumps(row.to_dict()) + "\n")
                    log_fh.flush()
                    done[_task_key(comp, value, trial)] = {
                        r.method: r for r in rows}
        else:
            for comp, value, trial in pending:
                rows = run_trial(spec, value, comp, trial)
                for row in rows:
                    log_fh.write(json.dumps(row.to_dict()) + "\n")
                log_fh.flush()
                done[_task_key(comp, value, trial)] = {r.method: r for r in rows}
    finally:
        log_fh.close()
    ordered = []
    for comp, value, trial in tasks:
        per_method = done[_task_key(comp, value, trial)]
        ordered.extend(per_method[m] for m in spec.methods)
    _write_csv(out_path, ordered)
    num_failed = sum(1 for r in ordered if r.failed)
    if echo:
        echo(summarize(ordered))
        if num_failed:
            echo("WARNING: %d failed rows" % num_failed)
    return SweepOutcome(csv_path=out_path, rows=ordered, num_failed=num_failed)


def summarize(rows) -> str:
    """Mean +/- std table per (composition, sweep value, method)."""
    groups = {}
    for r in rows:
        groups.setdefault((r.composition, r.sweep_value, r.method), []).append(r)
    metrics = ["nmse_delay", "nmse_doppler", "rmse_aoa_deg",
               "clustering_accuracy"]
    header = ("composition", "sweep_value", "method", *metrics)
    widths = [max(len(h), 22) for h in header]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for key in sorted(groups):
        cells = [str(key[0]), str(key[1]), key[2]]
        for m in metrics:
            vals = np.array([getattr(r, m) for r in groups[key]], dtype=float)
            ok = vals[np.isfinite(vals)]
            if ok.size:
                cells.append("%.4g+/-%.2g" % (ok.mean(), ok.std()))
            else:
                cells.append("nan")
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines)


# ----------------------------------------------------------------- presets

def preset(name: str) -> ExperimentSpec:
    """Named experiment configurations for the headline sweeps."""
    full_system = SystemConfig()
    full_sparsity = SparsityConfig()
    table = {
        "fig2": dict(
            system=full_system, sparsity=full_sparsity,
            sweep_param="snr", sweep_values=[-5.0, 0.0, 5.0, 10.0, 15.0],
            compositions=[(3, 1)], trials=100, oracle_count=True,
        ),
        "fig3": dict(
            system=replace(full_system, snr_db=5.0), sparsity=full_sparsity,
            sweep_param="nk", sweep_values=[32, 64, 128, 256],
            compositions=[(3, 1), (2, 2)], trials=100, oracle_count=True,
        ),
        "fig4": dict(
            system=replace(full_system, snr_db=10.0), sparsity=full_sparsity,
            sweep_param="packets", sweep_values=[4, 8, 16, 32],
            compositions=[(3, 1)], trials=100, oracle_count=True,
        ),
        "table1": dict(
            system=full_system, sparsity=full_sparsity,
            sweep_param="snr", sweep_values=[-5.0, 0.0, 5.0, 10.0, 15.0],
            compositions=[(3, 1)], trials=100, oracle_count=True,
            methods=("cluster_sbl",),
        ),
        "smoke": dict(
            system=SystemConfig(num_subcarriers=64, num_ues=2,
                                num_antennas=4, num_packets=4, snr_db=10.0),
            sparsity=SparsityConfig(grid_size=64, num_clusters_true=2,
                                    num_clusters_candidate=2, shared_paths=2,
                                    private_paths=1, per_ue_subcarriers=32),
            sweep_param="snr", sweep_values=[0.0, 10.0],
            compositions=[(2, 1)], trials=2, oracle_count=True,
        ),
    }
    return ExperimentSpec(**table[name])
