"""Run configuration, preprocessing and the staged estimation pipeline.

Stages run in a fixed order and feed forward: grasp kinematics from twists
only, then mass and CoM from static holds using the grasp graph, then the
inertia from dynamic data using the graph and the CoM.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from . import geom, sigproc
from .dataset import DatasetFile, from_ground_truth, read_dataset
from .errors import DatasetError, EstimationError, ObservabilityError
from .inertia import PSD_POLICIES, estimate_inertia_from_streams
from .kinematics import TwistBatch, cyclic_pairs, estimate_grasp_graph
from .report import EstimationReport, TrialResult, compute_errors, pair_key
from .scenarios import PRESET_NAMES, load_scenario
from .sim import NoiseConfig, ScenarioConfig, payload_from_dict, synthesize_dataset
from .statics import detect_static_windows, estimate_statics

log = logging.getLogger(__name__)

STAGES = ("kin", "statics", "inertia")
TWIST_SOURCES = ("differentiate", "dataset")
# largest angle from the mean orientation the rotation-vector filter accepts
MAX_RECENTERED_ANGLE = 0.9 * np.pi


@dataclass(frozen=True)
class RunConfig:
    """Processing constants and run controls.

    ``cutoff_hz=None`` disables low-pass filtering. ``twist_source`` chooses
    between differentiating the measured poses and using twists already in
    the dataset (ideal rate sensors). ``static_twist_tolerance`` additionally
    requires every robot's twist norm to stay below it inside a static
    window; ``None`` uses the force criterion alone.
    """

    cutoff_hz: float | None = sigproc.DEFAULT_CUTOFF_HZ
    filter_order: int = sigproc.DEFAULT_ORDER
    trim_s: float = sigproc.DEFAULT_TRIM_S
    static_force_tolerance: float = 0.01
    static_min_duration: float = 6.0
    static_twist_tolerance: float | None = None
    refine: bool = True
    psd_policy: str = "project"
    seed: int = 0
    trials: int = 1
    twist_source: str = "differentiate"
    ignore_moments: bool = False
    reference: int = 1
    stages: tuple = STAGES

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if self.cutoff_hz is not None and not self.cutoff_hz > 0:
            raise ValueError("cutoff_hz must be positive or None")
        if int(self.filter_order) < 1:
            raise ValueError("filter_order must be >= 1")
        for name in ("trim_s", "static_force_tolerance", "static_min_duration"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if self.static_twist_tolerance is not None and not self.static_twist_tolerance >= 0:
            raise ValueError("static_twist_tolerance must be non-negative or None")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if self.psd_policy not in PSD_POLICIES:
            raise ValueError(f"psd_policy must be one of {PSD_POLICIES}")
        if self.twist_source not in TWIST_SOURCES:
            raise ValueError(f"twist_source must be one of {TWIST_SOURCES}")
        bad = set(self.stages) - set(STAGES)
        if bad or not self.stages:
            raise ValueError(f"stages must be a non-empty subset of {STAGES}, got {self.stages}")

    @classmethod
    def ideal(cls, **overrides) -> "RunConfig":
        """Settings for noise-free data carrying exact twists: no filtering,
        dataset twists, and static windows gated on zero motion."""
        base = dict(cutoff_hz=None, twist_source="dataset", static_twist_tolerance=1e-9)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stages"] = list(self.stages)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown run-config keys {sorted(unknown)}")
        return cls(**d)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items()})


# ---------------------------------------------------------------------------
# Preprocessing


def _lowpass(x: np.ndarray, fs: float, cfg: RunConfig) -> np.ndarray:
    """Filter along time (axis 0) of an array of any trailing shape."""
    shape = x.shape
    ts = sigproc.TimeSeries(fs, x.reshape(shape[0], -1))
    return np.asarray(sigproc.butterworth_lowpass(ts, cfg.cutoff_hz, cfg.filter_order).data).reshape(shape)


def _diff(x: np.ndarray, fs: float) -> np.ndarray:
    shape = x.shape
    ts = sigproc.TimeSeries(fs, x.reshape(shape[0], -1))
    return np.asarray(sigproc.central_difference(ts).data).reshape(shape)


def filter_rotations(R: np.ndarray, fs: float, cfg: RunConfig) -> np.ndarray:
    """Low-pass a rotation stream through its exponential coordinates taken
    relative to the stream's mean orientation, which keeps the coordinates
    far from the wrap-around at pi."""
    R_mean = geom.project_to_so3(R.mean(axis=0))
    rel = np.einsum("ji,njk->nik", R_mean, R)
    rv = geom.rot_log_many(rel)
    worst = float(np.linalg.norm(rv, axis=-1).max())
    if worst > MAX_RECENTERED_ANGLE:
        raise DatasetError(
            f"orientation wanders {np.degrees(worst):.1f} deg from its mean; "
            "too far to filter in exponential coordinates (disable the filter)"
        )
    return R_mean @ geom.rot_exp(_lowpass(rv, fs, cfg))


def robot_twists(R: np.ndarray, p: np.ndarray, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """Body twists from a pose stream by central differencing ``T``, then
    twist rates by central differencing the twists."""
    T = geom.homogeneous(R, p)
    V = geom.twist_from_pose_derivative(T, _diff(T, fs))
    return V, _diff(V, fs)


def preprocess(raw: DatasetFile, cfg: RunConfig = RunConfig()) -> DatasetFile:
    """Filter, differentiate and trim; returns a dataset with the derived
    twist block, shorter than ``raw`` by the trim at each end."""
    fs = raw.sample_rate
    k = sigproc.trim_count(cfg.trim_s, fs)
    Q = len(raw)
    if 2 * k >= Q:
        raise DatasetError(f"dataset of {Q} samples is too short to trim {k} samples from each end")
    R = raw.rotations
    p = raw.pos
    W = raw.wrench
    if cfg.cutoff_hz is not None:
        R = np.stack([filter_rotations(R[i], fs, cfg) for i in range(raw.n_robots)])
        p = np.stack([_lowpass(p[i], fs, cfg) for i in range(raw.n_robots)])
        W = np.stack([_lowpass(W[i], fs, cfg) for i in range(raw.n_robots)])
    if cfg.twist_source == "dataset":
        if not raw.has_derived:
            raise DatasetError("twist_source 'dataset' needs a dataset with twists and twist rates")
        V, Vd = raw.twist, raw.twist_rate
    else:
        pairs = [robot_twists(R[i], p[i], fs) for i in range(raw.n_robots)]
        V = np.stack([a for a, _ in pairs])
        Vd = np.stack([b for _, b in pairs])
    keep = slice(k, Q - k)
    meta = dict(raw.meta)
    meta["preprocessed"] = cfg.to_dict()
    out = DatasetFile(
        sample_rate=fs,
        times=raw.times[keep],
        quat=geom.quat_from_rot(R[:, keep]),
        pos=np.ascontiguousarray(p[:, keep]),
        wrench=np.ascontiguousarray(W[:, keep]),
        twist=np.ascontiguousarray(V[:, keep]),
        twist_rate=np.ascontiguousarray(Vd[:, keep]),
        gravity_home=raw.gravity_home,
        scenario_hash=raw.scenario_hash,
        ground_truth=raw.ground_truth,
        meta=meta,
    )
    out.validate()
    return out


# ---------------------------------------------------------------------------
# Stages


def _ok(**info) -> dict:
    return {"status": "ok", **info}


def _failed(exc: Exception) -> dict:
    d = {"status": "failed", "error_type": type(exc).__name__, "error": str(exc)}
    if isinstance(exc, ObservabilityError):
        d["directions"] = exc.directions.tolist()
    return d


def _skipped(reason: str) -> dict:
    return {"status": "skipped", "reason": reason}


def twist_batches(ds: DatasetFile) -> list[TwistBatch]:
    """Per-robot twist batches; the only input the kinematics stage sees."""
    if not ds.has_derived:
        raise DatasetError("kinematics needs a preprocessed dataset (derived twist block)")
    return [TwistBatch.from_twists(ds.twist[i], robot=i + 1, times=ds.times) for i in range(ds.n_robots)]


def run_stages(ds: DatasetFile, cfg: RunConfig, result: TrialResult) -> TrialResult:
    """Run the configured stages on a preprocessed dataset, recording
    estimates, diagnostics and per-stage status into ``result``."""
    est, diag, stages = result.estimates, result.diagnostics, result.stages
    graph = None
    statics = None
    gmag = float(np.linalg.norm(ds.gravity_home))

    if "kin" in cfg.stages:
        try:
            graph, pairwise = estimate_grasp_graph(twist_batches(ds), reference=cfg.reference, refine=cfg.refine)
            est["T_ref"] = {
                str(i): {"R": graph[i].rotation.tolist(), "p": graph[i].translation.tolist()} for i in graph.frames
            }
            est["pairs"] = {}
            for i, j in cyclic_pairs(graph.frames):
                T = graph.T(i, j)
                est["pairs"][pair_key(i, j)] = {"R": T.rotation.tolist(), "p": T.translation.tolist()}
            diag["kin"] = {
                "pairwise": {
                    pair_key(*e.pair): {
                        "rotation_residual": float(e.rotation_residual),
                        "position_residual": float(e.position_residual),
                        "rotation_singular_values": e.rotation_singular_values.tolist(),
                        "position_singular_values": e.position_singular_values.tolist(),
                    }
                    for e in pairwise
                },
                "refinement": {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in graph.meta.items()},
            }
            stages["kin"] = _ok()
        except (EstimationError, DatasetError) as exc:
            stages["kin"] = _failed(exc)

    if "statics" in cfg.stages:
        if graph is None:
            stages["statics"] = _skipped("needs the grasp graph")
        else:
            try:
                ref = graph.frames.index(cfg.reference)
                samples = detect_static_windows(
                    ds.wrench,
                    ds.rotations[ref],
                    ds.sample_rate,
                    ds.gravity_home,
                    cfg.static_force_tolerance,
                    cfg.static_min_duration,
                    twists=ds.twist,
                    twist_tolerance=cfg.static_twist_tolerance,
                )
                statics = estimate_statics(samples, graph, gmag, cfg.ignore_moments)
                est["mass"] = float(statics.mass)
                est["p_sc"] = statics.p_sc.tolist()
                diag["statics"] = {
                    "n_samples": len(samples),
                    "windows": [[s.start, s.stop] for s in samples],
                    "mass_residual": statics.mass_fit.residual,
                    "horizontal_residual": statics.mass_fit.horizontal_residual,
                    "com_residual": statics.com_fit.residual,
                    "com_singular_values": statics.com_fit.singular_values.tolist(),
                }
                stages["statics"] = _ok()
            except EstimationError as exc:
                stages["statics"] = _failed(exc)

    if "inertia" in cfg.stages:
        if graph is None or statics is None:
            stages["inertia"] = _skipped("needs the grasp graph and the CoM")
        else:
            try:
                ref = graph.frames.index(cfg.reference)
                res = estimate_inertia_from_streams(
                    ds.twist[ref], ds.twist_rate[ref], ds.wrench, graph, statics.p_sc, cfg.psd_policy
                )
                est["I_b"] = res.I_b.tolist()
                est["moments"] = res.moments.tolist()
                est["R_bc"] = res.principal.R_bc.tolist()
                diag["inertia"] = {
                    "residual": res.fit.residual,
                    "singular_values": res.fit.singular_values.tolist(),
                    "psd_projected": res.principal.psd_projected,
                    "negative_eigenvalue_magnitude": res.principal.negative_eigenvalue_magnitude,
                    "degenerate": res.principal.degenerate,
                }
                stages["inertia"] = _ok()
            except EstimationError as exc:
                stages["inertia"] = _failed(exc)
    return result


def run_trial(raw: DatasetFile, cfg: RunConfig, scenario: str, trial: int = 0, seed: int | None = None) -> TrialResult:
    """Preprocess one dataset, run the stages and score against any ground
    truth carried in the dataset header."""
    result = TrialResult(scenario=scenario, trial=trial, seed=seed)
    try:
        ds = preprocess(raw, cfg)
    except (DatasetError, sigproc.SignalConfigError) as exc:
        result.stages["preprocess"] = _failed(exc)
        return result
    result.stages["preprocess"] = _ok(n_samples=len(ds))
    run_stages(ds, cfg, result)
    if raw.ground_truth:
        result.errors = compute_errors(result.estimates, payload_from_dict(raw.ground_truth), cfg.reference)
    return result


def trial_seed(base: int, trial: int) -> int:
    """Seed of trial ``trial`` (0-based) in a run seeded with ``base``."""
    return int(base) + int(trial)


def simulate(scenario: ScenarioConfig, include_derived: bool = False) -> DatasetFile:
    return from_ground_truth(synthesize_dataset(scenario), include_derived=include_derived)


def _is_dataset_path(x) -> bool:
    return isinstance(x, (str, Path)) and str(x) not in PRESET_NAMES and str(x).endswith((".jsonl", ".ndjson"))


def run_full_pipeline(
    inputs: Iterable[str | Path | ScenarioConfig | DatasetFile],
    cfg: RunConfig = RunConfig(),
    noise: NoiseConfig | None = None,
) -> EstimationReport:
    """Run every input through all configured stages.

    Scenarios (preset letters, scenario JSON paths or configs) are simulated
    ``cfg.trials`` times with seeds ``cfg.seed, cfg.seed + 1, ...`` and with
    ``noise`` if given (otherwise the scenario's own noise). Dataset files
    (``.jsonl``) and in-memory datasets are processed once each. A failing
    stage is recorded in its trial; other trials still run.
    """
    report = EstimationReport(config={"run": cfg.to_dict(), "noise": None if noise is None else asdict(noise)})
    for item in inputs:
        if isinstance(item, DatasetFile) or _is_dataset_path(item):
            ds = item if isinstance(item, DatasetFile) else read_dataset(item)
            name = ds.meta.get("scenario", str(item) if not isinstance(item, DatasetFile) else "dataset")
            report.trials.append(run_trial(ds, cfg, str(name), 0, ds.meta.get("seed")))
            continue
        sc = item if isinstance(item, ScenarioConfig) else load_scenario(item)
        if noise is not None:
            sc = sc.with_noise(noise)
        for k in range(cfg.trials):
            seed = trial_seed(cfg.seed, k)
            ds = simulate(sc.with_seed(seed), include_derived=cfg.twist_source == "dataset")
            log.info("scenario %s trial %d (seed %d): %d samples", sc.name, k, seed, len(ds))
            report.trials.append(run_trial(ds, cfg, sc.name, k, seed))
    return report
