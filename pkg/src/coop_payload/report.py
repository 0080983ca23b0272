"""Error metrics, per-scenario aggregation and report rendering.

Percent errors use Euclidean norms of the ground truth: positions and CoM
as ``||p_hat - p|| / ||p||``, mass as ``|m_hat - m| / m`` and principal
moments per axis as ``|I_hat - I| / I`` with both sorted ascending.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from typing import Any, TextIO

import numpy as np

from . import geom
from .inertia import principal_frame_error_deg
from .sim import PayloadModel

REPORT_SCHEMA = "coop-payload-report"
REPORT_VERSION = 1
FORMATS = ("human", "json")


def pair_key(i, j) -> str:
    return f"{i}-{j}"


def _pct(err: float, ref: float) -> float:
    return float(100.0 * err / ref) if ref > 0 else float("nan")


def pair_errors(R_est, p_est, T_true) -> dict:
    dp = float(np.linalg.norm(np.asarray(p_est) - T_true.translation))
    return {
        "rotation_deg": geom.rotation_error_deg(T_true.rotation, np.asarray(R_est)),
        "position_m": dp,
        "position_pct": _pct(dp, float(np.linalg.norm(T_true.translation))),
    }


def compute_errors(estimates: dict, truth: PayloadModel, reference: int = 1) -> dict:
    """Compare whatever estimates exist against a ground-truth payload."""
    out: dict[str, Any] = {}
    if "pairs" in estimates:
        out["pairs"] = {}
        for key, e in estimates["pairs"].items():
            i, j = (int(s) for s in key.split("-"))
            out["pairs"][key] = pair_errors(e["R"], e["p"], truth.T_ij(i, j))
    # ground truth CoM and principal frame in the reference grasp frame
    T_rc = truth.T_ij(reference, 1) @ truth.T_1c
    if "mass" in estimates:
        dm = abs(estimates["mass"] - truth.mass)
        out["mass_kg"] = float(dm)
        out["mass_pct"] = _pct(dm, truth.mass)
    if "p_sc" in estimates:
        dc = float(np.linalg.norm(np.asarray(estimates["p_sc"]) - T_rc.translation))
        out["com_m"] = dc
        out["com_pct"] = _pct(dc, float(np.linalg.norm(T_rc.translation)))
    if "moments" in estimates:
        true_m = np.sort(truth.principal_inertia)
        d = np.abs(np.asarray(estimates["moments"]) - true_m)
        out["moments_abs"] = d.tolist()
        out["moments_pct"] = (100.0 * d / true_m).tolist()
        out["principal_frame_deg"] = principal_frame_error_deg(estimates["R_bc"], _ascending_frame(truth, T_rc))
    return out


def _ascending_frame(truth: PayloadModel, T_rc) -> np.ndarray:
    order = np.argsort(truth.principal_inertia, kind="stable")
    R = T_rc.rotation[:, order]
    if np.linalg.det(R) < 0:
        R[:, 2] = -R[:, 2]
    return R


@dataclass
class TrialResult:
    scenario: str
    trial: int
    seed: int | None
    stages: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def failed_stages(self) -> list[str]:
        return [k for k, v in self.stages.items() if v.get("status") == "failed"]

    @property
    def ok(self) -> bool:
        return not self.failed_stages

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "trial": self.trial,
            "seed": self.seed,
            "stages": self.stages,
            "estimates": self.estimates,
            "errors": self.errors,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialResult":
        return cls(**{k: d[k] for k in ("scenario", "trial", "seed", "stages", "estimates", "errors", "diagnostics")})


def flatten(tree, prefix: str = "") -> dict[str, float]:
    """Nested dicts/lists of numbers to ``{"a.b.0": value}``."""
    out: dict[str, float] = {}
    if isinstance(tree, dict):
        for k, v in tree.items():
            out.update(flatten(v, f"{prefix}{k}."))
    elif isinstance(tree, (list, tuple)):
        for k, v in enumerate(tree):
            out.update(flatten(v, f"{prefix}{k}."))
    elif isinstance(tree, (int, float)) and not isinstance(tree, bool):
        out[prefix[:-1]] = float(tree)
    return out


def summarize(values) -> dict:
    """Mean and sample standard deviation (``ddof=1``; zero for one value)."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n == 0:
        return {"mean": float("nan"), "std": float("nan"), "n": 0}
    std = float(np.std(v, ddof=1)) if n > 1 else 0.0
    return {"mean": float(np.mean(v)), "std": std, "n": n}


@dataclass
class EstimationReport:
    config: dict
    trials: list[TrialResult] = field(default_factory=list)

    @property
    def scenarios(self) -> list[str]:
        seen: list[str] = []
        for t in self.trials:
            if t.scenario not in seen:
                seen.append(t.scenario)
        return seen

    @property
    def ok(self) -> bool:
        return all(t.ok for t in self.trials)

    def trials_for(self, scenario: str) -> list[TrialResult]:
        return [t for t in self.trials if t.scenario == scenario]

    def aggregate(self) -> dict:
        """``{scenario: {metric path: {mean, std, n}}}`` over the trials in
        which that metric was computed."""
        out = {}
        for sc in self.scenarios:
            cols: dict[str, list[float]] = {}
            for t in self.trials_for(sc):
                for k, v in flatten(t.errors).items():
                    cols.setdefault(k, []).append(v)
            out[sc] = {k: summarize(v) for k, v in cols.items()}
        return out

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "schema_version": REPORT_VERSION,
            "config": self.config,
            "trials": [t.to_dict() for t in self.trials],
            "aggregate": self.aggregate(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimationReport":
        if d.get("schema") != REPORT_SCHEMA:
            raise ValueError("not an estimation report")
        return cls(config=d["config"], trials=[TrialResult.from_dict(t) for t in d["trials"]])


def to_json(report: EstimationReport) -> str:
    # json writes floats with repr, which round-trips exactly
    return json.dumps(report.to_dict(), indent=1, allow_nan=True)


def parse_report(text: str) -> EstimationReport:
    return EstimationReport.from_dict(json.loads(text))


def _fmt(x: float, digits: int = 4) -> str:
    return "nan" if not np.isfinite(x) else f"{x:.{digits}g}"


def render_table(report: EstimationReport) -> str:
    """Plain-text tables: one block per scenario, mean and standard
    deviation of every error metric over its trials."""
    agg = report.aggregate()
    lines: list[str] = []
    for sc in report.scenarios:
        trials = report.trials_for(sc)
        a = agg[sc]
        lines.append(f"Configuration {sc}: {len(trials)} trial(s), {sum(t.ok for t in trials)} without stage failures")
        pairs = sorted({k.split(".")[1] for k in a if k.startswith("pairs.")}, key=lambda s: tuple(map(int, s.split("-"))))
        if pairs:
            lines.append(f"  {'grasp rotation error [deg]':34s}{'mean':>12s}{'std':>12s}")
            for p in pairs:
                s = a[f"pairs.{p}.rotation_deg"]
                i, j = p.split("-")
                lines.append(f"  {'R_' + i + j:34s}{_fmt(s['mean']):>12s}{_fmt(s['std']):>12s}")
            lines.append(f"  {'grasp position error':34s}{'mean [m]':>12s}{'std [m]':>12s}{'mean [%]':>12s}{'std [%]':>12s}")
            for p in pairs:
                m, q = a[f"pairs.{p}.position_m"], a[f"pairs.{p}.position_pct"]
                i, j = p.split("-")
                lines.append(
                    f"  {'p_' + i + j:34s}{_fmt(m['mean']):>12s}{_fmt(m['std']):>12s}{_fmt(q['mean']):>12s}{_fmt(q['std']):>12s}"
                )
        if "mass_kg" in a or "com_m" in a:
            lines.append(f"  {'mass and CoM error':34s}{'mean':>12s}{'std':>12s}{'mean [%]':>12s}{'std [%]':>12s}")
            for key, label in (("mass_kg", "mass [kg]"), ("com_m", "p_sc [m]")):
                if key in a:
                    m, q = a[key], a[key.split("_")[0] + "_pct"]
                    lines.append(
                        f"  {label:34s}{_fmt(m['mean']):>12s}{_fmt(m['std']):>12s}{_fmt(q['mean']):>12s}{_fmt(q['std']):>12s}"
                    )
        if "moments_abs.0" in a:
            lines.append(f"  {'principal moment error':34s}{'mean':>12s}{'std':>12s}{'mean [%]':>12s}{'std [%]':>12s}")
            for k in range(3):
                m, q = a[f"moments_abs.{k}"], a[f"moments_pct.{k}"]
                lines.append(
                    f"  {f'I_{k + 1} [kg m^2]':34s}{_fmt(m['mean']):>12s}{_fmt(m['std']):>12s}{_fmt(q['mean']):>12s}{_fmt(q['std']):>12s}"
                )
        for t in trials:
            for stage in t.failed_stages:
                lines.append(f"  trial {t.trial}: {stage} failed: {t.stages[stage].get('error', '')}")
        lines.append("")
    return "\n".join(lines)


def emit_report(report: EstimationReport, fmt: str = "human", out: TextIO | str | None = None) -> str:
    """Render ``report`` and write it to ``out`` (path, stream, or stdout)."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
    text = render_table(report) if fmt == "human" else to_json(report) + "\n"
    if out is None:
        sys.stdout.write(text)
    elif isinstance(out, str):
        with open(out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)
    return text
