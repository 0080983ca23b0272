"""One-time calibration of the bundled "calibrated" noise profile.

The hardware noise behind the target error magnitudes below is not known,
so it is fitted: starting from a hand-picked profile, each group of noise
parameters is scaled by a few candidate factors, one group at a time, and
the combination whose mean errors sit closest (in log ratio) to the targets
is kept. The result is written with the settings and scores it was chosen
with.

    python3 scripts/calibrate_noise.py --trials 2 --out src/coop_payload/presets/noise_calibrated.json
"""

from __future__ import annotations

import argparse
import datetime
import json
from dataclasses import asdict, replace

import numpy as np

from coop_payload import pipeline
from coop_payload.sim import NoiseConfig

# Mean errors measured on the physical system, per configuration:
# pairwise rotation (deg), pairwise position (%), mass (%), CoM (%),
# principal moments (%, ascending).
TARGETS = {
    "a": {"rotation_deg": [0.94, 0.99, 1.07], "position_pct": [0.9, 4.4, 4.5], "mass_pct": 0.9, "com_pct": 3.7, "moments_pct": [3.6, 4.1, 1.8]},
    "b": {"rotation_deg": [1.77, 0.90, 1.93], "position_pct": [1.8, 3.5, 4.5], "mass_pct": 0.6, "com_pct": 3.3, "moments_pct": [3.1, 2.5, 4.4]},
    "c": {"rotation_deg": [0.66, 2.21, 1.67], "position_pct": [3.3, 5.6, 5.5], "mass_pct": 1.1, "com_pct": 4.5, "moments_pct": [0.3, 1.6, 3.8]},
    "d": {"rotation_deg": [2.55, 3.57, 1.49], "position_pct": [2.1, 5.8, 3.8], "mass_pct": 1.8, "com_pct": 3.8, "moments_pct": [2.8, 0.8, 0.1]},
}

START = NoiseConfig(
    pose_position_sigma=5e-4,
    pose_rotation_sigma=1e-3,
    wrench_force_sigma=0.5,
    wrench_moment_sigma=0.05,
    encoder_quantization=0.0,
    internal_force_amplitude=5.0,
    wrench_force_bias=0.4,
    frame_rotation_bias=0.015,
    frame_position_bias=0.012,
)

# parameters scaled together; each group mainly drives one table
GROUPS = {
    "frame": ("frame_rotation_bias", "frame_position_bias"),
    "pose": ("pose_position_sigma", "pose_rotation_sigma"),
    "wrench": ("wrench_force_sigma", "wrench_moment_sigma", "wrench_force_bias"),
}
FACTORS = (0.75, 1.0, 1.33)

# white force noise makes the 0.01 N hold criterion unusable; widen it
RUN_OVERRIDES = {"static_force_tolerance": 1.5}


def category_means(report) -> dict:
    """Mean over configurations of each error category."""
    agg = report.aggregate()
    out: dict[str, list[float]] = {"rotation_deg": [], "position_pct": [], "mass_pct": [], "com_pct": [], "moments_pct": []}
    for sc, metrics in agg.items():
        for key, s in metrics.items():
            if key.endswith("rotation_deg"):
                out["rotation_deg"].append(s["mean"])
            elif key.endswith("position_pct"):
                out["position_pct"].append(s["mean"])
            elif key in ("mass_pct", "com_pct"):
                out[key].append(s["mean"])
            elif key.startswith("moments_pct"):
                out["moments_pct"].append(s["mean"])
    return {k: float(np.mean(v)) for k, v in out.items() if v}


def target_means(scenarios) -> dict:
    out = {}
    for key in ("rotation_deg", "position_pct", "mass_pct", "com_pct", "moments_pct"):
        out[key] = float(np.mean([np.mean(TARGETS[s][key]) for s in scenarios]))
    return out


def score(achieved: dict, target: dict) -> float:
    return float(sum(np.log(achieved[k] / target[k]) ** 2 for k in target))


def scaled(noise: NoiseConfig, group: str, factor: float) -> NoiseConfig:
    return replace(noise, **{k: getattr(noise, k) * factor for k in GROUPS[group]})


def evaluate(noise: NoiseConfig, scenarios, trials: int, seed: int) -> dict:
    cfg = pipeline.RunConfig(trials=trials, seed=seed, **RUN_OVERRIDES)
    return category_means(pipeline.run_full_pipeline(list(scenarios), cfg, noise))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenarios", default="abcd")
    ap.add_argument("--trials", type=int, default=2)
    ap.add_argument("--seed", type=int, default=1000, help="calibration seeds, kept apart from evaluation seeds")
    ap.add_argument("--out", default="noise_calibrated.json")
    args = ap.parse_args(argv)

    target = target_means(args.scenarios)
    best = START
    best_means = evaluate(best, args.scenarios, args.trials, args.seed)
    best_score = score(best_means, target)
    print(f"start  score {best_score:.4f}  {best_means}")
    for group in GROUPS:
        for f in FACTORS:
            if f == 1.0:
                continue
            cand = scaled(best, group, f)
            means = evaluate(cand, args.scenarios, args.trials, args.seed)
            s = score(means, target)
            print(f"{group:6s} x{f:<5} score {s:.4f}  {means}")
            if s < best_score:
                best, best_means, best_score = cand, means, s
    profile = {
        "noise": asdict(best),
        "run_config": RUN_OVERRIDES,
        "provenance": {
            "method": "group-wise scaling search from a hand-picked start, minimizing squared log ratios "
            "of mean errors to target magnitudes",
            "script": "scripts/calibrate_noise.py",
            "scenarios": args.scenarios,
            "trials_per_scenario": args.trials,
            "seed": args.seed,
            "target_means": target,
            "achieved_means": best_means,
            "score": best_score,
            "date": datetime.date.today().isoformat(),
            "notes": "Target magnitudes come from hardware experiments whose noise sources are not published; "
            "the constant frame offsets model kinematic calibration error, which dominates the "
            "grasp-geometry errors. White force noise requires the widened static-window tolerance.",
        },
    }
    with open(args.out, "w") as fh:
        json.dump(profile, fh, indent=2)
        fh.write("\n")
    print(f"wrote {args.out} (score {best_score:.4f})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
