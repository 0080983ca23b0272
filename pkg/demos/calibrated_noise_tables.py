"""Error tables under the bundled calibrated noise profile.

Runs every preset for a few trials with realistic sensor noise and frame
calibration error, then prints the mean and standard deviation of each
error metric.

    python3 demos/calibrated_noise_tables.py [--trials 3] [--seed 0]
"""

import argparse

from coop_payload import pipeline
from coop_payload.report import render_table
from coop_payload.scenarios import load_noise_profile, profile_run_overrides

ap = argparse.ArgumentParser()
ap.add_argument("--trials", type=int, default=3)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--scenarios", default="abcd")
args = ap.parse_args()

noise = load_noise_profile("calibrated")
cfg = pipeline.RunConfig(trials=args.trials, seed=args.seed, **profile_run_overrides("calibrated"))
print(f"noise: {noise}\n")
report = pipeline.run_full_pipeline(list(args.scenarios), cfg, noise)
print(render_table(report))
