"""Stage-by-stage walk through one noise-free preset.

Simulates preset (a), then runs each estimation stage by hand and compares
the result with the ground-truth payload.

    python3 demos/walkthrough_noise_free.py [--scenario a]
"""

import argparse

import numpy as np

from coop_payload import geom, pipeline
from coop_payload.inertia import estimate_inertia_from_streams
from coop_payload.kinematics import estimate_grasp_graph
from coop_payload.scenarios import load_scenario
from coop_payload.statics import detect_static_windows, estimate_statics

ap = argparse.ArgumentParser()
ap.add_argument("--scenario", default="a")
args = ap.parse_args()

sc = load_scenario(args.scenario)
truth = sc.payload
cfg = pipeline.RunConfig.ideal()
raw = pipeline.simulate(sc, include_derived=True)
print(f"simulated {len(raw)} samples at {raw.sample_rate:g} Hz for {raw.n_robots} robots")

ds = pipeline.preprocess(raw, cfg)
print(f"after trimming {cfg.trim_s:g} s from each end: {len(ds)} samples")

# grasp geometry from the robots' twists alone
graph, pairs = estimate_grasp_graph(pipeline.twist_batches(ds), reference=1, refine=cfg.refine)
print("\ngrasp geometry, rotation error [deg] and position error [m]")
for i, j in [(1, 2), (2, 3), (3, 1)]:
    T_hat, T = graph.T(i, j), truth.T_ij(i, j)
    print(f"  ({i},{j})  {geom.rotation_error_deg(T.rotation, T_hat.rotation):.2e}"
          f"  {np.linalg.norm(T.translation - T_hat.translation):.2e}")

# mass and centre of mass from the static holds
R1 = geom.rot_from_quat(ds.quat[0])
samples = detect_static_windows(ds.wrench, R1, ds.sample_rate, ds.gravity_home, cfg.static_force_tolerance,
                                cfg.static_min_duration, twists=ds.twist, twist_tolerance=cfg.static_twist_tolerance)
statics = estimate_statics(samples, graph)
print(f"\n{len(samples)} static holds found")
print(f"  mass {statics.mass:.9f} kg (true {truth.mass:g})")
print(f"  CoM  {np.round(statics.p_sc, 9)} m (true {truth.p_1c})")

# inertia from the dynamic segments
inertia = estimate_inertia_from_streams(ds.twist[0], ds.twist_rate[0], ds.wrench, graph, statics.p_sc)
print(f"\nprincipal moments {np.round(inertia.moments, 9)} kg m^2")
print(f"true moments      {np.sort(truth.principal_inertia)} kg m^2")
