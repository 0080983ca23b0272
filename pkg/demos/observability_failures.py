"""What happens when the motion does not excite every parameter.

Builds three degenerate data sets and prints the error each stage raises,
including the unobservable directions it reports.

    python3 demos/observability_failures.py
"""

import dataclasses

import numpy as np

from coop_payload import geom
from coop_payload.errors import ObservabilityError
from coop_payload.geom import Transform
from coop_payload.inertia import estimate_inertia
from coop_payload.kinematics import GraspGraph, estimate_position
from coop_payload.scenarios import load_scenario
from coop_payload.sim import TrajectoryConfig, synthesize_dataset
from coop_payload.statics import detect_static_windows, estimate_com, estimate_mass

rng = np.random.default_rng(0)


def show(title, fn):
    print(f"{title}:")
    try:
        fn()
        print("  no error")
    except ObservabilityError as exc:
        print(f"  {type(exc).__name__}: {exc}")
        if exc.partial_solution is not None:
            print(f"  minimum-norm partial solution {np.round(exc.partial_solution, 4)}")
    print()


# every angular velocity is about one axis: the grasp offset along it is lost
T = Transform(geom.rot_axis("x", 0.4), [0.5, -0.2, 0.3])
wj = np.outer([0, 0, 1.0], rng.normal(size=100))
vj = rng.normal(size=(3, 100))
Vi = np.vstack([wj, vj]).T @ geom.adjoint(T).T
show("grasp position from spins about one axis", lambda: estimate_position(T.rotation, wj, Vi[:, 3:].T, vj))

# rotation about z only: Ixx, Ixy, Iyy never appear in the moments
t = np.linspace(0, 10, 500)
w, a = np.outer(np.sin(t), [0, 0, 1.0]), np.outer(np.cos(t), [0, 0, 1.0])
I = np.diag([1.0, 2.0, 3.0])
show("inertia from spins about z", lambda: estimate_inertia(w, a, a @ I.T + np.cross(w, w @ I.T)))

# a single static hold: the CoM height along gravity is lost
sc = load_scenario("a")
hold = TrajectoryConfig(kind="static_holds", hold_orientations=(geom.rot_axis("x", np.radians(5)),),
                        hold_duration=8.0, transit_time_range=(1.0, 1.5))
gt = synthesize_dataset(dataclasses.replace(sc, trajectory=(hold,)))
samples = detect_static_windows(gt.raw_wrench, gt.raw_R[0], gt.sample_rate, gt.gravity_home,
                                twists=gt.raw_twist, twist_tolerance=1e-9)
g = GraspGraph(1, {i: sc.payload.T_ij(1, i) for i in (1, 2, 3)})
show("CoM from one static hold", lambda: estimate_com(samples, estimate_mass(samples, g).mass, g))
