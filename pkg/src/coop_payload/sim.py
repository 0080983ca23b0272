"""Synthetic measurement generator for a rigid payload held by N grippers.

The payload trajectory is prescribed analytically (pose, body twist and
its derivative), the grasp frames are rigidly attached to it, the net
wrench follows from the Newton-Euler equations and is split among the
robots with the minimum-norm grasp-map inverse. Noise is added last, at
the level of each robot's measured pose and wrench.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import geom
from .errors import UnrealizableWrenchError
from .geom import Transform

DEFAULT_GRAVITY = (0.0, 0.0, -9.81)


# ---------------------------------------------------------------------------
# Configuration types


@dataclass(frozen=True)
class PayloadModel:
    mass: float
    T_1c: Transform
    principal_inertia: np.ndarray
    grasp_transforms: tuple[Transform, ...]

    def __post_init__(self):
        I = np.array(self.principal_inertia, dtype=float).reshape(3)
        I.setflags(write=False)
        object.__setattr__(self, "principal_inertia", I)
        object.__setattr__(self, "grasp_transforms", tuple(self.grasp_transforms))
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if np.any(I <= 0):
            raise ValueError("principal inertias must be positive")
        a, b, c = I
        slack = 1e-12 * I.sum()
        if a + b < c - slack or b + c < a - slack or a + c < b - slack:
            raise ValueError(f"principal inertias {I} violate the triangle inequality")
        if not self.grasp_transforms or not self.grasp_transforms[0].allclose(Transform.identity()):
            raise ValueError("grasp_transforms[0] must be the identity T_11")

    @property
    def n_robots(self) -> int:
        return len(self.grasp_transforms)

    @property
    def p_1c(self) -> np.ndarray:
        return self.T_1c.translation

    @property
    def inertia_c(self) -> np.ndarray:
        return np.diag(self.principal_inertia)

    def inertia_in(self, R_xc) -> np.ndarray:
        """Inertia about the CoM expressed in a frame with orientation ``R_xc`` to {c}."""
        R_xc = np.asarray(R_xc, dtype=float)
        return R_xc @ self.inertia_c @ R_xc.T

    def T_ij(self, i: int, j: int) -> Transform:
        """Ground-truth configuration of grasp ``j`` in grasp ``i`` (1-based)."""
        return self.grasp_transforms[i - 1].inverse() @ self.grasp_transforms[j - 1]

    def T_ci(self, i: int) -> Transform:
        return self.T_1c.inverse() @ self.grasp_transforms[i - 1]


@dataclass(frozen=True)
class NoiseConfig:
    """Measurement corruption applied to each robot's raw streams.

    ``encoder_quantization`` is a step applied to the rotation-vector
    coordinates (rad) and the translation coordinates (m) of each measured
    pose. ``wrench_force_bias`` is the standard deviation of a constant
    per-robot force offset drawn once per dataset. ``frame_rotation_bias``
    (rad) and ``frame_position_bias`` (m) are standard deviations of a
    constant per-robot offset between the true grasp frame and the frame in
    which that robot reports pose, twist and wrench (a calibration error).
    """

    pose_position_sigma: float = 0.0
    pose_rotation_sigma: float = 0.0
    wrench_force_sigma: float = 0.0
    wrench_moment_sigma: float = 0.0
    encoder_quantization: float = 0.0
    internal_force_amplitude: float = 0.0
    wrench_force_bias: float = 0.0
    frame_rotation_bias: float = 0.0
    frame_position_bias: float = 0.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v >= 0:
                raise ValueError(f"noise parameter {k} must be >= 0, got {v}")

    @property
    def is_zero(self) -> bool:
        return all(v == 0 for v in asdict(self).values())


@dataclass(frozen=True)
class TrajectoryConfig:
    kind: str = "random_via"
    via_count: int = 80
    transit_time_range: tuple[float, float] = (0.5, 0.8)
    dwell_time_range: tuple[float, float] = (0.5, 0.8)
    rotation_amplitude_deg: float = 10.0
    translation_amplitude: float = 0.05
    hold_orientations: tuple = ()
    hold_duration: float = 10.0
    duration: float = 60.0
    base_frequency: float = 0.4
    ramp_time: float = 1.0

    def __post_init__(self):
        if self.kind not in ("random_via", "periodic", "static_holds"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        holds = tuple(geom.as_rotation(R) for R in self.hold_orientations)
        object.__setattr__(self, "hold_orientations", holds)
        object.__setattr__(self, "transit_time_range", tuple(map(float, self.transit_time_range)))
        object.__setattr__(self, "dwell_time_range", tuple(map(float, self.dwell_time_range)))
        for rng in (self.transit_time_range, self.dwell_time_range):
            if not (0 < rng[0] <= rng[1]):
                raise ValueError(f"time range {rng} must be positive and ordered")
        if self.kind == "static_holds" and not holds:
            raise ValueError("static_holds trajectory needs at least one hold orientation")
        if self.kind == "static_holds" and self.hold_duration <= 0:
            raise ValueError("hold_duration must be positive")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to synthesize one dataset.

    ``trajectory`` is a sequence of phases executed back to back, each
    starting where the previous one ended.
    """

    payload: PayloadModel
    trajectory: tuple[TrajectoryConfig, ...] = (TrajectoryConfig(),)
    gravity: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_GRAVITY))
    sample_rate: float = 100.0
    noise: NoiseConfig = NoiseConfig()
    seed: int = 0
    name: str = "custom"
    passive_wrists: bool = False

    def __post_init__(self):
        traj = self.trajectory
        if isinstance(traj, TrajectoryConfig):
            traj = (traj,)
        object.__setattr__(self, "trajectory", tuple(traj))
        g = np.array(self.gravity, dtype=float).reshape(3)
        g.setflags(write=False)
        object.__setattr__(self, "gravity", g)
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=int(seed))

    def with_noise(self, noise: NoiseConfig) -> "ScenarioConfig":
        return replace(self, noise=noise)


# ---------------------------------------------------------------------------
# Trajectory generation


@dataclass(frozen=True)
class PayloadTrajectory:
    """Sampled pose of {c} in the world plus its body twist and twist rate."""

    times: np.ndarray
    R: np.ndarray  # (Q, 3, 3)
    p: np.ndarray  # (Q, 3)
    twist: np.ndarray  # (Q, 6) body twist of {c}
    twist_rate: np.ndarray  # (Q, 6)

    def __len__(self) -> int:
        return len(self.times)


def quintic(tau):
    """Quintic time scaling s(tau) on [0, 1] and its first two derivatives."""
    tau = np.clip(tau, 0.0, 1.0)
    t2 = tau * tau
    s = t2 * tau * (10.0 - 15.0 * tau + 6.0 * t2)
    ds = 30.0 * t2 * (1.0 - tau) ** 2
    dds = 60.0 * tau - 180.0 * t2 + 120.0 * t2 * tau
    return s, ds, dds


class _Segment:
    duration: float

    def evaluate(self, t):  # t local, shape (n,)
        raise NotImplementedError


class _Geodesic(_Segment):
    """Constant-axis rotation and straight-line translation, quintic timing."""

    def __init__(self, R_a, p_a, R_b, p_b, duration):
        self.R_a, self.p_a = R_a, p_a
        self.u = geom.rot_log(R_a.T @ R_b)
        self.dp = p_b - p_a
        self.duration = float(duration)

    def evaluate(self, t):
        T = self.duration
        s, ds, dds = quintic(t / T)
        ds, dds = ds / T, dds / (T * T)
        R = self.R_a @ geom.rot_exp(np.outer(s, self.u))
        p = self.p_a + np.outer(s, self.dp)
        return R, p, np.outer(ds, self.u), np.outer(dds, self.u), np.outer(ds, self.dp), np.outer(dds, self.dp)


class _Dwell(_Segment):
    def __init__(self, R, p, duration):
        self.R, self.p, self.duration = R, p, float(duration)

    def evaluate(self, t):
        n = len(t)
        z = np.zeros((n, 3))
        return np.broadcast_to(self.R, (n, 3, 3)).copy(), np.tile(self.p, (n, 1)), z, z.copy(), z.copy(), z.copy()


class _Periodic(_Segment):
    """Windowed multi-sine motion about fixed world axes.

    Rotation is ``Rx(th1) Ry(th2) Rz(th3)`` applied on the world side of the
    start orientation; a quintic ramp at both ends makes velocity and
    acceleration vanish at the phase boundaries.
    """

    def __init__(self, R0, p0, duration, rot_amp, rot_freq, rot_phase, tr_amp, tr_freq, tr_phase, ramp):
        self.R0, self.p0, self.duration = R0, p0, float(duration)
        self.rot = (np.asarray(rot_amp), np.asarray(rot_freq), np.asarray(rot_phase))
        self.tr = (np.asarray(tr_amp), np.asarray(tr_freq), np.asarray(tr_phase))
        self.ramp = min(float(ramp), 0.5 * self.duration)

    def _envelope(self, t):
        r, T = self.ramp, self.duration
        e, de, dde = np.ones_like(t), np.zeros_like(t), np.zeros_like(t)
        up = t < r
        s, ds, dds = quintic(t[up] / r)
        e[up], de[up], dde[up] = s, ds / r, dds / r**2
        down = t > T - r
        s, ds, dds = quintic((T - t[down]) / r)
        e[down], de[down], dde[down] = s, -ds / r, dds / r**2
        return e, de, dde

    def _sines(self, t, amp, freq, phase):
        e, de, dde = self._envelope(t)
        arg = 2 * np.pi * np.outer(t, freq) + phase
        w = 2 * np.pi * freq
        s = amp * np.sin(arg)
        ds = amp * w * np.cos(arg)
        dds = -amp * w * w * np.sin(arg)
        e, de, dde = e[:, None], de[:, None], dde[:, None]
        return e * s, de * s + e * ds, dde * s + 2 * de * ds + e * dds

    def evaluate(self, t):
        th, dth, ddth = self._sines(t, *self.rot)
        axes = np.eye(3)
        # compose fixed-axis rotations left to right, tracking body rates
        R = np.broadcast_to(np.eye(3), (len(t), 3, 3)).copy()
        w = np.zeros((len(t), 3))
        a = np.zeros((len(t), 3))
        for k in range(3):
            B = geom.rot_exp(np.outer(th[:, k], axes[k]))
            Bt = np.swapaxes(B, 1, 2)
            wB = np.outer(dth[:, k], axes[k])
            aB = np.outer(ddth[:, k], axes[k])
            Btw = np.einsum("nij,nj->ni", Bt, w)
            a = np.einsum("nij,nj->ni", Bt, a) - np.cross(wB, Btw) + aB
            w = Btw + wB
            R = R @ B
        R0t = self.R0.T
        xi, dxi, ddxi = self._sines(t, *self.tr)
        return R @ self.R0, self.p0 + xi, w @ R0t.T, a @ R0t.T, dxi, ddxi


def _build_segments(phases: Sequence[TrajectoryConfig], R_nom, p_nom, rng) -> list[_Segment]:
    segs: list[_Segment] = []
    R_cur, p_cur = R_nom, p_nom
    for ph in phases:
        if ph.kind == "random_via":
            amp = np.radians(ph.rotation_amplitude_deg)
            for _ in range(ph.via_count):
                w = rng.uniform(-amp, amp, 3)
                dp = rng.uniform(-ph.translation_amplitude, ph.translation_amplitude, 3)
                transit = rng.uniform(*ph.transit_time_range)
                dwell = rng.uniform(*ph.dwell_time_range)
                R_via = geom.rot_exp(w) @ R_nom
                p_via = p_nom + dp
                segs.append(_Geodesic(R_cur, p_cur, R_via, p_via, transit))
                segs.append(_Dwell(R_via, p_via, dwell))
                R_cur, p_cur = R_via, p_via
        elif ph.kind == "static_holds":
            for R_h in ph.hold_orientations:
                transit = rng.uniform(*ph.transit_time_range)
                R_next = R_h @ R_nom
                segs.append(_Geodesic(R_cur, p_cur, R_next, p_nom, transit))
                segs.append(_Dwell(R_next, p_nom, ph.hold_duration))
                R_cur, p_cur = R_next, p_nom
        else:  # periodic
            amp = np.radians(ph.rotation_amplitude_deg)
            ratios = np.array([1.0, 1.37, 1.71])
            rot_freq = ph.base_frequency * ratios
            tr_freq = ph.base_frequency * ratios[::-1] * 0.83
            segs.append(
                _Periodic(
                    R_cur, p_cur, ph.duration,
                    amp * rng.uniform(0.6, 1.0, 3), rot_freq, rng.uniform(0, 2 * np.pi, 3),
                    ph.translation_amplitude * rng.uniform(0.6, 1.0, 3), tr_freq,
                    rng.uniform(0, 2 * np.pi, 3), ph.ramp_time,
                )
            )
            # ends where it started (envelope is zero at the end)
    return segs


def generate_payload_trajectory(
    config: TrajectoryConfig | Sequence[TrajectoryConfig],
    sample_rate: float,
    seed: int | np.random.Generator = 0,
    start: Transform | None = None,
) -> PayloadTrajectory:
    """Sample a twice-differentiable payload trajectory at ``sample_rate``.

    Twist and twist rate are analytic derivatives of the pose spline.
    """
    if not sample_rate > 0:
        raise ValueError("sample_rate must be positive")
    phases = (config,) if isinstance(config, TrajectoryConfig) else tuple(config)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    start = start or Transform.identity()
    segs = _build_segments(phases, start.rotation, start.translation, rng)

    bounds = np.concatenate([[0.0], np.cumsum([s.duration for s in segs])])
    total = bounds[-1]
    n = int(np.floor(total * sample_rate + 1e-9)) + 1
    times = np.arange(n) / sample_rate
    idx = np.clip(np.searchsorted(bounds, times, side="right") - 1, 0, len(segs) - 1)

    R = np.empty((n, 3, 3))
    p = np.empty((n, 3))
    w = np.empty((n, 3))
    a = np.empty((n, 3))
    pd = np.empty((n, 3))
    pdd = np.empty((n, 3))
    for k, seg in enumerate(segs):
        sel = idx == k
        if not np.any(sel):
            continue
        out = seg.evaluate(times[sel] - bounds[k])
        R[sel], p[sel], w[sel], a[sel], pd[sel], pdd[sel] = out

    Rt = np.swapaxes(R, 1, 2)
    v = np.einsum("nij,nj->ni", Rt, pd)
    vdot = np.einsum("nij,nj->ni", Rt, pdd) - np.cross(w, v)
    return PayloadTrajectory(
        times=times,
        R=R,
        p=p,
        twist=np.concatenate([w, v], axis=1),
        twist_rate=np.concatenate([a, vdot], axis=1),
    )


# ---------------------------------------------------------------------------
# Kinematics and dynamics


@dataclass(frozen=True)
class RobotStreams:
    """One robot's pose (relative to its home frame {i0}), twist and twist rate."""

    R: np.ndarray  # (Q, 3, 3) R_{i0 i}
    p: np.ndarray  # (Q, 3) p_{i0 i}
    twist: np.ndarray  # (Q, 6) in {i}
    twist_rate: np.ndarray  # (Q, 6) in {i}


def rigid_attach(traj: PayloadTrajectory, T_ci: Transform) -> RobotStreams:
    """Streams of a grasp frame rigidly fixed at ``T_ci`` on the payload."""
    Ad_ic = geom.adjoint(T_ci.inverse())
    twist = traj.twist @ Ad_ic.T
    rate = traj.twist_rate @ Ad_ic.T
    # world pose of {i}: T_wc T_ci
    R_wi = traj.R @ T_ci.rotation
    p_wi = traj.p + np.einsum("nij,j->ni", traj.R, T_ci.translation)
    R0t = R_wi[0].T
    R = np.einsum("ij,njk->nik", R0t, R_wi)
    p = (p_wi - p_wi[0]) @ R0t.T
    return RobotStreams(R=R, p=p, twist=twist, twist_rate=rate)


def newton_euler_total_wrench(payload: PayloadModel, R_wb, V_b, Vdot_b, gravity=DEFAULT_GRAVITY, R_bc=None):
    """Net wrench the grippers must apply, expressed in a CoM frame {b}.

    ``R_wb`` is the world orientation of {b}; ``R_bc`` orients the principal
    frame in {b} (identity when {b} is {c}). Broadcasts over time.
    """
    V_b = np.asarray(V_b, dtype=float)
    Vdot_b = np.asarray(Vdot_b, dtype=float)
    R_wb = np.asarray(R_wb, dtype=float)
    g = np.asarray(gravity, dtype=float)
    I_b = payload.inertia_c if R_bc is None else payload.inertia_in(R_bc)
    w, v = V_b[..., :3], V_b[..., 3:]
    alpha, vdot = Vdot_b[..., :3], Vdot_b[..., 3:]
    accel = vdot + np.cross(w, v)
    g_b = np.einsum("...ji,j->...i", R_wb, g)
    force = payload.mass * (accel - g_b)
    Iw = w @ I_b.T
    moment = alpha @ I_b.T + np.cross(w, Iw)
    return np.concatenate([moment, force], axis=-1)


def grasp_map(T_bi: Sequence[Transform], forces_only: bool = False) -> np.ndarray:
    """6 x 6N matrix taking stacked grasp wrenches to the net wrench at {b}.

    With ``forces_only`` the moment columns are dropped (6 x 3N), modelling
    grippers behind a passive spherical wrist.
    """
    G = np.hstack([geom.adjoint(T.inverse()).T for T in T_bi])
    if forces_only:
        G = G[:, (np.arange(6 * len(T_bi)) % 6) >= 3]
    return G


def _expand_forces(F, n):
    out = np.zeros(F.shape[:-1] + (6 * n,))
    out[..., (np.arange(6 * n) % 6) >= 3] = F
    return out


def distribute_wrench(total, T_bi: Sequence[Transform], internal=None, tol: float = 1e-9, forces_only: bool = False):
    """Minimum-norm split of ``total`` (at {b}) into per-grasp wrenches.

    ``internal`` holds coefficients on an orthonormal basis of the grasp
    map's null space, shape ``(k,)`` or ``(Q, k)``, and adds forces that do
    not change the net wrench. Returns an array ``(..., N, 6)`` of wrenches,
    each in its own grasp frame. ``forces_only`` restricts every grasp to a
    pure force.
    """
    total = np.asarray(total, dtype=float)
    G = grasp_map(T_bi, forces_only)
    U, S, Vt = np.linalg.svd(G)
    rank = int(np.sum(S > tol * max(S[0], 1.0)))
    if rank < 6:
        Uperp = U[:, rank:]
        resid = np.linalg.norm(total @ Uperp, axis=-1).max(initial=0.0)
        scale = max(1.0, float(np.abs(total).max(initial=0.0)))
        if resid > tol * scale:
            raise UnrealizableWrenchError(
                "net wrench has a component the grasps cannot produce", Uperp.T, resid
            )
    Gpinv = Vt[:rank].T @ np.diag(1.0 / S[:rank]) @ U[:, :rank].T
    F = total @ Gpinv.T
    if internal is not None:
        N = Vt[rank:].T
        c = np.asarray(internal, dtype=float)
        if c.shape[-1] != N.shape[1]:
            raise ValueError(f"expected {N.shape[1]} null-space coefficients, got {c.shape[-1]}")
        F = F + c @ N.T
    if forces_only:
        F = _expand_forces(F, len(T_bi))
    return F.reshape(total.shape[:-1] + (len(T_bi), 6))


def grasp_null_space(T_bi: Sequence[Transform], tol: float = 1e-9, forces_only: bool = False) -> np.ndarray:
    G = grasp_map(T_bi, forces_only)
    _, S, Vt = np.linalg.svd(G)
    rank = int(np.sum(S > tol * max(S[0], 1.0)))
    return Vt[rank:].T


# ---------------------------------------------------------------------------
# Dataset synthesis


@dataclass(frozen=True)
class GroundTruthDataset:
    """Raw (noisy) and reference (noise-free) streams for every robot.

    Robot arrays are stacked along the first axis: ``raw_R`` is
    ``(N, Q, 3, 3)`` with ``raw_R[i-1]`` the measured ``R_{i0 i}``.
    """

    scenario: ScenarioConfig
    times: np.ndarray
    raw_R: np.ndarray
    raw_p: np.ndarray
    raw_wrench: np.ndarray
    ref_R: np.ndarray
    ref_p: np.ndarray
    ref_twist: np.ndarray
    ref_twist_rate: np.ndarray
    ref_wrench: np.ndarray
    raw_twist: np.ndarray  # exact twists of the reporting frames
    raw_twist_rate: np.ndarray
    payload_trajectory: PayloadTrajectory
    total_wrench: np.ndarray  # (Q, 6) net wrench at {c}
    gravity_home: np.ndarray  # gravity in robot 1's home frame

    @property
    def n_robots(self) -> int:
        return self.raw_R.shape[0]

    @property
    def sample_rate(self) -> float:
        return self.scenario.sample_rate


def _quantize(x, step):
    return np.round(x / step) * step


def synthesize_dataset(scenario: ScenarioConfig) -> GroundTruthDataset:
    """Compose trajectory, attachment, dynamics, wrench split and noise."""
    payload = scenario.payload
    traj_seq, noise_seq, bias_seq = np.random.SeedSequence(scenario.seed).spawn(3)
    # frame {1} starts at the world origin, level
    traj = generate_payload_trajectory(
        scenario.trajectory, scenario.sample_rate, np.random.default_rng(traj_seq), start=payload.T_1c
    )
    N = payload.n_robots
    T_c = [payload.T_ci(i) for i in range(1, N + 1)]
    streams = [rigid_attach(traj, T) for T in T_c]

    total = newton_euler_total_wrench(payload, traj.R, traj.twist, traj.twist_rate, scenario.gravity)
    nrng = np.random.default_rng(noise_seq)
    noise = scenario.noise
    internal = None
    if noise.internal_force_amplitude > 0:
        k = grasp_null_space(T_c, forces_only=scenario.passive_wrists).shape[1]
        c = nrng.standard_normal(k)
        internal = noise.internal_force_amplitude * c / np.linalg.norm(c)
    # internal forces are physical, so the reference wrenches carry them too
    ref_wrench = np.moveaxis(distribute_wrench(total, T_c, internal, forces_only=scenario.passive_wrists), 1, 0)  # (N, Q, 6)

    ref_R = np.stack([s.R for s in streams])
    ref_p = np.stack([s.p for s in streams])
    ref_V = np.stack([s.twist for s in streams])
    ref_Vd = np.stack([s.twist_rate for s in streams])
    raw_R, raw_p, raw_w, raw_V, raw_Vd = ref_R, ref_p, ref_wrench, ref_V, ref_Vd
    gravity_home = np.array(scenario.gravity, dtype=float)
    if noise.frame_rotation_bias > 0 or noise.frame_position_bias > 0:
        brng = np.random.default_rng(bias_seq)
        B = [
            Transform(geom.rot_exp(brng.normal(0.0, noise.frame_rotation_bias, 3)),
                      brng.normal(0.0, noise.frame_position_bias, 3))
            for _ in range(N)
        ]
        # reporting frame i' = i B_i, home frame likewise: T' = B^-1 T B
        T = np.stack([Bi.inverse().matrix @ geom.homogeneous(ref_R[i], ref_p[i]) @ Bi.matrix for i, Bi in enumerate(B)])
        raw_R, raw_p = T[..., :3, :3], T[..., :3, 3]
        raw_V = np.stack([ref_V[i] @ geom.adjoint(Bi.inverse()).T for i, Bi in enumerate(B)])
        raw_Vd = np.stack([ref_Vd[i] @ geom.adjoint(Bi.inverse()).T for i, Bi in enumerate(B)])
        raw_w = np.stack([ref_wrench[i] @ geom.adjoint(Bi) for i, Bi in enumerate(B)])
        gravity_home = B[0].rotation.T @ gravity_home
    Q = len(traj)
    if noise.pose_rotation_sigma > 0:
        dR = geom.rot_exp(nrng.normal(0.0, noise.pose_rotation_sigma, (N, Q, 3)))
        raw_R = dR @ raw_R
    if noise.pose_position_sigma > 0:
        raw_p = raw_p + nrng.normal(0.0, noise.pose_position_sigma, (N, Q, 3))
    if noise.encoder_quantization > 0:
        q = noise.encoder_quantization
        rv = geom.rot_log_many(raw_R)
        raw_R = geom.rot_exp(_quantize(rv, q))
        raw_p = _quantize(raw_p, q)
    if noise.wrench_moment_sigma > 0 or noise.wrench_force_sigma > 0 or noise.wrench_force_bias > 0:
        raw_w = raw_w.copy()
        raw_w[..., :3] += nrng.normal(0.0, noise.wrench_moment_sigma, (N, Q, 3)) if noise.wrench_moment_sigma > 0 else 0.0
        raw_w[..., 3:] += nrng.normal(0.0, noise.wrench_force_sigma, (N, Q, 3)) if noise.wrench_force_sigma > 0 else 0.0
        if noise.wrench_force_bias > 0:
            raw_w[..., 3:] += nrng.normal(0.0, noise.wrench_force_bias, (N, 1, 3))

    return GroundTruthDataset(
        scenario=scenario,
        times=traj.times,
        raw_R=raw_R,
        raw_p=raw_p,
        raw_wrench=raw_w,
        ref_R=ref_R,
        ref_p=ref_p,
        ref_twist=ref_V,
        ref_twist_rate=ref_Vd,
        ref_wrench=ref_wrench,
        raw_twist=raw_V,
        raw_twist_rate=raw_Vd,
        payload_trajectory=traj,
        total_wrench=total,
        gravity_home=gravity_home,
    )


# ---------------------------------------------------------------------------
# Scenario (de)serialization


def payload_to_dict(p: PayloadModel) -> dict:
    return {
        "mass": float(p.mass),
        "p_1c": p.T_1c.translation.tolist(),
        "R_1c": p.T_1c.rotation.tolist(),
        "principal_inertia": p.principal_inertia.tolist(),
        "grasps": [{"R": T.rotation.tolist(), "p": T.translation.tolist()} for T in p.grasp_transforms],
    }


def payload_from_dict(d: dict) -> PayloadModel:
    """Build a payload from either matrix form or the axis-angle (degrees) form
    used by the bundled presets."""
    if "R_1c" in d:
        T_1c = Transform(d["R_1c"], d["p_1c"])
    else:
        T_1c = Transform.from_axis_angle_deg(d["R_1c_axis_angle_deg"], d["p_1c"])
    grasps = []
    for g in d["grasps"]:
        if "R" in g:
            T = Transform(g["R"], g["p"])
        else:
            T = Transform.from_axis_angle_deg(g["axis_angle_deg"], g["p"])
        if g.get("inverse", False):
            T = T.inverse()
        grasps.append(T)
    return PayloadModel(float(d["mass"]), T_1c, d["principal_inertia"], tuple(grasps))


def trajectory_to_dict(t: TrajectoryConfig) -> dict:
    d = asdict(t)
    d["hold_orientations"] = [np.asarray(R).tolist() for R in t.hold_orientations]
    return d


def trajectory_from_dict(d: dict) -> TrajectoryConfig:
    d = dict(d)
    holds = []
    for h in d.pop("hold_orientations", []):
        h = np.asarray(h, dtype=float)
        holds.append(h if h.shape == (3, 3) else geom.rot_exp(np.radians(h)))
    for key in ("transit_time_range", "dwell_time_range"):
        if key in d:
            d[key] = tuple(d[key])
    return TrajectoryConfig(hold_orientations=tuple(holds), **d)


def noise_from_dict(d: dict | None) -> NoiseConfig:
    if not d:
        return NoiseConfig()
    return NoiseConfig(**{k: float(v) for k, v in d.items() if k in NoiseConfig.__dataclass_fields__})


def scenario_to_dict(s: ScenarioConfig) -> dict:
    return {
        "name": s.name,
        "payload": payload_to_dict(s.payload),
        "trajectory": [trajectory_to_dict(t) for t in s.trajectory],
        "gravity": s.gravity.tolist(),
        "sample_rate": float(s.sample_rate),
        "noise": asdict(s.noise),
        "seed": int(s.seed),
        "passive_wrists": bool(s.passive_wrists),
    }


def scenario_from_dict(d: dict) -> ScenarioConfig:
    return ScenarioConfig(
        payload=payload_from_dict(d["payload"]),
        trajectory=tuple(trajectory_from_dict(t) for t in d.get("trajectory", [{}])),
        gravity=d.get("gravity", DEFAULT_GRAVITY),
        sample_rate=float(d.get("sample_rate", 100.0)),
        noise=noise_from_dict(d.get("noise")),
        seed=int(d.get("seed", 0)),
        name=d.get("name", "custom"),
        passive_wrists=bool(d.get("passive_wrists", False)),
    )


def scenario_hash(s: ScenarioConfig) -> str:
    blob = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
