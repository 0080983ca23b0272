"""Mass and center of mass from static holds.

Frames: ``{s}`` is the reference grasp frame of the grasp graph, ``{s0}``
shares its origin with ``z`` pointing against gravity. During a hold the
forces measured by all grippers balance the weight, and their moments about
``{s}`` balance the moment of the weight.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import geom
from .errors import EstimationError, InsufficientOrientations
from .kinematics import RANK_TOL, GraspGraph

DEFAULT_FORCE_TOL = 0.01
DEFAULT_MIN_DURATION = 6.0


@dataclass(frozen=True)
class StaticSample:
    """One static hold collapsed to window averages.

    ``wrenches`` is ``(N, 6)``, each robot's mean ``(m_i, f_i)`` in its own
    grasp frame; ``R_home`` is the mean orientation of the reference robot
    relative to its home frame; ``gravity_home`` is gravity in that home frame.
    """

    hold_id: int
    start: int
    stop: int
    wrenches: np.ndarray
    R_home: np.ndarray
    gravity_home: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.stop - self.start

    @property
    def R_s0s(self) -> np.ndarray:
        """Orientation of {s} relative to the gravity-aligned {s0}."""
        g = np.asarray(self.gravity_home, dtype=float)
        R_lev = geom.align_vectors_rotation(g, [0.0, 0.0, -1.0])
        return R_lev @ self.R_home

    @property
    def R_ss0(self) -> np.ndarray:
        return self.R_s0s.T

    @property
    def gravity_s(self) -> np.ndarray:
        """Gravity expressed in {s} during this hold."""
        return self.R_home.T @ np.asarray(self.gravity_home, dtype=float)


def stable_windows(X, tol: float, min_len: int) -> list[tuple[int, int]]:
    """Maximal non-overlapping ``[start, stop)`` runs of at least ``min_len``
    rows in which every column's peak-to-peak spread stays within ``tol``."""
    X = np.asarray(X, dtype=float)
    Q, C = X.shape
    hi = [deque() for _ in range(C)]
    lo = [deque() for _ in range(C)]
    start = 0
    out: list[tuple[int, int]] = []
    best = None
    for end in range(Q):
        row = X[end]
        for c in range(C):
            x = row[c]
            h, l = hi[c], lo[c]
            while h and X[h[-1], c] <= x:
                h.pop()
            h.append(end)
            while l and X[l[-1], c] >= x:
                l.pop()
            l.append(end)
        moved = False
        while any(X[hi[c][0], c] - X[lo[c][0], c] > tol for c in range(C)):
            start += 1
            moved = True
            for c in range(C):
                if hi[c][0] < start:
                    hi[c].popleft()
                if lo[c][0] < start:
                    lo[c].popleft()
        if moved and best is not None:
            out.append(best)
            best = None
        if end + 1 - start >= min_len:
            best = (start, end + 1)
    if best is not None:
        out.append(best)
    chosen: list[tuple[int, int]] = []
    for w in out:
        if not chosen or w[0] >= chosen[-1][1]:
            chosen.append(w)
    return chosen


def _true_runs(mask) -> list[tuple[int, int]]:
    m = np.concatenate([[False], np.asarray(mask, dtype=bool), [False]])
    edges = np.flatnonzero(np.diff(m.astype(np.int8)))
    return list(zip(edges[::2], edges[1::2]))


def detect_static_windows(
    wrenches,
    R_home,
    sample_rate: float,
    gravity_home=(0.0, 0.0, -9.81),
    force_tolerance: float = DEFAULT_FORCE_TOL,
    min_duration: float = DEFAULT_MIN_DURATION,
    twists=None,
    twist_tolerance: float | None = None,
) -> list[StaticSample]:
    """Find holds where every force channel of every robot stays constant.

    ``wrenches`` is ``(N, Q, 6)``; ``R_home`` is ``(Q, 3, 3)``, the reference
    robot's measured orientation. When ``twists`` ``(N, Q, 6)`` and
    ``twist_tolerance`` are given, samples where any robot's twist norm
    exceeds the tolerance are excluded as well. Each detected window is
    averaged into one :class:`StaticSample`.
    """
    W = np.asarray(wrenches, dtype=float)
    N, Q = W.shape[:2]
    forces = np.moveaxis(W[..., 3:], 0, 1).reshape(Q, 3 * N)
    min_len = int(np.ceil(min_duration * sample_rate - 1e-9)) + 1
    if twists is not None and twist_tolerance is not None:
        rest = (np.linalg.norm(np.asarray(twists, dtype=float), axis=-1) <= twist_tolerance).all(axis=0)
    else:
        rest = np.ones(Q, dtype=bool)
    windows = []
    for a, b in _true_runs(rest):
        windows += [(int(a + u), int(a + v)) for u, v in stable_windows(forces[a:b], force_tolerance, min_len)]
    samples = []
    R_home = np.asarray(R_home, dtype=float)
    for k, (a, b) in enumerate(windows):
        samples.append(
            StaticSample(
                hold_id=k,
                start=a,
                stop=b,
                wrenches=W[:, a:b].mean(axis=1),
                R_home=geom.project_to_so3(R_home[a:b].mean(axis=0)),
                gravity_home=np.asarray(gravity_home, dtype=float),
            )
        )
    return samples


@dataclass(frozen=True)
class MassFit:
    mass: float
    residual: float
    horizontal_residual: float
    n_samples: int
    valid: bool


@dataclass(frozen=True)
class ComFit:
    p_sc: np.ndarray
    residual: float
    singular_values: np.ndarray
    n_samples: int


@dataclass(frozen=True)
class StaticsResult:
    mass: float
    p_sc: np.ndarray
    mass_fit: MassFit
    com_fit: ComFit

    @property
    def sample_count(self) -> int:
        return self.mass_fit.n_samples


def _total_force_s(sample: StaticSample, graph: GraspGraph) -> np.ndarray:
    """``sum_i R_si f_i`` in {s}."""
    return sum(graph[i].rotation @ sample.wrenches[k, 3:] for k, i in enumerate(graph.frames))


def estimate_mass(samples, graph: GraspGraph, gravity_magnitude: float = 9.81) -> MassFit:
    """Least squares on the vertical force balance of each hold.

    Row ``q``: ``A_q = z . g`` with ``g = (0, 0, -|g|)`` in ``{s0}``, and
    ``b_q = -z . sum_i R_s0i f_i``. The horizontal components are only
    reported as a residual.
    """
    samples = list(samples)
    if not samples:
        raise EstimationError("mass estimation needs at least one static sample")
    g0 = np.array([0.0, 0.0, -abs(float(gravity_magnitude))])
    A = np.full(len(samples), g0[2])
    F0 = np.array([s.R_s0s @ _total_force_s(s, graph) for s in samples])
    b = -F0[:, 2]
    m = float(A @ b / (A @ A))
    resid = m * g0 + F0
    return MassFit(
        mass=m,
        residual=float(np.linalg.norm(A * m - b)),
        horizontal_residual=float(np.linalg.norm(resid[:, :2])),
        n_samples=len(samples),
        valid=bool(m > 0),
    )


def com_system(samples, mass: float, graph: GraspGraph, gravity_magnitude: float = 9.81, ignore_moments: bool = False):
    g0 = np.array([0.0, 0.0, -abs(float(gravity_magnitude))])
    A_rows, b_rows = [], []
    for s in samples:
        A_rows.append(geom.skew(s.R_ss0 @ (mass * g0)))
        b = np.zeros(3)
        for k, i in enumerate(graph.frames):
            T = graph[i]
            Rf = T.rotation @ s.wrenches[k, 3:]
            b += np.cross(T.translation, Rf)
            if not ignore_moments:
                b += T.rotation @ s.wrenches[k, :3]
        b_rows.append(b)
    return np.vstack(A_rows), np.concatenate(b_rows)


def estimate_com(
    samples,
    mass: float,
    graph: GraspGraph,
    gravity_magnitude: float = 9.81,
    ignore_moments: bool = False,
    rank_tol: float = RANK_TOL,
) -> ComFit:
    """Least-squares CoM ``p_sc`` from the moment balance of each hold.

    ``ignore_moments`` drops the measured grasp moments (passive-wrist
    grippers, where they are zero by construction).
    """
    samples = list(samples)
    if not samples:
        raise EstimationError("CoM estimation needs static samples")
    A, b = com_system(samples, mass, graph, gravity_magnitude, ignore_moments)
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    keep = S > rank_tol * max(S[0], 1e-300)
    p = Vt[keep].T @ ((U[:, keep].T @ b) / S[keep])
    if not keep.all():
        raise InsufficientOrientations(
            "static holds do not differ by a rotation about a non-vertical axis; "
            "the CoM component along gravity is not determined",
            Vt[~keep],
            singular_values=S,
            partial_solution=p,
        )
    return ComFit(p_sc=p, residual=float(np.linalg.norm(A @ p - b)), singular_values=S, n_samples=len(samples))


def estimate_statics(samples, graph: GraspGraph, gravity_magnitude: float = 9.81, ignore_moments: bool = False) -> StaticsResult:
    mfit = estimate_mass(samples, graph, gravity_magnitude)
    if not mfit.valid:
        raise EstimationError(f"non-positive mass estimate {mfit.mass:.6g} kg")
    cfit = estimate_com(samples, mfit.mass, graph, gravity_magnitude, ignore_moments)
    return StaticsResult(mass=mfit.mass, p_sc=cfit.p_sc, mass_fit=mfit, com_fit=cfit)
