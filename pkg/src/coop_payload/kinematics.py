"""Relative grasp-frame estimation from twist data alone.

Pairwise: rotation from the SVD solution of Wahba's problem on angular
velocities, then translation from a linear least-squares fit of the
linear-velocity relation. Pairwise results are chained into a graph rooted
at a reference frame, and optionally refined jointly over all pairs with a
quasi-Newton method.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy import optimize

from . import geom
from .errors import DisconnectedGraphError, InsufficientExcitation
from .geom import Transform

RANK_TOL = 1e-8


@dataclass(frozen=True)
class TwistBatch:
    """``Q`` synchronized twists of one robot, as ``3 x Q`` blocks."""

    angular: np.ndarray
    linear: np.ndarray
    robot: Hashable = None
    times: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.angular, dtype=float)
        v = np.asarray(self.linear, dtype=float)
        if w.ndim != 2 or w.shape[0] != 3 or w.shape != v.shape:
            raise ValueError(f"expected matching 3xQ blocks, got {w.shape} and {v.shape}")
        object.__setattr__(self, "angular", w)
        object.__setattr__(self, "linear", v)

    @classmethod
    def from_twists(cls, twists, robot=None, times=None) -> "TwistBatch":
        """Build from a ``(Q, 6)`` array of ``(omega, v)`` rows."""
        V = np.asarray(twists, dtype=float)
        return cls(V[:, :3].T, V[:, 3:].T, robot, times)

    @property
    def n_samples(self) -> int:
        return self.angular.shape[1]

    @property
    def rows(self) -> np.ndarray:
        return np.vstack([self.angular, self.linear]).T


@dataclass(frozen=True)
class RotationFit:
    rotation: np.ndarray
    singular_values: np.ndarray
    cost: float


@dataclass(frozen=True)
class PositionFit:
    translation: np.ndarray
    singular_values: np.ndarray
    residual: float


@dataclass(frozen=True)
class PairwiseEstimate:
    pair: tuple
    rotation: np.ndarray
    translation: np.ndarray
    rotation_residual: float
    position_residual: float
    rotation_singular_values: np.ndarray
    position_singular_values: np.ndarray

    @property
    def transform(self) -> Transform:
        return Transform(self.rotation, self.translation, frames=self.pair)


def wahba_cost(R, omega_i, omega_j) -> float:
    """``||R omega_j - omega_i||_F^2``."""
    return float(np.sum((np.asarray(R) @ omega_j - omega_i) ** 2))


def estimate_rotation(omega_i, omega_j, rank_tol: float = RANK_TOL) -> RotationFit:
    """Best rotation ``R_ij`` with ``omega_i ~ R_ij omega_j`` (both ``3 x Q``)."""
    omega_i = np.asarray(omega_i, dtype=float)
    omega_j = np.asarray(omega_j, dtype=float)
    if omega_i.shape != omega_j.shape or omega_i.shape[0] != 3:
        raise ValueError("angular velocity blocks must both be 3 x Q")
    if omega_i.shape[1] < 3:
        raise InsufficientExcitation("rotation fit needs at least 3 samples", np.eye(3))
    X = omega_j @ omega_i.T
    U, S, Vt = np.linalg.svd(X)
    if S[-1] < rank_tol * S[0] or S[0] == 0.0:
        raise InsufficientExcitation(
            "angular velocities do not span 3 dimensions; the rotation is not determined",
            U[:, S < rank_tol * max(S[0], 1e-300)].T,
            singular_values=S,
        )
    V = Vt.T
    D = np.diag([1.0, 1.0, np.linalg.det(V @ U.T)])
    R = V @ D @ U.T
    return RotationFit(rotation=R, singular_values=S, cost=wahba_cost(R, omega_i, omega_j))


def position_system(R_hat, omega_j, v_i, v_j):
    """Stacked ``(3Q x 3)`` matrix and right-hand side of the translation fit."""
    Rw = (np.asarray(R_hat) @ omega_j).T
    A = geom.skew(Rw).reshape(-1, 3)
    b = ((np.asarray(R_hat) @ v_j) - v_i).T.reshape(-1)
    return A, b


def estimate_position(R_hat, omega_j, v_i, v_j, rank_tol: float = RANK_TOL) -> PositionFit:
    """Least-squares ``p_ij`` from ``v_i = -[R omega_j] p + R v_j``.

    Solved by SVD. If the angular velocities never leave a line, the
    component of ``p`` along that line is unobservable; the error carries
    that direction and the minimum-norm solution.
    """
    A, b = position_system(R_hat, omega_j, v_i, v_j)
    if A.shape[0] < 6:
        raise InsufficientExcitation("position fit needs at least 2 samples", np.eye(3))
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    keep = S > rank_tol * max(S[0], 1e-300)
    coef = (U[:, keep].T @ b) / S[keep]
    p = Vt[keep].T @ coef
    if not keep.all():
        raise InsufficientExcitation(
            "angular velocities are confined to a line; translation along it is unobservable",
            Vt[~keep],
            singular_values=S,
            partial_solution=p,
        )
    return PositionFit(translation=p, singular_values=S, residual=float(np.linalg.norm(A @ p - b)))


def estimate_pairwise(batch_i: TwistBatch, batch_j: TwistBatch, rank_tol: float = RANK_TOL) -> PairwiseEstimate:
    if batch_i.n_samples != batch_j.n_samples:
        raise ValueError("twist batches are not synchronized")
    rot = estimate_rotation(batch_i.angular, batch_j.angular, rank_tol)
    pos = estimate_position(rot.rotation, batch_j.angular, batch_i.linear, batch_j.linear, rank_tol)
    return PairwiseEstimate(
        pair=(batch_i.robot, batch_j.robot),
        rotation=rot.rotation,
        translation=pos.translation,
        rotation_residual=float(np.sqrt(rot.cost)),
        position_residual=pos.residual,
        rotation_singular_values=rot.singular_values,
        position_singular_values=pos.singular_values,
    )


@dataclass(frozen=True)
class GraspGraph:
    """Every frame's configuration ``T_ref,i`` in the reference frame."""

    reference: Hashable
    transforms: Mapping[Hashable, Transform]
    meta: dict = field(default_factory=dict)

    @property
    def frames(self) -> list:
        return sorted(self.transforms)

    def T(self, i, j) -> Transform:
        """``T_ij = T_ref,i^-1 T_ref,j``."""
        return self.transforms[i].inverse() @ self.transforms[j]

    def __getitem__(self, i) -> Transform:
        return self.transforms[i]


def chain_estimates(pairwise: Iterable[PairwiseEstimate], reference, frames: Iterable | None = None) -> GraspGraph:
    """Compose pairwise transforms along a breadth-first spanning tree."""
    edges: dict = {}
    nodes = set() if frames is None else set(frames)
    nodes.add(reference)
    for est in pairwise:
        i, j = est.pair
        T = Transform(est.rotation, est.translation)
        edges.setdefault(i, []).append((j, T))
        edges.setdefault(j, []).append((i, T.inverse()))
        nodes.update((i, j))
    out = {reference: Transform.identity()}
    queue = deque([reference])
    while queue:
        i = queue.popleft()
        for j, T_ij in sorted(edges.get(i, []), key=lambda e: str(e[0])):
            if j not in out:
                out[j] = out[i] @ T_ij
                queue.append(j)
    missing = nodes - set(out)
    if missing:
        raise DisconnectedGraphError(missing)
    return GraspGraph(reference, dict(sorted(out.items(), key=lambda kv: str(kv[0]))), {"refined": False})


# ---------------------------------------------------------------------------
# Joint refinement


class _LoopProblem:
    def __init__(self, graph: GraspGraph, batches: Mapping, w_pair: float, w_loop: float | None):
        self.graph = graph
        self.reference = graph.reference
        self.free = [f for f in graph.frames if f != graph.reference]
        self.twists = {k: b.rows for k, b in batches.items()}
        Q = min(b.n_samples for b in batches.values())
        self.Q = Q
        self.w_pair = float(w_pair)
        self.w_loop = float(Q if w_loop is None else w_loop)
        frames = graph.frames
        self.pairs = [(i, j) for i in frames for j in frames if i != j and i in self.twists and j in self.twists]
        self.cycles = list(itertools.combinations(frames, 3))

    def transforms(self, x) -> dict:
        out = {self.reference: Transform.identity()}
        for n, f in enumerate(self.free):
            T0 = self.graph.transforms[f]
            xi = x[6 * n: 6 * n + 6]
            out[f] = Transform(T0.rotation @ geom.rot_exp(xi[:3]), T0.translation + xi[3:])
        return out

    def cost(self, x) -> float:
        T = self.transforms(x)
        total = 0.0
        for i, j in self.pairs:
            T_ij = T[i].inverse() @ T[j]
            r = self.twists[j] @ geom.adjoint(T_ij).T - self.twists[i]
            total += self.w_pair * float(np.sum(r * r))
        for i, j, k in self.cycles:
            loop = (T[i].inverse() @ T[j]) @ (T[j].inverse() @ T[k]) @ (T[k].inverse() @ T[i])
            total += self.w_loop * float(np.sum(geom.se3_log(loop) ** 2))
        return total


def _central_gradient(f, x, h):
    g = np.empty_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def refine_loop_closure(
    graph: GraspGraph,
    batches: Mapping | Sequence[TwistBatch],
    w_pair: float = 1.0,
    w_loop: float | None = None,
    max_iter: int = 200,
    rel_tol: float = 1e-10,
    fd_step: float = 1e-6,
) -> GraspGraph:
    """Jointly refine all ``T_ref,i`` against every ordered pair of twist data.

    Cost: ``w_pair * sum ||Ad(T_ij) V_j - V_i||^2`` over ordered pairs and
    samples, plus ``w_loop * ||log(T_ij T_jk T_ki)||^2`` over 3-cycles
    (``w_loop`` defaults to ``Q``). With one transform per frame the cycle
    term vanishes identically, so loop closure holds exactly. Minimized by
    BFGS over rotation-vector/translation perturbations with central
    difference gradients. The returned cost never exceeds the initial cost.
    """
    if not isinstance(batches, Mapping):
        batches = {b.robot: b for b in batches}
    if len(graph.frames) < 2:
        raise ValueError("refinement needs at least two frames")
    prob = _LoopProblem(graph, batches, w_pair, w_loop)
    x0 = np.zeros(6 * len(prob.free))
    c0 = prob.cost(x0)
    meta = {"refined": True, "initial_cost": c0, "final_cost": c0, "iterations": 0, "success": True}
    if not np.isfinite(c0):
        meta.update(success=False, message="non-finite initial cost")
        return GraspGraph(graph.reference, graph.transforms, meta)
    scale = 1.0 / max(prob.Q, 1)
    f = lambda x: prob.cost(x) * scale
    jac = lambda x: _central_gradient(f, x, fd_step)

    state = {"prev": f(x0), "iters": 0}

    def stop_on_stall(intermediate_result):
        state["iters"] += 1
        cur = float(intermediate_result.fun)
        prev = state["prev"]
        state["prev"] = cur
        if prev - cur <= rel_tol * max(abs(prev), 1e-300):
            raise StopIteration

    if c0 * scale < 1e-24:
        res_x = x0
        message = "initial graph already optimal"
    else:
        res = optimize.minimize(
            f, x0, jac=jac, method="BFGS", callback=stop_on_stall,
            options={"maxiter": max_iter, "gtol": 1e-14},
        )
        res_x, message = res.x, str(res.message)
    c1 = prob.cost(res_x)
    meta.update(iterations=state["iters"], message=message)
    if not np.isfinite(c1):
        meta.update(success=False, message="non-finite cost during refinement")
        return GraspGraph(graph.reference, graph.transforms, meta)
    if c1 > c0:
        meta.update(message=message + "; kept initial estimate (cost did not decrease)")
        return GraspGraph(graph.reference, graph.transforms, meta)
    meta["final_cost"] = c1
    return GraspGraph(graph.reference, prob.transforms(res_x), meta)


def cyclic_pairs(frames: Sequence) -> list[tuple]:
    """``(1,2), (2,3), ..., (N,1)``; just ``(1,2)`` for two frames."""
    frames = list(frames)
    if len(frames) == 2:
        return [(frames[0], frames[1])]
    return [(frames[k], frames[(k + 1) % len(frames)]) for k in range(len(frames))]


def estimate_grasp_graph(
    batches: Sequence[TwistBatch],
    reference=None,
    pairs: Sequence[tuple] | None = None,
    refine: bool = True,
    **refine_kwargs,
) -> tuple[GraspGraph, list[PairwiseEstimate]]:
    """Kinematics stage: twist batches in, grasp graph out."""
    by_id = {b.robot: b for b in batches}
    frames = list(by_id)
    reference = frames[0] if reference is None else reference
    pairs = cyclic_pairs(frames) if pairs is None else pairs
    estimates = [estimate_pairwise(by_id[i], by_id[j]) for i, j in pairs]
    graph = chain_estimates(estimates, reference, frames)
    if refine and len(frames) >= 2:
        graph = refine_loop_closure(graph, by_id, **refine_kwargs)
    return graph, estimates
