"""Rotational inertia about the center of mass from dynamic data.

Frame ``{b}`` sits at the estimated CoM with axes parallel to the reference
grasp frame ``{s}``; ``{c}`` shares its origin and follows the principal axes.
Inertia vectors use the element order ``(Ixx, Ixy, Ixz, Iyy, Iyz, Izz)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geom
from .errors import EstimationError, InsufficientExcitation
from .kinematics import RANK_TOL, GraspGraph

INERTIA_LABELS = ("Ixx", "Ixy", "Ixz", "Iyy", "Iyz", "Izz")
_IDX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
DEGENERATE_GAP = 1e-6
PSD_POLICIES = ("project", "discard")


def inertia_from_vector(v) -> np.ndarray:
    """Symmetric 3x3 matrix from the six unique elements."""
    v = np.asarray(v, dtype=float)
    xx, xy, xz, yy, yz, zz = np.moveaxis(v, -1, 0)
    return np.stack(
        [np.stack([xx, xy, xz], -1), np.stack([xy, yy, yz], -1), np.stack([xz, yz, zz], -1)], -2
    )


def inertia_to_vector(I) -> np.ndarray:
    I = np.asarray(I, dtype=float)
    return np.stack([I[..., r, c] for r, c in _IDX], -1)


def build_regressor(alpha, omega) -> np.ndarray:
    """Stacked ``A_q + B_q`` blocks, shape ``(..., 3, 6)``.

    ``A_q`` carries the angular acceleration terms and ``B_q`` the gyroscopic
    ``[w] I w`` terms, so that ``(A_q + B_q) I_reg = I alpha + [w] I w``.
    """
    a = np.asarray(alpha, dtype=float)
    w = np.asarray(omega, dtype=float)
    ax, ay, az = np.moveaxis(a, -1, 0)
    wx, wy, wz = np.moveaxis(w, -1, 0)
    z = np.zeros_like(ax + wx)
    A = np.stack(
        [
            np.stack([ax, ay, az, z, z, z], -1),
            np.stack([z, ax, z, ay, az, z], -1),
            np.stack([z, z, ax, z, ay, az], -1),
        ],
        -2,
    )
    B = np.stack(
        [
            np.stack([z, -wx * wz, wx * wy, -wy * wz, -wz**2 + wy**2, wy * wz], -1),
            np.stack([wx * wz, wy * wz, wz**2 - wx**2, z, -wx * wy, -wx * wz], -1),
            np.stack([-wx * wy, -wy**2 + wx**2, -wy * wz, wx * wy, wx * wz, z], -1),
        ],
        -2,
    )
    return A + B


def build_regressor_row(alpha_b, omega_b) -> np.ndarray:
    """The 3x6 block for one timestep."""
    return build_regressor(np.reshape(alpha_b, 3), np.reshape(omega_b, 3))


def moment_rhs(wrenches, graph: GraspGraph, p_sc) -> np.ndarray:
    """Net moment about the CoM in {b}: ``sum_i [p_bi](R_bi f_i) + R_bi m_i``.

    ``wrenches`` is ``(N, 6)`` or ``(N, Q, 6)`` ordered like ``graph.frames``.
    Gravity acts at the CoM and adds no moment.
    """
    W = np.asarray(wrenches, dtype=float)
    p_sc = np.asarray(p_sc, dtype=float)
    y = np.zeros(W.shape[1:-1] + (3,))
    for k, i in enumerate(graph.frames):
        T = graph[i]
        m = W[k, ..., :3] @ T.rotation.T
        f = W[k, ..., 3:] @ T.rotation.T
        y = y + np.cross(T.translation - p_sc, f) + m
    return y


def body_angular_rates(twist_s, twist_rate_s, graph: GraspGraph):
    """Angular velocity and acceleration of the payload in {b}.

    Inputs are the reference robot's twist and twist rate in its own frame;
    only the rotation of ``T_b,ref`` matters because {b} and {s} are parallel.
    """
    R = graph[graph.reference].rotation
    w = np.asarray(twist_s, dtype=float)[..., :3] @ R.T
    a = np.asarray(twist_rate_s, dtype=float)[..., :3] @ R.T
    return w, a


@dataclass(frozen=True)
class InertiaFit:
    matrix: np.ndarray
    vector: np.ndarray
    residual: float
    singular_values: np.ndarray
    n_samples: int


def estimate_inertia(omega_b, alpha_b, y, rank_tol: float = RANK_TOL) -> InertiaFit:
    """Least-squares inertia about the CoM from per-timestep rates and moments."""
    omega_b = np.atleast_2d(np.asarray(omega_b, dtype=float))
    alpha_b = np.atleast_2d(np.asarray(alpha_b, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    Q = len(y)
    if Q < 2:
        raise EstimationError(f"inertia estimation needs at least 2 timesteps, got {Q}")
    X = build_regressor(alpha_b, omega_b).reshape(3 * Q, 6)
    yv = y.reshape(3 * Q)
    U, S, Vt = np.linalg.svd(X, full_matrices=False)
    keep = S > rank_tol * max(S[0], 1e-300)
    v = Vt[keep].T @ ((U[:, keep].T @ yv) / S[keep])
    if not keep.all():
        null = Vt[~keep]
        names = ", ".join(
            "(" + " ".join(f"{c:+.3f}{lab}" for c, lab in zip(d, INERTIA_LABELS) if abs(c) > 1e-6) + ")"
            for d in null
        )
        raise InsufficientExcitation(
            f"rotational excitation does not determine the inertia; unobservable combinations {names}",
            null,
            singular_values=S,
            partial_solution=v,
        )
    return InertiaFit(
        matrix=inertia_from_vector(v),
        vector=v,
        residual=float(np.linalg.norm(X @ v - yv)),
        singular_values=S,
        n_samples=Q,
    )


def psd_project(I, tol: float = 1e-12):
    """Clamp negative eigenvalues to zero.

    Returns ``(matrix, projected, magnitude)`` where ``magnitude`` is the size
    of the most negative eigenvalue. Eigenvalues above ``-tol`` times the
    spectral radius count as non-negative, so the map is idempotent; such
    inputs are returned unchanged.
    """
    I = np.asarray(I, dtype=float)
    lam, V = np.linalg.eigh(0.5 * (I + I.T))
    floor = -tol * max(np.abs(lam).max(), 1e-300)
    if lam.min() >= floor:
        return I.copy(), False, 0.0
    out = (V * np.maximum(lam, 0.0)) @ V.T
    return 0.5 * (out + out.T), True, float(-lam.min())


@dataclass(frozen=True)
class PrincipalInertia:
    """Principal frame ``R_bc`` and moments sorted ascending."""

    R_bc: np.ndarray
    moments: np.ndarray
    psd_projected: bool = False
    negative_eigenvalue_magnitude: float = 0.0
    degenerate: bool = False

    @property
    def inertia_c(self) -> np.ndarray:
        return np.diag(self.moments)


def principal_axes(I_b, gap_tol: float = DEGENERATE_GAP) -> PrincipalInertia:
    """Eigenvectors ordered by ascending eigenvalue as the columns of ``R_bc``.

    Each column's sign makes its diagonal entry non-negative, then the third
    column is flipped if needed for ``det = +1``. Inside a repeated
    eigenvalue's eigenspace the basis closest to the identity is chosen.
    """
    I_b = np.asarray(I_b, dtype=float)
    lam, V = np.linalg.eigh(0.5 * (I_b + I_b.T))
    scale = max(np.abs(lam).max(), 1e-300)
    groups = [[0]]
    for k in range(1, 3):
        if lam[k] - lam[k - 1] < gap_tol * scale:
            groups[-1].append(k)
        else:
            groups.append([k])
    degenerate = any(len(g) > 1 for g in groups)
    R = V.copy()
    for g in groups:
        E = V[:, g]
        if len(g) > 1:
            # orthogonal Procrustes toward the matching identity columns
            U, _, Wt = np.linalg.svd(E.T @ np.eye(3)[:, g])
            R[:, g] = E @ (U @ Wt)
        else:
            k = g[0]
            R[:, k] = E[:, 0] if E[k, 0] >= 0 else -E[:, 0]
    if np.linalg.det(R) < 0:
        R[:, 2] = -R[:, 2]
    return PrincipalInertia(R_bc=R, moments=lam, degenerate=degenerate)


def principal_frame_error_deg(R_est, R_true) -> float:
    """Angle between principal frames, ignoring the sign ambiguity of the
    eigenvectors (flips of two axes at a time)."""
    R_est = np.asarray(R_est, dtype=float)
    R_true = np.asarray(R_true, dtype=float)
    best = np.inf
    for d in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
        best = min(best, geom.rotation_error_deg(R_est * np.array(d), R_true))
    return float(best)


@dataclass(frozen=True)
class InertiaResult:
    I_b: np.ndarray
    fit: InertiaFit
    principal: PrincipalInertia

    @property
    def moments(self) -> np.ndarray:
        return self.principal.moments


def finalize_inertia(fit: InertiaFit, policy: str = "project") -> InertiaResult:
    """Apply the negative-eigenvalue policy and extract principal axes."""
    if policy not in PSD_POLICIES:
        raise ValueError(f"unknown PSD policy {policy!r}; expected one of {PSD_POLICIES}")
    I, projected, mag = psd_project(fit.matrix)
    if projected and policy == "discard":
        raise EstimationError(f"inertia estimate has a negative eigenvalue (-{mag:.3g} kg m^2); discarded")
    pa = principal_axes(I)
    pa = PrincipalInertia(pa.R_bc, pa.moments, projected, mag, pa.degenerate)
    return InertiaResult(I_b=I, fit=fit, principal=pa)


def estimate_inertia_from_streams(
    twist_ref,
    twist_rate_ref,
    wrenches,
    graph: GraspGraph,
    p_sc,
    policy: str = "project",
    rank_tol: float = RANK_TOL,
) -> InertiaResult:
    """Full inertia stage from the reference robot's rates and all wrenches."""
    w, a = body_angular_rates(twist_ref, twist_rate_ref, graph)
    y = moment_rhs(wrenches, graph, p_sc)
    return finalize_inertia(estimate_inertia(w, a, y, rank_tol), policy)
