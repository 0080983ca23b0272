"""SO(3)/SE(3) primitives: skew matrices, adjoints, twists and wrenches.

Conventions follow the (angular, linear) ordering throughout:

* a twist is ``V = (omega, v)`` expressed in the frame it is tagged with,
* a wrench is ``F = (m, f)`` expressed in the frame it is tagged with,
* ``T_ij = (R_ij, p_ij)`` is the configuration of frame ``{j}`` in ``{i}``.

Array helpers broadcast over leading dimensions so the same code serves a
single sample or a whole ``(Q, ...)`` time series.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Optional

import numpy as np

# Library tolerances. Functions take keyword overrides where it matters.
ORTHONORMAL_TOL = 1e-12
PI_BRANCH_TOL = 1e-9
SMALL_ANGLE = 1e-4

_EYE3 = np.eye(3)


class FrameMismatchError(ValueError):
    """Raised when an operand is expressed in a different frame than expected."""


# ---------------------------------------------------------------------------
# so(3) / SO(3)


def skew(v) -> np.ndarray:
    """Return ``[v]``, the 3x3 skew-symmetric matrix with ``[v] w = v x w``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(S) -> np.ndarray:
    """Inverse of :func:`skew`. The input is antisymmetrized first."""
    S = np.asarray(S, dtype=float)
    return 0.5 * np.stack(
        [
            S[..., 2, 1] - S[..., 1, 2],
            S[..., 0, 2] - S[..., 2, 0],
            S[..., 1, 0] - S[..., 0, 1],
        ],
        axis=-1,
    )


def project_to_so3(M) -> np.ndarray:
    """Nearest rotation matrix (Frobenius sense) via SVD."""
    M = np.asarray(M, dtype=float)
    U, _, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U @ Vt))
    d = np.where(d == 0, 1.0, d)
    D = np.zeros(M.shape)
    D[..., 0, 0] = 1.0
    D[..., 1, 1] = 1.0
    D[..., 2, 2] = d
    return U @ D @ Vt


def is_rotation(R, tol: float = ORTHONORMAL_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3) or not np.all(np.isfinite(R)):
        return False
    ortho = np.abs(R @ np.swapaxes(R, -1, -2) - _EYE3).max()
    return bool(ortho <= tol and np.abs(np.linalg.det(R) - 1.0).max() <= tol)


def as_rotation(M, tol: float = ORTHONORMAL_TOL) -> np.ndarray:
    """Return ``M`` as a rotation, re-orthonormalizing raw data when needed."""
    M = np.asarray(M, dtype=float)
    if is_rotation(M, tol):
        return M.copy()
    return project_to_so3(M)


def rot_exp(w) -> np.ndarray:
    """Rodrigues' formula, with a series expansion for small angles."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w, axis=-1)
    small = theta < SMALL_ANGLE
    t = np.where(small, 1.0, theta)
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(t) / t)
    b = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, (1.0 - np.cos(t)) / (t * t))
    W = skew(w)
    return _EYE3 + a[..., None, None] * W + b[..., None, None] * (W @ W)


def rot_log(R, return_branch: bool = False, pi_tol: float = PI_BRANCH_TOL):
    """Exponential coordinates ``w`` of a single rotation, ``|w|`` in ``[0, pi]``.

    With ``return_branch=True`` the branch used is returned as well: ``"small"``
    (series expansion), ``"regular"``, ``"near_pi"`` (axis from the symmetric
    part, sign from the antisymmetric part) or ``"pi"`` (a half turn within
    ``pi_tol``; the axis sign is then arbitrary and fixed so that its largest
    component is positive).
    """
    R = np.asarray(R, dtype=float)
    cos_t = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_t))
    a = vee(R)  # = sin(theta) * axis
    if theta < SMALL_ANGLE:
        w = (1.0 + theta * theta / 6.0) * a
        branch = "small"
    elif theta < np.pi - 1e-2:
        w = theta / np.sin(theta) * a
        branch = "regular"
    else:
        B = 0.5 * (R + R.T) - cos_t * _EYE3  # (1 - cos) u u^T
        k = int(np.argmax(np.diag(B)))
        u = B[:, k] / np.linalg.norm(B[:, k])
        if np.pi - theta <= pi_tol:
            branch = "pi"
            if u[int(np.argmax(np.abs(u)))] < 0:
                u = -u
        else:
            branch = "near_pi"
            if np.dot(u, a) < 0:
                u = -u
        w = theta * u
    if return_branch:
        return w, branch
    return w


def rot_log_many(R) -> np.ndarray:
    """Vectorized :func:`rot_log` over a stack ``(..., 3, 3)``."""
    R = np.asarray(R, dtype=float)
    a = vee(R)
    s = np.linalg.norm(a, axis=-1)
    c = (np.trace(R, axis1=-2, axis2=-1) - 1.0) / 2.0
    theta = np.arctan2(s, c)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, s)
    scale = np.where(small, 1.0 + theta * theta / 6.0, theta / safe)
    w = scale[..., None] * a
    near_pi = theta >= np.pi - 1e-2
    if np.any(near_pi):
        flat_R = R.reshape(-1, 3, 3)
        flat_w = w.reshape(-1, 3)
        for n in np.flatnonzero(near_pi.reshape(-1)):
            flat_w[n] = rot_log(flat_R[n])
        w = flat_w.reshape(w.shape)
    return w


def rotation_angle(R) -> np.ndarray:
    """Rotation angle in radians, broadcasting over stacks of rotations."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R, axis1=-2, axis2=-1)
    # atan2 form stays accurate near 0 and pi
    s = np.linalg.norm(vee(R), axis=-1)
    return np.arctan2(s, (tr - 1.0) / 2.0)


def rotation_error_deg(R_true, R_est) -> float:
    """Angle in degrees of ``log(R_true^T R_est)``."""
    R_true = np.asarray(R_true, dtype=float)
    R_est = np.asarray(R_est, dtype=float)
    return float(np.degrees(np.linalg.norm(rot_log(R_true.T @ R_est))))


def rot_axis(axis: str | np.ndarray, angle: float) -> np.ndarray:
    """Rotation by ``angle`` radians about ``"x"``, ``"y"``, ``"z"`` or a 3-vector."""
    if isinstance(axis, str):
        u = _EYE3["xyz".index(axis)]
    else:
        u = np.asarray(axis, dtype=float)
        u = u / np.linalg.norm(u)
    return rot_exp(u * angle)


def quat_from_rot(R) -> np.ndarray:
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0``; broadcasts."""
    R = np.asarray(R, dtype=float)
    batch = R.shape[:-2]
    R = R.reshape(-1, 3, 3)
    q = np.empty((R.shape[0], 4))
    for n, M in enumerate(R):
        tr = M[0, 0] + M[1, 1] + M[2, 2]
        k = int(np.argmax([tr, M[0, 0], M[1, 1], M[2, 2]]))
        if k == 0:
            s = 2.0 * np.sqrt(1.0 + tr)
            q[n] = (0.25 * s, (M[2, 1] - M[1, 2]) / s, (M[0, 2] - M[2, 0]) / s, (M[1, 0] - M[0, 1]) / s)
        elif k == 1:
            s = 2.0 * np.sqrt(1.0 + M[0, 0] - M[1, 1] - M[2, 2])
            q[n] = ((M[2, 1] - M[1, 2]) / s, 0.25 * s, (M[0, 1] + M[1, 0]) / s, (M[0, 2] + M[2, 0]) / s)
        elif k == 2:
            s = 2.0 * np.sqrt(1.0 - M[0, 0] + M[1, 1] - M[2, 2])
            q[n] = ((M[0, 2] - M[2, 0]) / s, (M[0, 1] + M[1, 0]) / s, 0.25 * s, (M[1, 2] + M[2, 1]) / s)
        else:
            s = 2.0 * np.sqrt(1.0 - M[0, 0] - M[1, 1] + M[2, 2])
            q[n] = ((M[1, 0] - M[0, 1]) / s, (M[0, 2] + M[2, 0]) / s, (M[1, 2] + M[2, 1]) / s, 0.25 * s)
    q *= np.where(q[:, :1] < 0, -1.0, 1.0)
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return q.reshape(batch + (4,))


def rot_from_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    w, x, y, z = np.moveaxis(q, -1, 0)
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def align_vectors_rotation(a, b) -> np.ndarray:
    """Minimal rotation taking direction ``a`` onto direction ``b``."""
    a = np.asarray(a, dtype=float) / np.linalg.norm(a)
    b = np.asarray(b, dtype=float) / np.linalg.norm(b)
    axis = np.cross(a, b)
    s = np.linalg.norm(axis)
    c = float(np.dot(a, b))
    if s < 1e-15:
        if c > 0:
            return _EYE3.copy()
        # antiparallel: half turn about any axis orthogonal to a
        perp = np.cross(a, _EYE3[int(np.argmin(np.abs(a)))])
        return rot_exp(np.pi * perp / np.linalg.norm(perp))
    return rot_exp(axis / s * np.arctan2(s, c))


# ---------------------------------------------------------------------------
# SE(3)


def homogeneous(R, p) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    p = np.asarray(p, dtype=float)
    T = np.zeros(R.shape[:-2] + (4, 4))
    T[..., :3, :3] = R
    T[..., :3, 3] = p
    T[..., 3, 3] = 1.0
    return T


def adjoint_matrix(R, p) -> np.ndarray:
    """``[[R, 0], [[p] R, R]]`` for (stacks of) rotations and translations."""
    R = np.asarray(R, dtype=float)
    Ad = np.zeros(R.shape[:-2] + (6, 6))
    Ad[..., :3, :3] = R
    Ad[..., 3:, 3:] = R
    Ad[..., 3:, :3] = skew(p) @ R
    return Ad


@dataclass(frozen=True)
class Transform:
    """Configuration ``T_ij`` of frame ``j`` relative to frame ``i``.

    ``frames`` optionally records ``(i, j)`` so twist/wrench transforms can
    check that operands are expressed where they should be.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    frames: Optional[tuple[Hashable, Hashable]] = None

    def __post_init__(self):
        R = as_rotation(self.rotation)
        p = np.array(self.translation, dtype=float).reshape(3)
        R.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    @classmethod
    def identity(cls, frames=None) -> "Transform":
        return cls(np.eye(3), np.zeros(3), frames)

    @classmethod
    def from_matrix(cls, T, frames=None) -> "Transform":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, :3], T[:3, 3], frames)

    @classmethod
    def from_axis_angle_deg(cls, w_deg, p, frames=None) -> "Transform":
        return cls(rot_exp(np.radians(np.asarray(w_deg, dtype=float))), p, frames)

    @property
    def matrix(self) -> np.ndarray:
        return homogeneous(self.rotation, self.translation)

    def inverse(self) -> "Transform":
        Rt = self.rotation.T
        frames = None if self.frames is None else (self.frames[1], self.frames[0])
        return Transform(Rt, -Rt @ self.translation, frames)

    def __matmul__(self, other: "Transform") -> "Transform":
        if not isinstance(other, Transform):
            return NotImplemented
        frames = None
        if self.frames is not None and other.frames is not None:
            if self.frames[1] != other.frames[0]:
                raise FrameMismatchError(f"cannot compose T{self.frames} with T{other.frames}")
            frames = (self.frames[0], other.frames[1])
        return Transform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
            frames,
        )

    def adjoint(self) -> np.ndarray:
        return adjoint(self)

    def allclose(self, other: "Transform", atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol, rtol=0)
            and np.allclose(self.translation, other.translation, atol=atol, rtol=0)
        )


def se3_log(T: Transform) -> np.ndarray:
    """Exponential coordinates ``(omega, v)`` of a rigid transform."""
    w = rot_log(T.rotation)
    theta = float(np.linalg.norm(w))
    W = skew(w)
    if theta < SMALL_ANGLE:
        coef = 1.0 / 12.0 + theta * theta / 720.0
    else:
        coef = (1.0 - theta * np.sin(theta) / (2.0 * (1.0 - np.cos(theta)))) / (theta * theta)
    V_inv = _EYE3 - 0.5 * W + coef * (W @ W)
    return np.concatenate([w, V_inv @ T.translation])


def se3_exp(xi) -> Transform:
    xi = np.asarray(xi, dtype=float)
    w, v = xi[:3], xi[3:]
    theta = float(np.linalg.norm(w))
    W = skew(w)
    if theta < SMALL_ANGLE:
        b, c = 0.5 - theta * theta / 24.0, 1.0 / 6.0 - theta * theta / 120.0
    else:
        b = (1.0 - np.cos(theta)) / theta**2
        c = (theta - np.sin(theta)) / theta**3
    V = _EYE3 + b * W + c * (W @ W)
    return Transform(rot_exp(w), V @ v)


def adjoint(T: Transform) -> np.ndarray:
    """6x6 adjoint representation of ``T`` acting on ``(omega, v)`` twists."""
    return adjoint_matrix(T.rotation, T.translation)


# ---------------------------------------------------------------------------
# Twists and wrenches


@dataclass(frozen=True)
class Twist:
    angular: np.ndarray
    linear: np.ndarray
    frame: Optional[Hashable] = None

    def __post_init__(self):
        for name in ("angular", "linear"):
            a = np.array(getattr(self, name), dtype=float).reshape(3)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_vector(cls, V, frame=None) -> "Twist":
        V = np.asarray(V, dtype=float)
        return cls(V[:3], V[3:], frame)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.angular, self.linear])


@dataclass(frozen=True)
class TwistRate:
    angular_accel: np.ndarray
    linear_accel: np.ndarray
    frame: Optional[Hashable] = None

    def __post_init__(self):
        for name in ("angular_accel", "linear_accel"):
            a = np.array(getattr(self, name), dtype=float).reshape(3)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.angular_accel, self.linear_accel])


@dataclass(frozen=True)
class Wrench:
    moment: np.ndarray
    force: np.ndarray
    frame: Optional[Hashable] = None

    def __post_init__(self):
        for name in ("moment", "force"):
            a = np.array(getattr(self, name), dtype=float).reshape(3)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_vector(cls, F, frame=None) -> "Wrench":
        F = np.asarray(F, dtype=float)
        return cls(F[:3], F[3:], frame)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.moment, self.force])


def transform_twist(T_ij: Transform, V_j: Twist) -> Twist:
    """Re-express twist ``V_j`` (in ``{j}``) in frame ``{i}``: ``Ad(T_ij) V_j``."""
    frame = None
    if T_ij.frames is not None:
        if V_j.frame is not None and V_j.frame != T_ij.frames[1]:
            raise FrameMismatchError(
                f"twist expressed in {{{V_j.frame}}} but transform expects {{{T_ij.frames[1]}}}"
            )
        frame = T_ij.frames[0]
    R, p = T_ij.rotation, T_ij.translation
    w = R @ V_j.angular
    v = np.cross(p, w) + R @ V_j.linear
    return Twist(w, v, frame)


def transform_wrench(T_ji: Transform, F_i: Wrench) -> Wrench:
    """Wrench ``F_i`` acting at ``{i}`` re-expressed at ``{j}``: ``Ad(T_ij)^T F_i``."""
    frame = None
    if T_ji.frames is not None:
        if F_i.frame is not None and F_i.frame != T_ji.frames[1]:
            raise FrameMismatchError(
                f"wrench expressed in {{{F_i.frame}}} but transform expects {{{T_ji.frames[1]}}}"
            )
        frame = T_ji.frames[0]
    R, p = T_ji.rotation, T_ji.translation
    f = R @ F_i.force
    m = R @ F_i.moment + np.cross(p, f)
    return Wrench(m, f, frame)


def twist_from_pose_derivative(T, Tdot) -> np.ndarray:
    """Body twist ``(omega, v)`` from ``T^-1 Tdot``; broadcasts over stacks.

    The rotational block of ``T^-1 Tdot`` is antisymmetrized before the
    angular velocity is read off, which absorbs the small symmetric part left
    by finite differencing.
    """
    T = np.asarray(T, dtype=float)
    Tdot = np.asarray(Tdot, dtype=float)
    R = T[..., :3, :3]
    Rt = np.swapaxes(R, -1, -2)
    W = Rt @ Tdot[..., :3, :3]
    v = np.einsum("...ij,...j->...i", Rt, Tdot[..., :3, 3])
    return np.concatenate([vee(W), v], axis=-1)

