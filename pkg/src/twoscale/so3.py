"""Rotation frames: hat map, exponential, flat embedding, projection.

A frame is either a 3x3 rotation matrix Q or its flat embedding
q = (q1, q2, q3) in R^9, stacking the columns of Q.  The embedded
constraint set is: columns orthonormal and right-handed
(qi x qj = qk cyclically).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ManifoldError

__all__ = [
    "hat",
    "exp_so3",
    "embed",
    "extract",
    "manifold_residual",
    "project_so3",
]

_SMALL_ANGLE = 1e-6


def _vec3(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise DimensionError(f"{name} must have shape (3,), got {v.shape}")
    return v


def hat(v: np.ndarray) -> np.ndarray:
    """Skew matrix of v, so that hat(v) @ u = v x u."""
    v = _vec3(v, "v")
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product for plain 3-vectors (faster than np.cross here)."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def exp_so3(omega: np.ndarray) -> np.ndarray:
    """Rotation exp(hat(omega)) via the Rodrigues formula.

    Below angle 1e-6 the sin/versine coefficients switch to their
    series so the formula stays accurate through zero.
    """
    w = _vec3(omega, "omega")
    theta2 = float(w @ w)
    theta = np.sqrt(theta2)
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta2
    K = hat(w)
    return np.eye(3) + a * K + b * (K @ K)


def embed(Q: np.ndarray) -> np.ndarray:
    """Flatten a frame matrix to the column-stacked 9-vector."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (3, 3):
        raise DimensionError(f"Q must have shape (3, 3), got {Q.shape}")
    return Q.T.reshape(9).copy()


def extract(q: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Frame matrix from a column-stacked 9-vector, validated.

    Raises ManifoldError when the constraint residual exceeds tol; pass
    tol=None to skip the check (hot loops that project separately).
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (9,):
        raise DimensionError(f"q must have shape (9,), got {q.shape}")
    Q = q.reshape(3, 3).T
    if tol is not None:
        res = manifold_residual(q)
        if not res < tol:
            raise ManifoldError(f"frame residual {res:.3g} exceeds tolerance {tol:.3g}")
    return Q


def manifold_residual(q: np.ndarray) -> float:
    """Worst violation of the orthonormal right-handed column constraints.

    Max over |qi.qj - delta_ij| and the sup-norm of qi x qj - eps_ijk qk
    for all ordered pairs.  Zero exactly on embedded rotations.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (9,):
        raise DimensionError(f"q must have shape (9,), got {q.shape}")
    cols = [q[0:3], q[3:6], q[6:9]]
    res = 0.0
    for i in range(3):
        for j in range(3):
            res = max(res, abs(float(cols[i] @ cols[j]) - (1.0 if i == j else 0.0)))
            k = 3 - i - j if i != j else None
            target = np.zeros(3)
            if k is not None:
                sign = 1.0 if (i, j) in ((0, 1), (1, 2), (2, 0)) else -1.0
                target = sign * cols[k]
            res = max(res, float(np.max(np.abs(cross3(cols[i], cols[j]) - target))))
    return res


def project_so3(M: np.ndarray, tol: float = 1e-14, max_iter: int = 25) -> np.ndarray:
    """Nearest rotation to a near-rotation matrix M.

    Newton-Schulz iteration Q <- Q (3I - Q^T Q) / 2, which converges
    quadratically to the orthogonal polar factor (the Frobenius-nearest
    rotation) and never flips orientation.  Requires ||M^T M - I||_F
    below 0.5 and positive determinant.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise DimensionError(f"M must have shape (3, 3), got {M.shape}")
    gram_defect = np.linalg.norm(M.T @ M - np.eye(3))
    if not gram_defect < 0.5:
        raise ManifoldError(
            f"input too far from a rotation: ||M^T M - I|| = {gram_defect:.3g} >= 0.5"
        )
    if np.linalg.det(M) <= 0.0:
        raise ManifoldError("input has non-positive determinant, no nearby rotation")
    Q = M
    for _ in range(max_iter):
        G = Q.T @ Q
        if np.linalg.norm(G - np.eye(3)) <= tol:
            return Q
        Q = Q @ (1.5 * np.eye(3) - 0.5 * G)
    raise ManifoldError("projection did not converge; input too distorted")
