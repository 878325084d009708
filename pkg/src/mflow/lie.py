"""Exact SO(2)/SO(3) group operations, manifold sampling, and rotation
representation conversions.

Conventions
-----------
* Rotations are orthonormal matrices with det +1, stored as numpy arrays of
  shape ``(..., n, n)`` with ``n in {2, 3}``; any number of leading batch
  dimensions is allowed.
* Tangent vectors use exponential coordinates: shape ``(..., 1)`` for so(2)
  (the signed angle in radians) and ``(..., 3)`` for so(3) (axis * angle).
* Canonical logarithms have angle magnitude in ``[0, pi]``. At exactly pi
  the axis is defined only up to sign; `log_map` resolves the tie by
  picking the representative whose first nonzero component is positive,
  so repeated calls are deterministic.
* All math is float64.

Truncated representations: `truncate` keeps the first two columns of a 3x3
rotation (6 numbers, column-major: col0 then col1) or the first column of a
2x2 rotation (2 numbers). `project_gram_schmidt` maps any such raw vector
back onto the group.
"""

import numpy as np

__all__ = [
    "exp_map",
    "log_map",
    "geodesic_interp",
    "sample_haar",
    "sample_igso3",
    "project_gram_schmidt",
    "truncate",
    "angle_between",
    "rotation_error",
    "is_rotation",
    "identity",
    "DegenerateInputError",
]

# Orthonormality / det tolerance for rotation validation.
ROTATION_TOL = 1e-9


class DegenerateInputError(ValueError):
    """Raised when a raw vector cannot be projected to a rotation."""


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.float64)


def is_rotation(rot: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    """True if every matrix in the batch is orthonormal with det +1."""
    rot = np.asarray(rot, dtype=np.float64)
    n = rot.shape[-1]
    gram = np.swapaxes(rot, -1, -2) @ rot
    ortho_err = np.abs(gram - np.eye(n)).max()
    det_err = np.abs(np.linalg.det(rot) - 1.0).max()
    return bool(ortho_err <= tol and det_err <= tol)


def _tangent_dim(v: np.ndarray) -> int:
    d = v.shape[-1]
    if d not in (1, 3):
        raise ValueError(f"tangent vectors have last dim 1 (so2) or 3 (so3), got {d}")
    return d


def exp_map(v: np.ndarray) -> np.ndarray:
    """Exponential map so(n) -> SO(n).

    `v` has shape (..., 1) for so(2) or (..., 3) for so(3); scalars are
    promoted to so(2). Planar rotation for n=2, Rodrigues for n=3.
    """
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    if _tangent_dim(v) == 1:
        return _exp_so2(v[..., 0])
    return _exp_so3(v)


def _exp_so2(theta: np.ndarray) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2), dtype=np.float64)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def _exp_so3(v: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(v, axis=-1, keepdims=True)
    # Guard the 0/0 at theta=0; sin(x)/x -> 1 and (1-cos x)/x^2 -> 1/2.
    small = theta < 1e-12
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0, np.sin(safe) / safe)[..., None]
    b = np.where(small, 0.5, (1.0 - np.cos(safe)) / safe**2)[..., None]
    K = _hat_so3(v)
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + a * K + b * (K @ K)


def _hat_so3(v: np.ndarray) -> np.ndarray:
    K = np.zeros(v.shape[:-1] + (3, 3), dtype=np.float64)
    K[..., 0, 1] = -v[..., 2]
    K[..., 0, 2] = v[..., 1]
    K[..., 1, 0] = v[..., 2]
    K[..., 1, 2] = -v[..., 0]
    K[..., 2, 0] = -v[..., 1]
    K[..., 2, 1] = v[..., 0]
    return K


def log_map(rot: np.ndarray) -> np.ndarray:
    """Logarithm map SO(n) -> so(n), canonical angle in [0, pi].

    Returns shape (..., 1) for SO(2) and (..., 3) for SO(3). Inverse of
    `exp_map` on the canonical domain.
    """
    rot = np.asarray(rot, dtype=np.float64)
    n = rot.shape[-1]
    if n == 2:
        return np.arctan2(rot[..., 1, 0], rot[..., 0, 0])[..., None]
    if n == 3:
        return _log_so3(rot)
    raise ValueError(f"expected 2x2 or 3x3 rotations, got {rot.shape}")


def _log_so3(rot: np.ndarray) -> np.ndarray:
    trace = np.trace(rot, axis1=-2, axis2=-1)
    cos_theta = np.clip((trace - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)

    skew = np.stack(
        [
            rot[..., 2, 1] - rot[..., 1, 2],
            rot[..., 0, 2] - rot[..., 2, 0],
            rot[..., 1, 0] - rot[..., 0, 1],
        ],
        axis=-1,
    )
    skew_norm = np.linalg.norm(skew, axis=-1)

    # Generic branch: v = theta / (2 sin theta) * skew. The ratio is smooth
    # through theta = 0 but ill-conditioned near pi, where both the angle
    # (from arccos) and the scale (1/sin) degrade; that region is replaced
    # below.
    sin_theta = np.sin(theta)
    safe_sin = np.where(sin_theta < 1e-12, 1.0, sin_theta)
    generic = skew * np.where(sin_theta < 1e-12, 0.5, theta / (2.0 * safe_sin))[..., None]

    near_pi = theta > 3.0
    if np.any(near_pi):
        # |skew| = 2 sin(theta) pins the angle to ~1 ulp where arccos of the
        # trace cannot; the skew direction is equally well conditioned until
        # sin(theta) itself underflows into rounding noise.
        theta_pi = np.pi - np.arcsin(np.clip(skew_norm / 2.0, 0.0, 1.0))
        safe_norm = np.where(skew_norm < 1e-6, 1.0, skew_norm)
        axis_skew = skew / safe_norm[..., None]
        robust = axis_skew * theta_pi[..., None]
        generic = np.where(near_pi[..., None], robust, generic)

    # Within ~5e-7 of pi the skew part is all rounding noise; take the axis
    # from the symmetric part R_ii = cos + (1 - cos) a_i^2 instead.
    near_pi = theta > np.pi - 1e-6
    near_pi = near_pi & (skew_norm < 1e-6)
    if np.any(near_pi):
        diag = np.stack([rot[..., 0, 0], rot[..., 1, 1], rot[..., 2, 2]], axis=-1)
        axis_sq = np.clip((diag - cos_theta[..., None]) / (1.0 - cos_theta[..., None] + 1e-300), 0.0, 1.0)
        axis = np.sqrt(axis_sq)
        # Relative component signs from the off-diagonal sums
        # R_ij + R_ji = 2 (1 - cos) a_i a_j, anchored at the largest component.
        off = np.stack(
            [
                rot[..., 0, 1] + rot[..., 1, 0],
                rot[..., 0, 2] + rot[..., 2, 0],
                rot[..., 1, 2] + rot[..., 2, 1],
            ],
            axis=-1,
        )
        lead = np.argmax(axis, axis=-1)
        a0, a1, a2 = axis[..., 0].copy(), axis[..., 1].copy(), axis[..., 2].copy()
        s01 = np.where(off[..., 0] < 0, -1.0, 1.0)
        s02 = np.where(off[..., 1] < 0, -1.0, 1.0)
        s12 = np.where(off[..., 2] < 0, -1.0, 1.0)
        a1 = np.where(lead == 0, s01 * a1, a1)
        a2 = np.where(lead == 0, s02 * a2, a2)
        a0 = np.where(lead == 1, s01 * a0, a0)
        a2 = np.where(lead == 1, s12 * a2, a2)
        a0 = np.where(lead == 2, s02 * a0, a0)
        a1 = np.where(lead == 2, s12 * a1, a1)
        axis = np.stack([a0, a1, a2], axis=-1)
        axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
        # For theta strictly below pi the log is unique and the overall sign
        # is still encoded in the skew part (skew = 2 sin(theta) a); only at
        # pi itself does the deterministic lexicographic tie-break apply.
        skew_dot = (skew * axis).sum(axis=-1)
        skew_valid = np.abs(skew_dot) > 1e-11
        axis = np.where((skew_valid & (skew_dot < 0))[..., None], -axis, axis)
        axis = np.where(skew_valid[..., None], axis, _canonical_sign(axis))
        theta_sym = np.pi - np.arcsin(np.clip(skew_norm / 2.0, 0.0, 1.0))
        generic = np.where(near_pi[..., None], axis * theta_sym[..., None], generic)
    return generic


def _canonical_sign(axis: np.ndarray) -> np.ndarray:
    """Flip axes so the first component with |a_i| > 1e-12 is positive."""
    sign = np.ones(axis.shape[:-1], dtype=np.float64)
    decided = np.zeros(axis.shape[:-1], dtype=bool)
    for i in range(axis.shape[-1]):
        comp = axis[..., i]
        significant = (~decided) & (np.abs(comp) > 1e-12)
        sign = np.where(significant & (comp < 0), -1.0, sign)
        decided = decided | significant
    return axis * sign[..., None]


def geodesic_interp(z0: np.ndarray, z1: np.ndarray, t) -> np.ndarray:
    """Point at fraction `t` along the geodesic from `z0` to `z1`.

    Computes ``z0 @ Exp(t * Log(z0^-1 z1))``. `t` may be a scalar or an
    array broadcastable against the batch shape. t=0 returns z0 exactly.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    z1 = np.asarray(z1, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    rel = np.swapaxes(z0, -1, -2) @ z1
    v = log_map(rel)
    return z0 @ exp_map(t[..., None] * v)


def sample_haar(rng: np.random.Generator, n: int, size: int | tuple = ()) -> np.ndarray:
    """Haar-uniform rotations: shape ``size + (n, n)``.

    SO(2): angle uniform in [-pi, pi). SO(3): uniform unit quaternion
    converted to a matrix.
    """
    if isinstance(size, int):
        size = (size,)
    if n == 2:
        theta = rng.uniform(-np.pi, np.pi, size=size)
        return _exp_so2(theta)
    if n == 3:
        q = rng.standard_normal(size=size + (4,))
        q /= np.linalg.norm(q, axis=-1, keepdims=True)
        return _quat_to_matrix(q)
    raise ValueError(f"n must be 2 or 3, got {n}")


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    out[..., 0, 0] = 1 - 2 * (y * y + z * z)
    out[..., 0, 1] = 2 * (x * y - w * z)
    out[..., 0, 2] = 2 * (x * z + w * y)
    out[..., 1, 0] = 2 * (x * y + w * z)
    out[..., 1, 1] = 1 - 2 * (x * x + z * z)
    out[..., 1, 2] = 2 * (y * z - w * x)
    out[..., 2, 0] = 2 * (x * z - w * y)
    out[..., 2, 1] = 2 * (y * z + w * x)
    out[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def sample_igso3(
    rng: np.random.Generator,
    concentration: float,
    size: int | tuple = (),
    series_terms: int = 2000,
    grid_points: int = 8192,
) -> np.ndarray:
    """Isotropic Gaussian on SO(3) with spread parameter `concentration`.

    Optional finite-concentration start distribution; the library default
    elsewhere is `sample_haar`, which this approaches for large
    concentration. Angles are drawn by inverse-CDF lookup on the truncated
    character-series density

        f(theta) = (1 - cos theta) / pi
                   * sum_l (2l+1) exp(-l(l+1) eps^2) sin((l+1/2) theta)
                                                     / sin(theta/2),

    with eps^2 = concentration; the axis is uniform on the sphere.
    """
    if concentration <= 0:
        raise ValueError("concentration must be positive")
    if isinstance(size, int):
        size = (size,)
    eps2 = float(concentration)
    theta = np.linspace(1e-9, np.pi, grid_points)
    ls = np.arange(series_terms, dtype=np.float64)
    weights = (2 * ls + 1) * np.exp(-ls * (ls + 1) * eps2)
    series = (weights[:, None] * np.sin((ls[:, None] + 0.5) * theta[None, :])).sum(axis=0)
    density = (1.0 - np.cos(theta)) / np.pi * series / np.sin(theta / 2.0)
    density = np.clip(density, 0.0, None)
    cdf = np.cumsum(density)
    cdf /= cdf[-1]
    u = rng.uniform(size=size)
    angles = np.interp(u, cdf, theta)
    axes = rng.standard_normal(size=size + (3,))
    axes /= np.linalg.norm(axes, axis=-1, keepdims=True)
    return exp_map(axes * angles[..., None])


def project_gram_schmidt(raw: np.ndarray) -> np.ndarray:
    """Project a truncated representation back onto SO(n).

    `raw` has shape (..., 2) (first column of a 2x2 rotation) or (..., 6)
    (first two columns of a 3x3 rotation, col0 then col1). Output is a
    valid rotation; scale-invariant in the input. Raises
    `DegenerateInputError` when the first column is near zero or, in the
    6D case, the two columns are near parallel.
    """
    raw = np.asarray(raw, dtype=np.float64)
    d = raw.shape[-1]
    if d == 2:
        norm = np.linalg.norm(raw, axis=-1)
        if np.any(norm <= 1e-12):
            raise DegenerateInputError("near-zero column cannot define a rotation")
        col0 = raw / norm[..., None]
        out = np.empty(raw.shape[:-1] + (2, 2), dtype=np.float64)
        out[..., :, 0] = col0
        out[..., 0, 1] = -col0[..., 1]
        out[..., 1, 1] = col0[..., 0]
        return out
    if d == 6:
        c0, c1 = raw[..., :3], raw[..., 3:]
        n0 = np.linalg.norm(c0, axis=-1)
        if np.any(n0 <= 1e-12):
            raise DegenerateInputError("near-zero first column cannot define a rotation")
        b0 = c0 / n0[..., None]
        c1_orth = c1 - (b0 * c1).sum(axis=-1, keepdims=True) * b0
        n1 = np.linalg.norm(c1_orth, axis=-1)
        if np.any(n1 <= 1e-12):
            raise DegenerateInputError("columns are parallel, rotation is underdetermined")
        b1 = c1_orth / n1[..., None]
        b2 = np.cross(b0, b1)
        return np.stack([b0, b1, b2], axis=-1)
    raise ValueError(f"raw representation has last dim 2 or 6, got {d}")


def truncate(rot: np.ndarray) -> np.ndarray:
    """Truncated representation of a rotation: (..., 2) or (..., 6).

    Keeps the first column (SO(2)) or the first two columns flattened
    column-major (SO(3)). `project_gram_schmidt` inverts it exactly on
    the group.
    """
    rot = np.asarray(rot, dtype=np.float64)
    n = rot.shape[-1]
    if n == 2:
        return rot[..., :, 0].copy()
    if n == 3:
        return np.concatenate([rot[..., :, 0], rot[..., :, 1]], axis=-1)
    raise ValueError(f"expected 2x2 or 3x3 rotations, got {rot.shape}")


def angle_between(ra: np.ndarray, rb: np.ndarray) -> np.ndarray:
    """Absolute geodesic angle |Log(ra^-1 rb)| in [0, pi]."""
    ra = np.asarray(ra, dtype=np.float64)
    rb = np.asarray(rb, dtype=np.float64)
    rel = np.swapaxes(ra, -1, -2) @ rb
    return np.linalg.norm(log_map(rel), axis=-1)


def rotation_error(rot: np.ndarray) -> float:
    """Max deviation from orthonormality / unit determinant (diagnostic)."""
    rot = np.asarray(rot, dtype=np.float64)
    n = rot.shape[-1]
    gram = np.swapaxes(rot, -1, -2) @ rot
    return float(
        max(np.abs(gram - np.eye(n)).max(), np.abs(np.linalg.det(rot) - 1.0).max())
    )
