"""Generative objectives and samplers: Euclidean and manifold conditional
flow matching, plus the DDIM diffusion baseline.

Both families share the same network interface (state, time, condition ->
vector) and the same chunk layout machinery. An action chunk is ordered
(position block, rotation block, gripper block) per step, concatenated
over the horizon. The Euclidean formulation treats the whole chunk as a
flat vector, carrying rotations in truncated form and projecting them
back onto the group only after sampling. The manifold formulation keeps
rotation blocks on SO(n) throughout: straight-line paths for the
Euclidean blocks, geodesics for the rotations, within the same training
sample.

Sampling integrates the learned field with forward Euler, dt = 1/k, and
the step-i network evaluation uses t = i/k for i = 0..k-1 (so the first
evaluation sees t = 0).
"""

from dataclasses import dataclass

import numpy as np

from . import lie
from .nn import Tensor

__all__ = [
    "ChunkLayout",
    "ManifoldState",
    "FlowSample",
    "IntegrationConfig",
    "DiffusionSchedule",
    "flow_sample_euclidean",
    "flow_sample_manifold",
    "cfm_loss",
    "cfm_sample",
    "ddpm_forward_sample",
    "ddim_loss",
    "ddim_sample",
    "decode_chunk",
    "manifold_net_input",
    "NonFiniteLossError",
]

_ROT_DIMS = {"so2": (2, 2, 1), "so3": (3, 6, 3)}  # n, truncated, tangent


class NonFiniteLossError(RuntimeError):
    """The training loss came out NaN/inf."""


@dataclass(frozen=True)
class ChunkLayout:
    """Shape of one action chunk: per-step blocks times the horizon."""

    horizon: int = 1
    pos_dim: int = 0
    rot: str = "none"
    grip_dim: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.rot not in ("none", "so2", "so3"):
            raise ValueError(f"unknown rotation kind {self.rot!r}")
        if self.pos_dim < 0 or self.grip_dim < 0:
            raise ValueError("block dims must be non-negative")
        if self.pos_dim + self.grip_dim == 0 and self.rot == "none":
            raise ValueError("layout is empty")

    @property
    def rot_n(self) -> int:
        return _ROT_DIMS[self.rot][0] if self.rot != "none" else 0

    @property
    def rot_trunc_dim(self) -> int:
        return _ROT_DIMS[self.rot][1] if self.rot != "none" else 0

    @property
    def rot_tangent_dim(self) -> int:
        return _ROT_DIMS[self.rot][2] if self.rot != "none" else 0

    @property
    def step_state_dim(self) -> int:
        """Per-step network-input width (rotation in truncated form)."""
        return self.pos_dim + self.rot_trunc_dim + self.grip_dim

    @property
    def state_dim(self) -> int:
        return self.horizon * self.step_state_dim

    @property
    def flat_dim(self) -> int:
        """Per-step width of the non-rotation (position + gripper) blocks."""
        return self.pos_dim + self.grip_dim

    def velocity_dim(self, formulation: str) -> int:
        """Network output width: truncated-coordinate velocities for the
        Euclidean formulation, tangent coordinates for the manifold one."""
        if formulation == "euclidean":
            return self.state_dim
        if formulation == "manifold":
            return self.horizon * (self.flat_dim + self.rot_tangent_dim)
        raise ValueError(f"unknown formulation {formulation!r}")


@dataclass(frozen=True)
class IntegrationConfig:
    k: int
    formulation: str = "euclidean"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.formulation not in ("euclidean", "manifold"):
            raise ValueError(f"unknown formulation {self.formulation!r}")


@dataclass
class ManifoldState:
    """Mixed chunk state: Euclidean blocks flat, rotations on the group.

    `flat` has shape (..., horizon, pos_dim + grip_dim) with position
    coordinates first; `rots` has shape (..., horizon, n, n).
    """

    flat: np.ndarray
    rots: np.ndarray


@dataclass
class FlowSample:
    """One (state, time, target velocity) training triple (batched)."""

    z_t: "np.ndarray | ManifoldState"
    t: np.ndarray
    target_velocity: np.ndarray


def manifold_net_input(state: ManifoldState, layout: ChunkLayout) -> np.ndarray:
    """Flatten a manifold state into the per-step (pos, trunc(rot), grip)
    network-input layout."""
    batch = state.flat.shape[:-2]
    out = np.empty(batch + (layout.horizon, layout.step_state_dim))
    p, r = layout.pos_dim, layout.rot_trunc_dim
    out[..., :p] = state.flat[..., :p]
    out[..., p : p + r] = lie.truncate(state.rots)
    out[..., p + r :] = state.flat[..., p:]
    return out.reshape(batch + (layout.state_dim,))


def _split_manifold_velocity(v: np.ndarray, layout: ChunkLayout):
    """Split (..., horizon*(flat+tangent)) into flat and tangent parts."""
    batch = v.shape[:-1]
    per = layout.flat_dim + layout.rot_tangent_dim
    v = v.reshape(batch + (layout.horizon, per))
    p = layout.pos_dim
    vp = v[..., :p]
    vr = v[..., p : p + layout.rot_tangent_dim]
    vg = v[..., p + layout.rot_tangent_dim :]
    v_flat = np.concatenate([vp, vg], axis=-1)
    return v_flat, vr


def flow_sample_euclidean(
    z1: np.ndarray,
    rng: np.random.Generator,
    t: np.ndarray | float | None = None,
    z0: np.ndarray | None = None,
) -> FlowSample:
    """Straight-path training sample: z0 ~ N(0, I), t ~ U[0, 1],
    z_t = z0 + t (z1 - z0), target velocity z1 - z0.

    `t` and `z0` can be pinned for tests/oracles.
    """
    z1 = np.asarray(z1, dtype=np.float64)
    if not np.all(np.isfinite(z1)):
        raise ValueError("data sample contains non-finite values")
    if z0 is None:
        z0 = rng.standard_normal(z1.shape)
    if t is None:
        t = rng.uniform(size=z1.shape[:-1])
    t = np.asarray(t, dtype=np.float64)
    target = z1 - z0
    z_t = z0 + t[..., None] * target
    return FlowSample(z_t=z_t, t=t, target_velocity=target)


def flow_sample_manifold(
    z1: ManifoldState,
    layout: ChunkLayout,
    rng: np.random.Generator,
    t: np.ndarray | float | None = None,
    z0: ManifoldState | None = None,
) -> FlowSample:
    """Geodesic training sample for the rotation blocks, straight path for
    the rest, sharing one t per chunk.

    Rotation start points are Haar-uniform; the target rotational velocity
    is Log(z0^-1 z1) in tangent coordinates and z_t = z0 Exp(t v).
    """
    batch = z1.flat.shape[:-2]
    if z0 is None:
        z0 = ManifoldState(
            flat=rng.standard_normal(z1.flat.shape),
            rots=lie.sample_haar(rng, layout.rot_n, batch + (layout.horizon,)),
        )
    if t is None:
        t = rng.uniform(size=batch)
    t = np.asarray(t, dtype=np.float64)

    target_flat = z1.flat - z0.flat
    flat_t = z0.flat + t[..., None, None] * target_flat

    rel = np.swapaxes(z0.rots, -1, -2) @ z1.rots
    target_rot = lie.log_map(rel)
    rot_t = z0.rots @ lie.exp_map(t[..., None, None] * target_rot)

    p = layout.pos_dim
    per_step = np.concatenate(
        [target_flat[..., :p], target_rot, target_flat[..., p:]], axis=-1
    )
    target = per_step.reshape(batch + (layout.velocity_dim("manifold"),))
    return FlowSample(
        z_t=ManifoldState(flat=flat_t, rots=rot_t), t=t, target_velocity=target
    )


def cfm_loss(net, sample: FlowSample, cond=None, layout: ChunkLayout | None = None) -> Tensor:
    """Mean squared error between predicted and target velocities,
    averaged over batch and velocity dimensions."""
    if isinstance(sample.z_t, ManifoldState):
        if layout is None:
            raise ValueError("manifold samples need the chunk layout")
        net_in = manifold_net_input(sample.z_t, layout)
    else:
        net_in = sample.z_t
    if net_in.size == 0:
        raise ValueError("empty batch")
    pred = net(net_in, sample.t, cond)
    diff = pred - Tensor(sample.target_velocity)
    loss = (diff * diff).mean()
    if not np.isfinite(loss.data):
        raise NonFiniteLossError("flow-matching loss is not finite")
    return loss


def _project_rotation_blocks(z: np.ndarray, layout: ChunkLayout) -> np.ndarray:
    """Gram-Schmidt-project the truncated rotation slice of every step."""
    if layout.rot == "none":
        return z
    batch = z.shape[:-1]
    z = z.reshape(batch + (layout.horizon, layout.step_state_dim)).copy()
    p, r = layout.pos_dim, layout.rot_trunc_dim
    raw = z[..., p : p + r]
    z[..., p : p + r] = lie.truncate(lie.project_gram_schmidt(raw))
    return z.reshape(batch + (layout.state_dim,))


def cfm_sample(
    net,
    cond,
    layout: ChunkLayout,
    cfg: IntegrationConfig,
    rng: np.random.Generator,
    batch: tuple = (),
    z_init=None,
    project: bool = True,
    return_path: bool = False,
):
    """Integrate the learned field from t=0 to t=1 with k Euler steps.

    Euclidean formulation: z <- z + v dt on the flat chunk, starting from
    standard normal noise; rotation blocks are projected back onto SO(n)
    once at the end (skippable with `project=False`). Manifold
    formulation: flat blocks update additively, rotation blocks by
    z <- z Exp(v dt), staying on the group at every step. Returns the
    final state, plus the list of intermediate states when `return_path`.
    """
    dt = 1.0 / cfg.k
    path = []
    if cfg.formulation == "euclidean":
        z = rng.standard_normal(batch + (layout.state_dim,)) if z_init is None else z_init.copy()
        for i in range(cfg.k):
            if return_path:
                path.append(z.copy())
            v = net(z, i * dt, cond).data
            z = z + v * dt
        if project:
            z = _project_rotation_blocks(z, layout)
        if return_path:
            path.append(z.copy())
            return z, path
        return z

    if z_init is None:
        state = ManifoldState(
            flat=rng.standard_normal(batch + (layout.horizon, layout.flat_dim)),
            rots=lie.sample_haar(rng, layout.rot_n, batch + (layout.horizon,)),
        )
    else:
        state = ManifoldState(flat=z_init.flat.copy(), rots=z_init.rots.copy())
    for i in range(cfg.k):
        if return_path:
            path.append(ManifoldState(state.flat.copy(), state.rots.copy()))
        v = net(manifold_net_input(state, layout), i * dt, cond).data
        v_flat, v_rot = _split_manifold_velocity(v, layout)
        state = ManifoldState(
            flat=state.flat + v_flat * dt,
            rots=state.rots @ lie.exp_map(v_rot * dt),
        )
    if return_path:
        path.append(ManifoldState(state.flat.copy(), state.rots.copy()))
        return state, path
    return state


# ---- DDIM baseline ----------------------------------------------------------


@dataclass(frozen=True)
class DiffusionSchedule:
    """Discrete noising schedule: alpha_bar[s] for s = 0..N, alpha_bar[0]
    ~ 1, strictly decreasing, all values in (0, 1]."""

    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = self.alpha_bar
        if ab.ndim != 1 or ab.size < 2:
            raise ValueError("alpha_bar must be a 1-D array over steps 0..N")
        if not (np.all(ab > 0) and np.all(ab <= 1)):
            raise ValueError("alpha_bar values must lie in (0, 1]")
        if not np.all(np.diff(ab) < 0):
            raise ValueError("alpha_bar must be strictly decreasing")

    @property
    def n_steps(self) -> int:
        return self.alpha_bar.size - 1

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(1.0 - self.alpha_bar)

    @classmethod
    def cosine(cls, n_steps: int = 100, max_beta: float = 0.999) -> "DiffusionSchedule":
        """Squared-cosine schedule, clipped so each per-step beta stays
        below `max_beta` (keeping alpha_bar positive at the noisy end)."""
        s = np.arange(n_steps + 1, dtype=np.float64)
        f = np.cos(((s / n_steps) + 0.008) / 1.008 * np.pi / 2.0) ** 2
        beta = np.clip(1.0 - f[1:] / f[:-1], 0.0, max_beta)
        alpha_bar = f[0] * np.cumprod(1.0 - beta)
        return cls(alpha_bar=np.concatenate([[f[0]], alpha_bar]))


def ddpm_forward_sample(
    z1: np.ndarray,
    schedule: DiffusionSchedule,
    rng: np.random.Generator,
    step: np.ndarray | int | None = None,
):
    """Forward perturbation z_s = sqrt(ab_s) z1 + sqrt(1 - ab_s) eps.

    Returns (z_s, step index, eps); eps is the regression target of the
    noise-prediction parameterisation. Steps are drawn uniformly from
    1..N unless pinned.
    """
    z1 = np.asarray(z1, dtype=np.float64)
    if step is None:
        step = rng.integers(1, schedule.n_steps + 1, size=z1.shape[:-1])
    step = np.asarray(step)
    eps = rng.standard_normal(z1.shape)
    ab = schedule.alpha_bar[step][..., None]
    z_s = np.sqrt(ab) * z1 + np.sqrt(1.0 - ab) * eps
    return z_s, step, eps


def ddim_loss(net, z_s, step, eps, schedule: DiffusionSchedule, cond=None) -> Tensor:
    """Noise-prediction MSE; the network sees normalised time s/N."""
    t = np.asarray(step, dtype=np.float64) / schedule.n_steps
    pred = net(z_s, t, cond)
    diff = pred - Tensor(eps)
    loss = (diff * diff).mean()
    if not np.isfinite(loss.data):
        raise NonFiniteLossError("ddim loss is not finite")
    return loss


def ddim_sample(
    net,
    cond,
    layout: ChunkLayout,
    k: int,
    schedule: DiffusionSchedule,
    rng: np.random.Generator,
    batch: tuple = (),
    z_init=None,
    project: bool = True,
):
    """Deterministic (eta = 0) DDIM sampler over an evenly spaced
    sub-sequence of the training schedule.

    Each update inverts the noise prediction to a clean-sample estimate
    x0 = (x - sqrt(1-ab_s) eps) / sqrt(ab_s) and re-noises it at the next
    retained step; the final step returns the clean estimate itself.
    Rotation blocks are Gram-Schmidt-projected at the end.
    """
    n = schedule.n_steps
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, {n}]")
    seq = np.round(np.linspace(n, 0, k + 1)).astype(int)
    x = rng.standard_normal(batch + (layout.state_dim,)) if z_init is None else z_init.copy()
    for s_cur, s_next in zip(seq[:-1], seq[1:]):
        ab = schedule.alpha_bar[s_cur]
        eps_hat = net(x, s_cur / n, cond).data
        x0_pred = (x - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)
        if s_next == 0:
            x = x0_pred
        else:
            ab_next = schedule.alpha_bar[s_next]
            x = np.sqrt(ab_next) * x0_pred + np.sqrt(1.0 - ab_next) * eps_hat
    if project:
        x = _project_rotation_blocks(x, layout)
    return x


def decode_chunk(state, layout: ChunkLayout) -> dict:
    """Unpack a sampled chunk into positions, rotation matrices, and
    gripper values, shapes (..., horizon, *block)."""
    p, g = layout.pos_dim, layout.grip_dim
    if isinstance(state, ManifoldState):
        return {
            "position": state.flat[..., :p],
            "rotation": state.rots.copy(),
            "gripper": state.flat[..., p:],
        }
    z = np.asarray(state)
    batch = z.shape[:-1]
    z = z.reshape(batch + (layout.horizon, layout.step_state_dim))
    out = {"position": z[..., :p], "rotation": None, "gripper": z[..., layout.step_state_dim - g :] if g else z[..., :0]}
    if layout.rot != "none":
        raw = z[..., p : p + layout.rot_trunc_dim]
        out["rotation"] = lie.project_gram_schmidt(raw)
    return out
