"""Network building blocks: dense layers, the conditioned vector-field MLP,
the permutation-invariant set encoder, and the sinusoidal time embedding.

Weight init is uniform fan-in scaling, U(-1/sqrt(fan_in), +1/sqrt(fan_in));
output heads are zero-initialised so an untrained field predicts zero
velocity/noise. All parameters are float64 `Tensor`s; construction order
defines the serialisation order used by checkpoints.
"""

import numpy as np

from .tensor import Tensor, concat

__all__ = [
    "Dense",
    "Mlp",
    "VectorFieldNet",
    "SetEncoder",
    "time_embedding",
    "ShapeMismatchError",
    "EmptyInputError",
    "TIME_EMBED_DIM",
]

TIME_EMBED_DIM = 64


class ShapeMismatchError(ValueError):
    """Input shape disagrees with the declared network dimensions."""


class EmptyInputError(ValueError):
    """A set encoder received zero points."""


class Module:
    """Parameter container; subclasses append Tensors to `self.params`."""

    def __init__(self):
        self.params: list[Tensor] = []

    def parameters(self) -> list[Tensor]:
        return self.params

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def param_values(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.params]

    def load_param_values(self, values: list[np.ndarray]):
        if len(values) != len(self.params):
            raise ShapeMismatchError(
                f"expected {len(self.params)} parameter arrays, got {len(values)}"
            )
        for p, v in zip(self.params, values):
            v = np.asarray(v, dtype=np.float64)
            if v.shape != p.data.shape:
                raise ShapeMismatchError(
                    f"parameter shape {v.shape} does not match {p.data.shape}"
                )
            p.data = v.copy()


class Dense(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, zero_init=False):
        super().__init__()
        self.in_dim, self.out_dim = in_dim, out_dim
        if zero_init:
            w = np.zeros((in_dim, out_dim))
        else:
            bound = 1.0 / np.sqrt(in_dim)
            w = rng.uniform(-bound, bound, size=(in_dim, out_dim))
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)
        self.params = [self.weight, self.bias]

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.shape[-1] != self.in_dim:
            raise ShapeMismatchError(
                f"dense layer expects last dim {self.in_dim}, got {x.data.shape}"
            )
        return x.matmul(self.weight) + self.bias


class Mlp(Module):
    """Dense stack with SiLU between layers and a linear (optionally
    zero-initialised) output layer."""

    def __init__(self, dims: list[int], rng: np.random.Generator, zero_final=True):
        super().__init__()
        if len(dims) < 2:
            raise ValueError("an MLP needs at least input and output dims")
        self.dims = list(dims)
        self.layers = []
        for i in range(len(dims) - 1):
            last = i == len(dims) - 2
            layer = Dense(dims[i], dims[i + 1], rng, zero_init=last and zero_final)
            self.layers.append(layer)
            self.params.extend(layer.params)

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = x.silu()
        return x


def time_embedding(t, dim: int = TIME_EMBED_DIM) -> np.ndarray:
    """Sinusoidal embedding of flow time t in [0, 1].

    Accepts a scalar or an array of shape (B,); returns (dim,) or (B, dim).
    Frequencies are log-spaced over [1, 1000] half-cycles so nearby times
    stay distinguishable at every scale the samplers use.
    """
    t = np.asarray(t, dtype=np.float64)
    half = dim // 2
    freqs = np.exp(np.linspace(np.log(1.0), np.log(1000.0), half))
    phase = t[..., None] * freqs * np.pi
    return np.concatenate([np.sin(phase), np.cos(phase)], axis=-1)


class VectorFieldNet(Module):
    """Conditioned MLP predicting a velocity (CFM) or noise (DDIM) vector.

    Input is the flattened state, a sinusoidal embedding of t, and the
    conditioning vector, concatenated. `cond_dim=0` builds the
    unconditioned variant used by the toy experiment.
    """

    def __init__(
        self,
        state_dim: int,
        out_dim: int,
        cond_dim: int,
        rng: np.random.Generator,
        hidden: tuple = (256, 256, 256, 256),
        temb_dim: int = TIME_EMBED_DIM,
    ):
        super().__init__()
        if state_dim < 1 or out_dim < 1 or cond_dim < 0:
            raise ShapeMismatchError("state/out dims must be positive, cond_dim >= 0")
        self.state_dim = state_dim
        self.out_dim = out_dim
        self.cond_dim = cond_dim
        self.temb_dim = temb_dim
        self.hidden = tuple(hidden)
        dims = [state_dim + temb_dim + cond_dim, *hidden, out_dim]
        self.mlp = Mlp(dims, rng, zero_final=True)
        self.params = self.mlp.params

    def __call__(self, z, t, cond=None) -> Tensor:
        z = z if isinstance(z, Tensor) else Tensor(z)
        if z.data.shape[-1] != self.state_dim:
            raise ShapeMismatchError(
                f"state dim {z.data.shape[-1]} != declared {self.state_dim}"
            )
        temb = time_embedding(t, self.temb_dim)
        if temb.ndim < z.data.ndim:
            temb = np.broadcast_to(temb, z.data.shape[:-1] + (self.temb_dim,))
        parts = [z, Tensor(temb)]
        if self.cond_dim:
            if cond is None:
                raise ShapeMismatchError("network was built with cond_dim > 0")
            cond = cond if isinstance(cond, Tensor) else Tensor(cond)
            if cond.data.shape[-1] != self.cond_dim:
                raise ShapeMismatchError(
                    f"cond dim {cond.data.shape[-1]} != declared {self.cond_dim}"
                )
            if cond.data.ndim < z.data.ndim:
                cond_data = np.broadcast_to(
                    cond.data, z.data.shape[:-1] + (self.cond_dim,)
                )
                cond = Tensor(cond_data)
            parts.append(cond)
        return self.mlp(concat(parts, axis=-1))

    def spec(self) -> dict:
        return {
            "kind": "vector_field",
            "state_dim": self.state_dim,
            "out_dim": self.out_dim,
            "cond_dim": self.cond_dim,
            "hidden": list(self.hidden),
            "temb_dim": self.temb_dim,
        }

    @classmethod
    def from_spec(cls, spec: dict, rng: np.random.Generator) -> "VectorFieldNet":
        return cls(
            spec["state_dim"],
            spec["out_dim"],
            spec["cond_dim"],
            rng,
            hidden=tuple(spec["hidden"]),
            temb_dim=spec["temb_dim"],
        )


class SetEncoder(Module):
    """Point-set encoder: shared per-point dense layers, then max-pool.

    No input or feature transforms; the max over the point axis makes the
    embedding exactly invariant to point order and to duplicated points.
    """

    def __init__(self, feat_dim: int, rng: np.random.Generator, widths: tuple = (64, 64)):
        super().__init__()
        self.feat_dim = feat_dim
        self.widths = tuple(widths)
        self.out_dim = widths[-1]
        dims = [feat_dim, *widths]
        self.layers = []
        for i in range(len(dims) - 1):
            layer = Dense(dims[i], dims[i + 1], rng)
            self.layers.append(layer)
            self.params.extend(layer.params)

    def __call__(self, points) -> Tensor:
        x = points if isinstance(points, Tensor) else Tensor(points)
        if x.data.ndim < 2 or x.data.shape[-1] != self.feat_dim:
            raise ShapeMismatchError(
                f"expected points (..., m, {self.feat_dim}), got {x.data.shape}"
            )
        if x.data.shape[-2] == 0:
            raise EmptyInputError("cannot encode an empty point set")
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = x.silu()
        return x.max_over(axis=-2)

    def spec(self) -> dict:
        return {"kind": "set_encoder", "feat_dim": self.feat_dim, "widths": list(self.widths)}

    @classmethod
    def from_spec(cls, spec: dict, rng: np.random.Generator) -> "SetEncoder":
        return cls(spec["feat_dim"], rng, widths=tuple(spec["widths"]))
