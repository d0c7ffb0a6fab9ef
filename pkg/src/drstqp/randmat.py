"""Seeded sampling of GOE and Wishart ensembles and exponential vertex weights.

Randomness flows from :class:`RngSpec` ``(seed, stream)`` pairs.  Each pair
is expanded by numpy's ``SeedSequence`` into a PCG64 bit generator, whose
64-bit output and ``random()`` double conversion are fully specified and
platform independent.  Normal variates are produced from those uniforms by the
Box-Muller transform (not numpy's ziggurat), exponential variates by
inversion.  Identical ``(seed, stream)`` therefore gives identical samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from .errors import DomainError
from .symlin import as_sym, svec_batch, sym_from_json, sym_to_json


@dataclass(frozen=True)
class RngSpec:
    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream < 0:
            raise DomainError("seed and stream must be nonnegative")

    def stream_rng(self) -> "Stream":
        return Stream(self)

    def child(self, *keys: int) -> "RngSpec":
        """Derive an independent stream id from this one and integer keys."""
        ss = np.random.SeedSequence([self.seed, self.stream, *keys])
        return RngSpec(self.seed, int(ss.generate_state(1, dtype=np.uint64)[0]))


class Stream:
    """Sequential random source for one :class:`RngSpec`."""

    def __init__(self, spec: RngSpec):
        self.spec = spec
        ss = np.random.SeedSequence([spec.seed, spec.stream])
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def uniform(self, size) -> np.ndarray:
        """Uniforms on [0, 1)."""
        return self._gen.random(size)

    def normal(self, size) -> np.ndarray:
        shape = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
        k = int(np.prod(shape))
        half = (k + 1) // 2
        u1 = 1.0 - self.uniform(half)  # (0, 1]
        u2 = self.uniform(half)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * half)
        z[0::2] = r * np.cos(2.0 * math.pi * u2)
        z[1::2] = r * np.sin(2.0 * math.pi * u2)
        return z[:k].reshape(shape)

    def exponential(self, rate: float, size) -> np.ndarray:
        return -np.log1p(-self.uniform(size)) / rate

    def dirichlet_ones(self, n: int, count: int) -> np.ndarray:
        """``count`` points uniform on the simplex (normalized exponentials)."""
        e = self.exponential(1.0, (count, n))
        return e / e.sum(axis=1, keepdims=True)


RngLike = Union[RngSpec, Stream]


def as_stream(rng: RngLike) -> Stream:
    return rng if isinstance(rng, Stream) else rng.stream_rng()


def sample_goe_batch(n: int, count: int, rng: RngLike) -> np.ndarray:
    """``count`` GOE(n) matrices: diagonal N(0, 2), strict upper N(0, 1)."""
    if n < 1 or count < 1:
        raise DomainError("n and count must be >= 1")
    z = as_stream(rng).normal((count, n, n))
    G = np.triu(z, k=1)
    G = G + np.swapaxes(G, 1, 2)
    idx = np.arange(n)
    G[:, idx, idx] = math.sqrt(2.0) * z[:, idx, idx]
    return G


def sample_goe(n: int, rng: RngLike) -> np.ndarray:
    return sample_goe_batch(n, 1, rng)[0]


def sample_wishart_batch(n: int, k: int, count: int, rng: RngLike) -> np.ndarray:
    """``count`` draws of ``Y Y^T`` with ``Y`` an n-by-k standard normal matrix."""
    if n < 1 or k < 1 or count < 1:
        raise DomainError("n, k and count must be >= 1")
    Y = as_stream(rng).normal((count, n, k))
    W = Y @ np.swapaxes(Y, 1, 2)
    return 0.5 * (W + np.swapaxes(W, 1, 2))


def sample_wishart(n: int, k: int, rng: RngLike) -> np.ndarray:
    return sample_wishart_batch(n, k, 1, rng)[0]


def sample_exp_weights(n: int, rate: float, rng: RngLike) -> np.ndarray:
    """Vertex weights ``1 + Exp(rate)``; all strictly greater than one."""
    if rate <= 0:
        raise DomainError("rate must be positive")
    z = as_stream(rng).exponential(rate, n)
    return 1.0 + z


# -- ensembles


@dataclass(frozen=True)
class EnsembleModel:
    """Tag describing how samples were produced.

    ``kind`` is ``"goe"``, ``"wishart"`` or ``"shifted"``; a shifted model
    holds ``base + scale * inner`` samples.
    """

    kind: str
    n: int
    k: int | None = None
    scale: float | None = None
    base: np.ndarray | None = field(default=None, compare=False)
    inner: "EnsembleModel | None" = None

    def to_json(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind, "n": self.n}
        if self.k is not None:
            out["k"] = self.k
        if self.kind == "shifted":
            out["scale"] = self.scale
            out["base"] = sym_to_json(self.base)
            out["inner"] = self.inner.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "EnsembleModel":
        if obj["kind"] == "shifted":
            return cls(
                "shifted",
                int(obj["n"]),
                scale=float(obj["scale"]),
                base=sym_from_json(obj["base"]),
                inner=cls.from_json(obj["inner"]),
            )
        return cls(obj["kind"], int(obj["n"]), k=obj.get("k"))


def goe_model(n: int) -> EnsembleModel:
    return EnsembleModel("goe", n)


def wishart_model(n: int, k: int) -> EnsembleModel:
    return EnsembleModel("wishart", n, k=k)


def shifted_model(base: Any, scale: float, inner: EnsembleModel) -> EnsembleModel:
    base = as_sym(base)
    if base.shape[0] != inner.n:
        raise DomainError("base and inner model dimensions differ")
    return EnsembleModel("shifted", inner.n, scale=float(scale), base=base, inner=inner)


def _draw(model: EnsembleModel, count: int, stream: Stream) -> np.ndarray:
    if model.kind == "goe":
        return sample_goe_batch(model.n, count, stream)
    if model.kind == "wishart":
        return sample_wishart_batch(model.n, model.k, count, stream)
    if model.kind == "shifted":
        return model.base[None, :, :] + model.scale * _draw(model.inner, count, stream)
    raise DomainError(f"unknown model kind {model.kind!r}")


@dataclass(frozen=True)
class EmpiricalEnsemble:
    samples: np.ndarray  # (N, n, n)
    seed: int | None = None
    model: EnsembleModel | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 2:
            s = s[None]
        if s.ndim != 3 or s.shape[0] < 1 or s.shape[1] != s.shape[2]:
            raise DomainError("ensemble needs N >= 1 square samples of common dimension")
        s = 0.5 * (s + np.swapaxes(s, 1, 2))
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    def svecs(self) -> np.ndarray:
        return svec_batch(self.samples)

    def to_json(self) -> dict:
        return {
            "model": None if self.model is None else self.model.to_json(),
            "seed": self.seed,
            "samples": [sym_to_json(S) for S in self.samples],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EmpiricalEnsemble":
        model = None if obj.get("model") is None else EnsembleModel.from_json(obj["model"])
        samples = np.stack([sym_from_json(S) for S in obj["samples"]])
        return cls(samples, obj.get("seed"), model)


def sample_ensemble(model: EnsembleModel, N: int, rng: RngSpec) -> EmpiricalEnsemble:
    if N < 1:
        raise DomainError("N must be >= 1")
    return EmpiricalEnsemble(_draw(model, N, rng.stream_rng()), rng.seed, model)


def sample_mean(ens: EmpiricalEnsemble | np.ndarray) -> np.ndarray:
    samples = ens.samples if isinstance(ens, EmpiricalEnsemble) else np.asarray(ens, dtype=float)
    if samples.ndim != 3 or samples.shape[0] < 1:
        raise DomainError("need at least one sample")
    return samples.mean(axis=0)
