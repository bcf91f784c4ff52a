"""Feature generation for the injected node.

The elite node's F feature values are treated as F scalar samples and fitted
with a univariate KDE (gaussian, tophat, or epanechnikov kernel; Scott's
rule bandwidth with a 0.1 fallback for constant features). Sampling the KDE
F times gives the preliminary feature vector, which is refined into a
3d-length context

    z_msd = r_elite (+) r_mean (+) relu(z_m @ theta1)

where r_elite and r_mean are surrogate hidden embeddings of the elite node
and of the other members of one randomly chosen elite hyperedge. A trainable
affine head (W: 3d x F, b: F) maps the context to feature space, clamped to
[0, column max] so injected features stay inside the observed range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RefinementError
from .hgnn import SurrogateParams, hidden_embeddings
from .hypergraph import Hypergraph

KERNELS = ("gaussian", "tophat", "epanechnikov")

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass
class KdeModel:
    kernel: str
    bandwidth: float
    points: np.ndarray

    def density(self, x) -> np.ndarray:
        """Mixture density evaluated at ``x`` (scalar or array)."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        u = (x[:, None] - self.points[None, :]) / self.bandwidth
        if self.kernel == "gaussian":
            k = np.exp(-0.5 * u * u) / _SQRT_2PI
        elif self.kernel == "tophat":
            k = 0.5 * (np.abs(u) <= 1.0)
        else:
            k = 0.75 * np.maximum(1.0 - u * u, 0.0)
        return k.sum(axis=1) / (len(self.points) * self.bandwidth)


def fit_kde(
    z_elite: np.ndarray, kernel: str = "gaussian", bandwidth: float | str = "scott"
) -> KdeModel:
    """Fit the univariate KDE over the entries of ``z_elite``.

    ``bandwidth`` is either the string "scott" (h = sample std * F^(-1/5),
    falling back to 0.1 when the std is zero or undefined) or an explicit
    positive float.
    """
    if kernel not in KERNELS:
        raise ConfigError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    points = np.asarray(z_elite, dtype=np.float64).ravel()
    if len(points) < 1:
        raise ConfigError("cannot fit a KDE to an empty feature vector")

    if bandwidth == "scott":
        sigma = float(np.std(points, ddof=1)) if len(points) > 1 else 0.0
        h = sigma * len(points) ** (-0.2) if sigma > 0.0 else 0.1
    else:
        h = float(bandwidth)
        if h <= 0.0:
            raise ConfigError(f"bandwidth must be positive, got {h}")
    return KdeModel(kernel, h, points)


def sample_preliminary(kde: KdeModel, rng: np.random.Generator) -> np.ndarray:
    """Draw F = len(points) independent KDE samples.

    Each draw picks a data point uniformly and adds h * eps, with eps from
    the kernel: standard normal (gaussian), uniform on [-1, 1] (tophat), or
    the Epanechnikov law via its inverse CDF 2*sin(arcsin(2u - 1)/3).
    """
    f = len(kde.points)
    idx = rng.integers(0, f, size=f)
    if kde.kernel == "gaussian":
        eps = rng.standard_normal(f)
    elif kde.kernel == "tophat":
        eps = rng.uniform(-1.0, 1.0, size=f)
    else:
        u = rng.uniform(0.0, 1.0, size=f)
        eps = 2.0 * np.sin(np.arcsin(2.0 * u - 1.0) / 3.0)
    return kde.points[idx] + kde.bandwidth * eps


@dataclass
class RefinementContext:
    """Inputs assembled for the generator head.

    ``z_msd`` is the concatenation r_elite (+) r_mean (+) z_ms divided by
    ``scale``, where scale brings the vector to unit RMS. The division keeps
    fixed-step gradient descent on the head stable regardless of how large
    the surrogate's embeddings happen to be; multiplying back by ``scale``
    recovers the raw concatenation exactly.
    """

    z_m: np.ndarray
    elite_edge: int
    t: int
    r_elite: np.ndarray
    r_mean: np.ndarray
    z_ms: np.ndarray
    z_msd: np.ndarray
    scale: float


def refine(
    z_m: np.ndarray,
    params: SurrogateParams,
    adjacency: np.ndarray,
    features: np.ndarray,
    h: Hypergraph,
    sel,
    rng: np.random.Generator,
) -> RefinementContext:
    """Assemble the 3d refinement context for the generator head.

    One elite hyperedge is drawn uniformly with ``rng``; r_mean averages the
    hidden embeddings of its members other than the elite node itself, so a
    size-1 membership (no other members) is a refinement error.
    """
    if len(sel.elite_hyperedges) == 0:
        raise RefinementError("no elite hyperedges to refine against")
    edge = int(sel.elite_hyperedges[rng.integers(0, len(sel.elite_hyperedges))])
    members = h.hyperedge_members(edge)
    others = members[members != sel.elite_node]
    if len(others) == 0:
        raise RefinementError(
            f"elite hyperedge {edge} has no members besides the elite node"
        )

    hidden = hidden_embeddings(adjacency, features, params)
    r_elite = hidden[sel.elite_node].copy()
    r_mean = hidden[others].mean(axis=0)
    z_ms = np.maximum(np.asarray(z_m, dtype=np.float64) @ params.theta1, 0.0)
    raw = np.concatenate([r_elite, r_mean, z_ms])
    norm = float(np.linalg.norm(raw))
    scale = norm / np.sqrt(len(raw)) if norm > 0.0 else 1.0
    return RefinementContext(
        z_m=np.asarray(z_m, dtype=np.float64),
        elite_edge=edge,
        t=len(members),
        r_elite=r_elite,
        r_mean=r_mean,
        z_ms=z_ms,
        z_msd=raw / scale,
        scale=scale,
    )


@dataclass
class GeneratorNet:
    """Trainable affine head: weight (3d, F) and bias (F,)."""

    weight: np.ndarray
    bias: np.ndarray

    def affine(self, z_msd: np.ndarray) -> np.ndarray:
        return z_msd @ self.weight + self.bias

    def copy(self) -> "GeneratorNet":
        return GeneratorNet(self.weight.copy(), self.bias.copy())


def init_generator(
    hidden_dim: int, num_features: int, rng: np.random.Generator
) -> GeneratorNet:
    """Uniform(-1/sqrt(3d), 1/sqrt(3d)) weight, zero bias."""
    bound = 1.0 / np.sqrt(3 * hidden_dim)
    weight = rng.uniform(-bound, bound, size=(3 * hidden_dim, num_features))
    return GeneratorNet(weight, np.zeros(num_features))


def feature_bounds(features: np.ndarray) -> np.ndarray:
    """Per-column clamp ceiling: the observed column-wise maximum."""
    return np.asarray(features, dtype=np.float64).max(axis=0)


def generate(
    net: GeneratorNet, ctx: RefinementContext, bounds: np.ndarray
) -> np.ndarray:
    """Injected feature row: affine map of z_msd clamped to [0, bounds]."""
    return np.clip(net.affine(ctx.z_msd), 0.0, bounds)


def binarize_features(z: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Post-hoc projection to {0, 1} for bag-of-words feature spaces."""
    return (np.asarray(z, dtype=np.float64) > threshold).astype(np.float64)
