"""2D embedding of future-motion latents.

Exact O(N^2) stochastic neighbor embedding (Gaussian input affinities
calibrated per point by bisection, Student-t output affinities, KL descent
with momentum and early exaggeration), an affine rescaling onto an m x m
heatmap grid, round-half-up quantization to grid cells, and a deterministic
out-of-sample transform (k-NN initialization plus local KL refinement
against the frozen reference set).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np


class DegenerateExtentError(ValueError):
    """All points identical along an axis: nothing to scale onto the grid."""


@dataclass(frozen=True)
class EmbeddingConfig:
    perplexity: float = 30.0
    iterations: int = 750
    exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    transform_neighbors: int = 5
    transform_steps: int = 50
    # conservative step size: the conditional-KL objective pushes inserted
    # points out of dense regions (its normalizer can never match a
    # concentrated affinity row), so damped steps keep the refinement local
    # to the k-NN initialization instead of converging to that biased optimum
    transform_lr: float = 0.02
    seed: int = 0


@dataclass
class Embedding2D:
    points: np.ndarray  # (N, 2) raw embedding coordinates
    reference_latents: np.ndarray  # (N, n) latents the fit was built from
    config: EmbeddingConfig
    kl_trace: list[float] = field(default_factory=list)
    # affine map to heatmap extent, set by scale_to_heatmap
    grid_size: int | None = None
    margin: float = 1.0
    offset: np.ndarray | None = None  # per-axis minimum of the raw points
    scale: np.ndarray | None = None  # per-axis multiplier

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def is_scaled(self) -> bool:
        return self.grid_size is not None

    def scale_point(self, raw: np.ndarray) -> np.ndarray:
        if not self.is_scaled:
            raise ValueError("embedding has no grid scaling; call scale_to_heatmap first")
        return self.margin + (np.asarray(raw, dtype=np.float64) - self.offset) * self.scale

    @property
    def scaled_points(self) -> np.ndarray:
        return self.scale_point(self.points)


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    sq = (x**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def _calibrated_row(d2_row: np.ndarray, perplexity: float) -> np.ndarray:
    """Gaussian affinities over one row, precision bisected to the target entropy."""
    target = np.log(perplexity)
    beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
    weights = np.exp(-d2_row)
    for _ in range(50):
        weights = np.exp(-d2_row * beta)
        total = weights.sum()
        if total <= 0.0:
            entropy = 0.0
        else:
            entropy = np.log(total) + beta * float((d2_row * weights).sum()) / total
        if abs(entropy - target) < 1e-5:
            break
        if entropy > target:
            beta_lo = beta
            beta = beta * 2.0 if np.isinf(beta_hi) else 0.5 * (beta + beta_hi)
        else:
            beta_hi = beta
            beta = beta / 2.0 if beta_lo == 0.0 else 0.5 * (beta + beta_lo)
    total = weights.sum()
    if total <= 0.0:
        out = np.full(d2_row.shape, 1.0 / d2_row.size)
    else:
        out = weights / total
    return out


def _input_affinities(latents: np.ndarray, perplexity: float) -> np.ndarray:
    n = latents.shape[0]
    d2 = _pairwise_sq_dists(latents)
    conditional = np.zeros((n, n))
    index = np.arange(n)
    for i in range(n):
        mask = index != i
        conditional[i, mask] = _calibrated_row(d2[i, mask], perplexity)
    joint = (conditional + conditional.T) / (2.0 * n)
    return np.maximum(joint, 1e-12)


def fit_embedding(latents: np.ndarray, config: EmbeddingConfig = EmbeddingConfig()) -> Embedding2D:
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 2 or latents.shape[0] < 2:
        raise ValueError("need at least 2 latent vectors")
    if not np.all(np.isfinite(latents)):
        raise ValueError("non-finite latents")
    n = latents.shape[0]
    if config.perplexity >= n:
        raise ValueError(f"perplexity {config.perplexity} must be below the point count {n}")

    p_joint = _input_affinities(latents, config.perplexity)
    rng = np.random.default_rng(config.seed)
    points = rng.normal(scale=1e-4, size=(n, 2))
    velocity = np.zeros_like(points)
    lr = n / 12.0
    trace: list[float] = []

    for it in range(config.iterations):
        d2 = _pairwise_sq_dists(points)
        kernel = 1.0 / (1.0 + d2)
        np.fill_diagonal(kernel, 0.0)
        q_joint = np.maximum(kernel / kernel.sum(), 1e-12)

        p_effective = p_joint * config.exaggeration if it < config.exaggeration_iters else p_joint
        pq = (p_effective - q_joint) * kernel
        grad = 4.0 * (np.diag(pq.sum(axis=1)) - pq) @ points

        trace.append(float((p_joint * np.log(p_joint / q_joint)).sum()))

        momentum = config.momentum_start if it < config.momentum_switch else config.momentum_final
        velocity = momentum * velocity - lr * grad
        points = points + velocity
        points = points - points.mean(axis=0)

    return Embedding2D(
        points=points,
        reference_latents=latents.copy(),
        config=config,
        kl_trace=trace,
    )


def scale_to_heatmap(embedding: Embedding2D, m: int, margin: float = 1.0) -> Embedding2D:
    if m < 2:
        raise ValueError("grid size must be at least 2")
    if 2.0 * margin >= m - 1:
        raise ValueError(f"margin {margin} leaves no extent on an {m}x{m} grid")
    mins = embedding.points.min(axis=0)
    maxs = embedding.points.max(axis=0)
    extent = maxs - mins
    if np.any(extent <= 1e-12):
        raise DegenerateExtentError(
            "embedding is degenerate: all points identical along an axis"
        )
    scale = (m - 1 - 2.0 * margin) / extent
    return replace(embedding, grid_size=m, margin=float(margin), offset=mins, scale=scale)


def quantize(embedding: Embedding2D, point: np.ndarray) -> tuple[int, int]:
    """Round-half-up per axis, clamped onto the grid."""
    if not embedding.is_scaled:
        raise ValueError("embedding has no grid scaling; call scale_to_heatmap first")
    m = embedding.grid_size
    cell = np.floor(np.asarray(point, dtype=np.float64) + 0.5).astype(int)
    cell = np.clip(cell, 0, m - 1)
    return int(cell[0]), int(cell[1])


def fitted_cells(embedding: Embedding2D) -> list[tuple[int, int]]:
    return [quantize(embedding, p) for p in embedding.scaled_points]


def transform_new(
    embedding: Embedding2D,
    latent: np.ndarray,
    exact_duplicates: bool = True,
) -> np.ndarray:
    """Map a new latent into scaled heatmap coordinates.

    Initialization is the inverse-distance-weighted mean of the k nearest
    reference latents' raw positions, refined by gradient descent on the new
    point's KL terms with the reference set fixed. A latent bit-equal to a
    reference returns that reference's fitted position directly (so futures
    the embedding was fitted on always land in their own cell); pass
    exact_duplicates=False to exercise the approximate path.
    """
    if embedding.count == 0:
        raise ValueError("empty reference set")
    latent = np.asarray(latent, dtype=np.float64)
    refs = embedding.reference_latents
    if latent.shape != (refs.shape[1],):
        raise ValueError(f"latent must have shape ({refs.shape[1]},), got {latent.shape}")
    if exact_duplicates:
        hits = np.nonzero((refs == latent).all(axis=1))[0]
        if hits.size:
            return embedding.scale_point(embedding.points[hits[0]])

    cfg = embedding.config
    d2 = ((refs - latent) ** 2).sum(axis=1)
    k = min(cfg.transform_neighbors, embedding.count)
    nearest = np.argsort(d2, kind="stable")[:k]
    weights = 1.0 / (np.sqrt(d2[nearest]) + 1e-12)
    point = (weights[:, None] * embedding.points[nearest]).sum(axis=0) / weights.sum()

    affinity = _calibrated_row(d2, perplexity=float(k))
    for _ in range(cfg.transform_steps):
        diff = point[None, :] - embedding.points
        kernel = 1.0 / (1.0 + (diff**2).sum(axis=1))
        q = np.maximum(kernel / kernel.sum(), 1e-12)
        grad = 2.0 * (((affinity - q) * kernel)[:, None] * diff).sum(axis=0)
        point = point - cfg.transform_lr * grad

    return embedding.scale_point(point)


def export_density(embedding: Embedding2D, group_labels: list[str]) -> str:
    """Tab-separated (x, y, group) table of the scaled points."""
    if len(group_labels) != embedding.count:
        raise ValueError(
            f"{len(group_labels)} labels for {embedding.count} points"
        )
    points = embedding.scaled_points if embedding.is_scaled else embedding.points
    lines = ["x\ty\tgroup"]
    for (x, y), label in zip(points, group_labels):
        lines.append(f"{x:.6f}\t{y:.6f}\t{label}")
    return "\n".join(lines) + "\n"


def embedding_to_arrays(embedding: Embedding2D) -> tuple[dict[str, np.ndarray], dict]:
    """Split an embedding into checkpointable arrays + JSON-able metadata."""
    arrays = {
        "embedding.points": embedding.points,
        "embedding.reference_latents": embedding.reference_latents,
    }
    meta = {
        "config": asdict(embedding.config),
        "kl_trace": embedding.kl_trace,
        "grid_size": embedding.grid_size,
        "margin": embedding.margin,
    }
    if embedding.is_scaled:
        arrays["embedding.offset"] = embedding.offset
        arrays["embedding.scale"] = embedding.scale
    return arrays, meta


def embedding_from_arrays(arrays: dict[str, np.ndarray], meta: dict) -> Embedding2D:
    embedding = Embedding2D(
        points=arrays["embedding.points"],
        reference_latents=arrays["embedding.reference_latents"],
        config=EmbeddingConfig(**meta["config"]),
        kl_trace=list(meta["kl_trace"]),
        grid_size=meta["grid_size"],
        margin=meta["margin"],
    )
    if embedding.grid_size is not None:
        embedding.offset = arrays["embedding.offset"]
        embedding.scale = arrays["embedding.scale"]
    return embedding
